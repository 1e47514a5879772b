#include "defcast/opponents.hpp"

#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "defcast/errors.hpp"

namespace defcast {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

std::optional<std::uint64_t> opt_seed(const nlohmann::json& j) {
  if (!j.contains("seed") || j.at("seed").is_null()) return std::nullopt;
  return j.at("seed").get<std::uint64_t>();
}

void put_seed(nlohmann::json& j, const std::optional<std::uint64_t>& seed) {
  if (seed) j["seed"] = *seed;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::uint64_t require_seed(const std::optional<std::uint64_t>& seed) {
  if (!seed) throw ConfigError("opponent seed not resolved");
  return *seed;
}

class IidUniformSource final : public DataSource {
 public:
  IidUniformSource(std::size_t k, std::uint64_t seed) : k_(k), rng_(seed) {}
  std::vector<double> next(std::size_t n) override {
    std::vector<double> x(k_);
    for (std::size_t j = 0; j < k_; ++j) x[j] = rng_.uniform(j, n);
    return x;
  }
  std::size_t dimension() const override { return k_; }

 private:
  std::size_t k_;
  CounterRng rng_;
};

class ParitySource final : public DataSource {
 public:
  std::vector<double> next(std::size_t n) override { return parity_feature_move(n); }
  std::size_t dimension() const override { return 1; }
};

class ReplayDataSource final : public DataSource {
 public:
  explicit ReplayDataSource(std::vector<ReplayRow> rows) : rows_(std::move(rows)) {}
  std::vector<double> next(std::size_t n) override {
    if (n == 0 || n > rows_.size()) throw InputError("replay data exhausted at round " + std::to_string(n));
    return rows_[n - 1].x;
  }
  std::optional<std::size_t> length() const override { return rows_.size(); }
  std::size_t dimension() const override { return rows_.empty() ? 0 : rows_.front().x.size(); }

 private:
  std::vector<ReplayRow> rows_;
};

class BernoulliSource final : public OutcomeSource {
 public:
  BernoulliSource(double theta, std::uint64_t seed) : theta_(theta), rng_(seed) {}
  int next(std::size_t n, std::span<const Round>, std::span<const double>, double) override {
    return bernoulli_move(theta_, rng_, n);
  }

 private:
  double theta_;
  CounterRng rng_;
};

class LogisticSource final : public OutcomeSource {
 public:
  explicit LogisticSource(LogisticOutcomes spec) : spec_(std::move(spec)), rng_(require_seed(spec_.seed)) {}
  int next(std::size_t n, std::span<const Round>, std::span<const double> x, double) override {
    if (spec_.weights.size() > x.size())
      throw ConfigError("logistic opponent has more weights than data coordinates");
    double z = spec_.bias + spec_.parity_weight * static_cast<double>(n % 2);
    for (std::size_t i = 0; i < spec_.weights.size(); ++i) z += spec_.weights[i] * x[i];
    const double prob = 1.0 / (1.0 + std::exp(-z));
    return bernoulli_move(prob, rng_, n);
  }

 private:
  LogisticOutcomes spec_;
  CounterRng rng_;
};

class ReplayOutcomeSource final : public OutcomeSource {
 public:
  explicit ReplayOutcomeSource(std::vector<ReplayRow> rows) : rows_(std::move(rows)) {}
  int next(std::size_t n, std::span<const Round>, std::span<const double>, double) override {
    if (n == 0 || n > rows_.size())
      throw InputError("replay outcomes exhausted at round " + std::to_string(n));
    return rows_[n - 1].y;
  }
  std::optional<std::size_t> length() const override { return rows_.size(); }

 private:
  std::vector<ReplayRow> rows_;
};

class AdversarySource final : public OutcomeSource {
 public:
  explicit AdversarySource(KernelSpec kernel) : kernel_(std::move(kernel)) {}
  int next(std::size_t, std::span<const Round> history, std::span<const double> x, double p) override {
    return reality2_adversary_move(history, p, x, kernel_);
  }

 private:
  KernelSpec kernel_;
};

}  // namespace

OpponentSpec OpponentSpec::resolved(std::uint64_t run_seed) const {
  const CounterRng rng(run_seed);
  OpponentSpec out = *this;
  std::visit(overloaded{
                 [&](IidUniformData& d) { if (!d.seed) d.seed = rng.split(1); },
                 [&](ParityFeatureData& d) { if (!d.seed) d.seed = rng.split(1); },
                 [](ReplayData&) {},
             },
             out.reality1);
  std::visit(overloaded{
                 [&](BernoulliOutcomes& o) { if (!o.seed) o.seed = rng.split(2); },
                 [&](LogisticOutcomes& o) { if (!o.seed) o.seed = rng.split(2); },
                 [](auto&) {},
             },
             out.reality2);
  return out;
}

std::optional<std::size_t> OpponentSpec::data_dimension() const {
  return std::visit(overloaded{
                        [](const IidUniformData& d) { return std::optional<std::size_t>(d.k); },
                        [](const ParityFeatureData&) { return std::optional<std::size_t>(1); },
                        [](const ReplayData&) { return std::optional<std::size_t>(); },
                    },
                    reality1);
}

void OpponentSpec::set_replay_header(bool header) {
  if (auto* r = std::get_if<ReplayData>(&reality1)) r->header = header;
  if (auto* r = std::get_if<ReplayOutcomes>(&reality2)) r->header = header;
}

void to_json(nlohmann::json& j, const OpponentSpec& spec) {
  nlohmann::json r1;
  std::visit(overloaded{
                 [&](const IidUniformData& d) {
                   r1 = {{"kind", "iid_uniform"}, {"k", d.k}};
                   put_seed(r1, d.seed);
                 },
                 [&](const ParityFeatureData& d) {
                   r1 = {{"kind", "parity_feature"}};
                   put_seed(r1, d.seed);
                 },
                 [&](const ReplayData& d) {
                   r1 = {{"kind", "replay"}, {"path", d.path}, {"header", d.header}};
                 },
             },
             spec.reality1);
  nlohmann::json r2;
  std::visit(overloaded{
                 [&](const BernoulliOutcomes& o) {
                   r2 = {{"kind", "bernoulli"}, {"theta", o.theta}};
                   put_seed(r2, o.seed);
                 },
                 [&](const LogisticOutcomes& o) {
                   r2 = {{"kind", "logistic"},
                         {"weights", o.weights},
                         {"bias", o.bias},
                         {"parity_weight", o.parity_weight}};
                   put_seed(r2, o.seed);
                 },
                 [&](const ReplayOutcomes& o) {
                   r2 = {{"kind", "replay"}, {"path", o.path}, {"header", o.header}};
                 },
                 [&](const AdversaryOutcomes&) { r2 = {{"kind", "adversary"}}; },
             },
             spec.reality2);
  j = {{"reality1", r1}, {"reality2", r2}};
}

void from_json(const nlohmann::json& j, OpponentSpec& spec) {
  try {
    const auto& r1 = j.at("reality1");
    const auto k1 = r1.at("kind").get<std::string>();
    if (k1 == "iid_uniform") {
      spec.reality1 = IidUniformData{r1.value("k", std::size_t{1}), opt_seed(r1)};
    } else if (k1 == "parity_feature") {
      spec.reality1 = ParityFeatureData{opt_seed(r1)};
    } else if (k1 == "replay") {
      spec.reality1 = ReplayData{r1.at("path").get<std::string>(), r1.value("header", false)};
    } else {
      throw ConfigError("unknown reality1 kind '" + k1 + "'");
    }

    const auto& r2 = j.at("reality2");
    const auto k2 = r2.at("kind").get<std::string>();
    if (k2 == "bernoulli") {
      const double theta = r2.at("theta").get<double>();
      if (!(theta >= 0.0 && theta <= 1.0)) throw ConfigError("bernoulli theta must lie in [0,1]");
      spec.reality2 = BernoulliOutcomes{theta, opt_seed(r2)};
    } else if (k2 == "logistic") {
      spec.reality2 = LogisticOutcomes{r2.value("weights", std::vector<double>{}), r2.value("bias", 0.0),
                                       r2.value("parity_weight", 0.0), opt_seed(r2)};
    } else if (k2 == "replay") {
      spec.reality2 = ReplayOutcomes{r2.at("path").get<std::string>(), r2.value("header", false)};
    } else if (k2 == "adversary") {
      spec.reality2 = AdversaryOutcomes{};
    } else {
      throw ConfigError("unknown reality2 kind '" + k2 + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed opponent descriptor: ") + e.what());
  }
}

int reality2_adversary_move(std::span<const Round> history, double p_new, std::span<const double> x_new,
                            const KernelSpec& kernel) {
  const PointRef z(p_new, x_new);
  double t = 0.0;
  for (const auto& r : history) t += eval(kernel, z, r.point()) * r.error();
  const double kd = eval(kernel, z, z);
  const double up = 2.0 * (1.0 - p_new) * t + (1.0 - p_new) * (1.0 - p_new) * kd;
  const double down = -2.0 * p_new * t + p_new * p_new * kd;
  return up >= down ? 1 : 0;
}

int bernoulli_move(double theta, const CounterRng& rng, std::uint64_t counter) {
  return rng.uniform(0, counter) < theta ? 1 : 0;
}

std::vector<double> parity_feature_move(std::size_t n) {
  return {static_cast<double>(n % 2)};
}

std::vector<ReplayRow> parse_replay(std::istream& in, bool header, const std::string& name) {
  std::vector<ReplayRow> rows;
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> width;
  auto fail = [&](const std::string& what) {
    throw InputError(name + ":" + std::to_string(lineno) + ": " + what);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (header && lineno == 1) continue;
    if (trim(line).empty()) continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string t = trim(cell);
      if (t.empty()) fail("empty cell");
      char* end = nullptr;
      errno = 0;
      const double v = std::strtod(t.c_str(), &end);
      if (end != t.c_str() + t.size() || errno == ERANGE || !std::isfinite(v))
        fail("cannot parse '" + t + "' as a number");
      cells.push_back(v);
    }
    if (trim(line).back() == ',') fail("trailing comma");
    if (cells.empty()) fail("no columns");
    if (width && *width != cells.size())
      fail("expected " + std::to_string(*width) + " columns, got " + std::to_string(cells.size()));
    width = cells.size();
    const double y = cells.back();
    if (y != 0.0 && y != 1.0) fail("outcome must be 0 or 1");
    cells.pop_back();
    rows.push_back({std::move(cells), static_cast<int>(y)});
  }
  return rows;
}

std::vector<ReplayRow> replay_source(const std::string& path, bool header) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open replay file '" + path + "'");
  return parse_replay(in, header, path);
}

std::unique_ptr<DataSource> make_data_source(const RealityOneSpec& spec) {
  return std::visit(overloaded{
                        [](const IidUniformData& d) -> std::unique_ptr<DataSource> {
                          return std::make_unique<IidUniformSource>(d.k, require_seed(d.seed));
                        },
                        [](const ParityFeatureData&) -> std::unique_ptr<DataSource> {
                          return std::make_unique<ParitySource>();
                        },
                        [](const ReplayData& d) -> std::unique_ptr<DataSource> {
                          return std::make_unique<ReplayDataSource>(replay_source(d.path, d.header));
                        },
                    },
                    spec);
}

std::unique_ptr<OutcomeSource> make_outcome_source(const RealityTwoSpec& spec, const KernelSpec& kernel) {
  return std::visit(overloaded{
                        [](const BernoulliOutcomes& o) -> std::unique_ptr<OutcomeSource> {
                          return std::make_unique<BernoulliSource>(o.theta, require_seed(o.seed));
                        },
                        [](const LogisticOutcomes& o) -> std::unique_ptr<OutcomeSource> {
                          return std::make_unique<LogisticSource>(o);
                        },
                        [](const ReplayOutcomes& o) -> std::unique_ptr<OutcomeSource> {
                          return std::make_unique<ReplayOutcomeSource>(replay_source(o.path, o.header));
                        },
                        [&](const AdversaryOutcomes&) -> std::unique_ptr<OutcomeSource> {
                          return std::make_unique<AdversarySource>(kernel);
                        },
                    },
                    spec);
}

}  // namespace defcast
