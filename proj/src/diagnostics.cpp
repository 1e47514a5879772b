#include "defcast/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "defcast/errors.hpp"

namespace defcast {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

constexpr double kRoundingPerRound = 1e-9;

// Kernel evaluations over the logged points, validated once up front.
// k(i, j) is computed exactly as eval() computes it.
class LogGram {
 public:
  explicit LogGram(const RunLog& log) : kernel_(log.header.kernel), rounds_(log.rounds) {
    try {
      for (const auto& r : rounds_) {
        validate_point(kernel_, r.point());
        if (r.x.size() != rounds_.front().x.size()) throw DomainError("data dimension changes within the log");
      }
    } catch (const DomainError& e) {
      throw ConfigError(std::string("log does not fit its kernel: ") + e.what());
    }
  }

  std::size_t size() const { return rounds_.size(); }
  double k(std::size_t i, std::size_t j) const {
    return forecast_part(kernel_, rounds_[i].p, rounds_[j].p) * data_part(kernel_, rounds_[i].x, rounds_[j].x);
  }
  double e(std::size_t i) const { return rounds_[i].error(); }
  const Round& round(std::size_t i) const { return rounds_[i]; }

  // T_n = sum_{i<n} K(z_n, z_i) e_i
  double cross(std::size_t n) const {
    double t = 0.0;
    for (std::size_t i = 0; i < n; ++i) t += k(n, i) * e(i);
    return t;
  }

 private:
  const KernelSpec& kernel_;
  const std::vector<Round>& rounds_;
};

bool is_k29(const RunLog& log) { return log.header.algorithm == "K29"; }

// p(1-p) K(z,z) for K29* style logs, K(z,z) for K29.
double budget_term(const RunLog& log, const Round& r, double kd) {
  return is_k29(log) ? kd : r.p * (1.0 - r.p) * kd;
}

void finish(TheoremReport& rep) {
  if (rep.lower_bound)
    rep.satisfied = rep.lhs >= rep.rhs - rep.slack_budget - rep.rounding;
  else
    rep.satisfied = rep.lhs <= rep.rhs + rep.slack_budget + rep.rounding;
}

double n_of(const RunLog& log) { return static_cast<double>(log.rounds.size()); }

}  // namespace

double TheoremReport::min_margin() const {
  if (per_round_margins.empty()) return 0.0;
  return *std::min_element(per_round_margins.begin(), per_round_margins.end());
}

nlohmann::json TheoremReport::to_json() const {
  nlohmann::json j = {{"theorem", theorem_id},
                      {"lhs", lhs},
                      {"rhs", rhs},
                      {"slack_budget", slack_budget},
                      {"rounding", rounding},
                      {"direction", lower_bound ? "lhs >= rhs" : "lhs <= rhs"},
                      {"satisfied", satisfied},
                      {"vacuous", vacuous}};
  if (!per_round_margins.empty()) {
    const auto it = std::min_element(per_round_margins.begin(), per_round_margins.end());
    j["min_round_margin"] = *it;
    j["worst_round"] = static_cast<std::size_t>(it - per_round_margins.begin()) + 1;
  }
  for (const auto& [k, v] : extra.items()) j[k] = v;
  return j;
}

std::vector<double> drift_sq_prefixes(const RunLog& log) {
  const LogGram g(log);
  std::vector<double> out;
  out.reserve(g.size());
  double d = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double en = g.e(n);
    d += 2.0 * en * g.cross(n) + en * en * g.k(n, n);
    out.push_back(d);
  }
  return out;
}

double drift_sq(const RunLog& log) {
  const auto pre = drift_sq_prefixes(log);
  return pre.empty() ? 0.0 : pre.back();
}

double variance_budget(const RunLog& log) {
  const LogGram g(log);
  double v = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) v += g.round(n).p * (1.0 - g.round(n).p) * g.k(n, n);
  return v;
}

double diagonal_budget(const RunLog& log) {
  const LogGram g(log);
  double v = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) v += g.k(n, n);
  return v;
}

double residual_sum(const RunLog& log) {
  double s = 0.0;
  for (const auto& r : log.rounds) s += r.residual;
  return s;
}

TheoremReport check_theorem1(const RunLog& log) {
  const LogGram g(log);
  TheoremReport rep;
  rep.theorem_id = is_k29(log) ? "t1_k29" : "t1";
  double d = 0.0, budget = 0.0, res = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double en = g.e(n);
    const double kd = g.k(n, n);
    d += 2.0 * en * g.cross(n) + en * en * kd;
    budget += budget_term(log, g.round(n), kd);
    res += g.round(n).residual;
    rep.per_round_margins.push_back(budget + 2.0 * res + kRoundingPerRound * static_cast<double>(n + 1) - d);
  }
  rep.lhs = d;
  rep.rhs = budget;
  rep.slack_budget = 2.0 * res;
  rep.rounding = kRoundingPerRound * n_of(log);
  finish(rep);
  return rep;
}

TheoremReport check_eq4(const RunLog& log) {
  const double d = drift_sq(log);
  const double c_k = diag_sup(log.header.kernel);
  const double n = n_of(log);
  TheoremReport rep;
  rep.theorem_id = is_k29(log) ? "eq4_k29" : "eq4";
  rep.lhs = std::sqrt(std::max(0.0, d));
  rep.rhs = (is_k29(log) ? c_k : c_k / 2.0) * std::sqrt(n);
  // sqrt(budget + slack + rounding) <= sqrt(budget) + sqrt(slack) + sqrt(rounding)
  rep.slack_budget = std::sqrt(2.0 * residual_sum(log));
  rep.rounding = std::sqrt(kRoundingPerRound * n);
  rep.extra["c_K"] = c_k;
  finish(rep);
  return rep;
}

TheoremReport check_theorem3(const RunLog& log) {
  const LogGram g(log);
  TheoremReport rep;
  rep.theorem_id = "t3";
  rep.lower_bound = true;
  double d = 0.0, v = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const double en = g.e(n);
    const double kd = g.k(n, n);
    const double p = g.round(n).p;
    const double inc = 2.0 * en * g.cross(n) + en * en * kd;
    d += inc;
    v += p * (1.0 - p) * kd;
    rep.per_round_margins.push_back(inc - p * (1.0 - p) * kd);
  }
  rep.lhs = d;
  rep.rhs = v;
  rep.rounding = kRoundingPerRound * n_of(log);
  finish(rep);
  return rep;
}

TheoremReport check_lemma1(const RunLog& log) {
  const LogGram g(log);
  TheoremReport rep;
  rep.theorem_id = "lemma1";
  double worst = -std::numeric_limits<double>::infinity();
  double capital = 0.0, d = 0.0, v = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) {
    const auto& r = g.round(n);
    const double en = g.e(n);
    const double kd = g.k(n, n);
    const double t = g.cross(n);
    const double s = t + 0.5 * kd * (1.0 - 2.0 * r.p);
    const double inc = s * en;
    capital += inc;
    d += 2.0 * en * t + en * en * kd;
    v += r.p * (1.0 - r.p) * kd;
    worst = std::max(worst, inc - r.residual);
    rep.per_round_margins.push_back(r.residual + kRoundingPerRound - inc);
  }
  rep.lhs = g.size() ? worst : 0.0;
  rep.rhs = 0.0;
  rep.rounding = kRoundingPerRound;
  rep.extra["capital_change"] = capital;
  rep.extra["half_drift_minus_half_variance"] = 0.5 * d - 0.5 * v;
  finish(rep);
  return rep;
}

double test_function_sum(const RunLog& log, const TestFunction& f) {
  double s = 0.0;
  for (const auto& r : log.rounds) s += r.error() * f(r.point());
  return s;
}

TrapezoidFn::TrapezoidFn(double p_minus, double p_plus, double eps)
    : p_minus_(p_minus), p_plus_(p_plus), eps_(eps) {
  if (!(0.0 < p_minus - eps && p_minus - eps < p_minus + eps && p_minus + eps < p_plus - eps &&
        p_plus - eps < p_plus + eps && p_plus + eps < 1.0))
    throw ConfigError("trapezoid needs 0 < p- - eps < p- + eps < p+ - eps < p+ + eps < 1");
}

double TrapezoidFn::operator()(double t) const {
  if (p_minus_ + eps_ <= t && t <= p_plus_ - eps_) return 1.0;
  if (t <= p_minus_ - eps_ || t >= p_plus_ + eps_) return 0.0;
  if (t <= p_minus_ + eps_) return 0.5 + (t - p_minus_) / (2.0 * eps_);
  return 0.5 + (p_plus_ - t) / (2.0 * eps_);
}

double TrapezoidFn::fs_norm_sq() const {
  const double w = p_plus_ - p_minus_;
  return w * w + 1.0 / eps_;
}

double TrapezoidFn::fs_norm() const { return std::sqrt(fs_norm_sq()); }

double factor_value(const CoordinateFactor& f, double t) {
  return std::visit(overloaded{
                        [t](const TrapezoidFn& g) { return g(t); },
                        [](const ConstantOne&) { return 1.0; },
                        [t](const Identity&) { return t; },
                        [t](const Complement&) { return 1.0 - t; },
                    },
                    f);
}

double factor_fs_norm(const CoordinateFactor& f) {
  return std::visit(overloaded{
                        [](const TrapezoidFn& g) { return g.fs_norm(); },
                        [](const ConstantOne&) { return 1.0; },
                        [](const auto&) { return std::sqrt(1.25); },
                    },
                    f);
}

SoftNeighborhood::SoftNeighborhood(std::vector<CoordinateFactor> factors) : factors_(std::move(factors)) {
  if (factors_.empty()) factors_.emplace_back(ConstantOne{});
}

double SoftNeighborhood::operator()(PointRef z) const {
  if (factors_.size() > 1 + z.x.size()) throw ConfigError("neighborhood has more factors than coordinates");
  double v = factor_value(factors_[0], z.p);
  for (std::size_t j = 1; j < factors_.size(); ++j) v *= factor_value(factors_[j], z.x[j - 1]);
  return v;
}

double SoftNeighborhood::fs_norm() const {
  double v = 1.0;
  for (const auto& f : factors_) v *= factor_fs_norm(f);
  return v;
}

namespace {

CoordinateFactor factor_from_json(const nlohmann::json& j) {
  if (j.is_array()) {
    if (j.size() != 3) throw ConfigError("trapezoid needs [p_minus, p_plus, eps]");
    return TrapezoidFn(j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>());
  }
  if (j.is_null()) return ConstantOne{};
  const auto s = j.get<std::string>();
  if (s == "one") return ConstantOne{};
  if (s == "identity") return Identity{};
  if (s == "complement") return Complement{};
  throw ConfigError("unknown neighborhood factor '" + s + "'");
}

}  // namespace

SoftNeighborhood neighborhood_from_json(const nlohmann::json& j) {
  try {
    if (j.is_array()) return SoftNeighborhood::calibration(std::get<TrapezoidFn>(factor_from_json(j)));
    std::vector<CoordinateFactor> fs;
    for (const auto& f : j.at("factors")) fs.push_back(factor_from_json(f));
    return SoftNeighborhood(std::move(fs));
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed neighborhood: ") + e.what());
  }
}

std::vector<SoftNeighborhood> neighborhoods_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw ConfigError("neighborhoods must be a JSON list");
  std::vector<SoftNeighborhood> out;
  for (const auto& e : j) out.push_back(neighborhood_from_json(e));
  return out;
}

WitnessFn::WitnessFn(KernelSpec kernel, std::vector<double> coefficients, std::vector<Point> anchors)
    : kernel_(std::move(kernel)), coefficients_(std::move(coefficients)), anchors_(std::move(anchors)) {
  if (coefficients_.size() != anchors_.size()) throw ContractError("witness needs one coefficient per anchor");
}

WitnessFn WitnessFn::from_log(const RunLog& log) {
  std::vector<double> c;
  std::vector<Point> a;
  for (const auto& r : log.rounds) {
    c.push_back(r.error());
    a.push_back(Point{r.p, r.x});
  }
  return WitnessFn(log.header.kernel, std::move(c), std::move(a));
}

double WitnessFn::operator()(PointRef z) const {
  double v = 0.0;
  for (std::size_t n = 0; n < anchors_.size(); ++n) v += coefficients_[n] * eval(kernel_, z, anchors_[n]);
  return v;
}

double WitnessFn::norm_sq() const {
  double off = 0.0, diag = 0.0;
  for (std::size_t i = 0; i < anchors_.size(); ++i) {
    diag += coefficients_[i] * coefficients_[i] * eval(kernel_, anchors_[i], anchors_[i]);
    for (std::size_t j = i + 1; j < anchors_.size(); ++j)
      off += coefficients_[i] * coefficients_[j] * eval(kernel_, anchors_[i], anchors_[j]);
  }
  return diag + 2.0 * off;
}

TheoremReport check_theorem2(const RunLog& log, const TestFunction& f, double f_norm) {
  if (!(f_norm >= 0.0)) throw ContractError("test-function norm must be nonnegative");
  const LogGram g(log);
  double budget = 0.0;
  for (std::size_t n = 0; n < g.size(); ++n) budget += budget_term(log, g.round(n), g.k(n, n));
  TheoremReport rep;
  rep.theorem_id = "t2";
  rep.lhs = std::fabs(test_function_sum(log, f));
  rep.rhs = f_norm * std::sqrt(budget);
  rep.slack_budget = f_norm * std::sqrt(2.0 * residual_sum(log));
  rep.rounding = f_norm * std::sqrt(kRoundingPerRound * n_of(log));
  const double c_k = diag_sup(log.header.kernel);
  rep.extra["f_norm"] = f_norm;
  rep.extra["rhs_eq12"] = (is_k29(log) ? c_k : c_k / 2.0) * f_norm * std::sqrt(n_of(log));
  finish(rep);
  return rep;
}

std::pair<WitnessFn, TheoremReport> theorem4_witness(const RunLog& log) {
  if (log.rounds.empty()) throw ContractError("witness needs a nonempty log");
  const double d = drift_sq(log);
  const double v = variance_budget(log);
  TheoremReport rep;
  rep.theorem_id = "t4";
  rep.lower_bound = true;
  rep.rounding = kRoundingPerRound * n_of(log);
  if (d > 0.0) {
    rep.lhs = d;
    rep.rhs = std::sqrt(d) * std::sqrt(v);
    finish(rep);
    return {WitnessFn::from_log(log), rep};
  }
  // f = 0: any nonzero function will do; use the representer of the first point.
  const Round& first = log.rounds.front();
  WitnessFn f(log.header.kernel, {1.0}, {Point{first.p, first.x}});
  rep.vacuous = true;
  rep.lhs = test_function_sum(log, [&f](PointRef z) { return f(z); });
  rep.rhs = std::sqrt(f.norm_sq()) * std::sqrt(v);
  finish(rep);
  return {std::move(f), rep};
}

std::size_t bin_index(double p, std::size_t bins) {
  if (bins == 0) throw ContractError("need at least one bin");
  const double b = static_cast<double>(bins);
  auto idx = static_cast<std::ptrdiff_t>(std::ceil(p * b)) - 1;
  idx = std::clamp<std::ptrdiff_t>(idx, 0, static_cast<std::ptrdiff_t>(bins) - 1);
  while (idx > 0 && p <= static_cast<double>(idx) / b) --idx;
  while (idx + 1 < static_cast<std::ptrdiff_t>(bins) && p > static_cast<double>(idx + 1) / b) ++idx;
  return static_cast<std::size_t>(idx);
}

std::vector<BinRow> binned_calibration(const RunLog& log, std::size_t bins) {
  if (bins == 0) throw ConfigError("bins must be at least 1");
  std::vector<BinRow> rows(bins);
  std::vector<double> sum_p(bins, 0.0), sum_y(bins, 0.0), sum_e(bins, 0.0);
  for (std::size_t i = 0; i < bins; ++i) {
    rows[i].bin = i;
    rows[i].lower = static_cast<double>(i) / static_cast<double>(bins);
    rows[i].upper = static_cast<double>(i + 1) / static_cast<double>(bins);
  }
  for (const auto& r : log.rounds) {
    const auto i = bin_index(r.p, bins);
    ++rows[i].count;
    sum_p[i] += r.p;
    sum_y[i] += r.y;
    sum_e[i] += r.error();
  }
  for (std::size_t i = 0; i < bins; ++i) {
    if (rows[i].count == 0) continue;
    const double c = static_cast<double>(rows[i].count);
    rows[i].mean_p = sum_p[i] / c;
    rows[i].mean_y = sum_y[i] / c;
    rows[i].deviation = sum_e[i] / c;
  }
  return rows;
}

std::vector<SoftRow> soft_calibration_report(const RunLog& log, const std::vector<SoftNeighborhood>& neighborhoods) {
  std::vector<SoftRow> rows;
  if (log.rounds.empty()) return rows;
  const double n = n_of(log);
  const double d = 1.0 + static_cast<double>(log.rounds.front().x.size());
  const double c_fs = std::pow(4.0 / 3.0, d / 2.0);
  for (const auto& nb : neighborhoods) {
    SoftRow row;
    for (const auto& r : log.rounds) {
      const double w = nb(r.point());
      row.numerator += w * r.error();
      row.denominator += w;
    }
    if (row.denominator > 0.0) row.ratio = row.numerator / row.denominator;
    row.bound = 0.5 * c_fs * nb.fs_norm() * std::sqrt(n);
    if (row.denominator > 0.0) row.ratio_bound = row.bound / row.denominator;
    row.well_populated = row.denominator > std::sqrt(n);
    rows.push_back(row);
  }
  return rows;
}

std::optional<double> lil_ratio(const RunLog& log) {
  double a = 0.0, s = 0.0;
  for (const auto& r : log.rounds) {
    a += r.p * (1.0 - r.p);
    s += r.error();
  }
  if (!(a > std::exp(1.0))) return std::nullopt;
  return std::fabs(s) / std::sqrt(2.0 * a * std::log(std::log(a)));
}

}  // namespace defcast
