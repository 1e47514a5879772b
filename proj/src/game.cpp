#include "defcast/game.hpp"

#include <cmath>
#include <memory>
#include <optional>

#include "defcast/errors.hpp"
#include "defcast/forecaster.hpp"
#include "defcast/rng.hpp"

namespace defcast {

std::string_view to_string(ForecasterKind kind) {
  switch (kind) {
    case ForecasterKind::k29_star: return "K29STAR";
    case ForecasterKind::k29: return "K29";
    case ForecasterKind::baseline_prev_y: return "baseline_prev_y";
    case ForecasterKind::constant_half: return "constant_half";
    case ForecasterKind::random_uniform: return "random_uniform";
    case ForecasterKind::lemma1: return "lemma1";
  }
  return "?";
}

ForecasterKind parse_forecaster_kind(std::string_view name) {
  for (auto k : {ForecasterKind::k29_star, ForecasterKind::k29, ForecasterKind::baseline_prev_y,
                 ForecasterKind::constant_half, ForecasterKind::random_uniform, ForecasterKind::lemma1})
    if (to_string(k) == name) return k;
  throw ConfigError("unknown algorithm '" + std::string(name) + "'");
}

PiecewiseLinear::PiecewiseLinear(std::vector<std::pair<double, double>> breakpoints)
    : points_(std::move(breakpoints)) {
  if (points_.size() < 2) throw ConfigError("piecewise-linear skeptic needs at least two breakpoints");
  if (points_.front().first != 0.0 || points_.back().first != 1.0)
    throw ConfigError("piecewise-linear breakpoints must start at 0 and end at 1");
  for (std::size_t i = 0; i + 1 < points_.size(); ++i) {
    const auto [a, va] = points_[i];
    const auto [b, vb] = points_[i + 1];
    if (!(a < b)) throw ConfigError("piecewise-linear breakpoints must be strictly increasing");
    if (!std::isfinite(va) || !std::isfinite(vb)) throw ConfigError("piecewise-linear values must be finite");
    Segment s{a, b, va, vb, (va > 0.0 && vb < 0.0) || (va < 0.0 && vb > 0.0), 0.0, 0.0};
    if (s.crossing) {
      s.root = a + (b - a) * (va / (va - vb));
      s.slope = (vb - va) / (b - a);
    }
    segments_.push_back(s);
  }
}

const PiecewiseLinear::Segment& PiecewiseLinear::segment_for(double p) const {
  for (const auto& s : segments_)
    if (p <= s.b) return s;
  return segments_.back();
}

double PiecewiseLinear::operator()(double p) const {
  if (!(p >= 0.0 && p <= 1.0)) throw DomainError("skeptic strategy is defined on [0,1]");
  const auto& s = segment_for(p);
  if (s.crossing) return s.slope * (p - s.root);
  if (p == s.a) return s.va;
  if (p == s.b) return s.vb;
  return s.va + (s.vb - s.va) * ((p - s.a) / (s.b - s.a));
}

ForecastChoice PiecewiseLinear::lemma1_root() const {
  const PiecewiseLinear& f = *this;
  const double s0 = f(0.0);
  if (s0 == 0.0) return {0.0, 0.0, false};
  const double s1 = f(1.0);
  if (s1 == 0.0) return {1.0, 0.0, false};
  if ((s0 > 0.0) == (s1 > 0.0)) return {s0 > 0.0 ? 1.0 : 0.0, 0.0, true};
  for (const auto& s : segments_) {
    const double vb = f(s.b);
    if (vb == 0.0) return {s.b, 0.0, false};
    if (s.crossing) return {s.root, std::fabs(f(s.root)), false};
  }
  // Unreachable for a function whose endpoint values differ in sign.
  throw ContractError("piecewise-linear skeptic has no root despite a sign change");
}

nlohmann::json skeptic_to_json(const SkepticStrategy& s) {
  if (std::holds_alternative<Eq25Skeptic>(s)) return {{"kind", "k29star_eq25"}};
  nlohmann::json bp = nlohmann::json::array();
  for (const auto& [p, v] : std::get<PiecewiseLinear>(s).breakpoints()) bp.push_back({p, v});
  return {{"kind", "piecewise_linear"}, {"breakpoints", bp}};
}

SkepticStrategy skeptic_from_json(const nlohmann::json& j) {
  try {
    const auto kind = j.at("kind").get<std::string>();
    if (kind == "k29star_eq25") return Eq25Skeptic{};
    if (kind == "piecewise_linear") {
      std::vector<std::pair<double, double>> bp;
      for (const auto& e : j.at("breakpoints")) bp.emplace_back(e.at(0).get<double>(), e.at(1).get<double>());
      return PiecewiseLinear(std::move(bp));
    }
    throw ConfigError("unknown skeptic kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed skeptic descriptor: ") + e.what());
  }
}

ForecastChoice lemma1_move(const std::function<double(double)>& s, double tol) {
  return select_forecast(s, tol);
}

ForecastChoice lemma1_move(const PiecewiseLinear& s) { return s.lemma1_root(); }

bool identity24_check(double p, double y) {
  const double e = y - p;
  return std::fabs(e * e - (p * (1.0 - p) + (1.0 - 2.0 * p) * e)) <= 1e-15;
}

namespace {

void validate_config(const GameConfig& c, std::optional<std::size_t> data_dim,
                     std::optional<std::size_t> data_len, std::optional<std::size_t> outcome_len) {
  c.kernel.validate();
  if (const auto n = coordinate_count(c.kernel); n && data_dim && *n != 1 + *data_dim)
    throw ConfigError("kernel expects " + std::to_string(*n) + " coordinates but the opponent produces " +
                      std::to_string(*data_dim) + " data coordinate(s) plus the forecast");
  if (data_len && *data_len < c.rounds)
    throw ConfigError("replay data has " + std::to_string(*data_len) + " rows, " + std::to_string(c.rounds) +
                      " rounds requested");
  if (outcome_len && *outcome_len < c.rounds)
    throw ConfigError("replay outcomes have " + std::to_string(*outcome_len) + " rows, " +
                      std::to_string(c.rounds) + " rounds requested");
  if (!std::isfinite(c.initial_capital)) throw ConfigError("initial capital must be finite");
}

}  // namespace

GameResult play_game(const GameConfig& config) {
  const OpponentSpec opponent = config.opponent.resolved(config.seed);
  auto data = make_data_source(opponent.reality1);
  auto outcomes = make_outcome_source(opponent.reality2, config.kernel);
  std::optional<std::size_t> data_dim = opponent.data_dimension();
  if (!data_dim && data->length().value_or(0) > 0) data_dim = data->dimension();
  validate_config(config, data_dim, data->length(), outcomes->length());

  const CounterRng forecaster_rng(CounterRng(config.seed).split(3));

  // Skeptic's eq25 state doubles as the reference K29* computation.
  Forecaster skeptic_state(config.kernel, Algorithm::k29_star);
  std::optional<Forecaster> own;
  if (config.algorithm == ForecasterKind::k29_star) own.emplace(config.kernel, Algorithm::k29_star);
  if (config.algorithm == ForecasterKind::k29) own.emplace(config.kernel, Algorithm::k29);

  GameResult result;
  auto& log = result.log;
  log.header.kernel = config.kernel;
  log.header.algorithm = std::string(to_string(config.algorithm));
  log.header.opponent = opponent;
  log.header.seed = config.seed;
  log.header.skeptic = skeptic_to_json(config.skeptic);
  log.header.initial_capital = config.initial_capital;
  result.capital.initial = config.initial_capital;
  result.capital.values.push_back(config.initial_capital);

  for (std::size_t n = 1; n <= config.rounds; ++n) {
    // Reality I
    std::vector<double> x = data->next(n);
    try {
      validate_point(config.kernel, PointRef(0.0, x));
    } catch (const DomainError& e) {
      throw InputError("round " + std::to_string(n) + ": " + e.what());
    }

    // Skeptic announces S_n.
    std::optional<SCurve> eq25;
    std::function<double(double)> skeptic_s;
    if (std::holds_alternative<Eq25Skeptic>(config.skeptic)) {
      eq25.emplace(skeptic_state.s_curve(x));
      skeptic_s = std::cref(*eq25);
    } else {
      skeptic_s = std::cref(std::get<PiecewiseLinear>(config.skeptic));
    }

    // Forecaster
    ForecastChoice choice;
    switch (config.algorithm) {
      case ForecasterKind::k29_star:
      case ForecasterKind::k29: choice = own->next_forecast(x); break;
      case ForecasterKind::lemma1:
        if (const auto* pl = std::get_if<PiecewiseLinear>(&config.skeptic))
          choice = lemma1_move(*pl);
        else
          choice = lemma1_move(skeptic_s, skeptic_state.root_tolerance());
        break;
      case ForecasterKind::baseline_prev_y:
        choice.p = n == 1 ? 0.5 : static_cast<double>(log.rounds.back().y);
        break;
      case ForecasterKind::constant_half: choice.p = 0.5; break;
      case ForecasterKind::random_uniform: choice.p = forecaster_rng.uniform(0, n); break;
    }

    // Reality II
    const int y = outcomes->next(n, log.rounds, x, choice.p);
    if (y != 0 && y != 1) throw InputError("round " + std::to_string(n) + ": outcome must be 0 or 1");

    const double s_n = skeptic_s(choice.p);
    result.skeptic_moves.push_back(s_n);
    result.capital.values.push_back(result.capital.values.back() + s_n * (static_cast<double>(y) - choice.p));

    Round round{n, std::move(x), choice.p, y, choice.residual};
    skeptic_state.update(round);
    if (own) own->update(round);
    log.rounds.push_back(std::move(round));
  }
  return result;
}

}  // namespace defcast
