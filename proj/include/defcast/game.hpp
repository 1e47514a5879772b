#pragma once

// Binary forecasting game with a Skeptic who announces a continuous S_n
// before Forecaster moves:
//
//   K_0 := C
//   FOR n = 1, 2, ...
//     Reality announces x_n
//     Skeptic announces continuous S_n : [0,1] -> R
//     Forecaster announces p_n
//     Reality announces y_n
//     K_n := K_{n-1} + S_n(p_n) (y_n - p_n)
//
// Against the k29star_eq25 Skeptic, K_N - K_0 equals
// 1/2 drift_sq - 1/2 variance_budget for any forecaster.

#include <cstdint>
#include <functional>
#include <string_view>
#include <utility>
#include <variant>
#include <vector>

#include "defcast/kernel.hpp"
#include "defcast/opponents.hpp"
#include "defcast/root_finding.hpp"
#include "defcast/run_log.hpp"
#include "json.hpp"

namespace defcast {

enum class ForecasterKind {
  k29_star,
  k29,
  baseline_prev_y,  // p_1 = 1/2, p_n = y_{n-1}
  constant_half,
  random_uniform,   // seeded uniform forecasts; a control with no guarantees
  lemma1,           // answers whatever S_n the Skeptic announces
};

std::string_view to_string(ForecasterKind kind);
ForecasterKind parse_forecaster_kind(std::string_view name);

// Continuous piecewise-linear S through sorted breakpoints (p, value) with
// p running from exactly 0 to exactly 1. On segments whose end values have
// strictly opposite signs, the function is evaluated as slope * (p - root),
// so the stored root evaluates to exactly zero.
class PiecewiseLinear {
 public:
  explicit PiecewiseLinear(std::vector<std::pair<double, double>> breakpoints);

  double operator()(double p) const;
  const std::vector<std::pair<double, double>>& breakpoints() const { return points_; }

  // Lemma 1 move with an exact root.
  ForecastChoice lemma1_root() const;

  friend bool operator==(const PiecewiseLinear& a, const PiecewiseLinear& b) {
    return a.points_ == b.points_;
  }

 private:
  struct Segment {
    double a, b, va, vb;
    bool crossing;
    double root, slope;
  };
  const Segment& segment_for(double p) const;

  std::vector<std::pair<double, double>> points_;
  std::vector<Segment> segments_;
};

// Skeptic strategy whose capital identity proves the drift bound.
struct Eq25Skeptic {
  friend bool operator==(const Eq25Skeptic&, const Eq25Skeptic&) = default;
};

using SkepticStrategy = std::variant<Eq25Skeptic, PiecewiseLinear>;

nlohmann::json skeptic_to_json(const SkepticStrategy& s);
SkepticStrategy skeptic_from_json(const nlohmann::json& j);

// Lemma 1 forecaster: sign rule at the endpoints, otherwise a root. Uses the
// same selection routine as Forecaster::next_forecast.
ForecastChoice lemma1_move(const std::function<double(double)>& s, double tol);
ForecastChoice lemma1_move(const PiecewiseLinear& s);

// (y - p)^2 == p(1-p) + (1-2p)(y-p), to within 1e-15. Holds for y in {0,1}.
bool identity24_check(double p, double y);

struct GameConfig {
  KernelSpec kernel = KernelSpec::constant(1.0);
  ForecasterKind algorithm = ForecasterKind::k29_star;
  SkepticStrategy skeptic = Eq25Skeptic{};
  OpponentSpec opponent;
  std::size_t rounds = 0;
  double initial_capital = 0.0;
  std::uint64_t seed = 0;
};

struct GameResult {
  RunLog log;
  CapitalTrace capital;
  std::vector<double> skeptic_moves;  // s_n = S_n(p_n)
};

// Throws ConfigError on an invalid configuration and InputError when a
// replayed datum falls outside the kernel's domain.
GameResult play_game(const GameConfig& config);

}  // namespace defcast
