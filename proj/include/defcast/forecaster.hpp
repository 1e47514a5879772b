#pragma once

// K29* and K29 defensive forecasters.
//
// For a new datum x_n the forecaster looks at
//
//   S_n(p) = sum_{i<n} K((p,x_n),(p_i,x_i)) (y_i - p_i)
//            + 1/2 K((p,x_n),(p,x_n)) (1 - 2p)          [K29* only]
//
// and plays p_n = (1 + sign S_n(0)) / 2 when S_n(0) and S_n(1) share a
// nonzero sign, otherwise a root of S_n found by bisection. The state keeps
// the two sides of the drift bound incrementally:
//
//   drift_sq        = sum_i sum_j K(z_i,z_j)(y_i-p_i)(y_j-p_j)
//   variance_budget = sum_n p_n(1-p_n) K(z_n,z_n)
//
// Neither the feature map nor the feature space is ever materialized.

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "defcast/kernel.hpp"
#include "defcast/root_finding.hpp"
#include "defcast/round.hpp"
#include "defcast/run_log.hpp"

namespace defcast {

enum class Algorithm { k29_star, k29 };

std::string_view to_string(Algorithm a);
Algorithm parse_algorithm(std::string_view name);

class Forecaster;

// S_n for one fixed incoming datum. Precomputes the data-side kernel weights
// so each evaluation costs one forecast-side kernel call per past round.
class SCurve {
 public:
  double operator()(double p) const;

  // sum_i K((p,x),(p_i,x_i))(y_i - p_i), without the regularizer.
  double cross_sum(double p) const;

  // K((p,x),(p,x)).
  double diagonal(double p) const;

 private:
  friend class Forecaster;
  SCurve(const Forecaster& owner, std::span<const double> x);

  const Forecaster* owner_;
  std::vector<double> weights_;  // data_part(x, x_i) * (y_i - p_i)
  double data_diag_ = 1.0;
};

class Forecaster {
 public:
  Forecaster(KernelSpec kernel, Algorithm algorithm);

  // Throws DomainError if x is not a valid datum for the kernel.
  SCurve s_curve(std::span<const double> x) const;
  double s_value(std::span<const double> x, double p) const;

  // Bisection tolerance for the current round: 1e-12 * (1 + scale) with
  // scale = c_K^2 * (1 + sum_i |y_i - p_i|).
  double root_tolerance() const;

  ForecastChoice next_forecast(std::span<const double> x) const;

  // Appends a round; round.index must be history().size() + 1.
  void update(Round round);

  const KernelSpec& kernel() const { return kernel_; }
  Algorithm algorithm() const { return algorithm_; }
  const std::vector<Round>& history() const { return history_; }
  double drift_sq() const { return drift_sq_; }
  double variance_budget() const { return variance_budget_; }
  // sum_n K(z_n, z_n); the K29 bound's right-hand side.
  double diagonal_budget() const { return diagonal_budget_; }
  double residual_sum() const { return residual_sum_; }

 private:
  friend class SCurve;

  KernelSpec kernel_;
  Algorithm algorithm_;
  double c_k_sq_;
  std::vector<Round> history_;
  std::vector<double> past_p_;
  std::vector<double> past_err_;
  double drift_sq_ = 0.0;
  double variance_budget_ = 0.0;
  double diagonal_budget_ = 0.0;
  double residual_sum_ = 0.0;
  double abs_err_sum_ = 0.0;
};

// Pre-committed observation: datum, then outcome.
struct Observation {
  std::vector<double> x;
  int y = 0;
};

// Runs the protocol over a fixed stream. Throws InputError naming the round on
// a malformed observation.
RunLog forecast_stream(const KernelSpec& kernel, Algorithm algorithm,
                       std::span<const Observation> stream);

}  // namespace defcast
