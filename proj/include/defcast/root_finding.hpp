#pragma once

#include <functional>

namespace defcast {

struct ForecastChoice {
  double p = 0.5;
  double residual = 0.0;
  bool sign_rule = false;  // p in {0,1} chosen without a root claim
};

// Forecaster's move against a continuous S on [0,1]:
//   - S(0) == 0 or S(1) == 0: return that endpoint, residual 0;
//   - sign S(0) == sign S(1): return (1 + sign S(0)) / 2, residual 0;
//   - otherwise bisect [0,1] with plain midpoints until |S(p)| <= tol or
//     max_iter steps, returning the evaluated midpoint with smallest |S|.
// Deterministic for a deterministic S.
ForecastChoice select_forecast(const std::function<double(double)>& s, double tol,
                               int max_iter = 80);

}  // namespace defcast
