#include "defcast/root_finding.hpp"

#include <cmath>

namespace defcast {

ForecastChoice select_forecast(const std::function<double(double)>& s, double tol,
                               int max_iter) {
  const double s0 = s(0.0);
  if (s0 == 0.0) return {0.0, 0.0, false};
  const double s1 = s(1.0);
  if (s1 == 0.0) return {1.0, 0.0, false};
  if ((s0 > 0.0) == (s1 > 0.0)) return {s0 > 0.0 ? 1.0 : 0.0, 0.0, true};

  double lo = 0.0;
  double hi = 1.0;
  const bool lo_positive = s0 > 0.0;
  ForecastChoice best{0.5, INFINITY, false};
  for (int it = 0; it < max_iter; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;  // bracket is down to adjacent doubles
    const double sm = s(mid);
    const double r = std::fabs(sm);
    if (r < best.residual) best = {mid, r, false};
    if (sm == 0.0 || r <= tol) break;
    if ((sm > 0.0) == lo_positive)
      lo = mid;
    else
      hi = mid;
  }
  return best;
}

}  // namespace defcast
