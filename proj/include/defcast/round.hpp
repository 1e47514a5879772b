#pragma once

#include <cstddef>
#include <vector>

#include "defcast/kernel.hpp"

namespace defcast {

// One protocol step: datum, forecast, outcome, and |S_n(p_n)| at the
// emitted forecast (zero when the sign rule fired or the root is exact).
struct Round {
  std::size_t index = 0;
  std::vector<double> x;
  double p = 0.0;
  int y = 0;
  double residual = 0.0;

  PointRef point() const { return {p, x}; }
  double error() const { return static_cast<double>(y) - p; }

  friend bool operator==(const Round&, const Round&) = default;
};

}  // namespace defcast
