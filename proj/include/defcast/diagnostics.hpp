#pragma once

// Verifiers for the drift, test-function and tightness inequalities, plus
// calibration and resolution reports. Everything is recomputed from the
// rounds of a RunLog; no accumulator from the run is trusted.

#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "defcast/kernel.hpp"
#include "defcast/run_log.hpp"
#include "json.hpp"

namespace defcast {

// Result of checking one inequality on a log.
//
// Upper-bound checks are satisfied iff lhs <= rhs + slack_budget + rounding;
// lower-bound checks iff lhs >= rhs - slack_budget - rounding. slack_budget
// comes only from inexact roots (it is zero when every residual is zero);
// rounding is a fixed floating-point allowance.
struct TheoremReport {
  std::string theorem_id;
  double lhs = 0.0;
  double rhs = 0.0;
  double slack_budget = 0.0;
  double rounding = 0.0;
  bool lower_bound = false;
  bool satisfied = false;
  bool vacuous = false;
  std::vector<double> per_round_margins;  // >= 0 where the per-round form holds
  nlohmann::json extra = nlohmann::json::object();

  double min_margin() const;
  nlohmann::json to_json() const;
};

// Gram quadratic form sum_i sum_j K(z_i,z_j) e_i e_j, e = y - p.
double drift_sq(const RunLog& log);
// drift_sq after each prefix of the log.
std::vector<double> drift_sq_prefixes(const RunLog& log);
double variance_budget(const RunLog& log);
double diagonal_budget(const RunLog& log);
double residual_sum(const RunLog& log);

TheoremReport check_theorem1(const RunLog& log);
TheoremReport check_eq4(const RunLog& log);
// Drift norm is at least the variance budget; per_round_margins hold the
// squared-norm increment minus p(1-p)K(z,z) for every round.
TheoremReport check_theorem3(const RunLog& log);
// Capital increments of the eq25 Skeptic never exceed the round's residual.
TheoremReport check_lemma1(const RunLog& log);

using TestFunction = std::function<double(PointRef)>;

double test_function_sum(const RunLog& log, const TestFunction& f);

// Soft indicator of [p_minus, p_plus]: 1 on the plateau, 0 outside the
// support, linear ramps of half-width eps around each end. Requires
// 0 < p_minus - eps < p_minus + eps < p_plus - eps < p_plus + eps < 1.
class TrapezoidFn {
 public:
  TrapezoidFn(double p_minus, double p_plus, double eps);

  double operator()(double t) const;
  // Fermi-Sobolev norm: (mean f)^2 + integral f'^2 = (p_plus - p_minus)^2 + 1/eps.
  double fs_norm_sq() const;
  double fs_norm() const;

  double p_minus() const { return p_minus_; }
  double p_plus() const { return p_plus_; }
  double eps() const { return eps_; }

 private:
  double p_minus_, p_plus_, eps_;
};

// One coordinate factor of a soft neighborhood.
struct ConstantOne {};  // f(t) = 1, norm 1
struct Identity {};     // f(t) = t, norm^2 = 1/4 + 1
struct Complement {};   // f(t) = 1 - t, norm^2 = 1/4 + 1
using CoordinateFactor = std::variant<TrapezoidFn, ConstantOne, Identity, Complement>;

double factor_value(const CoordinateFactor& f, double t);
double factor_fs_norm(const CoordinateFactor& f);

// Tensor product of coordinate factors over (p, x_1, ..., x_k); missing
// trailing factors are the constant one. Its Fermi-Sobolev norm is the
// product of the factor norms.
class SoftNeighborhood {
 public:
  explicit SoftNeighborhood(std::vector<CoordinateFactor> factors);
  static SoftNeighborhood calibration(TrapezoidFn f) { return SoftNeighborhood({std::move(f)}); }

  double operator()(PointRef z) const;
  double fs_norm() const;
  const std::vector<CoordinateFactor>& factors() const { return factors_; }

 private:
  std::vector<CoordinateFactor> factors_;
};

// [a, b, eps] or {"factors": [[a,b,eps], "one", "identity", "complement", ...]}.
SoftNeighborhood neighborhood_from_json(const nlohmann::json& j);
std::vector<SoftNeighborhood> neighborhoods_from_json(const nlohmann::json& j);

// f = sum_n e_n K_{z_n}: a finite kernel expansion.
class WitnessFn {
 public:
  WitnessFn(KernelSpec kernel, std::vector<double> coefficients, std::vector<Point> anchors);
  static WitnessFn from_log(const RunLog& log);

  double operator()(PointRef z) const;
  // sum_{i,j} c_i c_j K(a_i, a_j), accumulated over i < j and the diagonal.
  double norm_sq() const;

  const std::vector<double>& coefficients() const { return coefficients_; }
  const std::vector<Point>& anchors() const { return anchors_; }
  const KernelSpec& kernel() const { return kernel_; }

 private:
  KernelSpec kernel_;
  std::vector<double> coefficients_;
  std::vector<Point> anchors_;
};

// |sum e_n f(z_n)| <= f_norm * sqrt(budget), slack f_norm * sqrt(2 sum residuals).
// Also reports the c_K form (c_K/2) f_norm sqrt(N) in extra["rhs_eq12"].
TheoremReport check_theorem2(const RunLog& log, const TestFunction& f, double f_norm);

// Witness of tightness. Precondition: log nonempty.
std::pair<WitnessFn, TheoremReport> theorem4_witness(const RunLog& log);

struct BinRow {
  std::size_t bin = 0;
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
  std::optional<double> mean_p;
  std::optional<double> mean_y;
  std::optional<double> deviation;  // mean(y - p)
};

// Equal-width bins, right-closed: a forecast on an interior edge goes to the
// lower bin, p = 0 to the first.
std::size_t bin_index(double p, std::size_t bins);
std::vector<BinRow> binned_calibration(const RunLog& log, std::size_t bins);

struct SoftRow {
  double numerator = 0.0;    // sum f(z_n)(y_n - p_n)
  double denominator = 0.0;  // sum f(z_n)
  std::optional<double> ratio;
  double bound = 0.0;        // (1/2)(4/3)^{d/2} ||f||_FS sqrt(N)
  std::optional<double> ratio_bound;
  bool well_populated = false;  // denominator > sqrt(N)
};

std::vector<SoftRow> soft_calibration_report(const RunLog& log,
                                             const std::vector<SoftNeighborhood>& neighborhoods);

// |sum (y - p)| / sqrt(2 A ln ln A), A = sum p(1-p); nullopt when A <= e.
std::optional<double> lil_ratio(const RunLog& log);

}  // namespace defcast
