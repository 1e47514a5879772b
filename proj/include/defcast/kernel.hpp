#pragma once

// Kernels on the product [0,1] x X of the forecast space and the data space.
//
// A point is a pair (p, x). Coordinates are numbered with the forecast first:
// coordinate 0 is p, coordinate j >= 1 is x[j-1]. Every kernel shipped here is
// separable into a factor that depends only on the forecast coordinates and a
// factor that depends only on the data,
//
//     K((p,x),(q,x')) = forecast_part(p,q) * data_part(x,x'),
//
// and eval() is computed exactly that way, so the fast path used by the
// forecaster and the from-scratch recomputation in the verifiers agree bit for
// bit. All kernels are forecast-continuous: K is jointly continuous in (p,q)
// for fixed data.

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

namespace defcast {

struct Point {
  double p = 0.0;
  std::vector<double> x;
};

// Non-owning view of a point; what the kernel functions take.
struct PointRef {
  double p = 0.0;
  std::span<const double> x;

  PointRef() = default;
  PointRef(double p_, std::span<const double> x_) : p(p_), x(x_) {}
  PointRef(const Point& pt) : p(pt.p), x(pt.x) {}  // NOLINT(google-explicit-constructor)
};

struct KernelSpec;

// K == c. Without `dims` it accepts points of any dimension.
struct ConstantKernel {
  double c = 1.0;
  std::optional<std::size_t> dims;
};

// exp(-|a-b|^2 / (2 sigma^2)) over the concatenated (p, x) coordinates.
struct GaussianKernel {
  double sigma = 1.0;
  std::optional<std::size_t> dims;
};

// Tensor power of the one-dimensional Fermi-Sobolev kernel fs1d over `dims`
// coordinates in [0,1], forecast coordinate first.
struct FermiSobolevKernel {
  std::size_t dims = 1;
};

// Tensor product. Factors consume consecutive blocks of coordinates, in order;
// a factor without a fixed width (gaussian/constant without dims) consumes the
// remaining coordinates and must come last.
struct ProductKernel {
  std::vector<KernelSpec> factors;
};

struct KernelSpec {
  std::variant<ConstantKernel, GaussianKernel, FermiSobolevKernel, ProductKernel> variant;

  static KernelSpec constant(double c, std::optional<std::size_t> dims = std::nullopt);
  static KernelSpec gaussian(double sigma, std::optional<std::size_t> dims = std::nullopt);
  static KernelSpec fermi_sobolev(std::size_t dims);
  static KernelSpec product(std::vector<KernelSpec> factors);

  // Throws ConfigError if parameters are out of range or the factor layout
  // of a product is inconsistent.
  void validate() const;

  std::string name() const;

  friend bool operator==(const KernelSpec& a, const KernelSpec& b);
};

bool operator==(const ConstantKernel& a, const ConstantKernel& b);
bool operator==(const GaussianKernel& a, const GaussianKernel& b);
bool operator==(const FermiSobolevKernel& a, const FermiSobolevKernel& b);
bool operator==(const ProductKernel& a, const ProductKernel& b);

// Total number of coordinates (1 + dim x) the kernel is defined on, or
// nullopt if it accepts any dimension.
std::optional<std::size_t> coordinate_count(const KernelSpec& spec);

// Throws DomainError if the point is not in the kernel's domain.
void validate_point(const KernelSpec& spec, PointRef z);

// One-dimensional Fermi-Sobolev kernel on [0,1]^2:
//   1/2 min(t,u)^2 + 1/2 min(1-t,1-u)^2 + 5/6.
double fs1d(double t, double u);

double eval(const KernelSpec& spec, PointRef a, PointRef b);
double forecast_part(const KernelSpec& spec, double p, double q);
double data_part(const KernelSpec& spec, std::span<const double> x, std::span<const double> y);

// c_K = sup_z sqrt(K(z,z)).
double diag_sup(const KernelSpec& spec);

using KernelFn = std::function<double(PointRef, PointRef)>;

double min_gram_eigenvalue(const KernelFn& kernel, std::span<const Point> points);
bool psd_check(const KernelFn& kernel, std::span<const Point> points, double tol);
bool psd_check(const KernelSpec& spec, std::span<const Point> points, double tol);

void to_json(nlohmann::json& j, const KernelSpec& spec);
void from_json(const nlohmann::json& j, KernelSpec& spec);

}  // namespace defcast
