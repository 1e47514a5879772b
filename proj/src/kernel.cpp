#include "defcast/kernel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <limits>
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

constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max() / 2;

double coord(PointRef z, std::size_t j) { return j == 0 ? z.p : z.x[j - 1]; }

// Coordinates [lo, hi) a given part of the kernel is allowed to read.
struct Window {
  std::size_t lo;
  std::size_t hi;
};

// Evaluates the factor of `spec` that lives on coordinates [begin, end),
// restricted to the coordinates inside `win`. The product over the forecast
// window and the data window is the full kernel value.
double eval_block(const KernelSpec& spec, PointRef a, PointRef b, std::size_t begin,
                  std::size_t end, Window win, bool owns_constant) {
  const std::size_t from = std::max(begin, win.lo);
  const std::size_t to = std::min(end, win.hi);
  return std::visit(
      overloaded{
          [&](const ConstantKernel& k) { return owns_constant ? k.c : 1.0; },
          [&](const GaussianKernel& k) {
            double sq = 0.0;
            for (std::size_t j = from; j < to; ++j) {
              const double d = coord(a, j) - coord(b, j);
              sq += d * d;
            }
            return std::exp(-sq / (2.0 * k.sigma * k.sigma));
          },
          [&](const FermiSobolevKernel&) {
            double v = 1.0;
            for (std::size_t j = from; j < to; ++j) v *= fs1d(coord(a, j), coord(b, j));
            return v;
          },
          [&](const ProductKernel& k) {
            double v = 1.0;
            std::size_t cur = begin;
            for (const auto& f : k.factors) {
              const auto w = coordinate_count(f);
              const std::size_t next = w ? cur + *w : end;
              v *= eval_block(f, a, b, cur, next, win, owns_constant);
              cur = next;
            }
            return v;
          },
      },
      spec.variant);
}

void check_block(const KernelSpec& spec, PointRef z, std::size_t begin, std::size_t end) {
  std::visit(overloaded{
                 [&](const FermiSobolevKernel&) {
                   for (std::size_t j = begin; j < end; ++j) {
                     const double v = coord(z, j);
                     if (!(v >= 0.0 && v <= 1.0)) {
                       std::ostringstream os;
                       os << "fermi_sobolev coordinate " << j << " = " << v << " outside [0,1]";
                       throw DomainError(os.str());
                     }
                   }
                 },
                 [&](const ProductKernel& k) {
                   std::size_t cur = begin;
                   for (const auto& f : k.factors) {
                     const auto w = coordinate_count(f);
                     const std::size_t next = w ? cur + *w : end;
                     check_block(f, z, cur, next);
                     cur = next;
                   }
                 },
                 [](const auto&) {},
             },
             spec.variant);
}

std::optional<std::size_t> opt_dims(const nlohmann::json& j) {
  if (!j.contains("dims") || j.at("dims").is_null()) return std::nullopt;
  return j.at("dims").get<std::size_t>();
}

}  // namespace

KernelSpec KernelSpec::constant(double c, std::optional<std::size_t> dims) {
  KernelSpec s{ConstantKernel{c, dims}};
  s.validate();
  return s;
}

KernelSpec KernelSpec::gaussian(double sigma, std::optional<std::size_t> dims) {
  KernelSpec s{GaussianKernel{sigma, dims}};
  s.validate();
  return s;
}

KernelSpec KernelSpec::fermi_sobolev(std::size_t dims) {
  KernelSpec s{FermiSobolevKernel{dims}};
  s.validate();
  return s;
}

KernelSpec KernelSpec::product(std::vector<KernelSpec> factors) {
  KernelSpec s{ProductKernel{std::move(factors)}};
  s.validate();
  return s;
}

void KernelSpec::validate() const {
  std::visit(overloaded{
                 [](const ConstantKernel& k) {
                   if (!(k.c > 0.0) || !std::isfinite(k.c))
                     throw ConfigError("constant kernel needs c > 0");
                 },
                 [](const GaussianKernel& k) {
                   if (!(k.sigma > 0.0) || !std::isfinite(k.sigma))
                     throw ConfigError("gaussian kernel needs sigma > 0");
                   if (k.dims && *k.dims == 0) throw ConfigError("gaussian kernel needs dims >= 1");
                 },
                 [](const FermiSobolevKernel& k) {
                   if (k.dims < 1) throw ConfigError("fermi_sobolev kernel needs dims >= 1");
                 },
                 [](const ProductKernel& k) {
                   if (k.factors.empty()) throw ConfigError("product kernel needs at least one factor");
                   for (std::size_t i = 0; i < k.factors.size(); ++i) {
                     k.factors[i].validate();
                     if (!coordinate_count(k.factors[i]) && i + 1 != k.factors.size())
                       throw ConfigError("only the last product factor may have open width");
                   }
                 },
             },
             variant);
  if (const auto n = coordinate_count(*this); n && *n == 0)
    throw ConfigError("kernel covers no coordinates; the forecast coordinate is required");
}

std::string KernelSpec::name() const {
  return std::visit(overloaded{
                        [](const ConstantKernel&) { return std::string("constant"); },
                        [](const GaussianKernel&) { return std::string("gaussian"); },
                        [](const FermiSobolevKernel&) { return std::string("fermi_sobolev"); },
                        [](const ProductKernel&) { return std::string("product"); },
                    },
                    variant);
}

bool operator==(const ConstantKernel& a, const ConstantKernel& b) {
  return a.c == b.c && a.dims == b.dims;
}
bool operator==(const GaussianKernel& a, const GaussianKernel& b) {
  return a.sigma == b.sigma && a.dims == b.dims;
}
bool operator==(const FermiSobolevKernel& a, const FermiSobolevKernel& b) {
  return a.dims == b.dims;
}
bool operator==(const ProductKernel& a, const ProductKernel& b) { return a.factors == b.factors; }
bool operator==(const KernelSpec& a, const KernelSpec& b) { return a.variant == b.variant; }

std::optional<std::size_t> coordinate_count(const KernelSpec& spec) {
  return std::visit(overloaded{
                        [](const ConstantKernel& k) { return k.dims; },
                        [](const GaussianKernel& k) { return k.dims; },
                        [](const FermiSobolevKernel& k) { return std::optional<std::size_t>(k.dims); },
                        [](const ProductKernel& k) {
                          std::size_t total = 0;
                          for (const auto& f : k.factors) {
                            const auto w = coordinate_count(f);
                            if (!w) return std::optional<std::size_t>();
                            total += *w;
                          }
                          return std::optional<std::size_t>(total);
                        },
                    },
                    spec.variant);
}

void validate_point(const KernelSpec& spec, PointRef z) {
  if (!(z.p >= 0.0 && z.p <= 1.0)) {
    std::ostringstream os;
    os << "forecast coordinate " << z.p << " outside [0,1]";
    throw DomainError(os.str());
  }
  for (double v : z.x)
    if (!std::isfinite(v)) throw DomainError("non-finite data coordinate");
  const std::size_t total = 1 + z.x.size();
  if (const auto n = coordinate_count(spec); n && *n != total) {
    std::ostringstream os;
    os << spec.name() << " kernel expects " << *n << " coordinates, point has " << total;
    throw DomainError(os.str());
  }
  check_block(spec, z, 0, total);
}

double fs1d(double t, double u) {
  if (!(t >= 0.0 && t <= 1.0) || !(u >= 0.0 && u <= 1.0))
    throw DomainError("fs1d arguments must lie in [0,1]");
  const double lo = std::min(t, u);
  const double hi = std::min(1.0 - t, 1.0 - u);
  return 0.5 * lo * lo + 0.5 * hi * hi + 5.0 / 6.0;
}

double forecast_part(const KernelSpec& spec, double p, double q) {
  const PointRef a(p, {});
  const PointRef b(q, {});
  return eval_block(spec, a, b, 0, kUnbounded, Window{0, 1}, true);
}

double data_part(const KernelSpec& spec, std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("data dimension mismatch");
  const PointRef a(0.0, x);
  const PointRef b(0.0, y);
  const std::size_t total = 1 + x.size();
  return eval_block(spec, a, b, 0, total, Window{1, total}, false);
}

double eval(const KernelSpec& spec, PointRef a, PointRef b) {
  validate_point(spec, a);
  validate_point(spec, b);
  if (a.x.size() != b.x.size()) throw DomainError("data dimension mismatch");
  return forecast_part(spec, a.p, b.p) * data_part(spec, a.x, b.x);
}

double diag_sup(const KernelSpec& spec) {
  return std::visit(overloaded{
                        [](const ConstantKernel& k) { return std::sqrt(k.c); },
                        [](const GaussianKernel&) { return 1.0; },
                        [](const FermiSobolevKernel& k) {
                          return std::pow(4.0 / 3.0, static_cast<double>(k.dims) / 2.0);
                        },
                        [](const ProductKernel& k) {
                          double v = 1.0;
                          for (const auto& f : k.factors) v *= diag_sup(f);
                          return v;
                        },
                    },
                    spec.variant);
}

double min_gram_eigenvalue(const KernelFn& kernel, std::span<const Point> points) {
  const auto m = static_cast<Eigen::Index>(points.size());
  if (m == 0) throw ContractError("psd check needs at least one point");
  Eigen::MatrixXd gram(m, m);
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double v = kernel(points[i], points[j]);
      gram(i, j) = v;
      gram(j, i) = v;
    }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(gram, Eigen::EigenvaluesOnly);
  return solver.eigenvalues().minCoeff();
}

bool psd_check(const KernelFn& kernel, std::span<const Point> points, double tol) {
  return min_gram_eigenvalue(kernel, points) >= -tol;
}

bool psd_check(const KernelSpec& spec, std::span<const Point> points, double tol) {
  return psd_check([&spec](PointRef a, PointRef b) { return eval(spec, a, b); }, points, tol);
}

void to_json(nlohmann::json& j, const KernelSpec& spec) {
  std::visit(overloaded{
                 [&](const ConstantKernel& k) {
                   j = {{"variant", "constant"}, {"c", k.c}};
                   if (k.dims) j["dims"] = *k.dims;
                 },
                 [&](const GaussianKernel& k) {
                   j = {{"variant", "gaussian"}, {"sigma", k.sigma}};
                   if (k.dims) j["dims"] = *k.dims;
                 },
                 [&](const FermiSobolevKernel& k) {
                   j = {{"variant", "fermi_sobolev"}, {"dims", k.dims}};
                 },
                 [&](const ProductKernel& k) {
                   j = {{"variant", "product"}, {"factors", k.factors}};
                 },
             },
             spec.variant);
}

void from_json(const nlohmann::json& j, KernelSpec& spec) {
  try {
    const auto variant = j.at("variant").get<std::string>();
    if (variant == "constant") {
      spec = KernelSpec::constant(j.value("c", 1.0), opt_dims(j));
    } else if (variant == "gaussian") {
      spec = KernelSpec::gaussian(j.at("sigma").get<double>(), opt_dims(j));
    } else if (variant == "fermi_sobolev") {
      spec = KernelSpec::fermi_sobolev(j.at("dims").get<std::size_t>());
    } else if (variant == "product") {
      spec = KernelSpec::product(j.at("factors").get<std::vector<KernelSpec>>());
    } else {
      throw ConfigError("unknown kernel variant '" + variant + "'");
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("malformed kernel descriptor: ") + e.what());
  }
}

}  // namespace defcast
