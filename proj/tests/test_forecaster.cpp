#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "defcast/errors.hpp"
#include "defcast/forecaster.hpp"
#include "defcast/root_finding.hpp"

using namespace defcast;

namespace {

// Gram quadratic form straight from the definition.
double gram_form(const KernelSpec& k, const std::vector<Round>& rounds) {
  double s = 0.0;
  for (const auto& a : rounds)
    for (const auto& b : rounds) s += eval(k, a.point(), b.point()) * a.error() * b.error();
  return s;
}

std::vector<Observation> random_stream(std::size_t n, std::size_t k, double theta, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<Observation> out(n);
  for (auto& o : out) {
    for (std::size_t j = 0; j < k; ++j) o.x.push_back(u(gen));
    o.y = u(gen) < theta ? 1 : 0;
  }
  return out;
}

}  // namespace

TEST_CASE("select_forecast") {
  auto lin = select_forecast([](double p) { return 1.0 - 2.0 * p; }, 1e-12);
  CHECK(lin.p == 0.5);
  CHECK(lin.residual == 0.0);
  CHECK_FALSE(lin.sign_rule);

  auto pos = select_forecast([](double) { return 1.0; }, 1e-12);
  CHECK(pos.p == 1.0);
  CHECK(pos.sign_rule);
  CHECK(pos.residual == 0.0);

  auto neg = select_forecast([](double) { return -3.0; }, 1e-12);
  CHECK(neg.p == 0.0);
  CHECK(neg.sign_rule);

  auto left = select_forecast([](double p) { return -p; }, 1e-12);
  CHECK(left.p == 0.0);
  CHECK(left.residual == 0.0);
  CHECK_FALSE(left.sign_rule);

  auto right = select_forecast([](double p) { return p - 1.0; }, 1e-12);
  CHECK(right.p == 1.0);
  CHECK_FALSE(right.sign_rule);

  auto odd = select_forecast([](double p) { return std::tanh(50.0 * (p - 0.3141)); }, 1e-14);
  CHECK(odd.p == doctest::Approx(0.3141).epsilon(1e-12));
  CHECK(odd.residual <= 1e-14);
}

TEST_CASE("s_value examples") {
  const auto k1 = KernelSpec::constant(1.0);
  Forecaster star(k1, Algorithm::k29_star);
  Forecaster plain(k1, Algorithm::k29);
  const std::vector<double> none;
  CHECK(star.s_value(none, 0.5) == 0.0);
  for (double p : {0.0, 0.1, 0.37, 0.9, 1.0}) {
    CHECK(star.s_value(none, p) == doctest::Approx(0.5 * (1.0 - 2.0 * p)));
    CHECK(plain.s_value(none, p) == 0.0);
  }
  star.update(Round{1, {}, 0.5, 1, 0.0});
  for (double p : {0.0, 0.25, 0.6, 1.0}) CHECK(star.s_value(none, p) == doctest::Approx(1.0 - p).epsilon(1e-15));
}

TEST_CASE("first forecast") {
  const std::vector<double> x1 = {0.3};
  for (const auto& k : {KernelSpec::constant(1.0), KernelSpec::gaussian(0.05), KernelSpec::fermi_sobolev(2)}) {
    Forecaster star(k, Algorithm::k29_star);
    const auto c = star.next_forecast(x1);
    CHECK(c.p == 0.5);
    CHECK(c.residual == 0.0);
    Forecaster plain(k, Algorithm::k29);
    CHECK(plain.next_forecast(x1).p == 0.5);
  }
}

TEST_CASE("constant kernel closed form S(p) = D + 1/2 - p") {
  const auto k1 = KernelSpec::constant(1.0);
  Forecaster up(k1, Algorithm::k29_star);
  up.update(Round{1, {}, 0.2, 1, 0.0});  // D = 0.8
  CHECK(up.s_value({}, 0.0) == doctest::Approx(1.3));
  CHECK(up.s_value({}, 1.0) == doctest::Approx(0.3));
  const auto c = up.next_forecast({});
  CHECK(c.p == 1.0);
  CHECK(c.residual == 0.0);
  CHECK(c.sign_rule);

  Forecaster down(k1, Algorithm::k29_star);
  down.update(Round{1, {}, 0.5, 0, 0.0});  // D = -0.5
  const auto d = down.next_forecast({});
  CHECK(d.p == 0.0);
  CHECK(d.residual == 0.0);
  CHECK_FALSE(d.sign_rule);
}

TEST_CASE("update examples") {
  const auto k1 = KernelSpec::constant(1.0);
  Forecaster f(k1, Algorithm::k29_star);
  f.update(Round{1, {}, 0.5, 1, 0.0});
  CHECK(f.drift_sq() == 0.25);
  CHECK(f.variance_budget() == 0.25);
  const double d = f.drift_sq(), v = f.variance_budget();
  Forecaster g = f;
  g.update(Round{2, {}, 1.0, 1, 0.0});
  CHECK(g.drift_sq() == d);
  CHECK(g.variance_budget() == v);
  f.update(Round{2, {}, 1.0, 0, 0.0});
  CHECK(f.drift_sq() == doctest::Approx(0.25).epsilon(1e-15));
  CHECK_THROWS_AS(f.update(Round{7, {}, 0.5, 1, 0.0}), ContractError);
}

TEST_CASE("forecast_stream basics") {
  CHECK(forecast_stream(KernelSpec::constant(1.0), Algorithm::k29_star, {}).rounds.empty());

  std::vector<Observation> bad = {{{}, 1}, {{}, 2}};
  try {
    forecast_stream(KernelSpec::constant(1.0), Algorithm::k29_star, bad);
    FAIL("expected InputError");
  } catch (const InputError& e) {
    CHECK(std::string(e.what()).find("round 2") != std::string::npos);
  }
  std::vector<Observation> out_of_box = {{{0.5}, 1}, {{1.5}, 0}};
  CHECK_THROWS_AS(forecast_stream(KernelSpec::fermi_sobolev(2), Algorithm::k29_star, out_of_box), InputError);
}

TEST_CASE("constant kernel forecasts follow clip(D + 1/2)") {
  const auto stream = random_stream(400, 0, 0.7, 21);
  const auto log = forecast_stream(KernelSpec::constant(1.0), Algorithm::k29_star, stream);
  double drift = 0.0;
  for (const auto& r : log.rounds) {
    const double expect = std::clamp(drift + 0.5, 0.0, 1.0);
    CHECK(r.p == doctest::Approx(expect).epsilon(1e-11));
    drift += r.error();
  }
}

TEST_CASE("parity data: forecasts learn the alternation") {
  std::vector<Observation> stream;
  for (std::size_t n = 1; n <= 1000; ++n) stream.push_back({{static_cast<double>(n % 2)}, n % 2 == 1 ? 1 : 0});
  const auto log = forecast_stream(KernelSpec::gaussian(0.05), Algorithm::k29_star, stream);
  double err = 0.0;
  int count = 0;
  for (std::size_t n = 500; n <= 1000; ++n, ++count) err += std::fabs(log.rounds[n - 1].error());
  CHECK(err / count < 0.2);
}

TEST_CASE("accumulators agree with the from-scratch Gram form") {
  struct Case {
    KernelSpec k;
    std::size_t dim;
    Algorithm a;
  };
  for (const auto& c : {Case{KernelSpec::fermi_sobolev(2), 1, Algorithm::k29_star},
                        Case{KernelSpec::gaussian(0.25), 2, Algorithm::k29_star},
                        Case{KernelSpec::gaussian(1.0), 1, Algorithm::k29},
                        Case{KernelSpec::fermi_sobolev(1), 0, Algorithm::k29}}) {
    const auto stream = random_stream(300, c.dim, 0.4, 22);
    Forecaster f(c.k, c.a);
    double variance = 0.0;
    for (std::size_t n = 1; n <= stream.size(); ++n) {
      const auto choice = f.next_forecast(stream[n - 1].x);
      if (choice.sign_rule) CHECK(choice.residual == 0.0);
      CHECK(choice.residual <= f.root_tolerance());
      Round r{n, stream[n - 1].x, choice.p, stream[n - 1].y, choice.residual};
      variance += r.p * (1.0 - r.p) * eval(c.k, r.point(), r.point());
      f.update(r);
      CHECK(f.drift_sq() >= -1e-9);
      if (n % 50 == 0) {
        const double ref = gram_form(c.k, f.history());
        CHECK(std::fabs(f.drift_sq() - ref) <= 1e-6 * std::max(1.0, std::fabs(ref)));
        CHECK(f.variance_budget() == doctest::Approx(variance).epsilon(1e-12));
      }
    }
    if (c.a == Algorithm::k29_star)
      CHECK(f.drift_sq() <= f.variance_budget() + 2.0 * f.residual_sum() + 1e-9 * stream.size());
    else
      CHECK(f.drift_sq() <= f.diagonal_budget() + 2.0 * f.residual_sum() + 1e-9 * stream.size());
  }
}

TEST_CASE("determinism") {
  const auto stream = random_stream(200, 1, 0.3, 23);
  const auto a = forecast_stream(KernelSpec::gaussian(0.25), Algorithm::k29_star, stream);
  const auto b = forecast_stream(KernelSpec::gaussian(0.25), Algorithm::k29_star, stream);
  CHECK(a == b);
}

TEST_CASE("algorithm names") {
  CHECK(to_string(Algorithm::k29_star) == "K29STAR");
  CHECK(parse_algorithm("K29") == Algorithm::k29);
  CHECK_THROWS_AS(parse_algorithm("K30"), ConfigError);
}
