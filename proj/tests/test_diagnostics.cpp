#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "defcast/diagnostics.hpp"
#include "defcast/errors.hpp"
#include "defcast/game.hpp"

using namespace defcast;

namespace {

RunLog make_log(KernelSpec k, std::vector<std::pair<double, int>> py, std::string algo = "K29STAR") {
  RunLog log;
  log.header.kernel = std::move(k);
  log.header.algorithm = std::move(algo);
  std::size_t n = 0;
  for (auto [p, y] : py) log.rounds.push_back(Round{++n, {}, p, y, 0.0});
  return log;
}

RunLog played(KernelSpec k, ForecasterKind a, const char* opp, std::size_t rounds, std::uint64_t seed = 1) {
  GameConfig c;
  c.kernel = std::move(k);
  c.algorithm = a;
  c.opponent = nlohmann::json::parse(opp).get<OpponentSpec>();
  c.rounds = rounds;
  c.seed = seed;
  return play_game(c).log;
}

const char* kBern05 = R"({"reality1":{"kind":"iid_uniform","k":0},"reality2":{"kind":"bernoulli","theta":0.5}})";
const char* kAdv0 = R"({"reality1":{"kind":"iid_uniform","k":0},"reality2":{"kind":"adversary"}})";
const char* kAdv1 = R"({"reality1":{"kind":"iid_uniform","k":1},"reality2":{"kind":"adversary"}})";

}  // namespace

TEST_CASE("theorem 1 on small logs") {
  const auto empty = check_theorem1(make_log(KernelSpec::constant(1.0), {}));
  CHECK(empty.lhs == 0.0);
  CHECK(empty.rhs == 0.0);
  CHECK(empty.satisfied);

  // baseline p_1 = 1/2, p_n = y_{n-1}: the signed drift stays at +-1/2
  std::mt19937_64 gen(51);
  std::vector<std::pair<double, int>> py;
  int prev = -1;
  for (int n = 0; n < 200; ++n) {
    const int y = static_cast<int>(gen() & 1);
    py.emplace_back(prev < 0 ? 0.5 : prev, y);
    prev = y;
    const auto rep = check_theorem1(make_log(KernelSpec::constant(1.0), py, "baseline_prev_y"));
    CHECK(rep.lhs == 0.25);
  }
}

TEST_CASE("eq4 examples") {
  const auto zero = check_eq4(make_log(KernelSpec::gaussian(1.0), {}));
  CHECK(zero.lhs == 0.0);
  CHECK(zero.rhs == 0.0);
  CHECK(zero.satisfied);

  const auto g = played(KernelSpec::gaussian(0.25), ForecasterKind::k29_star, kBern05, 400);
  const auto rep = check_eq4(g);
  CHECK(rep.rhs == 10.0);
  CHECK(rep.satisfied);

  std::vector<std::pair<double, int>> py(300, {0.5, 1});
  const auto fs = check_eq4(make_log(KernelSpec::fermi_sobolev(1), py));
  CHECK(fs.rhs == doctest::Approx(std::sqrt(4.0 / 3.0) / 2.0 * std::sqrt(300.0)).epsilon(1e-15));
  CHECK_FALSE(fs.satisfied);
}

TEST_CASE("test_function_sum") {
  const auto log = make_log(KernelSpec::constant(1.0), {{0.2, 1}, {0.7, 0}, {0.5, 1}});
  CHECK(test_function_sum(log, [](PointRef) { return 1.0; }) == doctest::Approx(0.8 - 0.7 + 0.5));
  CHECK(test_function_sum(log, [](PointRef) { return 0.0; }) == 0.0);
  const auto hindsight = make_log(KernelSpec::constant(1.0), {{1.0, 1}, {0.0, 0}, {1.0, 1}});
  CHECK(test_function_sum(hindsight, [](PointRef z) { return 3.0 + z.p; }) == 0.0);
}

TEST_CASE("trapezoid shape") {
  const TrapezoidFn f(0.4, 0.6, 0.05);
  CHECK(f(0.0) == 0.0);
  CHECK(f(0.35) == 0.0);
  CHECK(f(0.375) == doctest::Approx(0.25));
  CHECK(f(0.4) == doctest::Approx(0.5));
  CHECK(f(0.45) == 1.0);
  CHECK(f(0.5) == 1.0);
  CHECK(f(0.55) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(f(0.54) == 1.0);
  CHECK(f(0.6) == doctest::Approx(0.5));
  CHECK(f(0.65) == 0.0);
  CHECK(f(1.0) == 0.0);
  CHECK_THROWS_AS(TrapezoidFn(0.04, 0.6, 0.05), ConfigError);
  CHECK_THROWS_AS(TrapezoidFn(0.4, 0.48, 0.05), ConfigError);
  CHECK_THROWS_AS(TrapezoidFn(0.4, 0.96, 0.05), ConfigError);
  CHECK_THROWS_AS(TrapezoidFn(0.6, 0.4, 0.05), ConfigError);
  CHECK_THROWS_AS(TrapezoidFn(0.4, 0.6, 0.0), ConfigError);
}

TEST_CASE("trapezoid norm: closed form against midpoint quadrature") {
  CHECK(TrapezoidFn(0.4, 0.6, 0.05).fs_norm_sq() == doctest::Approx(20.04).epsilon(1e-15));
  for (auto [a, b, e] : {std::tuple{0.4, 0.6, 0.05}, std::tuple{0.1, 0.3, 0.02}, std::tuple{0.3, 0.9, 0.07}}) {
    const TrapezoidFn f(a, b, e);
    const int panels = 100000;
    const double h = 1.0 / panels;
    double mean = 0.0, energy = 0.0;
    for (int i = 0; i < panels; ++i) {
      const double lo = i * h, hi = lo + h;
      mean += f(lo + 0.5 * h) * h;
      const double slope = (f(hi) - f(lo)) / h;
      energy += slope * slope * h;
    }
    const double quad = mean * mean + energy;
    CHECK(std::fabs(quad - f.fs_norm_sq()) <= 1e-6 * f.fs_norm_sq());
  }
}

TEST_CASE("soft neighborhoods") {
  const TrapezoidFn t(0.4, 0.6, 0.05);
  const SoftNeighborhood cal = SoftNeighborhood::calibration(t);
  const std::vector<double> x = {0.5};
  CHECK(cal(PointRef(0.5, x)) == 1.0);
  CHECK(cal.fs_norm() == t.fs_norm());
  const SoftNeighborhood res({ConstantOne{}, TrapezoidFn(0.2, 0.8, 0.1)});
  CHECK(res(PointRef(0.01, x)) == 1.0);
  CHECK(res.fs_norm() == doctest::Approx(std::sqrt(0.36 + 10.0)));
  const SoftNeighborhood both({t, Complement{}});
  CHECK(both(PointRef(0.5, x)) == 0.5);
  CHECK(both.fs_norm() == doctest::Approx(t.fs_norm() * std::sqrt(1.25)));

  const auto parsed = neighborhoods_from_json(
      nlohmann::json::parse(R"([[0.4,0.6,0.05], {"factors":["one",[0.2,0.8,0.1]]}, {"factors":[[0.4,0.6,0.05],"identity"]}])"));
  REQUIRE(parsed.size() == 3);
  CHECK(parsed[0].fs_norm() == cal.fs_norm());
  CHECK(parsed[1](PointRef(0.01, x)) == 1.0);
  CHECK(parsed[2](PointRef(0.5, x)) == 0.5);
  CHECK_THROWS_AS(neighborhood_from_json(nlohmann::json::parse(R"([0.4,0.6])")), ConfigError);
  CHECK_THROWS_AS(neighborhood_from_json(nlohmann::json::parse(R"({"factors":["sine"]})")), ConfigError);
}

TEST_CASE("theorem 2 with a trapezoid") {
  const auto log = played(KernelSpec::fermi_sobolev(1), ForecasterKind::k29_star, kBern05, 1000);
  const TrapezoidFn f(0.4, 0.6, 0.05);
  const auto rep = check_theorem2(log, [&f](PointRef z) { return f(z.p); }, f.fs_norm());
  CHECK(rep.satisfied);
  CHECK(rep.extra.at("rhs_eq12").get<double>() ==
        doctest::Approx(std::sqrt(20.04 * 1000.0) / std::sqrt(3.0)).epsilon(1e-13));
  CHECK(rep.lhs <= rep.extra.at("rhs_eq12").get<double>() + rep.slack_budget + rep.rounding);
}

TEST_CASE("theorem 4 witness") {
  const auto one = make_log(KernelSpec::constant(1.0), {{0.5, 1}});
  const auto [w1, r1] = theorem4_witness(one);
  CHECK(r1.lhs == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r1.rhs == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(r1.satisfied);
  CHECK_FALSE(r1.vacuous);

  const auto hindsight = make_log(KernelSpec::constant(1.0), {{1.0, 1}, {0.0, 0}});
  const auto [w2, r2] = theorem4_witness(hindsight);
  CHECK(r2.vacuous);
  CHECK(r2.satisfied);
  CHECK(w2.coefficients().size() == 1);

  CHECK_THROWS_AS(theorem4_witness(make_log(KernelSpec::constant(1.0), {})), ContractError);

  for (auto kind : {ForecasterKind::k29_star, ForecasterKind::constant_half, ForecasterKind::random_uniform}) {
    const auto log = played(KernelSpec::fermi_sobolev(2), kind, kAdv1, 300, 8);
    const auto [w, rep] = theorem4_witness(log);
    CHECK(rep.satisfied);
    CHECK(rep.lhs >= rep.rhs - 1e-9 * 300);
    CHECK(w.norm_sq() == doctest::Approx(drift_sq(log)).epsilon(1e-9));

    // Same quantities through the test-function route.
    const auto via2 = check_theorem2(log, [&w](PointRef z) { return w(z); }, std::sqrt(w.norm_sq()));
    CHECK(std::fabs(via2.lhs - rep.lhs) <= 1e-9 * std::fabs(rep.lhs));
    CHECK(std::fabs(via2.rhs - rep.rhs) <= 1e-9 * std::fabs(rep.rhs));

    std::mt19937_64 gen(52);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
      const Point z{u(gen), {u(gen)}};
      double inner = 0.0;
      for (std::size_t n = 0; n < w.anchors().size(); ++n)
        inner += w.coefficients()[n] * eval(w.kernel(), z, w.anchors()[n]);
      CHECK(w(z) == inner);
    }
  }
}

TEST_CASE("theorem 3 and the pinch") {
  const auto log = played(KernelSpec::constant(1.0), ForecasterKind::k29_star, kAdv0, 500);
  const auto t1 = check_theorem1(log);
  const auto t3 = check_theorem3(log);
  CHECK(t1.satisfied);
  CHECK(t3.satisfied);
  CHECK(std::fabs(t1.lhs - t1.rhs) <= 2.0 * residual_sum(log) + 1e-6);
  CHECK(t3.min_margin() >= -1e-12);

  const auto bern = played(KernelSpec::constant(1.0), ForecasterKind::constant_half, kBern05, 200);
  CHECK_FALSE(check_theorem3(bern).satisfied);
}

TEST_CASE("slack is nonnegative and vanishes with exact roots") {
  const auto exact = make_log(KernelSpec::constant(1.0), {{0.5, 1}, {0.0, 0}, {0.5, 0}});
  for (const auto& rep : {check_theorem1(exact), check_eq4(exact), check_theorem3(exact)}) {
    CHECK(rep.slack_budget == 0.0);
    CHECK(rep.rounding >= 0.0);
  }
  const TrapezoidFn f(0.4, 0.6, 0.05);
  CHECK(check_theorem2(exact, [&f](PointRef z) { return f(z.p); }, f.fs_norm()).slack_budget == 0.0);

  const auto inexact = played(KernelSpec::gaussian(0.25), ForecasterKind::k29_star,
                              R"({"reality1":{"kind":"iid_uniform","k":1},"reality2":{"kind":"bernoulli","theta":0.3}})",
                              200);
  for (const auto& rep : {check_theorem1(inexact), check_eq4(inexact), check_theorem3(inexact)})
    CHECK(rep.slack_budget >= 0.0);
}

TEST_CASE("lemma 1 check") {
  const auto log = played(KernelSpec::fermi_sobolev(2), ForecasterKind::k29_star,
                          R"({"reality1":{"kind":"iid_uniform","k":1},"reality2":{"kind":"bernoulli","theta":0.3}})",
                          300);
  const auto rep = check_lemma1(log);
  CHECK(rep.satisfied);
  CHECK(rep.extra.at("capital_change").get<double>() ==
        doctest::Approx(rep.extra.at("half_drift_minus_half_variance").get<double>()).epsilon(1e-6));
}

TEST_CASE("kernel mismatch is a configuration error") {
  RunLog log = make_log(KernelSpec::fermi_sobolev(2), {{0.5, 1}});
  CHECK_THROWS_AS(check_theorem1(log), ConfigError);
  log.rounds[0].x = {1.5};
  CHECK_THROWS_AS(check_theorem1(log), ConfigError);
  log.rounds[0].x = {0.5};
  CHECK_NOTHROW(check_theorem1(log));
}

TEST_CASE("binned calibration") {
  CHECK(bin_index(0.0, 10) == 0);
  CHECK(bin_index(0.1, 10) == 0);
  CHECK(bin_index(0.10000000000000002, 10) == 1);
  CHECK(bin_index(0.5, 10) == 4);
  CHECK(bin_index(1.0, 10) == 9);
  CHECK(bin_index(0.7, 1) == 0);

  const auto hindsight = make_log(KernelSpec::constant(1.0), {{1.0, 1}, {0.0, 0}, {1.0, 1}});
  for (const auto& row : binned_calibration(hindsight, 10))
    if (row.count) CHECK(*row.deviation == 0.0);

  std::vector<std::pair<double, int>> alt;
  for (int n = 1; n <= 1000; ++n) alt.emplace_back(0.5, n % 2);
  const auto rows = binned_calibration(make_log(KernelSpec::constant(1.0), alt), 10);
  int populated = 0;
  for (const auto& r : rows)
    if (r.count) {
      ++populated;
      CHECK(std::fabs(*r.deviation) < 1e-12);
    } else {
      CHECK_FALSE(r.mean_p.has_value());
    }
  CHECK(populated == 1);

  const auto three = make_log(KernelSpec::constant(1.0), {{0.2, 1}, {0.7, 0}, {0.5, 1}});
  const auto one = binned_calibration(three, 1);
  REQUIRE(one.size() == 1);
  CHECK(*one[0].deviation == doctest::Approx((0.8 - 0.7 + 0.5) / 3.0));
}

TEST_CASE("soft calibration report") {
  CHECK(soft_calibration_report(make_log(KernelSpec::constant(1.0), {}), {}).empty());
  const auto nb = std::vector<SoftNeighborhood>{SoftNeighborhood::calibration(TrapezoidFn(0.1, 0.2, 0.02))};
  const auto far = soft_calibration_report(make_log(KernelSpec::constant(1.0), {{0.9, 1}, {0.95, 0}}), nb);
  REQUIRE(far.size() == 1);
  CHECK(far[0].denominator == 0.0);
  CHECK_FALSE(far[0].ratio.has_value());

  std::vector<SoftNeighborhood> nine;
  for (int i = 1; i <= 9; ++i) nine.push_back(SoftNeighborhood::calibration(TrapezoidFn(0.1 * i - 0.04, 0.1 * i + 0.04, 0.01)));
  const auto log = played(KernelSpec::fermi_sobolev(1), ForecasterKind::k29_star,
                          R"({"reality1":{"kind":"iid_uniform","k":0},"reality2":{"kind":"bernoulli","theta":0.3}})",
                          1000);
  const auto rows = soft_calibration_report(log, nine);
  REQUIRE(rows.size() == 9);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const double expect = 0.5 * std::sqrt(4.0 / 3.0) * nine[i].fs_norm() * std::sqrt(1000.0);
    CHECK(rows[i].bound == doctest::Approx(expect).epsilon(1e-13));
    if (rows[i].well_populated) CHECK(std::fabs(*rows[i].ratio) <= *rows[i].ratio_bound);
  }
}

TEST_CASE("lil ratio") {
  CHECK_FALSE(lil_ratio(make_log(KernelSpec::constant(1.0), {{0.5, 1}, {0.5, 0}})).has_value());
  std::vector<std::pair<double, int>> py;
  std::mt19937_64 gen(53);
  for (int n = 0; n < 100; ++n) py.emplace_back(0.5, static_cast<int>(gen() & 1));
  const auto log = make_log(KernelSpec::constant(1.0), py);
  double drift = 0.0;
  for (auto [p, y] : py) drift += y - p;
  const double a = 25.0;
  CHECK(*lil_ratio(log) == doctest::Approx(std::fabs(drift) / std::sqrt(2.0 * a * std::log(std::log(a)))));
}
