#include <cmath>
#include <random>

#include "doctest.h"
#include "ubiq/errors.hpp"
#include "ubiq/ubiquity.hpp"

using namespace ubiq;

namespace {

Rational Q(long p, long q = 1) {
  Rational out(p, q);
  out.canonicalize();
  return out;
}

const Ball kUnit{Q(1, 2), Q(1, 2)};

// m(B ∩ Delta) / m(B) from explicitly enumerated balls.
Rational brute_ratio(const ResonantSystem& sys, const FunctionForm& rho, const Rational& k, int n, const Ball& ball) {
  Rational kn = 1;
  for (int i = 0; i < n; ++i) kn *= k;
  Rational r = *rho.exact_value(kn);
  std::vector<Interval<Rational>> raw;
  for (const auto& p : enumerate(sys, 0, kn)) raw.push_back({p.point() - r, p.point() + r});
  auto w = ball.clipped();
  auto cut = ExactSet::normalize(raw).intersect(ExactSet::normalize({{w.lo, w.hi}}));
  return cut.measure() / (w.hi - w.lo);
}

}  // namespace

TEST_CASE("ubiquity ratio examples") {
  auto sys = ResonantSystem::classical();
  auto rho = FunctionForm::power_log(6, -2);
  auto r = ubiquity_ratio(sys, rho, 6, 3, kUnit);
  REQUIRE(r.exact.has_value());
  CHECK(r.value >= 0.5);
  CHECK(ubiquity_ratio(sys, FunctionForm::power_log(2, 0), 6, 2, kUnit).value == 1.0);
  CHECK(ubiquity_ratio(sys, FunctionForm::zero(), 6, 2, kUnit).value == 0.0);
  CHECK_THROWS_AS(ubiquity_ratio(sys, rho, 6, 2, Ball{Q(3), Q(1, 10)}), ValidationError);
}

TEST_CASE("ubiquity ratio matches brute force") {
  std::mt19937_64 rng(51);
  auto balls = random_balls(rng, 25, Q(1, 20));
  for (auto sys : {ResonantSystem::classical(), ResonantSystem::classical(true), ResonantSystem::ford(1)})
    for (const auto& ball : balls)
      for (int n = 1; n <= 2; ++n) {
        auto rho = FunctionForm::power_log(6, -2);
        CHECK(*ubiquity_ratio(sys, rho, 6, n, ball).exact == brute_ratio(sys, rho, 6, n, ball));
        auto rho2 = FunctionForm::power_log(1, -1);
        CHECK(*ubiquity_ratio(sys, rho2, 3, n + 1, ball).exact == brute_ratio(sys, rho2, 3, n + 1, ball));
      }
}

TEST_CASE("ubiquity ratio is additive over a split ball") {
  std::mt19937_64 rng(52);
  auto sys = ResonantSystem::classical();
  auto rho = FunctionForm::power_log(6, -2);
  for (const auto& ball : random_balls(rng, 10, Q(1, 10))) {
    Ball left{ball.center - ball.radius / 2, ball.radius / 2};
    Ball right{ball.center + ball.radius / 2, ball.radius / 2};
    for (int n = 2; n <= 3; ++n) {
      Rational whole = *ubiquity_ratio(sys, rho, 6, n, ball).exact;
      Rational l = *ubiquity_ratio(sys, rho, 6, n, left).exact;
      Rational r = *ubiquity_ratio(sys, rho, 6, n, right).exact;
      CHECK(whole == (l + r) / 2);
    }
  }
}

TEST_CASE("ubiquity ratio is monotone in the radius") {
  std::mt19937_64 rng(53);
  auto sys = ResonantSystem::classical();
  auto big = FunctionForm::power_log(6, -2);
  auto small = FunctionForm::power_log(Q(6, 10), -2);
  for (const auto& ball : random_balls(rng, 10, Q(1, 10)))
    for (int n = 1; n <= 3; ++n)
      CHECK(*ubiquity_ratio(sys, small, 6, n, ball).exact <= *ubiquity_ratio(sys, big, 6, n, ball).exact);
}

TEST_CASE("estimate_kappa") {
  std::mt19937_64 rng(54);
  auto balls = random_balls(rng, 5, Q(1, 10));
  auto sys = ResonantSystem::classical();
  auto rho = FunctionForm::power_log(6, -2);
  auto reports = estimate_kappa(sys, rho, 6, balls, 2, 3);
  REQUIRE(reports.size() == 5);
  for (const auto& rep : reports) {
    CHECK(rep.per_n.size() == 2);
    for (auto [n, r] : rep.per_n) {
      CHECK(r >= 0);
      CHECK(r <= 1);
      CHECK(rep.kappa_hat <= r);
    }
    REQUIRE(rep.n_o.has_value());
    CHECK(*rep.n_o == 2);
  }
  CHECK(empirical_kappa(reports) >= 0.5);
  CHECK_THROWS_AS(estimate_kappa(sys, rho, 6, balls, 4, 3), ValidationError);
  CHECK_THROWS_AS(empirical_kappa({}), ValidationError);
}

TEST_CASE("random balls respect the length bound and [0,1]") {
  std::mt19937_64 rng(55);
  for (const auto& b : random_balls(rng, 200, Q(1, 10))) {
    CHECK(2 * b.radius >= Q(1, 10));
    CHECK(b.center - b.radius >= 0);
    CHECK(b.center + b.radius <= 1);
  }
}

TEST_CASE("natural cover sums against the direct q-sum") {
  auto psi = FunctionForm::power_log(1, -3);
  auto sys = ResonantSystem::classical();
  const double tau = 3;
  auto direct = [&](double s, long q_from, long q_to) {
    long double sum = 0;
    for (long q = q_from; q <= q_to; ++q) sum += (q + 1) * std::pow(2.0L * std::pow((long double)q, -tau), s);
    return static_cast<double>(sum);
  };
  for (double s : {0.8, 0.5}) {
    auto f = FunctionForm::power_log(1, from_double(s), 0, 0, Regime::AtZero);
    for (int m = 3; m <= 8; ++m) {
      double cover = natural_cover_sum(f, psi, sys, 2, m, 20).value;
      double oracle = direct(s, (1L << (m - 1)) + 1, 1L << 20);
      // per window f(psi(k^n)) <= (2 q^-tau)^s <= 2^s k^(tau s) f(psi(k^n))
      CHECK(cover <= oracle * (1 + 1e-12));
      CHECK(oracle <= std::pow(2.0, s) * std::pow(2.0, tau * s) * cover * (1 + 1e-12));
    }
  }
  auto f_conv = FunctionForm::power_log(1, Q(4, 5), 0, 0, Regime::AtZero);
  double prev = std::numeric_limits<double>::infinity();
  for (int m = 5; m <= 30; m += 5) {
    double tail = natural_cover_sum(f_conv, psi, sys, 2, m, 60).value;
    CHECK(tail < prev);
    prev = tail;
  }
  CHECK(prev < 1e-3);
  CHECK(natural_cover_sum(f_conv, psi, sys, 2, 5, 60).symbolic == Verdict::Convergent);
  auto f_div = FunctionForm::power_log(1, Q(1, 2), 0, 0, Regime::AtZero);
  double a = natural_cover_sum(f_div, psi, sys, 2, 5, 20).value;
  double b = natural_cover_sum(f_div, psi, sys, 2, 5, 40).value;
  double c = natural_cover_sum(f_div, psi, sys, 2, 5, 60).value;
  CHECK(a < b);
  CHECK(b < c);
  CHECK(c > 1e3);
  CHECK(natural_cover_sum(f_div, psi, sys, 2, 5, 20).symbolic == Verdict::Divergent);
  CHECK(natural_cover_sum(FunctionForm::zero(), psi, sys, 2, 1, 10).value == 0.0);
}

TEST_CASE("natural cover sum with uniform windows counts J(n) directly") {
  auto psi = FunctionForm::power_log(1, -2);
  for (auto sys : {ResonantSystem::classical(), ResonantSystem::classical(true), ResonantSystem::ford(1)}) {
    double expected = 0;
    for (int n = 1; n <= 5; ++n) {
      Rational kn = 1;
      for (int i = 0; i < n; ++i) kn *= 3;
      expected += static_cast<double>(enumerate(sys, 0, kn).size()) * evaluate(psi, kn.get_d());
    }
    auto got = natural_cover_sum(FunctionForm::identity(), psi, sys, 3, 1, 5, true);
    CHECK(got.value == doctest::Approx(expected).epsilon(1e-12));
  }
}
