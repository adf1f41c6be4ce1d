#include <cmath>
#include <numeric>
#include <random>

#include "doctest.h"
#include "ubiq/errors.hpp"
#include "ubiq/horoballs.hpp"

using namespace ubiq;

namespace {

Rational Q(long p, long q = 1) {
  Rational out(p, q);
  out.canonicalize();
  return out;
}

// Euler phi by trial division.
std::uint64_t phi(std::uint64_t n) {
  std::uint64_t out = n;
  for (std::uint64_t f = 2; f * f <= n; ++f)
    if (n % f == 0) {
      while (n % f == 0) n /= f;
      out -= out / f;
    }
  if (n > 1) out -= out / n;
  return out;
}

std::uint64_t phi_sum(std::uint64_t from, std::uint64_t to) {
  std::uint64_t s = 0;
  for (std::uint64_t q = from; q <= to; ++q) s += phi(q);
  return s;
}

const Interval<Rational> kUnit{Q(0), Q(1)};

}  // namespace

TEST_CASE("enumerate_horoballs examples") {
  auto h = enumerate_horoballs(kUnit, Q(1, 8), Q(1, 2));
  REQUIRE(h.size() == 1);
  CHECK(h[0] == Horoball{1, 2});
  CHECK(h[0].radius() == Q(1, 8));
  CHECK(enumerate_horoballs({Q(1, 2), Q(1, 2)}, Q(1, 8), Q(1, 2)).empty());
  // q = 1 radius 1/2 needs r_hi > 1/2; only 0/1 lies in [0,1)
  auto h1 = enumerate_horoballs(kUnit, Q(1, 8), Q(1));
  CHECK(h1.size() == 2);
  CHECK(h1[0] == Horoball{0, 1});
  auto window = enumerate_horoballs(kUnit, Q(1, 2 * 200 * 200), Q(1, 2 * 100 * 100));
  CHECK(window.size() == phi_sum(101, 200));
  for (const auto& b : window) {
    CHECK(std::gcd(b.p, b.q) == 1);
    CHECK(b.radius() * b.weight() == 1);
    CHECK(b.base() >= 0);
    CHECK(b.base() < 1);
  }
  CHECK_THROWS_AS(enumerate_horoballs(kUnit, Q(1, 2), Q(1, 8)), ValidationError);
}

TEST_CASE("enumeration matches a brute-force scan of sub-intervals") {
  std::mt19937_64 rng(81);
  std::uniform_int_distribution<long> grid(0, 60);
  for (int i = 0; i < 30; ++i) {
    long a = grid(rng), b = grid(rng);
    if (a > b) std::swap(a, b);
    Interval<Rational> B{Q(a, 60), Q(b, 60)};
    auto got = enumerate_horoballs(B, Q(1, 2 * 40 * 40), Q(1, 2 * 3 * 3));
    std::vector<Horoball> want;
    for (std::int64_t q = 4; q <= 40; ++q)
      for (std::int64_t p = 0; p <= q; ++p)
        if (std::gcd(p, q) == 1 && Q(p, q) >= B.lo && Q(p, q) < B.hi) want.push_back({p, q});
    CHECK(got == want);
  }
}

TEST_CASE("horoball counting band") {
  auto lambda = Q(1, 4);
  auto r = horoball_count_ratio(kUnit, Q(1, 2 * 100 * 100), lambda);
  CHECK(r.count == phi_sum(101, 200));
  double lo = 1e9, hi = 0;
  for (long inv : {1000, 3000, 10000, 30000, 100000, 300000, 1000000}) {
    auto R = Q(1, inv);
    auto c = horoball_count_ratio(kUnit, R, lambda);
    auto [first, last] = radius_window(lambda * R, R);
    CHECK(c.count == phi_sum(static_cast<std::uint64_t>(first), static_cast<std::uint64_t>(last)));
    lo = std::min(lo, c.ratio);
    hi = std::max(hi, c.ratio);
  }
  CHECK(hi / lo <= 2.0);
  // 3/pi^2 (1/lambda - 1) / 2 is the density limit
  CHECK(hi == doctest::Approx(1.5 * 3 / (M_PI * M_PI)).epsilon(0.1));

  CHECK(horoball_count(kUnit, Q(1, 20000), Q(999, 1000)) == 0);
  CHECK_THROWS_AS(horoball_count_ratio(kUnit, Q(1, 20000), Q(999, 1000)), DomainError);
  CHECK_THROWS_AS(horoball_count_ratio(kUnit, Q(1, 100), Q(3, 2)), ValidationError);

  auto one = horoball_count(Interval<Rational>{Q(3, 10), Q(4, 10)}, Q(1, 1000000), lambda);
  auto two = horoball_count(Interval<Rational>{Q(3, 10), Q(5, 10)}, Q(1, 1000000), lambda);
  CHECK(static_cast<double>(two) / static_cast<double>(one) == doctest::Approx(2.0).epsilon(0.05));
}

TEST_CASE("Ford circle pairs") {
  auto a = check_pair(1, 2, 1, 3);
  CHECK(a.tangent);
  CHECK(a.lhs == a.rhs);
  auto b = check_pair(0, 1, 1, 1);
  CHECK(b.tangent);
  auto c = check_pair(1, 3, 2, 3);
  CHECK_FALSE(c.tangent);
  CHECK(c.disjoint);
  CHECK(c.delta == -3);
  // gap (9 - 1)/81 over the common denominator 4 q^4 q'^4
  CHECK(c.lhs == static_cast<__int128>(4) * 81 * 8);

  // the same quantities in GMP rationals
  for (std::int64_t q = 1; q <= 20; ++q)
    for (std::int64_t p = 0; p <= q; ++p)
      for (std::int64_t q2 = 1; q2 <= 20; ++q2)
        for (std::int64_t p2 = 0; p2 <= q2; ++p2) {
          if (std::gcd(p, q) != 1 || std::gcd(p2, q2) != 1 || (p == p2 && q == q2)) continue;
          Rational r = Q(1, 2 * q * q), r2 = Q(1, 2 * q2 * q2);
          Rational d = Q(p, q) - Q(p2, q2);
          Rational lhs = d * d - (r + r2) * (r + r2) + (r - r2) * (r - r2);
          auto pc = check_pair(p, q, p2, q2);
          CHECK(pc.tangent == (lhs == 0));
          CHECK(pc.disjoint == (lhs >= 0));
        }
}

TEST_CASE("disjointness report") {
  auto rep = disjointness_check(60);
  CHECK(rep.ok());
  CHECK(rep.circles == 1 + phi_sum(1, 60));
  CHECK(rep.pairs == rep.circles * (rep.circles - 1) / 2);
  // each new fraction in the Farey sequence adds two neighbour edges
  CHECK(rep.tangent_pairs == 1 + 2 * (rep.circles - 2));
  CHECK_THROWS_AS(disjointness_check(1), ValidationError);
}
