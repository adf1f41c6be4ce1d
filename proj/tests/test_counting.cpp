#include <cmath>
#include <random>

#include "doctest.h"
#include "ubiq/counting.hpp"
#include "ubiq/errors.hpp"
#include "ubiq/random.hpp"

using namespace ubiq;

namespace {

Rational Q(long p, long q = 1) {
  Rational out(p, q);
  out.canonicalize();
  return out;
}

Rational abs_q(const Rational& r) { return r < 0 ? Rational(-r) : r; }

// Every p in [0, q], exact rational comparison.
std::int64_t brute_R(double x, std::int64_t N, const FunctionForm& psi) {
  Rational xq(x);
  std::int64_t count = 0;
  for (std::int64_t q = 1; q <= N; ++q) {
    Rational bound = *psi.exact_value(Rational(q));
    for (std::int64_t p = 0; p <= q; ++p)
      if (abs_q(xq - Q(p, q)) < bound) {
        ++count;
        break;
      }
  }
  return count;
}

// Convergents p_n/q_n of an exact rational.
std::vector<std::pair<Integer, Integer>> convergents(Rational x) {
  std::vector<std::pair<Integer, Integer>> out;
  Integer p0 = 0, q0 = 1, p1 = 1, q1 = 0;
  while (true) {
    Integer a;
    mpz_fdiv_q(a.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
    Integer p2 = a * p1 + p0, q2 = a * q1 + q0;
    out.emplace_back(p2, q2);
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
    Rational frac = x - Rational(a);
    if (frac == 0) break;
    x = 1 / frac;
  }
  return out;
}

}  // namespace

TEST_CASE("count_R examples") {
  auto psi = FunctionForm::power_log(Q(1, 4), -1);
  CHECK(count_R(0.0, 100, FunctionForm::power_log(1, -2)) == 100);
  CHECK(count_R(0.5, 100, psi) == 50);
  CHECK(count_R(0.5, 100, FunctionForm::zero()) == 0);
  CHECK_THROWS_AS(count_R(0.5, 0, psi), ValidationError);
}

TEST_CASE("count_R agrees with brute force over all numerators") {
  std::mt19937_64 rng(61);
  const FunctionForm forms[] = {FunctionForm::power_log(Q(1, 4), -1), FunctionForm::power_log(1, -2),
                                FunctionForm::power_log(Q(1, 3), -2), FunctionForm::power_log(Q(7, 10), -1)};
  for (const auto& psi : forms)
    for (int i = 0; i < 50; ++i) {
      double x = uniform01(rng);
      CHECK(count_R(x, 200, psi) == brute_R(x, 200, psi));
    }
  // dyadic and small-denominator points sit exactly on ball boundaries
  for (double x : {0.25, 0.5, 0.75, 0.125, 1.0 / 3.0, 0.2})
    for (const auto& psi : forms) CHECK(count_R(x, 200, psi) == brute_R(x, 200, psi));
}

TEST_CASE("count_R is monotone in N and psi") {
  std::mt19937_64 rng(62);
  auto small = FunctionForm::power_log(Q(1, 5), -1);
  auto big = FunctionForm::power_log(Q(2, 5), -1);
  for (int i = 0; i < 20; ++i) {
    double x = uniform01(rng);
    std::int64_t prev = 0;
    for (std::int64_t N : {10, 100, 1000, 5000}) {
      std::int64_t c = count_R(x, N, small);
      CHECK(c >= prev);
      CHECK(c <= N);
      CHECK(c <= count_R(x, N, big));
      prev = c;
    }
  }
}

TEST_CASE("rational x is hit by every multiple of its denominator") {
  std::mt19937_64 rng(63);
  auto psi = FunctionForm::power_log(1, -3);
  for (int i = 0; i < 30; ++i) {
    long b = std::uniform_int_distribution<long>(1, 50)(rng);
    long a = std::uniform_int_distribution<long>(0, b)(rng);
    if (std::gcd(a, b) != 1) continue;
    double x = static_cast<double>(a) / static_cast<double>(b);
    CHECK(count_R(x, 1000, psi) >= 1000 / b);
  }
}

TEST_CASE("golden ratio hits only admissible convergents") {
  double x = (std::sqrt(5.0) - 1) / 2;
  auto conv = convergents(Rational(x));
  const std::int64_t N = 10000;
  for (auto c : {Q(1, 3), Q(1, 2)}) {
    auto psi = FunctionForm::power_log(c, -2);
    std::vector<Integer> admissible;
    for (const auto& [p, q] : conv) {
      if (q > N) break;
      Rational d = abs_q(Rational(x) - Rational(p, q));
      if (d < c / Rational(q * q) && (admissible.empty() || admissible.back() != q)) admissible.push_back(q);
    }
    CHECK(count_R(x, N, psi) == static_cast<std::int64_t>(admissible.size()));
  }
  // 1/(2q^2) admits every convergent, 1/(3q^2) is below the Hurwitz constant
  CHECK(count_R(x, N, FunctionForm::power_log(Q(1, 2), -2)) >= 15);
  CHECK(count_R(x, N, FunctionForm::power_log(Q(1, 3), -2)) <= 2);
}

TEST_CASE("schmidt_prediction") {
  auto p = schmidt_prediction(FunctionForm::power_log(Q(1, 4), -1), 100000);
  CHECK(p.value == 50000.0);
  CHECK_FALSE(p.violated);
  auto bad = schmidt_prediction(FunctionForm::power_log(1, -1), 10);
  CHECK(bad.violated);
  CHECK(*bad.first_violation == 1);
  CHECK(schmidt_prediction(FunctionForm::zero(), 10).value == 0.0);
}

TEST_CASE("schmidt_experiment") {
  auto psi = FunctionForm::power_log(Q(1, 4), -1);
  auto empty = schmidt_experiment(psi, 1000, 0, 7);
  CHECK(empty.records.empty());

  auto serial = schmidt_experiment(psi, 20000, 40, 7, 1);
  auto parallel = schmidt_experiment(psi, 20000, 40, 7, 3);
  REQUIRE(serial.records.size() == 40);
  for (std::size_t i = 0; i < serial.records.size(); ++i) {
    CHECK(serial.records[i].x == parallel.records[i].x);
    CHECK(serial.records[i].count == parallel.records[i].count);
  }
  CHECK(serial.mean == parallel.mean);
  CHECK(serial.mean == doctest::Approx(1.0).epsilon(0.05));
  CHECK(serial.divergence_hypothesis);
  for (const auto& r : serial.records) {
    CHECK(r.count >= 0);
    CHECK(r.count <= r.N);
    CHECK(r.prediction >= 0);
  }
}

TEST_CASE("convergent psi saturates") {
  auto psi = FunctionForm::power_log(1, -3);
  CHECK_FALSE(schmidt_experiment(psi, 10, 1, 1).divergence_hypothesis);
  std::mt19937_64 rng(64);
  int saturated = 0;
  for (int i = 0; i < 20; ++i) {
    double x = uniform01(rng);
    auto a = count_R(x, 1000, psi), b = count_R(x, 10000, psi), c = count_R(x, 100000, psi);
    CHECK(a <= b);
    CHECK(b <= c);
    if (c - a <= 2) ++saturated;
  }
  CHECK(saturated >= 15);
}
