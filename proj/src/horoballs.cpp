#include "ubiq/horoballs.hpp"

#include <numeric>

#include "ubiq/errors.hpp"

namespace ubiq {

Rational Horoball::base() const {
  Rational out(p, q);
  out.canonicalize();
  return out;
}

Rational Horoball::radius() const { return Rational(1) / Rational(2 * q * q); }

Rational Horoball::weight() const { return Rational(2 * q * q); }

std::pair<std::int64_t, std::int64_t> radius_window(const Rational& r_lo, const Rational& r_hi) {
  if (!(r_lo > 0 && r_lo < r_hi)) throw ValidationError("radius window needs 0 < r_lo < r_hi");
  // 1/(2q^2) >= r_lo  <=>  q^2 <= 1/(2 r_lo)
  Rational top = 1 / (2 * r_lo);
  Integer floor_top = top.get_num() / top.get_den();
  Integer last = sqrt(floor_top);
  // 1/(2q^2) < r_hi  <=>  q^2 > 1/(2 r_hi)
  Rational bottom = 1 / (2 * r_hi);
  Integer floor_bottom = bottom.get_num() / bottom.get_den();
  Integer first = sqrt(floor_bottom);
  while (Rational(first * first) <= bottom) ++first;
  if (first < 1) first = 1;
  if (!last.fits_slong_p()) throw ResourceCapError("radius window too large");
  return {first.get_si(), last.get_si()};
}

namespace {

// p range with lo <= p/q < hi
std::pair<std::int64_t, std::int64_t> numerator_range(const Interval<Rational>& B, std::int64_t q) {
  Rational a = B.lo * q, b = B.hi * q;
  Integer first, past;
  mpz_cdiv_q(first.get_mpz_t(), a.get_num_mpz_t(), a.get_den_mpz_t());
  mpz_cdiv_q(past.get_mpz_t(), b.get_num_mpz_t(), b.get_den_mpz_t());
  return {first.get_si(), past.get_si() - 1};
}

void check_B(const Interval<Rational>& B) {
  if (B.lo < -1000000 || B.hi > 1000000) throw ValidationError("base interval too large");
}

}  // namespace

std::vector<Horoball> enumerate_horoballs(const Interval<Rational>& B, const Rational& r_lo, const Rational& r_hi,
                                          std::uint64_t cap) {
  check_B(B);
  auto [first, last] = radius_window(r_lo, r_hi);
  std::vector<Horoball> out;
  if (B.hi <= B.lo) return out;
  if (last >= first && static_cast<std::uint64_t>(last - first + 1) > cap)
    throw ResourceCapError("horoball denominator range exceeds cap");
  for (std::int64_t q = first; q <= last; ++q) {
    auto [p0, p1] = numerator_range(B, q);
    for (std::int64_t p = p0; p <= p1; ++p) {
      if (std::gcd(p, q) != 1) continue;
      if (out.size() >= cap) throw ResourceCapError("horoball count exceeds cap");
      out.push_back({p, q});
    }
  }
  return out;
}

std::uint64_t horoball_count(const Interval<Rational>& B, const Rational& R, const Rational& lambda) {
  check_B(B);
  if (!(lambda > 0 && lambda < 1)) throw ValidationError("lambda must lie in (0,1)");
  if (R <= 0) throw ValidationError("R must be positive");
  auto [first, last] = radius_window(lambda * R, R);
  if (B.hi <= B.lo) return 0;
  if (last >= first && static_cast<std::uint64_t>(last - first + 1) > kHoroballCap)
    throw ResourceCapError("horoball denominator range exceeds cap");
  std::uint64_t count = 0;
  for (std::int64_t q = first; q <= last; ++q) {
    auto [p0, p1] = numerator_range(B, q);
    for (std::int64_t p = p0; p <= p1; ++p)
      if (std::gcd(p, q) == 1) ++count;
  }
  return count;
}

HoroballCount horoball_count_ratio(const Interval<Rational>& B, const Rational& R, const Rational& lambda) {
  if (B.hi <= B.lo) throw ValidationError("B must have positive length");
  if (!(lambda > 0 && lambda < 1)) throw ValidationError("lambda must lie in (0,1)");
  if (R <= 0) throw ValidationError("R must be positive");
  auto [first, last] = radius_window(lambda * R, R);
  if (first > last) throw DomainError("no Ford circle has radius in [lambda R, R): R too large or lambda too close to 1");
  std::uint64_t count = horoball_count(B, R, lambda);
  Rational m = B.hi - B.lo;
  return {count, static_cast<double>(count) * Rational(R / m).get_d()};
}

PairCheck check_pair(std::int64_t p, std::int64_t q, std::int64_t p2, std::int64_t q2) {
  // keeps every product below 2^127
  if (q < 1 || q2 < 1 || q > 10000 || q2 > 10000) throw ValidationError("denominators must lie in [1, 10000]");
  if (p < -q || p > 2 * q || p2 < -q2 || p2 > 2 * q2) throw ValidationError("bases must lie in [-1, 2]");
  using i128 = __int128;
  i128 Q = q, Q2 = q2;
  i128 delta = static_cast<i128>(p) * q2 - static_cast<i128>(p2) * q;
  i128 qq = Q * Q, qq2 = Q2 * Q2;
  // common denominator 4 q^4 q'^4
  i128 centre = 4 * delta * delta * qq * qq2;  // (p/q - p'/q')^2
  i128 sum = (qq + qq2) * (qq + qq2);          // (r + r')^2
  i128 diff = (qq2 - qq) * (qq2 - qq);         // (r - r')^2
  PairCheck out;
  out.delta = static_cast<std::int64_t>(delta);
  out.lhs = centre - sum + diff;
  out.rhs = 4 * qq * qq2 * (delta * delta - 1);
  out.tangent = out.lhs == 0;
  out.disjoint = out.lhs >= 0;
  return out;
}

DisjointnessReport disjointness_check(std::int64_t q_max) {
  if (q_max < 2) throw ValidationError("q_max must be at least 2");
  if (q_max > 10000) throw ResourceCapError("q_max beyond 10000");
  std::vector<std::pair<std::int64_t, std::int64_t>> circles;
  for (std::int64_t q = 1; q <= q_max; ++q)
    for (std::int64_t p = 0; p <= q; ++p)
      if (std::gcd(p, q) == 1) circles.emplace_back(p, q);
  DisjointnessReport rep;
  rep.q_max = q_max;
  rep.circles = circles.size();
  for (std::size_t i = 0; i < circles.size(); ++i)
    for (std::size_t j = i + 1; j < circles.size(); ++j) {
      auto [p, q] = circles[i];
      auto [p2, q2] = circles[j];
      PairCheck c = check_pair(p, q, p2, q2);
      ++rep.pairs;
      if (c.lhs != c.rhs) ++rep.identity_failures;
      if (!c.disjoint) ++rep.overlaps;
      bool farey = c.delta == 1 || c.delta == -1;
      if (c.tangent != farey) ++rep.tangency_mismatches;
      if (c.tangent) ++rep.tangent_pairs;
    }
  return rep;
}

}  // namespace ubiq
