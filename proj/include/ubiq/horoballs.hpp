#pragma once

// Ford circles as the standard horoballs of SL(2,Z): the disk of radius
// 1/(2q^2) tangent to the line at p/q.

#include <cstdint>
#include <vector>

#include "ubiq/intervals.hpp"
#include "ubiq/rational.hpp"

namespace ubiq {

struct Horoball {
  std::int64_t p;
  std::int64_t q;

  Rational base() const;
  /// 1/(2q^2)
  Rational radius() const;
  /// 2q^2, so radius * weight = 1
  Rational weight() const;
  friend bool operator==(const Horoball&, const Horoball&) = default;
};

inline constexpr std::uint64_t kHoroballCap = 50'000'000;

/// Denominators q with r_lo <= 1/(2q^2) < r_hi, as [first, last]; empty when first > last.
std::pair<std::int64_t, std::int64_t> radius_window(const Rational& r_lo, const Rational& r_hi);

/// Horoballs with base in the half-open [B.lo, B.hi) and radius in [r_lo, r_hi),
/// ordered by q then p.
std::vector<Horoball> enumerate_horoballs(const Interval<Rational>& B, const Rational& r_lo, const Rational& r_hi,
                                          std::uint64_t cap = kHoroballCap);

/// #A_lambda(B, R): bases in [B.lo, B.hi) with lambda R <= radius < R.
std::uint64_t horoball_count(const Interval<Rational>& B, const Rational& R, const Rational& lambda);

struct HoroballCount {
  std::uint64_t count;
  /// count * R / m(B)
  double ratio;
};
/// Throws DomainError when no denominator falls in the radius window.
HoroballCount horoball_count_ratio(const Interval<Rational>& B, const Rational& R, const Rational& lambda);

struct PairCheck {
  std::int64_t delta;  // pq' - p'q
  /// Numerators over 4 q^4 q'^4 of
  /// (p/q - p'/q')^2 - (r + r')^2 + (r - r')^2 and ((pq' - p'q)^2 - 1)/(qq')^2.
  __int128 lhs;
  __int128 rhs;
  bool tangent;   // lhs == 0: centre distance equals r + r'
  bool disjoint;  // lhs >= 0: interiors do not meet
};
PairCheck check_pair(std::int64_t p, std::int64_t q, std::int64_t p2, std::int64_t q2);

struct DisjointnessReport {
  std::int64_t q_max = 0;
  std::uint64_t circles = 0;
  std::uint64_t pairs = 0;
  std::uint64_t tangent_pairs = 0;
  std::uint64_t identity_failures = 0;
  std::uint64_t overlaps = 0;
  /// tangent but not Farey neighbours, or the reverse
  std::uint64_t tangency_mismatches = 0;
  bool ok() const { return identity_failures == 0 && overlaps == 0 && tangency_mismatches == 0; }
};

/// Every pair of Ford circles with bases in [0,1] and q, q' <= q_max.
DisjointnessReport disjointness_check(std::int64_t q_max);

}  // namespace ubiq
