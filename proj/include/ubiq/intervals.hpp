#pragma once

// Finite unions of subintervals of [0,1]. Endpoints are either exact
// rationals or doubles; open/closed is not tracked (touching pieces merge).

#include <algorithm>
#include <ostream>
#include <vector>

#include "ubiq/rational.hpp"

namespace ubiq {

enum class ArithmeticMode { Exact, Float };

template <class Scalar>
struct Interval {
  Scalar lo;
  Scalar hi;

  friend bool operator==(const Interval& a, const Interval& b) { return a.lo == b.lo && a.hi == b.hi; }
};

template <class Scalar>
class IntervalSet {
 public:
  static constexpr ArithmeticMode mode =
      std::is_same_v<Scalar, Rational> ? ArithmeticMode::Exact : ArithmeticMode::Float;

  IntervalSet() = default;

  /// Clips to [0,1], sorts and merges overlapping or touching pieces.
  static IntervalSet normalize(std::vector<Interval<Scalar>> raw) {
    IntervalSet out;
    const Scalar zero(0), one(1);
    std::vector<Interval<Scalar>> clipped;
    clipped.reserve(raw.size());
    for (auto& iv : raw) {
      Scalar lo = iv.lo < zero ? zero : iv.lo;
      Scalar hi = iv.hi > one ? one : iv.hi;
      if (lo < hi) clipped.push_back({std::move(lo), std::move(hi)});
    }
    std::sort(clipped.begin(), clipped.end(), [](const auto& a, const auto& b) { return a.lo < b.lo; });
    for (auto& iv : clipped) {
      if (!out.pieces_.empty() && !(out.pieces_.back().hi < iv.lo)) {
        if (out.pieces_.back().hi < iv.hi) out.pieces_.back().hi = iv.hi;
      } else {
        out.pieces_.push_back(std::move(iv));
      }
    }
    return out;
  }

  /// Adopts pieces already sorted, clipped and separated.
  static IntervalSet from_normalized(std::vector<Interval<Scalar>> pieces) {
    IntervalSet out;
    out.pieces_ = std::move(pieces);
    return out;
  }

  const std::vector<Interval<Scalar>>& intervals() const { return pieces_; }
  bool empty() const { return pieces_.empty(); }
  std::size_t size() const { return pieces_.size(); }

  Scalar measure() const {
    if constexpr (std::is_same_v<Scalar, Rational>) {
      std::vector<Rational> lengths;
      lengths.reserve(pieces_.size());
      for (const auto& iv : pieces_) lengths.push_back(iv.hi - iv.lo);
      return tree_sum(std::move(lengths));
    } else {
      long double total = 0;
      for (const auto& iv : pieces_) total += static_cast<long double>(iv.hi) - iv.lo;
      return static_cast<Scalar>(total);
    }
  }

  IntervalSet unite(const IntervalSet& other) const {
    std::vector<Interval<Scalar>> all = pieces_;
    all.insert(all.end(), other.pieces_.begin(), other.pieces_.end());
    return normalize(std::move(all));
  }

  IntervalSet intersect(const IntervalSet& other) const {
    std::vector<Interval<Scalar>> out;
    std::size_t i = 0, j = 0;
    while (i < pieces_.size() && j < other.pieces_.size()) {
      const auto& a = pieces_[i];
      const auto& b = other.pieces_[j];
      const Scalar& lo = a.lo < b.lo ? b.lo : a.lo;
      const Scalar& hi = a.hi < b.hi ? a.hi : b.hi;
      if (lo < hi) out.push_back({lo, hi});
      if (a.hi < b.hi)
        ++i;
      else
        ++j;
    }
    return from_normalized(std::move(out));
  }

  /// True when every piece of `other` lies inside a piece of this set.
  bool contains(const IntervalSet& other) const {
    std::size_t i = 0;
    for (const auto& b : other.pieces_) {
      while (i < pieces_.size() && pieces_[i].hi < b.hi) ++i;
      if (i == pieces_.size() || b.lo < pieces_[i].lo) return false;
    }
    return true;
  }

  bool contains_point(const Scalar& x) const {
    auto it = std::upper_bound(pieces_.begin(), pieces_.end(), x,
                               [](const Scalar& v, const Interval<Scalar>& iv) { return v < iv.lo; });
    if (it == pieces_.begin()) return false;
    --it;
    return !(it->hi < x);
  }

  friend bool operator==(const IntervalSet& a, const IntervalSet& b) { return a.pieces_ == b.pieces_; }

 private:
  std::vector<Interval<Scalar>> pieces_;
};

using ExactSet = IntervalSet<Rational>;
using FloatSet = IntervalSet<double>;

/// s intersected with (center - radius, center + radius) and [0,1].
template <class Scalar>
IntervalSet<Scalar> intersect_ball(const IntervalSet<Scalar>& s, const Scalar& center, const Scalar& radius) {
  if (!(radius > Scalar(0))) return {};
  auto ball = IntervalSet<Scalar>::normalize({{center - radius, center + radius}});
  return s.intersect(ball);
}

inline ExactSet intersect_ball(const ExactSet& s, const Rational& center, double radius) {
  return intersect_ball(s, center, from_double(radius));
}

inline FloatSet to_float(const ExactSet& s) {
  std::vector<Interval<double>> out;
  for (const auto& iv : s.intervals()) out.push_back({iv.lo.get_d(), iv.hi.get_d()});
  return FloatSet::normalize(std::move(out));
}

/// One `lo,hi` row per piece under a header.
template <class Scalar>
void write_csv(std::ostream& os, const IntervalSet<Scalar>& s) {
  os << "lo,hi\n";
  for (const auto& iv : s.intervals()) {
    if constexpr (std::is_same_v<Scalar, Rational>)
      os << iv.lo.get_str() << ',' << iv.hi.get_str() << '\n';
    else
      os << iv.lo << ',' << iv.hi << '\n';
  }
}

}  // namespace ubiq
