#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <gmpxx.h>

namespace ubiq {

using Rational = mpq_class;
using Integer = mpz_class;
using i128 = __int128;

/// Parses "3", "-3/2", "0.25", "1e-3" or "2.5e2" into an exact rational.
Rational parse_rational(std::string_view text);

std::string to_string(const Rational& q);
std::string to_string(i128 v);

inline double to_double(const Rational& q) { return q.get_d(); }

/// Exact conversion of a finite double to a rational.
Rational from_double(double x);

/// Sum of many rationals by pairwise reduction; much faster than a running
/// sum when the denominators are pairwise coprime-ish.
Rational tree_sum(std::vector<Rational> terms);

std::int64_t floor_div(std::int64_t a, std::int64_t b);
std::int64_t ceil_div(std::int64_t a, std::int64_t b);

/// floor(sqrt(n)) for n >= 0.
std::uint64_t isqrt(std::uint64_t n);

/// Converts to int64 when it fits.
bool fits_int64(const Integer& z);
std::int64_t to_int64(const Integer& z);

Integer to_integer(i128 v);

/// Integer k^n when k is integral and the result fits in int64; -1 otherwise.
std::int64_t checked_ipow(std::int64_t k, int n);

}  // namespace ubiq
