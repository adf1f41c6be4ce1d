#include "ubiq/rational.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

#include "ubiq/errors.hpp"

namespace ubiq {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

Rational parse_decimal(std::string_view s, std::string_view whole) {
  bool negative = false;
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) {
    negative = s.front() == '-';
    s.remove_prefix(1);
  }
  long exponent = 0;
  auto epos = s.find_first_of("eE");
  if (epos != std::string_view::npos) {
    std::string exp_text(s.substr(epos + 1));
    if (exp_text.empty()) throw ValidationError("malformed number: " + std::string(whole));
    std::size_t used = 0;
    try {
      exponent = std::stol(exp_text, &used);
    } catch (const std::exception&) {
      throw ValidationError("malformed number: " + std::string(whole));
    }
    if (used != exp_text.size()) throw ValidationError("malformed number: " + std::string(whole));
    s = s.substr(0, epos);
  }
  std::string digits;
  long frac_digits = 0;
  bool seen_point = false;
  for (char c : s) {
    if (c == '.') {
      if (seen_point) throw ValidationError("malformed number: " + std::string(whole));
      seen_point = true;
    } else if (std::isdigit(static_cast<unsigned char>(c))) {
      digits.push_back(c);
      if (seen_point) ++frac_digits;
    } else {
      throw ValidationError("malformed number: " + std::string(whole));
    }
  }
  if (digits.empty()) throw ValidationError("malformed number: " + std::string(whole));
  Integer num(digits, 10);
  long scale = exponent - frac_digits;
  Integer ten_pow;
  mpz_ui_pow_ui(ten_pow.get_mpz_t(), 10, static_cast<unsigned long>(std::labs(scale)));
  Rational q = scale >= 0 ? Rational(num * ten_pow) : Rational(num, ten_pow);
  q.canonicalize();
  return negative ? Rational(-q) : q;
}

}  // namespace

Rational parse_rational(std::string_view text) {
  auto s = trim(text);
  if (s.empty()) throw ValidationError("empty number");
  auto slash = s.find('/');
  if (slash == std::string_view::npos) return parse_decimal(s, text);
  Rational num = parse_decimal(trim(s.substr(0, slash)), text);
  Rational den = parse_decimal(trim(s.substr(slash + 1)), text);
  if (den == 0) throw ValidationError("zero denominator: " + std::string(text));
  return num / den;
}

std::string to_string(const Rational& q) {
  return q.get_str();
}

std::string to_string(i128 v) {
  if (v == 0) return "0";
  bool negative = v < 0;
  unsigned __int128 u = negative ? static_cast<unsigned __int128>(-(v + 1)) + 1 : static_cast<unsigned __int128>(v);
  std::string out;
  while (u > 0) {
    out.push_back(static_cast<char>('0' + static_cast<int>(u % 10)));
    u /= 10;
  }
  if (negative) out.push_back('-');
  std::reverse(out.begin(), out.end());
  return out;
}

Rational from_double(double x) {
  if (!std::isfinite(x)) throw ValidationError("non-finite value");
  Rational q;
  mpq_set_d(q.get_mpq_t(), x);
  return q;
}

Rational tree_sum(std::vector<Rational> terms) {
  if (terms.empty()) return Rational(0);
  while (terms.size() > 1) {
    std::size_t half = (terms.size() + 1) / 2;
    for (std::size_t i = 0; i + half < terms.size(); ++i) terms[i] += terms[i + half];
    terms.resize(half);
  }
  return terms.front();
}

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

std::int64_t ceil_div(std::int64_t a, std::int64_t b) {
  return -floor_div(-a, b);
}

std::uint64_t isqrt(std::uint64_t n) {
  auto r = static_cast<std::uint64_t>(std::sqrt(static_cast<long double>(n)));
  while (r > 0 && static_cast<unsigned __int128>(r) * r > n) --r;
  while (static_cast<unsigned __int128>(r + 1) * (r + 1) <= n) ++r;
  return r;
}

bool fits_int64(const Integer& z) {
  return mpz_fits_slong_p(z.get_mpz_t()) != 0;
}

std::int64_t to_int64(const Integer& z) {
  if (!fits_int64(z)) throw InvariantViolation("integer does not fit in 64 bits");
  return z.get_si();
}

Integer to_integer(i128 v) {
  bool negative = v < 0;
  unsigned __int128 u = negative ? static_cast<unsigned __int128>(-(v + 1)) + 1 : static_cast<unsigned __int128>(v);
  Integer hi(static_cast<unsigned long>(u >> 64));
  Integer lo(static_cast<unsigned long>(u & 0xffffffffffffffffULL));
  Integer out = (hi << 64) + lo;
  return negative ? Integer(-out) : out;
}

std::int64_t checked_ipow(std::int64_t k, int n) {
  std::int64_t out = 1;
  for (int i = 0; i < n; ++i) {
    if (out > std::numeric_limits<std::int64_t>::max() / k) return -1;
    out *= k;
  }
  return out;
}

}  // namespace ubiq
