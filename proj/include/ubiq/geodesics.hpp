#pragma once

// Continued fractions and the geodesic flow on the modular surface: rays from
// i toward a boundary point, reduction into the standard fundamental domain,
// cusp excursions and finite-time log-law statistics.

#include <complex>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ubiq/bigfloat.hpp"
#include "ubiq/functions.hpp"
#include "ubiq/rational.hpp"

namespace ubiq {

// ---------------------------------------------------------------- continued fractions

struct CFExpansion {
  double x = 0.0;
  /// a_1, a_2, ... of x - floor(x) = [0; a_1, a_2, ...].
  std::vector<std::int64_t> quotients;
  /// (p_n, q_n) for n = 0..size: p_0/q_0 = 0/1, then one per quotient.
  std::vector<std::pair<Integer, Integer>> convergents;
  /// The input was rational and its expansion ended before the requested depth.
  bool terminated = false;
  /// The certified prefix is shorter than the requested depth.
  bool precision_exhausted = false;

  std::size_t depth() const { return quotients.size(); }
};

/// Exact expansion of a rational.
CFExpansion cf_expand(const Rational& x, std::size_t depth);
/// Quotients shared by every real in [lo, hi].
CFExpansion cf_expand_interval(const Rational& lo, const Rational& hi, std::size_t depth);
/// Certified prefix for the real known only to within one ulp of x.
CFExpansion cf_expand(double x, std::size_t depth);
/// (P + sqrt(D)) / Q with D a non-square and Q | D - P^2; exact to any depth.
CFExpansion cf_expand_quadratic(const Integer& P, const Integer& D, const Integer& Q, std::size_t depth);

/// log2(1 + 1/(k(k+2))).
double gauss_kuzmin_probability(std::int64_t k);

struct GaussKuzminResult {
  std::int64_t samples = 0;
  std::int64_t depth = 0;
  std::int64_t digits = 0;  // quotients examined
  std::int64_t truncated = 0;  // samples whose certified prefix fell short
  /// frequency[k] for k = 1..kmax; index 0 unused.
  std::vector<double> frequency;
};

/// Quotient frequencies of random `bits`-bit dyadic numbers in (0,1).
GaussKuzminResult gauss_kuzmin_experiment(std::int64_t samples, std::size_t depth, std::uint64_t seed,
                                          std::int64_t kmax = 10, unsigned bits = 4096, int threads = 1);

// ---------------------------------------------------------------- geometry

using Complex = std::complex<double>;

struct GeodesicState {
  Complex z;
  double t = 0.0;
};

/// Ray from i toward x at hyperbolic time t; x = +inf gives i e^t.
GeodesicState geodesic_point(double x, double t);

double hyperbolic_distance(Complex z, Complex w);

struct Mat2 {
  std::int64_t a = 1, b = 0, c = 0, d = 1;
  std::int64_t det() const { return a * d - b * c; }
  Mat2 operator*(const Mat2& o) const;
  std::complex<long double> apply(std::complex<long double> z) const;
  friend bool operator==(const Mat2&, const Mat2&) = default;
};

struct Reduction {
  Complex z;
  Mat2 word;  // word . input = z
};

/// Into |Re| <= 1/2, |z| >= 1.
Reduction reduce_to_fundamental(Complex z, int max_steps = 100000);

/// log Im z above the horocycle Im = 1, else 0.
double penetration(Complex reduced);

// ---------------------------------------------------------------- boundary points

/// A real direction held to a fixed binary precision.
class BoundaryPoint {
 public:
  static BoundaryPoint from_double(double x, unsigned bits);
  static BoundaryPoint from_rational(const Rational& x, unsigned bits);
  /// (sqrt 5 - 1)/2.
  static BoundaryPoint golden(unsigned bits);
  /// sqrt 2 - 1.
  static BoundaryPoint sqrt2_minus_1(unsigned bits);
  /// [0; prefix..., 1, 1, 1, ...].
  static BoundaryPoint planted(const std::vector<std::int64_t>& prefix, unsigned bits);
  /// Uniform dyadic in (0,1) with `bits` random bits.
  static BoundaryPoint random(std::mt19937_64& rng, unsigned bits);

  /// Precision that keeps the tracker exact up to time T.
  static unsigned bits_for(double T);

  const BigFloat& value() const { return x_; }
  double to_double() const { return x_.to_double(); }
  unsigned bits() const { return static_cast<unsigned>(x_.precision()); }
  std::string label() const { return label_; }
  CFExpansion cf(std::size_t depth) const;

 private:
  BigFloat x_;
  std::string label_;
  // Known digits: prefix, then `period` repeated forever.
  std::vector<std::int64_t> prefix_;
  std::vector<std::int64_t> period_;
};

/// Follows the ray from i toward a BoundaryPoint in a moving SL(2,Z) frame.
/// Each frame keeps the current stretch of geodesic near the fundamental
/// domain, so samples inside it are evaluated in double; frame endpoints come
/// from the high-precision boundary point.
class GeodesicTracker {
 public:
  explicit GeodesicTracker(const BoundaryPoint& x, double frame_span = 4.0);

  struct Sample {
    double t;
    Complex reduced;
    double pen;
  };
  Sample sample(double t);
  /// Bottom row (c, d) of the word reducing the point at time t, signed so
  /// that c > 0 or c = 0 < d. The visited cusp is -d/c.
  std::pair<Integer, Integer> cusp(double t);

 private:
  struct Frame {
    double t0;
    Integer A, B, C, D;
    double a, b, y0;  // endpoints behind and ahead, height at t0 in the frame's chart
  };
  const Frame& frame_for(double t);
  void push_frame(double t0, const Integer& A, const Integer& B, const Integer& C, const Integer& D, Complex w);
  static Complex eval(const Frame& f, double t);

  BoundaryPoint x_;
  double span_;
  std::deque<Frame> frames_;
};

struct ExcursionRecord {
  int index = 0;
  double t_enter = 0, t_peak = 0, t_exit = 0;
  double peak_pen = 0;
  std::optional<int> convergent_index;
  /// a_{n+1} for the matched convergent p_n/q_n.
  std::optional<std::int64_t> next_quotient;
};

struct ExcursionResult {
  std::vector<ExcursionRecord> records;
  std::vector<std::string> warnings;
};

/// Measured peak pen stays within this of log a_{n+1}; calibrated once on planted
/// quotients 10..10^6 at several positions and then frozen.
inline constexpr double kPenetrationConstant = 1.0;

ExcursionResult excursions(const BoundaryPoint& x, double T, double step);

/// max over sampled t in (e, T] of (pen - alpha t) / log t.
double loglaw_statistic(const BoundaryPoint& x, double T, double alpha, double step);

/// Running values of the statistic at each requested horizon from one pass.
std::vector<double> loglaw_statistic_at(const BoundaryPoint& x, const std::vector<double>& horizons, double alpha,
                                        double step);

struct SandwichCounts {
  std::int64_t hits = 0;
  std::int64_t violations = 0;
};

/// Ford bases p/q, 2 <= q <= Q, within psi(2q^2) resp. psi_eps(2q^2) of x, where
/// psi(r) = r^-tau (log r)^-tau and psi_eps(r) = r^-tau (log r)^-tau(1+eps).
/// q = 1 is skipped: log 2 < 1 there, so psi_eps > psi.
SandwichCounts sandwich_membership(double x, const Rational& tau, const Rational& eps, std::int64_t Q);

}  // namespace ubiq
