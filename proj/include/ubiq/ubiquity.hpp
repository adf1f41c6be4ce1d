#pragma once

// Local ubiquity of a resonant system: the ratio m(B ∩ Delta(rho, n)) / m(B),
// its infimum over stages (kappa), and natural-cover sums.

#include <cstdint>
#include <optional>
#include <random>
#include <vector>

#include "ubiq/functions.hpp"
#include "ubiq/systems.hpp"

namespace ubiq {

struct Ball {
  Rational center;
  Rational radius;

  /// B ∩ [0,1].
  Interval<Rational> clipped() const;
};

struct UbiquityRatio {
  double value = 0.0;
  std::optional<Rational> exact;
  StageMethod method = StageMethod::Empty;
};

/// m(B ∩ Delta(rho, n)) / m(B) with the common radius rho(k^n) over J(n).
UbiquityRatio ubiquity_ratio(const ResonantSystem& system, const FunctionForm& rho, const Rational& k, int n,
                             const Ball& ball, const StageOptions& options = {});

struct UbiquityReport {
  Ball ball;
  Rational k;
  FunctionForm rho;
  std::vector<std::pair<int, double>> per_n;
  double kappa_hat = 0.0;
  int n_min = 0;
  /// Smallest n in range with ratio >= target, if any.
  std::optional<int> n_o;
};

/// One report per ball over n in [n_first, n_last]; an empty range is an error.
std::vector<UbiquityReport> estimate_kappa(const ResonantSystem& system, const FunctionForm& rho, const Rational& k,
                                           const std::vector<Ball>& balls, int n_first, int n_last,
                                           double target = 0.5, const StageOptions& options = {});

/// min kappa_hat over the reports.
double empirical_kappa(const std::vector<UbiquityReport>& reports);

/// `count` balls inside [0,1] of length >= min_length with endpoints on the grid 1/den.
std::vector<Ball> random_balls(std::mt19937_64& rng, int count, const Rational& min_length, long den = 1000);

struct CoverSum {
  double value = 0.0;      // may be +inf
  double log_value = 0.0;  // log of value
  std::vector<double> log_terms;
  std::optional<Verdict> symbolic;
};

/// sum_{n=m_start}^{m_end} #(balls in stage n) * f(psi(k^n)).
/// With uniform_windows the stage holds every weight <= k^n.
CoverSum natural_cover_sum(const FunctionForm& f, const FunctionForm& psi, const ResonantSystem& system,
                           const Rational& k, int m_start, int m_end, bool uniform_windows = false);

/// Number of balls in stage n as a long double (exact below 2^64).
long double stage_ball_count(const ResonantSystem& system, const Rational& k, int n, bool uniform_window);

}  // namespace ubiq
