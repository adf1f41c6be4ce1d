#include "ubiq/ubiquity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ubiq/errors.hpp"

namespace ubiq {

namespace {

Rational power_of(const Rational& k, int n) {
  Rational out = 1;
  for (int i = 0; i < n; ++i) out *= k;
  return out;
}

double log_sum_exp(const std::vector<double>& logs) {
  double peak = -std::numeric_limits<double>::infinity();
  for (double l : logs) peak = std::max(peak, l);
  if (!std::isfinite(peak)) return peak;
  long double acc = 0;
  for (double l : logs) acc += std::exp(static_cast<long double>(l - peak));
  return peak + static_cast<double>(std::log(acc));
}

}  // namespace

Interval<Rational> Ball::clipped() const {
  Rational lo = center - radius, hi = center + radius;
  if (lo < 0) lo = 0;
  if (hi > 1) hi = 1;
  if (hi < lo) hi = lo;
  return {lo, hi};
}

UbiquityRatio ubiquity_ratio(const ResonantSystem& system, const FunctionForm& rho, const Rational& k, int n,
                             const Ball& ball, const StageOptions& options) {
  if (ball.radius <= 0) throw ValidationError("ball radius must be positive");
  Interval<Rational> w = ball.clipped();
  Rational len = w.hi - w.lo;
  if (len <= 0) throw ValidationError("ball does not meet [0,1]");
  StageSpec spec(system, Uniform{rho}, k, n);
  StageOptions opt = options;
  opt.allow_closed_form = false;  // the closed form only covers the whole interval
  StageMeasure m = stage_measure(spec, w, opt);
  UbiquityRatio out;
  out.method = m.method;
  if (m.exact) {
    out.exact = *m.exact / len;
    out.value = out.exact->get_d();
  } else {
    out.value = m.value / len.get_d();
  }
  if (out.value < 0 || out.value > 1 + 1e-12) throw InvariantViolation("ubiquity ratio outside [0,1]");
  return out;
}

std::vector<UbiquityReport> estimate_kappa(const ResonantSystem& system, const FunctionForm& rho, const Rational& k,
                                           const std::vector<Ball>& balls, int n_first, int n_last, double target,
                                           const StageOptions& options) {
  if (n_last < n_first) throw ValidationError("empty n-range: kappa is undefined");
  if (n_first < 1) throw ValidationError("n-range must start at 1 or later");
  std::vector<UbiquityReport> out;
  out.reserve(balls.size());
  for (const auto& ball : balls) {
    UbiquityReport rep{ball, k, rho, {}, 1.0, n_first, std::nullopt};
    for (int n = n_first; n <= n_last; ++n) {
      double r = ubiquity_ratio(system, rho, k, n, ball, options).value;
      rep.per_n.emplace_back(n, r);
      rep.kappa_hat = std::min(rep.kappa_hat, r);
      if (!rep.n_o && r >= target) rep.n_o = n;
    }
    out.push_back(std::move(rep));
  }
  return out;
}

double empirical_kappa(const std::vector<UbiquityReport>& reports) {
  if (reports.empty()) throw ValidationError("no balls: kappa is undefined");
  double k = 1.0;
  for (const auto& r : reports) k = std::min(k, r.kappa_hat);
  return k;
}

std::vector<Ball> random_balls(std::mt19937_64& rng, int count, const Rational& min_length, long den) {
  if (min_length <= 0 || min_length > 1) throw ValidationError("min_length must lie in (0,1]");
  if (den < 2) throw ValidationError("grid denominator too small");
  Rational grid_min = min_length * den;
  Integer steps;
  mpz_cdiv_q(steps.get_mpz_t(), grid_min.get_num_mpz_t(), grid_min.get_den_mpz_t());
  long min_steps = steps.get_si();
  std::vector<Ball> out;
  std::uniform_int_distribution<long> len_dist(min_steps, den);
  for (int i = 0; i < count; ++i) {
    long len = len_dist(rng);
    std::uniform_int_distribution<long> start_dist(0, den - len);
    long lo = start_dist(rng);
    Rational lo_q(lo, den), len_q(len, den);
    lo_q.canonicalize();
    len_q.canonicalize();
    out.push_back({lo_q + len_q / 2, len_q / 2});
  }
  return out;
}

long double stage_ball_count(const ResonantSystem& system, const Rational& k, int n, bool uniform_window) {
  Rational hi = power_of(k, n);
  Rational lo = uniform_window ? Rational(0) : power_of(k, n - 1);
  auto [qLo, qHi] = system.denominator_window(lo, hi);
  if (qHi < qLo) return 0;
  if (!system.coprime_only()) {
    long double a = qLo, b = qHi;
    return (b - a + 1) * (a + b) / 2 + (b - a + 1);
  }
  if (qHi > 50'000'000) throw ResourceCapError("totient count beyond q = 5e7");
  return static_cast<long double>(enumerate_count(system, lo, hi));
}

CoverSum natural_cover_sum(const FunctionForm& f, const FunctionForm& psi, const ResonantSystem& system,
                           const Rational& k, int m_start, int m_end, bool uniform_windows) {
  if (k <= 1) throw ValidationError("k must exceed 1");
  if (m_start < 1 || m_end < m_start) throw ValidationError("cover sum needs 1 <= m_start <= m_end");
  CoverSum out;
  const double logk = std::log(k.get_d());
  for (int n = m_start; n <= m_end; ++n) {
    long double count = stage_ball_count(system, k, n, uniform_windows);
    double term = -std::numeric_limits<double>::infinity();
    if (count > 0 && !f.is_zero() && !psi.is_zero()) {
      double lpsi = log_evaluate(psi, n * logk);
      term = static_cast<double>(std::log(count)) + log_evaluate(f, lpsi);
    }
    out.log_terms.push_back(term);
  }
  out.log_value = log_sum_exp(out.log_terms);
  out.value = std::exp(out.log_value);
  try {
    Rational u = system.kind() == SystemKind::ClassicalRationals ? Rational(1) : Rational(0);
    out.symbolic = series_classify(SeriesSpec(u, f, psi));
  } catch (const ValidationError&) {
    out.symbolic.reset();
  }
  return out;
}

}  // namespace ubiq
