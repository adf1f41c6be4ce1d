#pragma once

// Symbolic power x log x log-log (and exp(-r^w)) function families, exact
// convergence decisions for the volume sums built from them, k-regularity
// and critical exponents.

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ubiq/rational.hpp"

namespace ubiq {

enum class Family { PowerLog, ExpPower };

/// AtInfinity: r -> scale r^a (log r)^b (log log r)^c for large r.
/// AtZero:     r -> scale r^a (log 1/r)^b (log log 1/r)^c for small r.
enum class Regime { AtInfinity, AtZero };

/// Approximating functions must eventually decrease; dimension functions
/// must increase to 0 at 0. Generic forms carry no monotonicity contract.
enum class Role { Generic, Approximating, Dimension };

class FunctionForm {
 public:
  static FunctionForm power_log(Rational scale, Rational power, Rational log_power = 0,
                                Rational loglog_power = 0, Regime regime = Regime::AtInfinity,
                                Role role = Role::Generic);
  /// r -> exp(-r^omega).
  static FunctionForm exp_power(Rational omega, Role role = Role::Generic);
  /// The identically zero function.
  static FunctionForm zero();
  static FunctionForm identity() { return power_log(1, 1); }

  /// Grammar: `scale * r^a * log(r)^b * loglog(r)^c`, `exp(-r^w)`, or `0`.
  /// `log(1/r)` / `loglog(1/r)` select the small-r regime.
  static FunctionForm parse(std::string_view text, Role role = Role::Generic);

  Family family() const { return family_; }
  Regime regime() const { return regime_; }
  Role role() const { return role_; }
  const Rational& scale() const { return scale_; }
  const Rational& power() const { return power_; }
  const Rational& log_power() const { return log_power_; }
  const Rational& loglog_power() const { return loglog_power_; }
  const Rational& omega() const { return omega_; }

  bool is_zero() const { return family_ == Family::PowerLog && scale_ == 0; }
  bool has_logs() const { return log_power_ != 0 || loglog_power_ != 0; }
  /// Pure power scale * r^a: meaningful in either regime.
  bool is_pure_power() const { return family_ == Family::PowerLog && !has_logs(); }
  /// Eventually decreasing to zero as r -> infinity.
  bool decays_at_infinity() const;

  /// Domain is (domain_lo, domain_hi), closed at 0 for ExpPower.
  double domain_lo() const;
  double domain_hi() const;
  bool in_domain(double r) const;

  /// Exact rational value at a rational point when all factors are
  /// rational there (PowerLog, no logs, integral power).
  std::optional<Rational> exact_value(const Rational& r) const;

  std::string to_string() const;

  FunctionForm with_role(Role role) const;

  friend bool operator==(const FunctionForm&, const FunctionForm&) = default;

 private:
  FunctionForm() = default;
  void validate() const;

  Family family_ = Family::PowerLog;
  Regime regime_ = Regime::AtInfinity;
  Role role_ = Role::Generic;
  Rational scale_ = 1;
  Rational power_ = 0;
  Rational log_power_ = 0;
  Rational loglog_power_ = 0;
  Rational omega_ = 0;
};

double evaluate(const FunctionForm& form, double r);

/// log(form(r)) given log r; usable far beyond double range of r.
/// Returns -inf for the zero function.
double log_evaluate(const FunctionForm& form, double log_r);

enum class Verdict { Convergent, Divergent };

std::string to_string(Verdict v);

/// summand ~ constant * exp(-exp_coeff * r^exp_omega) * r^A (log r)^B (log log r)^C
struct Asymptotic {
  Rational A = 0;
  Rational B = 0;
  Rational C = 0;
  Rational exp_coeff = 0;
  Rational exp_omega = 0;
  double constant = 1.0;
  bool zero = false;
};

/// outer(inner(r)) as r -> infinity, inside the closed family.
/// Throws NotClosedError when the composition leaves it.
Asymptotic compose(const FunctionForm& outer, const FunctionForm& inner);

/// Integral test on the closed family.
Verdict classify(const Asymptotic& summand);

/// sum_{r >= r0} r^u f(psi(r)); f absent means identity.
class SeriesSpec {
 public:
  SeriesSpec(Rational weight_power, std::optional<FunctionForm> outer, FunctionForm inner);

  /// `r^U * (PSI)` or just `(PSI)` / `PSI`; the outer function is given separately.
  static SeriesSpec parse(std::string_view text, std::optional<FunctionForm> outer = std::nullopt);

  const Rational& weight_power() const { return weight_power_; }
  const std::optional<FunctionForm>& outer() const { return outer_; }
  const FunctionForm& inner() const { return inner_; }
  const Asymptotic& summand() const { return summand_; }
  /// First integer index where every log in the summand is positive.
  long start_index() const;

  std::string to_string() const;

 private:
  Rational weight_power_;
  std::optional<FunctionForm> outer_;
  FunctionForm inner_;
  Asymptotic summand_;
};

Verdict series_classify(const SeriesSpec& spec);

struct ExtendedRational {
  bool infinite = false;
  Rational value = 0;

  static ExtendedRational inf() { return {true, 0}; }
  std::string to_string() const;
  friend bool operator==(const ExtendedRational& a, const ExtendedRational& b) {
    return a.infinite == b.infinite && (a.infinite || a.value == b.value);
  }
};

/// inf{ s >= 0 : sum r^u psi(r)^s < infinity }.
ExtendedRational critical_exponent(const FunctionForm& psi, const Rational& weight_power);

/// f_s(r) = (log 1/r)^(-s).
FunctionForm log_dimension_function(const Rational& s);
/// f_eps(r) = (log 1/r)^(-n/omega) (log log 1/r)^(-(1+eps)).
FunctionForm liouville_dimension_function(const Rational& omega, long n, const Rational& eps);

/// inf{ s : sum r^(n-1) f_s(exp(-r^omega)) < infinity } = n / omega.
Rational log_critical_exponent(const Rational& omega, long n);

/// Classifies sum r^(n-1) f_eps(exp(-r^omega)).
Verdict liouville_family_classify(const Rational& omega, long n, const Rational& eps);

struct KRegularity {
  bool regular = false;
  /// lim h(k^{n+1}) / h(k^n): k^a for PowerLog, 0 for ExpPower.
  double limit_ratio = 1.0;
  bool numeric_regular = false;
  bool numeric_agrees = false;
  /// h(k^{n+1}) / h(k^n) for n in [n_lo, n_hi].
  std::vector<double> ratios;
};

KRegularity is_k_regular(const FunctionForm& form, double k, int n_lo = 10, int n_hi = 60);

enum class GKind { Zero, Finite, Infinite };

std::string to_string(GKind kind);

struct GResult {
  GKind kind = GKind::Zero;
  /// Limit of g(k^n) when kind == Finite.
  double value = 0.0;
  /// g(k^n) for n = 1..n_max (NaN outside the domain).
  std::vector<double> scan;
  bool numeric_agrees = false;
};

/// g(r) = f(psi(r)) rho(r)^(-delta), G = limsup g(k^n).
GResult compute_G(const FunctionForm& f, const FunctionForm& psi, const FunctionForm& rho,
                  const Rational& delta, double k, int n_max);

}  // namespace ubiq
