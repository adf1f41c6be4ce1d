#include "ubiq/functions.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "ubiq/errors.hpp"

namespace ubiq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

std::string exponent_text(const Rational& e) {
  if (e.get_den() == 1) return e.get_str();
  return "(" + e.get_str() + ")";
}

double rpow(double base, const Rational& e) {
  if (e == 0) return 1.0;
  if (e.get_den() == 1 && fits_int64(e.get_num())) {
    long n = e.get_num().get_si();
    if (n == 1) return base;
    if (n == -1) return 1.0 / base;
    return std::pow(base, static_cast<double>(n));
  }
  return std::pow(base, e.get_d());
}

std::string strip_spaces(std::string_view s) {
  std::string out;
  for (char c : s)
    if (!std::isspace(static_cast<unsigned char>(c))) out.push_back(c);
  return out;
}

// Splits on '*' outside parentheses.
std::vector<std::string> split_factors(const std::string& s) {
  std::vector<std::string> out;
  int depth = 0;
  std::string cur;
  for (char c : s) {
    if (c == '(') ++depth;
    if (c == ')') --depth;
    if (depth < 0) throw ValidationError("unbalanced parentheses in: " + s);
    if (c == '*' && depth == 0) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (depth != 0) throw ValidationError("unbalanced parentheses in: " + s);
  out.push_back(cur);
  return out;
}

Rational parse_exponent(std::string_view text) {
  if (text.size() >= 2 && text.front() == '(' && text.back() == ')') text = text.substr(1, text.size() - 2);
  return parse_rational(text);
}

// Matches `head` optionally followed by `^E`; returns the exponent.
std::optional<Rational> match_power(const std::string& factor, std::string_view head) {
  if (factor.compare(0, head.size(), head) != 0) return std::nullopt;
  std::string_view rest(factor);
  rest.remove_prefix(head.size());
  if (rest.empty()) return Rational(1);
  if (rest.front() != '^') return std::nullopt;
  rest.remove_prefix(1);
  return parse_exponent(rest);
}

}  // namespace

// ---------------------------------------------------------------------------
// FunctionForm

FunctionForm FunctionForm::power_log(Rational scale, Rational power, Rational log_power,
                                     Rational loglog_power, Regime regime, Role role) {
  FunctionForm f;
  f.family_ = Family::PowerLog;
  f.regime_ = regime;
  f.role_ = role;
  f.scale_ = std::move(scale);
  f.power_ = std::move(power);
  f.log_power_ = std::move(log_power);
  f.loglog_power_ = std::move(loglog_power);
  f.validate();
  return f;
}

FunctionForm FunctionForm::exp_power(Rational omega, Role role) {
  FunctionForm f;
  f.family_ = Family::ExpPower;
  f.role_ = role;
  f.omega_ = std::move(omega);
  f.validate();
  return f;
}

FunctionForm FunctionForm::zero() {
  FunctionForm f;
  f.scale_ = 0;
  return f;
}

FunctionForm FunctionForm::with_role(Role role) const {
  FunctionForm f = *this;
  f.role_ = role;
  f.validate();
  return f;
}

bool FunctionForm::decays_at_infinity() const {
  if (family_ == Family::ExpPower) return true;
  if (is_zero()) return true;
  if (power_ != 0) return power_ < 0;
  if (log_power_ != 0) return log_power_ < 0;
  return loglog_power_ < 0;
}

void FunctionForm::validate() const {
  if (family_ == Family::ExpPower) {
    if (omega_ <= 0) throw ValidationError("exp(-r^w) needs w > 0");
    if (role_ == Role::Dimension) throw ValidationError("exp(-r^w) is not a dimension function");
    return;
  }
  if (scale_ < 0) throw ValidationError("scale must be positive");
  if (scale_ == 0) {
    if (power_ != 0 || has_logs()) throw ValidationError("the zero function carries no exponents");
    return;
  }
  switch (role_) {
    case Role::Generic:
      break;
    case Role::Approximating:
      if (regime_ != Regime::AtInfinity && has_logs())
        throw ValidationError("an approximating function is described for large r");
      if (!decays_at_infinity())
        throw ValidationError("approximating function must be eventually decreasing: " + to_string());
      break;
    case Role::Dimension: {
      if (regime_ != Regime::AtZero && has_logs())
        throw ValidationError("a dimension function with log factors must use log(1/r)");
      // f(r) -> 0 and f increasing as r -> 0.
      bool ok = power_ > 0 || (power_ == 0 && log_power_ < 0) ||
                (power_ == 0 && log_power_ == 0 && loglog_power_ < 0);
      if (!ok) throw ValidationError("dimension function must increase to 0 at 0: " + to_string());
      break;
    }
  }
}

double FunctionForm::domain_lo() const {
  if (family_ == Family::ExpPower || is_zero()) return 0.0;
  if (regime_ == Regime::AtZero) return 0.0;
  if (loglog_power_ != 0) return std::numbers::e;
  if (log_power_ != 0) return 1.0;
  return 0.0;
}

double FunctionForm::domain_hi() const {
  if (family_ == Family::ExpPower || is_zero() || regime_ == Regime::AtInfinity) return kInf;
  if (loglog_power_ != 0) return 1.0 / std::numbers::e;
  if (log_power_ != 0) return 1.0;
  return kInf;
}

bool FunctionForm::in_domain(double r) const {
  if (std::isnan(r)) return false;
  if (family_ == Family::ExpPower || is_zero()) return r >= 0.0;
  return r > domain_lo() && r < domain_hi();
}

std::optional<Rational> FunctionForm::exact_value(const Rational& r) const {
  if (is_zero()) return Rational(0);
  if (family_ != Family::PowerLog || has_logs() || power_.get_den() != 1) return std::nullopt;
  if (r <= 0) throw DomainError("evaluation at a non-positive point");
  if (!fits_int64(power_.get_num())) return std::nullopt;
  long n = power_.get_num().get_si();
  Rational base = n >= 0 ? r : Rational(1 / r);
  unsigned long e = static_cast<unsigned long>(std::labs(n));
  Integer num, den;
  mpz_pow_ui(num.get_mpz_t(), base.get_num_mpz_t(), e);
  mpz_pow_ui(den.get_mpz_t(), base.get_den_mpz_t(), e);
  Rational out(num, den);
  out.canonicalize();
  return out * scale_;
}

std::string FunctionForm::to_string() const {
  if (family_ == Family::ExpPower) {
    if (omega_ == 1) return "exp(-r)";
    return "exp(-r^" + exponent_text(omega_) + ")";
  }
  if (is_zero()) return "0";
  std::vector<std::string> parts;
  if (scale_ != 1) parts.push_back(scale_.get_str());
  if (power_ != 0) parts.push_back(power_ == 1 ? "r" : "r^" + exponent_text(power_));
  const char* arg = regime_ == Regime::AtZero ? "(1/r)" : "(r)";
  if (log_power_ != 0)
    parts.push_back(std::string("log") + arg + (log_power_ == 1 ? "" : "^" + exponent_text(log_power_)));
  if (loglog_power_ != 0)
    parts.push_back(std::string("loglog") + arg +
                    (loglog_power_ == 1 ? "" : "^" + exponent_text(loglog_power_)));
  if (parts.empty()) return "1";
  std::string out = parts.front();
  for (std::size_t i = 1; i < parts.size(); ++i) out += " * " + parts[i];
  return out;
}

FunctionForm FunctionForm::parse(std::string_view text, Role role) {
  std::string s = strip_spaces(text);
  if (s.empty()) throw ValidationError("empty function expression");
  while (s.size() >= 2 && s.front() == '(' && s.back() == ')') {
    // Drop one redundant outer pair only if it encloses everything.
    int depth = 0;
    bool encloses = true;
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (s[i] == '(') ++depth;
      if (s[i] == ')') --depth;
      if (depth == 0 && i + 1 < s.size()) {
        encloses = false;
        break;
      }
    }
    if (!encloses) break;
    s = s.substr(1, s.size() - 2);
  }
  if (s == "0") return zero();

  Rational scale = 1, a = 0, b = 0, c = 0;
  std::optional<Rational> omega;
  std::optional<Regime> regime;
  auto set_regime = [&](Regime r) {
    if (regime && *regime != r) throw ValidationError("cannot mix log(r) and log(1/r) in: " + s);
    regime = r;
  };

  for (const auto& factor : split_factors(s)) {
    if (factor.empty()) throw ValidationError("empty factor in: " + s);
    if (factor.rfind("exp(-r", 0) == 0 && factor.back() == ')') {
      std::string inner = factor.substr(4, factor.size() - 5);  // "-r" or "-r^w"
      auto w = match_power(inner.substr(1), "r");
      if (!w || omega) throw ValidationError("malformed exponential factor: " + factor);
      omega = *w;
    } else if (auto e = match_power(factor, "loglog(1/r)")) {
      set_regime(Regime::AtZero);
      c += *e;
    } else if (auto e = match_power(factor, "loglog(r)")) {
      set_regime(Regime::AtInfinity);
      c += *e;
    } else if (auto e = match_power(factor, "log(1/r)")) {
      set_regime(Regime::AtZero);
      b += *e;
    } else if (auto e = match_power(factor, "log(r)")) {
      set_regime(Regime::AtInfinity);
      b += *e;
    } else if (auto e = match_power(factor, "r")) {
      a += *e;
    } else {
      scale *= parse_exponent(factor);
    }
  }
  if (omega) {
    if (scale != 1 || a != 0 || b != 0 || c != 0)
      throw ValidationError("exp(-r^w) cannot be combined with other factors: " + s);
    return exp_power(*omega, role);
  }
  if (scale == 0) return zero();
  Regime chosen = regime.value_or(role == Role::Dimension ? Regime::AtZero : Regime::AtInfinity);
  return power_log(scale, a, b, c, chosen, role);
}

// ---------------------------------------------------------------------------
// Evaluation

double evaluate(const FunctionForm& form, double r) {
  if (!form.in_domain(r)) {
    std::ostringstream msg;
    msg << "r = " << r << " is outside the domain of " << form.to_string();
    throw DomainError(msg.str());
  }
  if (form.is_zero()) return 0.0;
  if (form.family() == Family::ExpPower) return std::exp(-rpow(r, form.omega()));
  double value = form.scale().get_d() * rpow(r, form.power());
  if (form.has_logs()) {
    double l = form.regime() == Regime::AtZero ? std::log(1.0 / r) : std::log(r);
    value *= rpow(l, form.log_power());
    if (form.loglog_power() != 0) value *= rpow(std::log(l), form.loglog_power());
  }
  return value;
}

double log_evaluate(const FunctionForm& form, double log_r) {
  if (form.is_zero()) return -kInf;
  if (form.family() == Family::ExpPower) return -std::exp(form.omega().get_d() * log_r);
  double out = std::log(form.scale().get_d()) + form.power().get_d() * log_r;
  if (form.has_logs()) {
    double l = form.regime() == Regime::AtZero ? -log_r : log_r;
    if (!(l > 0)) throw DomainError("log factor is not positive");
    out += form.log_power().get_d() * std::log(l);
    if (form.loglog_power() != 0) {
      double ll = std::log(l);
      if (!(ll > 0)) throw DomainError("log log factor is not positive");
      out += form.loglog_power().get_d() * std::log(ll);
    }
  }
  return out;
}

std::string to_string(Verdict v) {
  return v == Verdict::Convergent ? "Convergent" : "Divergent";
}

// ---------------------------------------------------------------------------
// Composition and classification

Asymptotic compose(const FunctionForm& outer, const FunctionForm& inner) {
  Asymptotic out;
  if (outer.is_zero()) {
    out.zero = true;
    return out;
  }
  if (outer.family() == Family::ExpPower)
    throw NotClosedError("outer function exp(-r^w) is outside the closed family");
  const Rational& t = outer.scale();
  const Rational& alpha = outer.power();
  const Rational& beta = outer.log_power();
  const Rational& gamma = outer.loglog_power();
  if (outer.has_logs() && outer.regime() != Regime::AtZero)
    throw NotClosedError("outer function with log factors must be written in log(1/r)");

  if (inner.is_zero()) {
    bool vanishes = alpha > 0 || (alpha == 0 && beta < 0) || (alpha == 0 && beta == 0 && gamma < 0);
    if (!vanishes) throw NotClosedError("outer function does not vanish at 0");
    out.zero = true;
    return out;
  }

  if (inner.family() == Family::ExpPower) {
    const Rational& w = inner.omega();
    // log(1/psi) = r^w, log log(1/psi) = w log r.
    out.exp_coeff = alpha;
    out.exp_omega = w;
    out.A = w * beta;
    out.B = gamma;
    out.constant = t.get_d() * std::pow(w.get_d(), gamma.get_d());
    if (alpha == 0) out.exp_omega = 0;
    return out;
  }

  const Rational& s = inner.scale();
  const Rational& a = inner.power();
  const Rational& b = inner.log_power();
  const Rational& c = inner.loglog_power();
  double constant = t.get_d() * std::pow(s.get_d(), alpha.get_d());

  if (!outer.has_logs()) {
    out.A = a * alpha;
    out.B = b * alpha;
    out.C = c * alpha;
    out.constant = constant;
    return out;
  }
  if (!inner.decays_at_infinity())
    throw NotClosedError("outer log factors need an inner function tending to 0: " + inner.to_string());
  if (a < 0) {
    // log(1/psi) ~ |a| log r, log log(1/psi) ~ log log r.
    out.A = a * alpha;
    out.B = b * alpha + beta;
    out.C = c * alpha + gamma;
    out.constant = constant * std::pow(-a.get_d(), beta.get_d());
    return out;
  }
  if (b < 0) {
    // log(1/psi) ~ |b| log log r; a third iterated log would be needed for gamma.
    if (gamma != 0) throw NotClosedError("composition needs log log log r: outside the closed family");
    out.A = 0;
    out.B = b * alpha;
    out.C = c * alpha + beta;
    out.constant = constant * std::pow(-b.get_d(), beta.get_d());
    return out;
  }
  throw NotClosedError("composition needs log log log r: outside the closed family");
}

Verdict classify(const Asymptotic& summand) {
  if (summand.zero) return Verdict::Convergent;
  if (summand.exp_coeff > 0) return Verdict::Convergent;
  if (summand.exp_coeff < 0) return Verdict::Divergent;
  if (summand.A != -1) return summand.A < -1 ? Verdict::Convergent : Verdict::Divergent;
  if (summand.B != -1) return summand.B < -1 ? Verdict::Convergent : Verdict::Divergent;
  return summand.C < -1 ? Verdict::Convergent : Verdict::Divergent;
}

SeriesSpec::SeriesSpec(Rational weight_power, std::optional<FunctionForm> outer, FunctionForm inner)
    : weight_power_(std::move(weight_power)), outer_(std::move(outer)), inner_(std::move(inner)) {
  summand_ = compose(outer_.value_or(FunctionForm::identity()), inner_);
  summand_.A += weight_power_;
}

SeriesSpec SeriesSpec::parse(std::string_view text, std::optional<FunctionForm> outer) {
  std::string s = strip_spaces(text);
  Rational u = 0;
  auto factors = split_factors(s);
  std::string inner_text;
  if (factors.size() >= 2 && factors.front().rfind("r", 0) == 0 && factors.front().find('(') == std::string::npos &&
      s.find('(') != std::string::npos) {
    auto e = match_power(factors.front(), "r");
    if (!e) throw ValidationError("malformed series weight: " + factors.front());
    u = *e;
    inner_text = s.substr(factors.front().size() + 1);
  } else {
    inner_text = s;
  }
  return SeriesSpec(u, std::move(outer), FunctionForm::parse(inner_text));
}

long SeriesSpec::start_index() const {
  double lo = inner_.domain_lo();
  if (summand_.C != 0) lo = std::max(lo, std::numbers::e);
  if (summand_.B != 0) lo = std::max(lo, 1.0);
  return static_cast<long>(std::floor(lo)) + 1;
}

std::string SeriesSpec::to_string() const {
  std::string f = outer_ ? outer_->to_string() : "id";
  return "sum r^" + exponent_text(weight_power_) + " * [" + f + "](" + inner_.to_string() + ")";
}

Verdict series_classify(const SeriesSpec& spec) {
  return classify(spec.summand());
}

std::string ExtendedRational::to_string() const {
  return infinite ? "inf" : value.get_str();
}

ExtendedRational critical_exponent(const FunctionForm& psi, const Rational& u) {
  if (psi.is_zero() || psi.family() == Family::ExpPower) return {false, 0};
  const Rational& a = psi.power();
  const Rational& b = psi.log_power();
  const Rational& c = psi.loglog_power();
  // Convergence at s = 0 makes 0 the infimum regardless of monotonicity in s.
  if (u < -1) return {false, 0};
  if (a < 0) {
    Rational s0 = (u + 1) / (-a);
    return {false, s0};
  }
  if (a > 0 || u > -1) return ExtendedRational::inf();
  // a == 0, u == -1: sum r^-1 (log r)^(bs) (log log r)^(cs)
  if (b < 0) return {false, Rational(-1 / b)};
  if (b > 0) return ExtendedRational::inf();
  if (c < 0) return {false, Rational(-1 / c)};
  return ExtendedRational::inf();
}

FunctionForm log_dimension_function(const Rational& s) {
  return FunctionForm::power_log(1, 0, -s, 0, Regime::AtZero, Role::Dimension);
}

FunctionForm liouville_dimension_function(const Rational& omega, long n, const Rational& eps) {
  if (omega <= 0) throw ValidationError("omega must be positive");
  if (n < 1) throw ValidationError("n must be a positive integer");
  if (eps < 0) throw ValidationError("epsilon must be non-negative");
  return FunctionForm::power_log(1, 0, Rational(-n) / omega, -(1 + eps), Regime::AtZero, Role::Dimension);
}

Rational log_critical_exponent(const Rational& omega, long n) {
  if (omega <= 0) throw ValidationError("omega must be positive");
  if (n < 1) throw ValidationError("n must be a positive integer");
  // f_s(exp(-r^w)) = r^(-w s), so the summand is r^(n-1-ws).
  Rational s = Rational(n) / omega;
  SeriesSpec at(Rational(n - 1), log_dimension_function(s), FunctionForm::exp_power(omega));
  if (at.summand().A != -1) throw InvariantViolation("log critical exponent does not balance the summand");
  return s;
}

Verdict liouville_family_classify(const Rational& omega, long n, const Rational& eps) {
  SeriesSpec spec(Rational(n - 1), liouville_dimension_function(omega, n, eps), FunctionForm::exp_power(omega));
  return series_classify(spec);
}

// ---------------------------------------------------------------------------
// k-regularity

KRegularity is_k_regular(const FunctionForm& form, double k, int n_lo, int n_hi) {
  if (!(k > 1)) throw ValidationError("k must exceed 1");
  if (n_lo < 1 || n_hi < n_lo) throw ValidationError("bad n range for k-regularity");
  if (form.is_zero()) throw ValidationError("k-regularity needs an eventually positive function");
  KRegularity out;
  if (form.family() == Family::ExpPower) {
    out.regular = true;
    out.limit_ratio = 0.0;
  } else {
    out.limit_ratio = std::pow(k, form.power().get_d());
    out.regular = form.power() < 0;
  }
  double logk = std::log(k);
  for (int n = n_lo; n <= n_hi; ++n) {
    double h0 = log_evaluate(form, n * logk);
    double h1 = log_evaluate(form, (n + 1) * logk);
    double ratio;
    if (std::isinf(h1) && h1 < 0)
      ratio = 0.0;
    else
      ratio = std::exp(h1 - h0);
    out.ratios.push_back(ratio);
  }
  double first = out.ratios.front();
  double last = out.ratios.back();
  bool bounded_below_one = std::all_of(out.ratios.begin() + static_cast<long>(out.ratios.size() / 2),
                                       out.ratios.end(), [](double r) { return r < 1.0; });
  // A ratio creeping up to 1 (gap shrinking with n) has no uniform lambda < 1.
  bool gap_persists = (1.0 - last) >= 0.5 * (1.0 - first);
  out.numeric_regular = bounded_below_one && gap_persists;
  out.numeric_agrees = out.numeric_regular == out.regular;
  return out;
}

// ---------------------------------------------------------------------------
// G of the Hausdorff-measure ubiquity statement

std::string to_string(GKind kind) {
  switch (kind) {
    case GKind::Zero: return "Zero";
    case GKind::Finite: return "Finite";
    case GKind::Infinite: return "Infinite";
  }
  return "?";
}

GResult compute_G(const FunctionForm& f, const FunctionForm& psi, const FunctionForm& rho,
                  const Rational& delta, double k, int n_max) {
  if (!(k > 1)) throw ValidationError("k must exceed 1");
  if (n_max < 1) throw ValidationError("n_max must be positive");
  if (rho.is_zero() || rho.family() != Family::PowerLog)
    throw NotClosedError("rho must be a non-zero power-log function");
  Asymptotic g = compose(f, psi);
  GResult out;
  if (g.zero) {
    out.kind = GKind::Zero;
  } else {
    g.A -= delta * rho.power();
    g.B -= delta * rho.log_power();
    g.C -= delta * rho.loglog_power();
    g.constant *= std::pow(rho.scale().get_d(), -delta.get_d());
    if (g.exp_coeff != 0) {
      out.kind = g.exp_coeff > 0 ? GKind::Zero : GKind::Infinite;
    } else {
      int lead = sgn(g.A) != 0 ? sgn(g.A) : sgn(g.B) != 0 ? sgn(g.B) : sgn(g.C);
      if (lead > 0) {
        out.kind = GKind::Infinite;
      } else if (lead < 0) {
        out.kind = GKind::Zero;
      } else {
        out.kind = GKind::Finite;
        out.value = g.constant;
      }
    }
  }

  double logk = std::log(k);
  for (int n = 1; n <= n_max; ++n) {
    double lr = n * logk;
    double value = std::numeric_limits<double>::quiet_NaN();
    try {
      double lpsi = log_evaluate(psi, lr);
      double lf = f.is_zero() ? -kInf : log_evaluate(f, lpsi);
      double lrho = log_evaluate(rho, lr);
      value = std::exp(lf - delta.get_d() * lrho);
    } catch (const DomainError&) {
    }
    out.scan.push_back(value);
  }

  std::vector<double> valid;
  for (double v : out.scan)
    if (std::isfinite(v) || (std::isinf(v) && v > 0)) valid.push_back(v);
  if (valid.size() < 2) {
    out.numeric_agrees = out.kind == GKind::Zero && !valid.empty() ? valid.back() == 0.0 : valid.empty();
    return out;
  }
  double mid = valid[valid.size() / 2];
  double last = valid.back();
  switch (out.kind) {
    case GKind::Zero: out.numeric_agrees = last <= mid; break;
    case GKind::Infinite: out.numeric_agrees = last >= mid; break;
    case GKind::Finite:
      out.numeric_agrees = std::abs(last - out.value) <= 0.25 * std::abs(out.value);
      break;
  }
  return out;
}

}  // namespace ubiq
