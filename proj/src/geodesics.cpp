#include "ubiq/geodesics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <thread>

#include "ubiq/errors.hpp"
#include "ubiq/random.hpp"

namespace ubiq {

namespace {

constexpr std::int64_t kMaxQuotient = std::int64_t{1} << 62;

void push_quotient(CFExpansion& cf, std::int64_t a) {
  cf.quotients.push_back(a);
  const auto& last = cf.convergents.back();
  Integer p = a * last.first, q = a * last.second;
  if (cf.convergents.size() >= 2) {
    const auto& prev = cf.convergents[cf.convergents.size() - 2];
    p += prev.first;
    q += prev.second;
  } else {
    p += 1;  // p_{-1} = 1, q_{-1} = 0
  }
  cf.convergents.emplace_back(std::move(p), std::move(q));
}

CFExpansion start(double x) {
  CFExpansion cf;
  cf.x = x;
  cf.convergents.emplace_back(Integer(0), Integer(1));
  return cf;
}

Rational fractional_part(const Rational& x) {
  Integer f;
  mpz_fdiv_q(f.get_mpz_t(), x.get_num_mpz_t(), x.get_den_mpz_t());
  return x - Rational(f);
}

// Walks the remainders lo = nL/dL <= hi = nU/dU in (0,1) and reports each
// certified quotient. Returns true when the requested depth was reached.
template <class Emit>
bool interval_quotients(Integer nL, Integer dL, Integer nU, Integer dU, std::size_t depth, Emit emit) {
  Integer aL, rL, aU, rU;
  for (std::size_t n = 0; n < depth; ++n) {
    if (nL == 0) return false;  // 0 in the interval: a_1 unbounded
    // 1/hi <= 1/x <= 1/lo
    mpz_fdiv_qr(aL.get_mpz_t(), rL.get_mpz_t(), dU.get_mpz_t(), nU.get_mpz_t());
    mpz_fdiv_qr(aU.get_mpz_t(), rU.get_mpz_t(), dL.get_mpz_t(), nL.get_mpz_t());
    if (aL != aU || !aL.fits_slong_p() || aL.get_si() >= kMaxQuotient) return false;
    emit(aL.get_si());
    // new lo = (dU mod nU)/nU, new hi = (dL mod nL)/nL
    dU.swap(nL);
    dL.swap(nU);
    nL.swap(rL);
    nU.swap(rU);
  }
  return true;
}

}  // namespace

CFExpansion cf_expand(const Rational& x, std::size_t depth) {
  CFExpansion cf = start(x.get_d());
  Rational r = fractional_part(x);
  while (cf.depth() < depth) {
    if (r == 0) {
      cf.terminated = true;
      break;
    }
    Rational inv = 1 / r;
    Integer a;
    mpz_fdiv_q(a.get_mpz_t(), inv.get_num_mpz_t(), inv.get_den_mpz_t());
    if (!a.fits_slong_p() || a.get_si() >= kMaxQuotient) {
      cf.precision_exhausted = true;
      break;
    }
    push_quotient(cf, a.get_si());
    r = inv - Rational(a);
  }
  return cf;
}

CFExpansion cf_expand_interval(const Rational& lo, const Rational& hi, std::size_t depth) {
  if (hi < lo) throw ValidationError("cf interval is empty");
  if (lo == hi) return cf_expand(lo, depth);
  CFExpansion cf = start(Rational((lo + hi) / 2).get_d());
  Integer fl, fh;
  mpz_fdiv_q(fl.get_mpz_t(), lo.get_num_mpz_t(), lo.get_den_mpz_t());
  mpz_fdiv_q(fh.get_mpz_t(), hi.get_num_mpz_t(), hi.get_den_mpz_t());
  if (fl != fh) {
    cf.precision_exhausted = depth > 0;
    return cf;
  }
  Rational l = lo - Rational(fl), h = hi - Rational(fl);
  bool full = interval_quotients(l.get_num(), l.get_den(), h.get_num(), h.get_den(), depth,
                                 [&](std::int64_t a) { push_quotient(cf, a); });
  cf.precision_exhausted = !full;
  return cf;
}

CFExpansion cf_expand(double x, std::size_t depth) {
  if (!std::isfinite(x)) throw ValidationError("cf_expand needs a finite x");
  double lo = std::nextafter(x, -std::numeric_limits<double>::infinity());
  double hi = std::nextafter(x, std::numeric_limits<double>::infinity());
  CFExpansion cf = cf_expand_interval(Rational(lo), Rational(hi), depth);
  cf.x = x;
  return cf;
}

namespace {

// m <= (P + sqrt D)/Q
bool floor_ok(const Integer& m, const Integer& P, const Integer& D, const Integer& Q) {
  Integer v = m * Q - P;
  if (Q > 0) return v < 0 || v * v <= D;
  return v >= 0 && v * v >= D;
}

Integer quadratic_floor(const Integer& P, const Integer& D, const Integer& Q) {
  Integer s = sqrt(D), m;
  Integer num = P + s;
  mpz_fdiv_q(m.get_mpz_t(), num.get_mpz_t(), Q.get_mpz_t());
  while (!floor_ok(m, P, D, Q)) --m;
  while (floor_ok(m + 1, P, D, Q)) ++m;
  return m;
}

}  // namespace

CFExpansion cf_expand_quadratic(const Integer& P0, const Integer& D, const Integer& Q0, std::size_t depth) {
  if (D <= 0 || Q0 == 0) throw ValidationError("quadratic irrational needs D > 0 and Q != 0");
  Integer s = sqrt(D);
  if (s * s == D) throw ValidationError("D is a perfect square");
  Integer rem = D - P0 * P0;
  if (rem % Q0 != 0) throw ValidationError("Q must divide D - P^2");
  double xd = (P0.get_d() + std::sqrt(D.get_d())) / Q0.get_d();
  CFExpansion cf = start(xd);
  Integer P = P0, Q = Q0;
  Integer a = quadratic_floor(P, D, Q);
  while (cf.depth() < depth) {
    // x - a = (P - aQ + sqrt D)/Q, invert
    P = a * Q - P;
    Q = (D - P * P) / Q;
    a = quadratic_floor(P, D, Q);
    if (!a.fits_slong_p()) {
      cf.precision_exhausted = true;
      break;
    }
    push_quotient(cf, a.get_si());
  }
  return cf;
}

double gauss_kuzmin_probability(std::int64_t k) {
  if (k < 1) throw ValidationError("partial quotients are positive");
  double kk = static_cast<double>(k);
  return std::log2(1.0 + 1.0 / (kk * (kk + 2.0)));
}

GaussKuzminResult gauss_kuzmin_experiment(std::int64_t samples, std::size_t depth, std::uint64_t seed,
                                          std::int64_t kmax, unsigned bits, int threads) {
  if (samples < 0 || kmax < 1) throw ValidationError("samples >= 0 and kmax >= 1 required");
  if (bits < 64 || threads < 1) throw ValidationError("bits >= 64 and threads >= 1 required");
  struct Tally {
    std::vector<std::int64_t> counts;
    std::int64_t digits = 0, truncated = 0;
  };
  std::vector<Tally> tallies(static_cast<std::size_t>(threads));
  Integer den = Integer(1) << bits;
  auto work = [&](int w) {
    Tally& t = tallies[static_cast<std::size_t>(w)];
    t.counts.assign(static_cast<std::size_t>(kmax) + 1, 0);
    Integer m;
    for (std::int64_t i = w; i < samples; i += threads) {
      auto rng = sample_rng(seed, static_cast<std::uint64_t>(i));
      m = 0;
      for (unsigned b = 0; b < bits; b += 64) {
        m <<= 64;
        std::uint64_t word = rng();
        m += Integer(static_cast<unsigned long>(word));
      }
      m >>= (((bits + 63) / 64) * 64 - bits);
      if (m == 0) m = 1;
      // x in [m, m+1] / 2^bits
      std::size_t got = 0;
      interval_quotients(m, den, Integer(m + 1), den, depth, [&](std::int64_t a) {
        ++got;
        if (a <= kmax) ++t.counts[static_cast<std::size_t>(a)];
      });
      t.digits += static_cast<std::int64_t>(got);
      if (got < depth) ++t.truncated;
    }
  };
  if (threads == 1) {
    work(0);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w);
    for (auto& th : pool) th.join();
  }
  GaussKuzminResult out;
  out.samples = samples;
  out.depth = static_cast<std::int64_t>(depth);
  std::vector<std::int64_t> counts(static_cast<std::size_t>(kmax) + 1, 0);
  for (const auto& t : tallies) {
    out.digits += t.digits;
    out.truncated += t.truncated;
    for (std::size_t k = 0; k < t.counts.size(); ++k) counts[k] += t.counts[k];
  }
  out.frequency.assign(counts.size(), 0.0);
  for (std::size_t k = 1; k < counts.size(); ++k)
    out.frequency[k] = out.digits > 0 ? static_cast<double>(counts[k]) / static_cast<double>(out.digits) : 0.0;
  return out;
}

// ---------------------------------------------------------------- geometry

GeodesicState geodesic_point(double x, double t) {
  if (t < 0) throw ValidationError("geodesic time must be non-negative");
  if (std::isnan(x)) throw ValidationError("direction is NaN");
  long double E = std::exp(static_cast<long double>(t));
  if (std::isinf(x)) return {Complex(0.0, static_cast<double>(E)), t};
  // (x iE - 1)/(iE + x): the rotation about i sending infinity to x, applied to iE
  using C = std::complex<long double>;
  long double X = x;
  C z = C(-1.0L, X * E) / C(X, E);
  return {Complex(static_cast<double>(z.real()), static_cast<double>(z.imag())), t};
}

double hyperbolic_distance(Complex z, Complex w) {
  if (z.imag() <= 0 || w.imag() <= 0) throw ValidationError("points must lie in the upper half-plane");
  long double dx = static_cast<long double>(z.real()) - w.real();
  long double dy = static_cast<long double>(z.imag()) - w.imag();
  long double chord = std::sqrt(dx * dx + dy * dy);
  long double scale = 2 * std::sqrt(static_cast<long double>(z.imag()) * w.imag());
  return static_cast<double>(2 * std::asinh(chord / scale));
}

Mat2 Mat2::operator*(const Mat2& o) const {
  auto mul_add = [](std::int64_t p, std::int64_t q, std::int64_t r, std::int64_t s) {
    std::int64_t x, y, out;
    if (__builtin_mul_overflow(p, q, &x) || __builtin_mul_overflow(r, s, &y) || __builtin_add_overflow(x, y, &out))
      throw ResourceCapError("matrix entries overflow 64 bits");
    return out;
  };
  return {mul_add(a, o.a, b, o.c), mul_add(a, o.b, b, o.d), mul_add(c, o.a, d, o.c), mul_add(c, o.b, d, o.d)};
}

std::complex<long double> Mat2::apply(std::complex<long double> z) const {
  using C = std::complex<long double>;
  return (static_cast<long double>(a) * z + C(static_cast<long double>(b))) /
         (static_cast<long double>(c) * z + C(static_cast<long double>(d)));
}

Reduction reduce_to_fundamental(Complex z, int max_steps) {
  if (!(z.imag() > 0) || !std::isfinite(z.real()) || !std::isfinite(z.imag()))
    throw ValidationError("reduction needs a finite point with Im > 0");
  std::complex<long double> w(z.real(), z.imag());
  Mat2 word;
  for (int step = 0;; ++step) {
    if (step >= max_steps) throw ResourceCapError("fundamental-domain reduction did not terminate");
    // slack keeps rounding from cycling between the corners of the domain
    constexpr long double slack = 1e-15L;
    long double re = w.real();
    if (std::fabs(re) > 0.5L + slack) {
      long double n = std::nearbyint(re);
      if (std::fabs(n) > 9e18L) throw ResourceCapError("translation beyond 64 bits");
      word = Mat2{1, -static_cast<std::int64_t>(n), 0, 1} * word;
      w -= n;
    }
    if (std::norm(w) < 1.0L - slack) {
      word = Mat2{0, -1, 1, 0} * word;
      w = -1.0L / w;
      continue;
    }
    if (std::fabs(w.real()) <= 0.5L + slack) break;
  }
  auto exact = word.apply(std::complex<long double>(z.real(), z.imag()));
  return {Complex(static_cast<double>(exact.real()), static_cast<double>(exact.imag())), word};
}

double penetration(Complex reduced) { return reduced.imag() > 1.0 ? std::log(reduced.imag()) : 0.0; }

// ---------------------------------------------------------------- boundary points

namespace {

BigFloat make(unsigned bits) {
  if (bits < 53) throw ValidationError("boundary point needs at least 53 bits");
  return BigFloat(static_cast<mpfr_prec_t>(bits));
}

}  // namespace

BoundaryPoint BoundaryPoint::from_double(double x, unsigned bits) {
  if (!std::isfinite(x)) throw ValidationError("direction must be finite");
  BoundaryPoint p;
  p.x_ = make(bits);
  mpfr_set_d(p.x_.get(), x, MPFR_RNDN);
  p.label_ = std::to_string(x);
  return p;
}

BoundaryPoint BoundaryPoint::from_rational(const Rational& x, unsigned bits) {
  BoundaryPoint p;
  p.x_ = make(bits);
  mpfr_set_q(p.x_.get(), x.get_mpq_t(), MPFR_RNDN);
  p.label_ = x.get_str();
  return p;
}

BoundaryPoint BoundaryPoint::golden(unsigned bits) {
  BoundaryPoint p;
  p.x_ = make(bits);
  mpfr_sqrt_ui(p.x_.get(), 5, MPFR_RNDN);
  mpfr_sub_ui(p.x_.get(), p.x_.get(), 1, MPFR_RNDN);
  mpfr_div_2ui(p.x_.get(), p.x_.get(), 1, MPFR_RNDN);
  p.label_ = "golden";
  p.period_ = {1};
  return p;
}

BoundaryPoint BoundaryPoint::sqrt2_minus_1(unsigned bits) {
  BoundaryPoint p;
  p.x_ = make(bits);
  mpfr_sqrt_ui(p.x_.get(), 2, MPFR_RNDN);
  mpfr_sub_ui(p.x_.get(), p.x_.get(), 1, MPFR_RNDN);
  p.label_ = "sqrt2-1";
  p.period_ = {2};
  return p;
}

BoundaryPoint BoundaryPoint::planted(const std::vector<std::int64_t>& prefix, unsigned bits) {
  for (auto a : prefix)
    if (a < 1) throw ValidationError("partial quotients must be positive");
  // x = (p_n phi + p_{n-1}) / (q_n phi + q_{n-1}) with the all-ones tail phi
  Integer p0 = 1, q0 = 0, p1 = 0, q1 = 1;
  for (auto a : prefix) {
    Integer p2 = a * p1 + p0, q2 = a * q1 + q0;
    p0 = p1;
    q0 = q1;
    p1 = p2;
    q1 = q2;
  }
  auto work = static_cast<mpfr_prec_t>(bits + 64);
  BigFloat phi(work), num(work), den(work);
  mpfr_sqrt_ui(phi.get(), 5, MPFR_RNDN);
  mpfr_add_ui(phi.get(), phi.get(), 1, MPFR_RNDN);
  mpfr_div_2ui(phi.get(), phi.get(), 1, MPFR_RNDN);
  mpfr_mul_z(num.get(), phi.get(), p1.get_mpz_t(), MPFR_RNDN);
  mpfr_add_z(num.get(), num.get(), p0.get_mpz_t(), MPFR_RNDN);
  mpfr_mul_z(den.get(), phi.get(), q1.get_mpz_t(), MPFR_RNDN);
  mpfr_add_z(den.get(), den.get(), q0.get_mpz_t(), MPFR_RNDN);
  BoundaryPoint p;
  p.x_ = make(bits);
  mpfr_div(p.x_.get(), num.get(), den.get(), MPFR_RNDN);
  p.label_ = "planted";
  p.prefix_ = prefix;
  p.period_ = {1};
  return p;
}

BoundaryPoint BoundaryPoint::random(std::mt19937_64& rng, unsigned bits) {
  Integer m = 0;
  for (unsigned b = 0; b < bits; b += 64) {
    m <<= 64;
    m += Integer(static_cast<unsigned long>(rng()));
  }
  m >>= (((bits + 63) / 64) * 64 - bits);
  if (m == 0) m = 1;
  BoundaryPoint p;
  p.x_ = make(bits);
  mpfr_set_z_2exp(p.x_.get(), m.get_mpz_t(), -static_cast<mpfr_exp_t>(bits), MPFR_RNDN);
  p.label_ = "random";
  return p;
}

unsigned BoundaryPoint::bits_for(double T) {
  if (!(T >= 0)) throw ValidationError("T must be non-negative");
  return static_cast<unsigned>(std::ceil(2.0 * T / std::numbers::ln2)) + 256;
}

CFExpansion BoundaryPoint::cf(std::size_t depth) const {
  if (!period_.empty()) {
    CFExpansion out = start(to_double());
    for (std::size_t n = 0; n < depth; ++n) {
      std::int64_t a = n < prefix_.size() ? prefix_[n] : period_[(n - prefix_.size()) % period_.size()];
      push_quotient(out, a);
    }
    return out;
  }
  Rational v = x_.to_rational(), u = x_.ulp();
  CFExpansion out = cf_expand_interval(v - u, v + u, depth);
  out.x = to_double();
  return out;
}

// ---------------------------------------------------------------- tracker

GeodesicTracker::GeodesicTracker(const BoundaryPoint& x, double frame_span) : x_(x), span_(frame_span) {
  if (!(frame_span > 0 && frame_span <= 8)) throw ValidationError("frame span must lie in (0, 8]");
  if (x_.value().to_double() == 0) throw ValidationError("direction 0 is a cusp");
  push_frame(0.0, Integer(1), Integer(0), Integer(0), Integer(1), Complex(0.0, 1.0));
}

void GeodesicTracker::push_frame(double t0, const Integer& A, const Integer& B, const Integer& C, const Integer& D,
                                 Complex w) {
  std::size_t size = std::max({mpz_sizeinbase(A.get_mpz_t(), 2), mpz_sizeinbase(B.get_mpz_t(), 2),
                               mpz_sizeinbase(C.get_mpz_t(), 2), mpz_sizeinbase(D.get_mpz_t(), 2)});
  auto need = static_cast<mpfr_prec_t>(2 * size + 128);
  if (need > x_.value().precision())
    throw ResourceCapError("boundary point precision exhausted at t = " + std::to_string(t0) + " (needs " +
                           std::to_string(need) + " bits)");
  BigFloat x(need), num(need), den(need);
  mpfr_set(x.get(), x_.value().get(), MPFR_RNDN);
  auto mobius = [&](const Integer& p, const Integer& q, const Integer& r, const Integer& s) {
    // (p x + q) / (r x + s)
    mpfr_mul_z(num.get(), x.get(), p.get_mpz_t(), MPFR_RNDN);
    mpfr_add_z(num.get(), num.get(), q.get_mpz_t(), MPFR_RNDN);
    mpfr_mul_z(den.get(), x.get(), r.get_mpz_t(), MPFR_RNDN);
    mpfr_add_z(den.get(), den.get(), s.get_mpz_t(), MPFR_RNDN);
    if (mpfr_zero_p(den.get())) throw DomainError("geodesic ends in a cusp");
    mpfr_div(num.get(), num.get(), den.get(), MPFR_RNDN);
    return num.to_double();
  };
  Frame f;
  f.t0 = t0;
  f.A = A;
  f.B = B;
  f.C = C;
  f.D = D;
  f.b = mobius(A, B, C, D);                                     // M x
  f.a = mobius(B, Integer(-A), D, Integer(-C));                  // M (-1/x)
  f.y0 = std::abs(w - f.a) / std::abs(w - f.b);
  frames_.push_back(std::move(f));
}

Complex GeodesicTracker::eval(const Frame& f, double t) {
  // chart w -> +-(w - a)/(w - b) sends the frame geodesic to the imaginary axis
  double Y = f.y0 * std::exp(t - f.t0);
  double re = f.b + (f.a - f.b) / (1.0 + Y * Y);
  double im = std::fabs(f.a - f.b) / (Y + 1.0 / Y);
  return {re, im};
}

const GeodesicTracker::Frame& GeodesicTracker::frame_for(double t) {
  if (t < 0) throw ValidationError("geodesic time must be non-negative");
  while (frames_.back().t0 + span_ < t) {
    const Frame& f = frames_.back();
    double tr = f.t0 + span_;
    Reduction r = reduce_to_fundamental(eval(f, tr));
    Integer a(static_cast<long>(r.word.a)), b(static_cast<long>(r.word.b)), c(static_cast<long>(r.word.c)),
        d(static_cast<long>(r.word.d));
    Integer A = a * f.A + b * f.C, B = a * f.B + b * f.D;
    Integer C = c * f.A + d * f.C, D = c * f.B + d * f.D;
    push_frame(tr, A, B, C, D, r.z);
  }
  for (auto it = frames_.rbegin(); it != frames_.rend(); ++it)
    if (it->t0 <= t) return *it;
  return frames_.front();
}

GeodesicTracker::Sample GeodesicTracker::sample(double t) {
  Complex w = eval(frame_for(t), t);
  Reduction r = reduce_to_fundamental(w);
  return {t, r.z, penetration(r.z)};
}

std::pair<Integer, Integer> GeodesicTracker::cusp(double t) {
  const Frame& f = frame_for(t);
  Reduction r = reduce_to_fundamental(eval(f, t));
  Integer c(static_cast<long>(r.word.c)), d(static_cast<long>(r.word.d));
  Integer C = c * f.A + d * f.C, D = c * f.B + d * f.D;
  if (C < 0 || (C == 0 && D < 0)) {
    C = -C;
    D = -D;
  }
  return {std::move(C), std::move(D)};
}

// ---------------------------------------------------------------- excursions

namespace {

double pen_at(GeodesicTracker& tr, double t) { return tr.sample(t).pen; }

// Boundary of {pen > 0} between a point outside (lo) and one inside (hi), in either order.
double crossing(GeodesicTracker& tr, double outside, double inside) {
  for (int i = 0; i < 60; ++i) {
    double mid = 0.5 * (outside + inside);
    if (pen_at(tr, mid) > 0)
      inside = mid;
    else
      outside = mid;
  }
  return inside;
}

// Golden-section search for the maximum of pen on [lo, hi].
std::pair<double, double> peak(GeodesicTracker& tr, double lo, double hi) {
  const double g = (std::sqrt(5.0) - 1) / 2;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = pen_at(tr, x1), f2 = pen_at(tr, x2);
  for (int i = 0; i < 80 && hi - lo > 1e-13; ++i) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = pen_at(tr, x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = pen_at(tr, x1);
    }
  }
  double t = f1 > f2 ? x1 : x2;
  return {t, std::max(f1, f2)};
}

std::int64_t sample_count(double T, double step) {
  double n = std::floor(T / step + 1e-9);
  if (n > 1e9) throw ResourceCapError("more than 1e9 samples requested");
  return static_cast<std::int64_t>(n);
}

}  // namespace

ExcursionResult excursions(const BoundaryPoint& x, double T, double step) {
  if (!(T > 0) || !(step > 0)) throw ValidationError("T and step must be positive");
  GeodesicTracker tr(x);
  // convergents reached by time T have log q_n <~ T/2
  CFExpansion cf = x.cf(static_cast<std::size_t>(2 * T) + 16);
  std::vector<Integer> qs;
  for (const auto& c : cf.convergents) qs.push_back(c.second);

  ExcursionResult out;
  std::int64_t n = sample_count(T, step);
  bool inside = false;
  double t_enter = 0, best_t = 0, best_pen = 0, prev_t = 0;
  std::pair<Integer, Integer> run_cusp;
  auto close = [&](double t_exit) {
    double lo = std::max(t_enter, best_t - step), hi = std::min(t_exit, best_t + step);
    auto [tp, pp] = peak(tr, lo, hi);
    if (pp < best_pen || tr.cusp(tp) != run_cusp) {
      tp = best_t;
      pp = best_pen;
    }
    ExcursionRecord rec;
    rec.index = static_cast<int>(out.records.size());
    rec.t_enter = t_enter;
    rec.t_peak = tp;
    rec.t_exit = t_exit;
    rec.peak_pen = pp;
    const auto& [c, d] = run_cusp;
    Integer p = -d;
    auto it = std::lower_bound(qs.begin(), qs.end(), c);
    for (; it != qs.end() && *it == c; ++it) {
      auto k = static_cast<std::size_t>(it - qs.begin());
      if (cf.convergents[k].first == p) {
        rec.convergent_index = static_cast<int>(k);
        if (k < cf.quotients.size()) rec.next_quotient = cf.quotients[k];
        break;
      }
    }
    out.records.push_back(rec);
  };
  // last time in [a, b] that still reduces through the cusp seen at a
  auto cusp_switch = [&](double a, double b, const std::pair<Integer, Integer>& from) {
    for (int i = 0; i < 60; ++i) {
      double mid = 0.5 * (a + b);
      if (tr.cusp(mid) == from)
        a = mid;
      else
        b = mid;
    }
    return b;
  };
  for (std::int64_t j = 0; j <= n; ++j) {
    double t = j == n ? std::min(T, static_cast<double>(j) * step) : static_cast<double>(j) * step;
    double p = pen_at(tr, t);
    if (p > 0) {
      auto c = tr.cusp(t);
      if (inside && c != run_cusp) {
        // passed from one horoball to the next without leaving {Im > 1} at a sample
        double s = cusp_switch(prev_t, t, run_cusp);
        close(s);
        inside = false;
        t_enter = s;
      } else if (!inside) {
        t_enter = j == 0 ? 0.0 : crossing(tr, prev_t, t);
      }
      if (!inside) {
        inside = true;
        run_cusp = std::move(c);
        best_t = t;
        best_pen = p;
      } else if (p > best_pen) {
        best_pen = p;
        best_t = t;
      }
    } else if (inside) {
      inside = false;
      close(crossing(tr, t, prev_t));
    }
    prev_t = t;
  }
  if (inside) close(T);

  // every convergent with a large next quotient should show up as an excursion
  std::vector<bool> seen(cf.convergents.size(), false);
  for (const auto& r : out.records)
    if (r.convergent_index) seen[static_cast<std::size_t>(*r.convergent_index)] = true;
  for (std::size_t k = 0; k < cf.quotients.size(); ++k) {
    std::int64_t a = cf.quotients[k];
    if (a < 4) continue;
    double predicted = 2 * std::log(cf.convergents[k].second.get_d()) + std::log(static_cast<double>(a));
    if (predicted + 2 < T && !seen[k])
      out.warnings.push_back("step too coarse: no excursion matched convergent " + std::to_string(k) +
                             " (next quotient " + std::to_string(a) + ")");
  }
  return out;
}

std::vector<double> loglaw_statistic_at(const BoundaryPoint& x, const std::vector<double>& horizons, double alpha,
                                        double step) {
  if (horizons.empty()) throw ValidationError("no horizons given");
  if (!(step > 0)) throw ValidationError("step must be positive");
  if (!(alpha >= 0 && alpha < 1)) throw ValidationError("alpha must lie in [0,1)");
  std::vector<double> sorted = horizons;
  std::sort(sorted.begin(), sorted.end());
  if (!(sorted.front() > std::numbers::e)) throw ValidationError("horizons must exceed e");
  GeodesicTracker tr(x);
  std::vector<double> at_sorted;
  double best = -std::numeric_limits<double>::infinity();
  std::int64_t j = static_cast<std::int64_t>(std::floor(std::numbers::e / step)) + 1;
  for (double H : sorted) {
    std::int64_t last = sample_count(H, step);
    for (; j <= last; ++j) {
      double t = static_cast<double>(j) * step;
      double v = (tr.sample(t).pen - alpha * t) / std::log(t);
      best = std::max(best, v);
    }
    at_sorted.push_back(best);
  }
  std::vector<double> out;
  for (double H : horizons) out.push_back(at_sorted[static_cast<std::size_t>(
      std::lower_bound(sorted.begin(), sorted.end(), H) - sorted.begin())]);
  return out;
}

double loglaw_statistic(const BoundaryPoint& x, double T, double alpha, double step) {
  return loglaw_statistic_at(x, {T}, alpha, step).front();
}

SandwichCounts sandwich_membership(double x, const Rational& tau, const Rational& eps, std::int64_t Q) {
  if (tau < 1) throw ValidationError("tau must be at least 1");
  if (eps <= 0) throw ValidationError("epsilon must be positive");
  if (Q < 1) throw ValidationError("Q must be at least 1");
  if (!std::isfinite(x)) throw ValidationError("x must be finite");
  auto psi = FunctionForm::power_log(1, -tau, -tau);
  auto psi_eps = FunctionForm::power_log(1, -tau, -tau * (1 + eps));
  SandwichCounts out;
  long double X = x;
  for (std::int64_t q = 2; q <= Q; ++q) {
    double L = 2.0 * static_cast<double>(q) * static_cast<double>(q);
    long double r = evaluate(psi, L), re = evaluate(psi_eps, L);
    auto lo = static_cast<std::int64_t>(std::floor((X - r) * q)), hi = static_cast<std::int64_t>(std::ceil((X + r) * q));
    for (std::int64_t p = std::max<std::int64_t>(lo, 0); p <= std::min(hi, q); ++p) {
      if (std::gcd(p, q) != 1) continue;
      long double d = std::fabs(X - static_cast<long double>(p) / q);
      if (d < r) ++out.hits;
      if (d < re) ++out.violations;
    }
  }
  return out;
}

}  // namespace ubiq
