#include "ubiq/systems.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <numbers>
#include <numeric>
#include <unordered_map>

#include "ubiq/errors.hpp"

namespace ubiq {

namespace {

constexpr std::int64_t kExactLimit = std::int64_t{1} << 62;

Rational rational_pow(const Rational& base, int n) {
  Integer num, den;
  mpz_pow_ui(num.get_mpz_t(), base.get_num_mpz_t(), static_cast<unsigned long>(n));
  mpz_pow_ui(den.get_mpz_t(), base.get_den_mpz_t(), static_cast<unsigned long>(n));
  Rational out(num, den);
  out.canonicalize();
  return out;
}

Integer floor_of(const Rational& q) {
  Integer out;
  mpz_fdiv_q(out.get_mpz_t(), q.get_num_mpz_t(), q.get_den_mpz_t());
  return out;
}

Integer isqrt(const Integer& z) {
  if (z < 0) return 0;
  Integer out;
  mpz_sqrt(out.get_mpz_t(), z.get_mpz_t());
  return out;
}

std::int64_t clamp_to_int64(const Integer& z) {
  if (z > Integer(std::numeric_limits<std::int64_t>::max() / 4)) return std::numeric_limits<std::int64_t>::max() / 4;
  if (z < 0) return 0;
  return z.get_si();
}

// ----- exact endpoints: n/d with d > 0, |n| and d below 2^63

struct Frac {
  i128 n;
  i128 d;
};

inline bool less(const Frac& x, const Frac& y) { return x.n * y.d < y.n * x.d; }

inline long double to_ld(const Frac& x) { return static_cast<long double>(x.n) / static_cast<long double>(x.d); }

bool representable(const Rational& q) {
  return fits_int64(q.get_num()) && fits_int64(q.get_den()) && abs(q.get_num()) < Integer(kExactLimit) &&
         q.get_den() < Integer(kExactLimit);
}

Frac to_frac(const Rational& q) { return {q.get_num().get_si(), q.get_den().get_si()}; }

Rational to_rational(const Frac& f) {
  Rational out(to_integer(f.n), to_integer(f.d));
  out.canonicalize();
  return out;
}

// ----- radius per reduced denominator b

struct RadiusTable {
  std::int64_t N = 0;  // largest denominator walked
  bool exact = false;
  std::vector<std::int64_t> rn, rd;  // exact radii; rd == 0 marks "no ball"
  std::vector<long double> r;        // float radii; 0 marks "no ball"
  Rational rmax_exact = 0;
  long double rmax = 0;
  bool any = false;
};

struct RadiusValue {
  std::optional<Rational> exact;
  long double value = 0;
};

RadiusValue radius_at(const FunctionForm& f, const Rational& arg) {
  RadiusValue out;
  if (f.is_zero()) {
    out.exact = Rational(0);
    return out;
  }
  try {
    out.exact = f.exact_value(arg);
  } catch (const DomainError& e) {
    throw ValidationError(std::string("radius function is not defined on the window: ") + e.what());
  }
  if (out.exact) {
    if (*out.exact > 1) out.exact = Rational(1);
    out.value = static_cast<long double>(out.exact->get_d());
  } else {
    try {
      out.value = evaluate(f, arg.get_d());
    } catch (const DomainError& e) {
      throw ValidationError(std::string("radius function is not defined on the window: ") + e.what());
    }
    if (out.value > 1) out.value = 1;
  }
  if (out.value < 0) throw ValidationError("radius function takes negative values on the window");
  return out;
}

RadiusTable build_radius_table(const StageSpec& spec, std::uint64_t cap) {
  auto [qLo, qHi] = spec.denominator_window();
  RadiusTable t;
  if (qHi < qLo || qHi < 1) return t;
  if (static_cast<std::uint64_t>(qHi) > cap)
    throw ResourceCapError("denominator range up to " + std::to_string(qHi) + " exceeds the cap " +
                           std::to_string(cap));
  t.N = qHi;
  auto size = static_cast<std::size_t>(qHi) + 1;

  if (const auto* u = std::get_if<Uniform>(&spec.rule)) {
    Rational arg = rational_pow(spec.k, spec.n);
    RadiusValue rv = radius_at(u->rho, arg);
    if (rv.value <= 0 && (!rv.exact || *rv.exact == 0)) return t;
    t.any = true;
    t.exact = rv.exact && representable(*rv.exact);
    t.r.assign(size, rv.value);
    t.r[0] = 0;
    if (t.exact) {
      Frac f = to_frac(*rv.exact);
      t.rn.assign(size, static_cast<std::int64_t>(f.n));
      t.rd.assign(size, static_cast<std::int64_t>(f.d));
      t.rd[0] = 0;
      t.rmax_exact = *rv.exact;
      for (std::int64_t b = 1; b <= qHi && t.exact; ++b)
        if (static_cast<i128>(b) * f.d >= kExactLimit) t.exact = false;
    }
    t.rmax = rv.value;
    return t;
  }

  const auto& psi = std::get<PerPoint>(spec.rule).psi;
  // radius for each denominator q of the window
  auto width = static_cast<std::size_t>(qHi - qLo + 1);
  std::vector<std::int64_t> qn(width), qd(width);
  std::vector<long double> qv(width);
  bool exact = true;
  for (std::int64_t q = qLo; q <= qHi; ++q) {
    auto i = static_cast<std::size_t>(q - qLo);
    RadiusValue rv = radius_at(psi, spec.system.weight(q));
    qv[i] = rv.value;
    if (rv.exact && representable(*rv.exact)) {
      Frac f = to_frac(*rv.exact);
      qn[i] = static_cast<std::int64_t>(f.n);
      qd[i] = static_cast<std::int64_t>(f.d);
    } else {
      exact = false;
    }
  }
  t.r.assign(size, 0);
  if (exact) {
    t.rn.assign(size, 0);
    t.rd.assign(size, 0);
  }
  auto better = [&](std::size_t i, std::size_t j) {
    if (exact) return static_cast<i128>(qn[i]) * qd[j] > static_cast<i128>(qn[j]) * qd[i];
    return qv[i] > qv[j];
  };
  std::size_t best_overall = width;
  for (std::int64_t b = 1; b <= qHi; ++b) {
    std::size_t best = width;
    if (spec.system.coprime_only()) {
      if (b >= qLo) best = static_cast<std::size_t>(b - qLo);
    } else {
      // the largest radius among the multiples of b inside the window
      std::int64_t first = ((qLo + b - 1) / b) * b;
      for (std::int64_t q = first; q <= qHi; q += b) {
        auto i = static_cast<std::size_t>(q - qLo);
        if (best == width || better(i, best)) best = i;
      }
    }
    if (best == width || qv[best] <= 0) continue;
    if (exact && qn[best] == 0) continue;
    auto ub = static_cast<std::size_t>(b);
    t.r[ub] = qv[best];
    if (exact) {
      t.rn[ub] = qn[best];
      t.rd[ub] = qd[best];
      if (static_cast<i128>(b) * qd[best] >= kExactLimit) exact = false;
    }
    if (best_overall == width || better(best, best_overall)) best_overall = best;
    t.any = true;
  }
  t.exact = exact;
  if (t.any) {
    t.rmax = qv[best_overall];
    if (exact) {
      t.rmax_exact = Rational(qn[best_overall], qd[best_overall]);
      t.rmax_exact.canonicalize();
    }
  }
  return t;
}

// ----- Farey walk

Rational round_down(const Rational& y, bool up) {
  if (representable(y) && y.get_den() < Integer(std::int64_t{1} << 40)) return y;
  const Integer scale = Integer(1) << 40;
  Integer num;
  Rational scaled = y * scale;
  if (up)
    mpz_cdiv_q(num.get_mpz_t(), scaled.get_num_mpz_t(), scaled.get_den_mpz_t());
  else
    mpz_fdiv_q(num.get_mpz_t(), scaled.get_num_mpz_t(), scaled.get_den_mpz_t());
  Rational out(num, scale);
  out.canonicalize();
  return out;
}

// Walks reduced a/b in [start, stop] with b <= N in increasing order.
template <class Visit>
std::uint64_t farey_walk(std::int64_t N, const Rational& start, const Rational& stop, std::uint64_t cap,
                         Visit&& visit) {
  Rational s = round_down(start, false);
  Rational e = round_down(stop, true);
  FareyPair fp = farey_floor(s, N);
  std::int64_t a = fp.a, b = fp.b, c = fp.c, d = fp.d;
  const auto en = static_cast<i128>(e.get_num().get_si());
  const auto ed = static_cast<i128>(e.get_den().get_si());
  std::uint64_t visited = 0;
  while (static_cast<i128>(a) * ed <= en * b) {
    if (++visited > cap)
      throw ResourceCapError("Farey sweep exceeded the cap of " + std::to_string(cap) + " points");
    visit(a, b);
    if (a == b) break;  // reached 1/1
    std::int64_t kk = (N + b) / d;
    std::int64_t nc = kk * c - a;
    std::int64_t nd = kk * d - b;
    a = c;
    b = d;
    c = nc;
    d = nd;
  }
  return visited;
}

// ----- sinks for flushed components

struct ExactAccumulator {
  std::unordered_map<std::int64_t, i128> by_den;

  void add(const Frac& lo, const Frac& hi) {
    by_den[static_cast<std::int64_t>(hi.d)] += hi.n;
    by_den[static_cast<std::int64_t>(lo.d)] -= lo.n;
  }

  Rational total() const {
    std::vector<std::pair<std::int64_t, i128>> items(by_den.begin(), by_den.end());
    std::sort(items.begin(), items.end(), [](const auto& x, const auto& y) { return x.first < y.first; });
    std::vector<Rational> terms;
    terms.reserve(items.size());
    for (const auto& [d, n] : items) {
      if (n == 0) continue;
      Rational q(to_integer(n), Integer(static_cast<long>(d)));
      q.canonicalize();
      terms.push_back(std::move(q));
    }
    return tree_sum(std::move(terms));
  }
};

struct ExactCollector {
  std::vector<Interval<Rational>> pieces;
  void add(const Frac& lo, const Frac& hi) { pieces.push_back({to_rational(lo), to_rational(hi)}); }
};

struct FloatAccumulator {
  long double sum = 0, comp = 0;
  void add(long double lo, long double hi) {
    // Neumaier summation
    long double x = hi - lo;
    long double t = sum + x;
    if (std::fabs(sum) >= std::fabs(x))
      comp += (sum - t) + x;
    else
      comp += (x - t) + sum;
    sum = t;
  }
  long double total() const { return sum + comp; }
};

struct FloatCollector {
  std::vector<Interval<double>> pieces;
  void add(long double lo, long double hi) {
    pieces.push_back({static_cast<double>(lo), static_cast<double>(hi)});
  }
};

constexpr std::uint64_t kFlushEvery = 256;
// below this many sweep points an exact answer is cheap enough to prefer
constexpr std::uint64_t kClosedFormThreshold = 1'000'000;

template <class Sink>
std::uint64_t sweep_exact(const RadiusTable& t, const Interval<Rational>& window, std::uint64_t cap, Sink& sink) {
  const Frac L = to_frac(window.lo), H = to_frac(window.hi);
  const long double rmax = t.rmax;
  Rational start = window.lo - t.rmax_exact, stop = window.hi + t.rmax_exact;
  if (start < 0) start = 0;
  if (stop > 1) stop = 1;
  std::deque<std::pair<Frac, Frac>> open;
  std::uint64_t since_flush = 0;
  auto visited = farey_walk(t.N, start, stop, cap, [&](std::int64_t a, std::int64_t b) {
    auto ub = static_cast<std::size_t>(b);
    std::int64_t rd = t.rd[ub];
    if (rd == 0) return;
    std::int64_t rn = t.rn[ub];
    i128 den = static_cast<i128>(b) * rd;
    i128 centre = static_cast<i128>(a) * rd;
    i128 off = static_cast<i128>(rn) * b;
    Frac lo{centre - off, den}, hi{centre + off, den};
    if (less(lo, L)) lo = L;
    if (less(H, hi)) hi = H;
    if (!less(lo, hi)) return;
    while (!open.empty() && !less(open.back().second, lo)) {
      if (less(hi, open.back().first)) throw InvariantViolation("sweep order broken");
      if (less(open.back().first, lo)) lo = open.back().first;
      if (less(hi, open.back().second)) hi = open.back().second;
      open.pop_back();
    }
    open.emplace_back(lo, hi);
    if (++since_flush >= kFlushEvery) {
      since_flush = 0;
      // every later ball starts at or after c - rmax; the margin absorbs rounding
      long double threshold = static_cast<long double>(a) / b - rmax - 1e-15L;
      while (open.size() > 1 && to_ld(open.front().second) < threshold) {
        sink.add(open.front().first, open.front().second);
        open.pop_front();
      }
    }
  });
  for (const auto& [lo, hi] : open) sink.add(lo, hi);
  return visited;
}

template <class Sink>
std::uint64_t sweep_float(const RadiusTable& t, const Interval<Rational>& window, std::uint64_t cap, Sink& sink) {
  const long double L = window.lo.get_d(), H = window.hi.get_d();
  const long double rmax = t.rmax;
  Rational rm = from_double(static_cast<double>(rmax) * (1 + 1e-12));
  Rational start = window.lo - rm, stop = window.hi + rm;
  if (start < 0) start = 0;
  if (stop > 1) stop = 1;
  std::deque<std::pair<long double, long double>> open;
  std::uint64_t since_flush = 0;
  auto visited = farey_walk(t.N, start, stop, cap, [&](std::int64_t a, std::int64_t b) {
    long double r = t.r[static_cast<std::size_t>(b)];
    if (r <= 0) return;
    long double c = static_cast<long double>(a) / b;
    long double lo = std::max(c - r, L), hi = std::min(c + r, H);
    if (!(lo < hi)) return;
    while (!open.empty() && !(open.back().second < lo)) {
      lo = std::min(lo, open.back().first);
      hi = std::max(hi, open.back().second);
      open.pop_back();
    }
    open.emplace_back(lo, hi);
    if (++since_flush >= kFlushEvery) {
      since_flush = 0;
      long double threshold = c - rmax - 1e-15L;
      while (open.size() > 1 && open.front().second < threshold) {
        sink.add(open.front().first, open.front().second);
        open.pop_front();
      }
    }
  });
  for (const auto& [lo, hi] : open) sink.add(lo, hi);
  return visited;
}

bool window_representable(const Interval<Rational>& w) { return representable(w.lo) && representable(w.hi); }

void validate_window(const Interval<Rational>& w) {
  if (w.lo < 0 || w.hi > 1 || w.hi < w.lo) throw ValidationError("measurement window must be a subinterval of [0,1]");
}

}  // namespace

// ---------------------------------------------------------------------------
// MeasureModel

MeasureModel::MeasureModel(Rational delta_, double a_, double b_, double r_nought_)
    : delta(std::move(delta_)), a(a_), b(b_), r_nought(r_nought_) {
  if (delta <= 0) throw ValidationError("delta must be positive");
  if (!(a > 0 && a < 1 && b > 1)) throw ValidationError("measure model constants need 0 < a < 1 < b");
  if (!(r_nought > 0)) throw ValidationError("r_o must be positive");
}

MeasureModel MeasureModel::unit_interval() { return MeasureModel(1, 0.5, 2.0, 0.5); }

MeasureModel::Check MeasureModel::check_unit_interval(std::mt19937_64& rng, int balls) const {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Check out;
  out.min_ratio = std::numeric_limits<double>::infinity();
  out.max_ratio = 0;
  for (int i = 0; i < balls; ++i) {
    Rational x = from_double(unit(rng));
    Rational r = from_double(unit(rng) * r_nought);
    if (r == 0) continue;
    auto set = ExactSet::normalize({{x - r, x + r}});
    double rd = std::pow(r.get_d(), delta.get_d());
    double ratio = set.measure().get_d() / rd;
    out.min_ratio = std::min(out.min_ratio, ratio);
    out.max_ratio = std::max(out.max_ratio, ratio);
    if (ratio < a || ratio > b) ++out.violations;
    ++out.balls;
  }
  return out;
}

// ---------------------------------------------------------------------------
// ResonantSystem

ResonantSystem ResonantSystem::classical(bool coprime_only) {
  ResonantSystem s;
  s.kind_ = SystemKind::ClassicalRationals;
  s.coprime_only_ = coprime_only;
  return s;
}

ResonantSystem ResonantSystem::ford(Rational C) {
  if (C <= 0) throw ValidationError("Ford constant C must be positive");
  ResonantSystem s;
  s.kind_ = SystemKind::FordHoroballs;
  s.C_ = std::move(C);
  return s;
}

Rational ResonantSystem::weight(std::int64_t q) const {
  if (kind_ == SystemKind::ClassicalRationals) return Rational(q);
  Integer qq(static_cast<long>(q));
  return 2 * C_ * Rational(qq * qq);
}

std::pair<std::int64_t, std::int64_t> ResonantSystem::denominator_window(const Rational& lo,
                                                                         const Rational& hi) const {
  if (lo < 0 || hi < lo) throw ValidationError("weight bounds need 0 <= lo <= hi");
  Integer qlo, qhi;
  if (kind_ == SystemKind::ClassicalRationals) {
    qlo = floor_of(lo) + 1;
    qhi = floor_of(hi);
  } else {
    // q^2 in (lo/2C, hi/2C]
    qlo = isqrt(floor_of(lo / (2 * C_))) + 1;
    qhi = isqrt(floor_of(hi / (2 * C_)));
  }
  if (qlo < 1) qlo = 1;
  return {clamp_to_int64(qlo), clamp_to_int64(qhi)};
}

std::string ResonantSystem::to_string() const {
  if (kind_ == SystemKind::FordHoroballs) return "ford(C=" + C_.get_str() + ")";
  return coprime_only_ ? "rationals(coprime)" : "rationals";
}

Rational ResonantPoint::point() const {
  Rational out(p, q);
  out.canonicalize();
  return out;
}

std::uint64_t enumerate_count(const ResonantSystem& system, const Rational& lo, const Rational& hi) {
  auto [qLo, qHi] = system.denominator_window(lo, hi);
  if (qHi < qLo) return 0;
  if (!system.coprime_only()) {
    // sum (q + 1)
    auto n = static_cast<unsigned __int128>(qHi - qLo + 1);
    auto sum = n * static_cast<unsigned __int128>(qLo + qHi) / 2 + n;
    if (sum > std::numeric_limits<std::uint64_t>::max()) return std::numeric_limits<std::uint64_t>::max();
    return static_cast<std::uint64_t>(sum);
  }
  if (qHi > 400'000'000) throw ResourceCapError("denominator range too large to count");
  auto phi = totients(qHi);
  std::uint64_t total = 0;
  for (std::int64_t q = qLo; q <= qHi; ++q) total += static_cast<std::uint64_t>(phi[static_cast<std::size_t>(q)]);
  if (qLo == 1) total += 1;  // both 0/1 and 1/1
  return total;
}

std::vector<ResonantPoint> enumerate(const ResonantSystem& system, const Rational& lo, const Rational& hi,
                                     std::uint64_t cap) {
  if (!(lo < hi)) throw ValidationError("enumerate needs lo < hi");
  auto [qLo, qHi] = system.denominator_window(lo, hi);
  std::vector<ResonantPoint> out;
  if (qHi < qLo) return out;
  // cheap bound first so that absurd windows fail before any counting work
  auto n = static_cast<unsigned __int128>(qHi - qLo + 1);
  if (n * static_cast<unsigned __int128>(qLo + qHi + 2) / 2 > cap) {
    std::uint64_t count = enumerate_count(system, lo, hi);
    if (count > cap)
      throw ResourceCapError("enumeration of " + std::to_string(count) + " pairs exceeds the cap " +
                             std::to_string(cap));
  }
  for (std::int64_t q = qLo; q <= qHi; ++q) {
    Rational w = system.weight(q);
    for (std::int64_t p = 0; p <= q; ++p) {
      if (system.coprime_only() && std::gcd(p, q) != 1) continue;
      out.push_back({p, q, w});
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stages

StageSpec::StageSpec(ResonantSystem system_, std::variant<PerPoint, Uniform> rule_, Rational k_, int n_)
    : system(std::move(system_)), rule(std::move(rule_)), k(std::move(k_)), n(n_) {
  if (k <= 1) throw ValidationError("k must exceed 1");
  if (n < 1) throw ValidationError("n must be at least 1");
  if (n > 4096) throw ValidationError("n is unreasonably large");
}

std::pair<Rational, Rational> StageSpec::weight_window() const {
  Rational hi = rational_pow(k, n);
  if (uniform()) return {Rational(0), hi};
  return {rational_pow(k, n - 1), hi};
}

std::pair<std::int64_t, std::int64_t> StageSpec::denominator_window() const {
  auto [lo, hi] = weight_window();
  return system.denominator_window(lo, hi);
}

std::string to_string(StageMethod m) {
  switch (m) {
    case StageMethod::Empty: return "empty";
    case StageMethod::ExactSweep: return "exact-sweep";
    case StageMethod::FloatSweep: return "float-sweep";
    case StageMethod::DisjointClosedForm: return "disjoint-closed-form";
  }
  return "?";
}

std::uint64_t sweep_cost_estimate(const StageSpec& spec, const Interval<Rational>& window) {
  auto [qLo, qHi] = spec.denominator_window();
  if (qHi < qLo || qHi < 1) return 0;
  long double N = static_cast<long double>(qHi);
  long double len = Rational(window.hi - window.lo).get_d();
  long double est = 3.0L / (std::numbers::pi_v<long double> * std::numbers::pi_v<long double>) * N * N * len +
                    2.0L * N + 2.0L;
  if (est > 1.8e19L) return std::numeric_limits<std::uint64_t>::max();
  return static_cast<std::uint64_t>(est);
}

StageMeasure stage_measure(const StageSpec& spec, const Interval<Rational>& window, const StageOptions& options) {
  validate_window(window);
  StageMeasure out;
  out.exact = Rational(0);
  if (window.lo == window.hi) return out;
  RadiusTable t = build_radius_table(spec, options.cap);
  if (!t.any) return out;
  out.exact.reset();

  bool whole = window.lo == 0 && window.hi == 1;
  Rational N2(Integer(static_cast<long>(t.N)) * Integer(static_cast<long>(t.N)));
  bool disjoint = t.exact ? 2 * t.rmax_exact * N2 <= 1
                          : 2.0L * t.rmax * static_cast<long double>(t.N) * t.N * (1 + 1e-9L) <= 1.0L;
  std::uint64_t estimate = sweep_cost_estimate(spec, window);
  bool cheap = t.exact && estimate <= kClosedFormThreshold;
  if (whole && disjoint && options.allow_closed_form && !options.require_exact && !cheap) {
    // balls around distinct Farey fractions of order N are pairwise disjoint;
    // 0/1 and 1/1 each keep half a ball, which phi(1) = 1 accounts for
    auto phi = totients(t.N);
    long double sum = 0;
    for (std::int64_t b = t.N; b >= 1; --b) sum += static_cast<long double>(phi[static_cast<std::size_t>(b)]) * 2 * t.r[static_cast<std::size_t>(b)];
    out.value = static_cast<double>(sum);
    out.points_visited = 0;
    out.method = StageMethod::DisjointClosedForm;
    return out;
  }

  if (estimate > options.cap)
    throw ResourceCapError("stage sweep needs about " + std::to_string(estimate) + " points, over the cap " +
                           std::to_string(options.cap));

  if (t.exact && window_representable(window)) {
    ExactAccumulator acc;
    out.points_visited = sweep_exact(t, window, options.cap, acc);
    out.exact = acc.total();
    out.value = out.exact->get_d();
    out.method = StageMethod::ExactSweep;
    return out;
  }
  if (options.require_exact)
    throw ValidationError("exact stage measure needs rational radii with denominators below 2^62");
  FloatAccumulator acc;
  out.points_visited = sweep_float(t, window, options.cap, acc);
  out.value = static_cast<double>(acc.total());
  out.method = StageMethod::FloatSweep;
  return out;
}

template <class Scalar>
IntervalSet<Scalar> delta_stage(const StageSpec& spec, std::uint64_t cap) {
  Interval<Rational> whole{Rational(0), Rational(1)};
  RadiusTable t = build_radius_table(spec, cap);
  if (!t.any) return {};
  std::uint64_t estimate = sweep_cost_estimate(spec, whole);
  if (estimate > cap)
    throw ResourceCapError("stage set needs about " + std::to_string(estimate) + " points, over the cap " +
                           std::to_string(cap));
  if constexpr (std::is_same_v<Scalar, Rational>) {
    if (!t.exact) throw ValidationError("exact stage set needs rational radii with denominators below 2^62");
    ExactCollector sink;
    sweep_exact(t, whole, cap, sink);
    return ExactSet::from_normalized(std::move(sink.pieces));
  } else {
    FloatCollector sink;
    sweep_float(t, whole, cap, sink);
    return FloatSet::normalize(std::move(sink.pieces));
  }
}

template ExactSet delta_stage<Rational>(const StageSpec&, std::uint64_t);
template FloatSet delta_stage<double>(const StageSpec&, std::uint64_t);

std::string to_string(ScanTrend t) { return t == ScanTrend::Bounded ? "bounded" : "growing"; }

StageScan stage_measure_scan(const ResonantSystem& system, const FunctionForm& psi, const Rational& k, int n_first,
                             int n_last, const StageOptions& options) {
  if (n_first < 1 || n_last < n_first) throw ValidationError("stage scan needs 1 <= n_first <= n_last");
  StageScan out;
  double partial = 0;
  for (int n = n_first; n <= n_last; ++n) {
    StageSpec spec(system, PerPoint{psi}, k, n);
    StageMeasure m = stage_measure(spec, {Rational(0), Rational(1)}, options);
    partial += m.value;
    out.rows.push_back({n, m.value, partial, m.method});
  }
  try {
    Rational u = system.kind() == SystemKind::ClassicalRationals ? Rational(1) : Rational(0);
    out.symbolic = series_classify(SeriesSpec(u, std::nullopt, psi));
  } catch (const ValidationError&) {
    out.symbolic.reset();
  }
  // geometric decay over the last stages bounds the tail of the partial sums
  const auto& r = out.rows;
  if (r.back().measure == 0) {
    out.trend = ScanTrend::Bounded;
  } else if (r.size() >= 3) {
    bool decaying = true;
    for (std::size_t i = r.size() - 3; i + 1 < r.size(); ++i)
      if (!(r[i].measure > 0 && r[i + 1].measure / r[i].measure < 0.9)) decaying = false;
    out.trend = decaying ? ScanTrend::Bounded : ScanTrend::Growing;
  } else {
    out.trend = out.symbolic == Verdict::Divergent ? ScanTrend::Growing : ScanTrend::Bounded;
  }
  return out;
}

std::vector<std::int64_t> totients(std::int64_t n) {
  if (n < 0) throw ValidationError("totient table size must be non-negative");
  std::vector<std::int64_t> phi(static_cast<std::size_t>(n) + 1);
  std::iota(phi.begin(), phi.end(), 0);
  for (std::int64_t p = 2; p <= n; ++p) {
    if (phi[static_cast<std::size_t>(p)] != p) continue;  // composite
    for (std::int64_t m = p; m <= n; m += p) phi[static_cast<std::size_t>(m)] -= phi[static_cast<std::size_t>(m)] / p;
  }
  return phi;
}

FareyPair farey_floor(const Rational& y, std::int64_t N) {
  if (N < 1) throw ValidationError("Farey order must be positive");
  if (y < 0 || y > 1) throw ValidationError("farey_floor needs y in [0,1]");
  if (y == 1) return {1, 1, 1, 1};
  if (!representable(y)) throw ValidationError("farey_floor point has too large a denominator");
  const i128 u = y.get_num().get_si(), v = y.get_den().get_si();
  i128 ln = 0, ld = 1, rn = 1, rd = 1;  // l <= y < r
  while (ld + rd <= N) {
    i128 mn = ln + rn, md = ld + rd;
    if (u * md < v * mn) {
      // y < mediant: move r toward l as far as possible
      i128 t_den = (N - rd) / ld;
      i128 gap_l = u * ld - v * ln;  // >= 0
      i128 t = t_den;
      if (gap_l > 0) {
        i128 num = v * rn - u * rd;  // > 0
        i128 t_y = (num - 1) / gap_l;  // largest t with t * gap_l < num
        t = std::min(t, t_y);
      }
      rn += t * ln;
      rd += t * ld;
    } else {
      i128 t_den = (N - ld) / rd;
      i128 num = u * ld - v * ln;
      i128 gap_r = v * rn - u * rd;  // > 0
      i128 t = std::min(t_den, num / gap_r);
      ln += t * rn;
      ld += t * rd;
    }
  }
  return {static_cast<std::int64_t>(ln), static_cast<std::int64_t>(ld), static_cast<std::int64_t>(rn),
          static_cast<std::int64_t>(rd)};
}

}  // namespace ubiq
