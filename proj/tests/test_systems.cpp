#include <numeric>
#include <random>

#include "doctest.h"
#include "ubiq/errors.hpp"
#include "ubiq/systems.hpp"

using namespace ubiq;

namespace {

Rational Q(long p, long q = 1) {
  Rational out(p, q);
  out.canonicalize();
  return out;
}

// Materializes every ball of the stage and merges them with the plain normalizer.
ExactSet brute_stage(const StageSpec& spec) {
  auto [lo, hi] = spec.weight_window();
  auto pts = enumerate(spec.system, lo, hi);
  std::vector<Interval<Rational>> raw;
  for (const auto& pt : pts) {
    Rational r;
    if (const auto* u = std::get_if<Uniform>(&spec.rule)) {
      Rational kn = 1;
      for (int i = 0; i < spec.n; ++i) kn *= spec.k;
      r = *u->rho.exact_value(kn);
    } else {
      r = *std::get<PerPoint>(spec.rule).psi.exact_value(pt.weight);
    }
    Rational c = pt.point();
    raw.push_back({c - r, c + r});
  }
  return ExactSet::normalize(raw);
}

FloatSet brute_stage_float(const StageSpec& spec) {
  auto [lo, hi] = spec.weight_window();
  auto pts = enumerate(spec.system, lo, hi);
  std::vector<Interval<double>> raw;
  for (const auto& pt : pts) {
    double r = evaluate(std::get<PerPoint>(spec.rule).psi, pt.weight.get_d());
    double c = static_cast<double>(pt.p) / static_cast<double>(pt.q);
    raw.push_back({c - r, c + r});
  }
  return FloatSet::normalize(raw);
}

std::int64_t phi_by_gcd(std::int64_t n) {
  std::int64_t c = 0;
  for (std::int64_t p = 1; p <= n; ++p) c += std::gcd(p, n) == 1;
  return c;
}

}  // namespace

TEST_CASE("enumerate examples") {
  auto a = enumerate(ResonantSystem::classical(false), 1, 2);
  REQUIRE(a.size() == 3);
  CHECK(a[0] == ResonantPoint{0, 2, 2});
  CHECK(a[1] == ResonantPoint{1, 2, 2});
  CHECK(a[2] == ResonantPoint{2, 2, 2});

  auto b = enumerate(ResonantSystem::classical(true), 1, 3);
  REQUIRE(b.size() == 3);
  CHECK(b[0].point() == Q(1, 2));
  CHECK(b[1].point() == Q(1, 3));
  CHECK(b[2].point() == Q(2, 3));

  auto c = enumerate(ResonantSystem::ford(1), 0, 8);
  REQUIRE(c.size() == 3);
  CHECK(c[0] == ResonantPoint{0, 1, 2});
  CHECK(c[1] == ResonantPoint{1, 1, 2});
  CHECK(c[2] == ResonantPoint{1, 2, 8});
  CHECK_THROWS_AS(enumerate(ResonantSystem::classical(), 2, 1), ValidationError);
  CHECK_THROWS_AS(enumerate(ResonantSystem::classical(), 0, 100000, 1000), ResourceCapError);
}

TEST_CASE("enumeration is sorted by weight then point and counts agree") {
  for (auto sys : {ResonantSystem::classical(false), ResonantSystem::classical(true), ResonantSystem::ford(1),
                   ResonantSystem::ford(Q(3, 2))}) {
    auto pts = enumerate(sys, Q(5, 2), 300);
    CHECK(pts.size() == enumerate_count(sys, Q(5, 2), 300));
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
      bool ordered = pts[i].weight < pts[i + 1].weight ||
                     (pts[i].weight == pts[i + 1].weight && pts[i].point() < pts[i + 1].point());
      CHECK(ordered);
    }
    for (const auto& p : pts) {
      CHECK(p.weight > Q(5, 2));
      CHECK(p.weight <= 300);
      CHECK(p.weight == sys.weight(p.q));
      if (sys.coprime_only()) CHECK(std::gcd(p.p, p.q) == 1);
    }
  }
}

TEST_CASE("weight windows partition the range") {
  for (auto sys : {ResonantSystem::classical(false), ResonantSystem::ford(1)}) {
    for (auto k : {Q(2), Q(3, 2), Q(6)}) {
      int N = k == 6 ? 4 : 6;
      Rational top = 1;
      for (int i = 0; i < N; ++i) top *= k;
      auto all = enumerate(sys, 1, top);
      std::vector<ResonantPoint> pieces;
      Rational lo = 1;
      for (int n = 1; n <= N; ++n) {
        Rational hi = lo * k;
        if (n == 1) hi = k;
        auto part = enumerate(sys, lo, hi);
        pieces.insert(pieces.end(), part.begin(), part.end());
        lo = hi;
      }
      CHECK(pieces == all);
    }
  }
}

TEST_CASE("Ford points are reduced") {
  for (const auto& p : enumerate(ResonantSystem::ford(1), 0, 2 * 150 * 150)) CHECK(std::gcd(p.p, p.q) == 1);
}

TEST_CASE("denominator windows") {
  StageSpec s(ResonantSystem::classical(), PerPoint{FunctionForm::power_log(1, -3)}, 2, 3);
  CHECK(s.denominator_window() == std::pair<std::int64_t, std::int64_t>{5, 8});
  StageSpec u(ResonantSystem::classical(), Uniform{FunctionForm::power_log(6, -2)}, 6, 2);
  CHECK(u.denominator_window() == std::pair<std::int64_t, std::int64_t>{1, 36});
  StageSpec f(ResonantSystem::ford(1), PerPoint{FunctionForm::power_log(1, -1)}, 2, 5);
  // 16 < 2q^2 <= 32
  CHECK(f.denominator_window() == std::pair<std::int64_t, std::int64_t>{3, 4});
  StageSpec g(ResonantSystem::classical(), PerPoint{FunctionForm::power_log(1, -3)}, Q(3, 2), 2);
  // 3/2 < q <= 9/4
  CHECK(g.denominator_window() == std::pair<std::int64_t, std::int64_t>{2, 2});
  CHECK_THROWS_AS(StageSpec(ResonantSystem::classical(), PerPoint{FunctionForm::zero()}, 1, 1), ValidationError);
  CHECK_THROWS_AS(StageSpec(ResonantSystem::classical(), PerPoint{FunctionForm::zero()}, 2, 0), ValidationError);
}

TEST_CASE("delta_stage example and trivial cases") {
  StageSpec s(ResonantSystem::classical(), PerPoint{FunctionForm::power_log(1, -3)}, 2, 1);
  auto set = delta_stage<Rational>(s);
  CHECK(set == ExactSet::normalize({{Q(0), Q(1, 8)}, {Q(3, 8), Q(5, 8)}, {Q(7, 8), Q(1)}}));
  CHECK(set.measure() == Q(1, 2));
  CHECK(stage_measure(s).exact == Q(1, 2));
  StageSpec z(ResonantSystem::classical(), PerPoint{FunctionForm::zero()}, 2, 4);
  CHECK(delta_stage<Rational>(z).empty());
  CHECK(stage_measure(z).value == 0);
  CHECK(stage_measure(z).method == StageMethod::Empty);
}

TEST_CASE("sweep measure equals the brute-force union") {
  std::vector<FunctionForm> psis = {FunctionForm::power_log(1, -2), FunctionForm::power_log(1, -3),
                                    FunctionForm::power_log(Q(1, 3), -1), FunctionForm::power_log(2, Q(-3, 1)),
                                    FunctionForm::power_log(Q(1, 5), 0)};
  for (auto sys : {ResonantSystem::classical(false), ResonantSystem::classical(true), ResonantSystem::ford(1)}) {
    for (const auto& psi : psis)
      for (auto k : {Q(2), Q(3), Q(5, 2)})
        for (int n = 1; n <= 5; ++n) {
          StageSpec spec(sys, PerPoint{psi}, k, n);
          if (spec.denominator_window().second > 200) continue;
          CAPTURE(sys.to_string());
          CAPTURE(psi.to_string());
          CAPTURE(n);
          StageOptions opt;
          opt.allow_closed_form = false;
          auto m = stage_measure(spec, {0, 1}, opt);
          auto ref = brute_stage(spec);
          REQUIRE(m.exact.has_value());
          CHECK(*m.exact == ref.measure());
          CHECK(delta_stage<Rational>(spec) == ref);
        }
    for (long c : {1, 3, 6})
      for (int n = 1; n <= 3; ++n) {
        StageSpec spec(sys, Uniform{FunctionForm::power_log(c, -2)}, 6, n);
        if (spec.denominator_window().second > 216) continue;
        auto m = stage_measure(spec);
        REQUIRE(m.exact.has_value());
        CHECK(*m.exact == brute_stage(spec).measure());
      }
  }
}

TEST_CASE("sweep over sub-windows equals the brute-force intersection") {
  std::mt19937_64 rng(21);
  std::uniform_int_distribution<long> num(0, 997);
  for (int t = 0; t < 60; ++t) {
    long a = num(rng), b = num(rng);
    if (a > b) std::swap(a, b);
    Interval<Rational> w{Q(a, 997), Q(b, 997)};
    StageSpec spec(t % 2 ? ResonantSystem::classical() : ResonantSystem::ford(1),
                   PerPoint{FunctionForm::power_log(1, t % 3 == 0 ? Q(-2) : Q(-3))}, 3, 1 + t % 4);
    auto full = brute_stage(spec);
    auto cut = full.intersect(ExactSet::normalize({{w.lo, w.hi}}));
    StageOptions opt;
    opt.allow_closed_form = false;
    CHECK(*stage_measure(spec, w, opt).exact == cut.measure());
  }
}

TEST_CASE("float sweep agrees with a float brute force for transcendental radii") {
  auto psi = FunctionForm::power_log(1, -2, -1);
  for (int n = 1; n <= 6; ++n) {
    StageSpec spec(ResonantSystem::classical(), PerPoint{psi}, 2, n);
    auto m = stage_measure(spec);
    CHECK(m.method == StageMethod::FloatSweep);
    CHECK(m.value == doctest::Approx(brute_stage_float(spec).measure()).epsilon(1e-12));
    CHECK(delta_stage<double>(spec).measure() == doctest::Approx(m.value).epsilon(1e-12));
  }
}

TEST_CASE("disjoint closed form agrees with the exact sweep") {
  for (int n = 11; n <= 13; ++n) {
    StageSpec spec(ResonantSystem::classical(), PerPoint{FunctionForm::power_log(1, -3)}, 2, n);
    auto closed = stage_measure(spec);
    CHECK(closed.method == StageMethod::DisjointClosedForm);
    StageOptions opt;
    opt.allow_closed_form = false;
    auto swept = stage_measure(spec, {0, 1}, opt);
    CHECK(swept.method == StageMethod::ExactSweep);
    CHECK(closed.value == doctest::Approx(swept.value).epsilon(1e-15));
  }
}

TEST_CASE("stage measure bounds") {
  auto psi = FunctionForm::power_log(1, -2);
  for (int n = 1; n <= 6; ++n) {
    StageSpec spec(ResonantSystem::classical(), PerPoint{psi}, 2, n);
    auto [lo, hi] = spec.weight_window();
    auto count = enumerate_count(spec.system, lo, hi);
    auto [qLo, qHi] = spec.denominator_window();
    double rmax = evaluate(psi, static_cast<double>(qLo));
    double m = stage_measure(spec).value;
    CHECK(m <= 1.0);
    CHECK(m <= static_cast<double>(count) * 2 * rmax);
    CHECK(qHi >= qLo);
  }
}

TEST_CASE("stage sets are monotone in the radius function") {
  std::vector<FunctionForm> ladder = {FunctionForm::power_log(Q(1, 4), -3), FunctionForm::power_log(1, -3),
                                      FunctionForm::power_log(1, -2), FunctionForm::power_log(2, -2)};
  for (int n = 1; n <= 5; ++n)
    for (std::size_t i = 0; i + 1 < ladder.size(); ++i) {
      StageSpec small(ResonantSystem::classical(), PerPoint{ladder[i]}, 2, n);
      StageSpec big(ResonantSystem::classical(), PerPoint{ladder[i + 1]}, 2, n);
      CHECK(delta_stage<Rational>(big).contains(delta_stage<Rational>(small)));
    }
}

TEST_CASE("stage scan regimes") {
  auto conv = stage_measure_scan(ResonantSystem::classical(), FunctionForm::power_log(1, -3), 2, 1, 12);
  CHECK(conv.trend == ScanTrend::Bounded);
  CHECK(conv.symbolic == Verdict::Convergent);
  for (const auto& row : conv.rows) {
    // m(Delta) <= sum over the window of (q + 1) 2 q^-3
    double bound = 0;
    for (long q = (1L << (row.n - 1)) + 1; q <= (1L << row.n); ++q) bound += (q + 1) * 2.0 / (double(q) * q * q);
    CHECK(row.measure <= bound * (1 + 1e-12));
  }
  auto div = stage_measure_scan(ResonantSystem::classical(), FunctionForm::power_log(1, -2), 6, 1, 4);
  CHECK(div.trend == ScanTrend::Growing);
  CHECK(div.symbolic == Verdict::Divergent);
  for (const auto& row : div.rows) CHECK(row.measure > 0.3);
  auto zero = stage_measure_scan(ResonantSystem::classical(), FunctionForm::zero(), 2, 1, 5);
  for (const auto& row : zero.rows) CHECK(row.measure == 0);
  CHECK(zero.trend == ScanTrend::Bounded);
}

TEST_CASE("resource cap") {
  StageSpec spec(ResonantSystem::classical(), PerPoint{FunctionForm::power_log(1, -2)}, 6, 5);
  StageOptions opt;
  opt.cap = 1000;
  CHECK_THROWS_AS(stage_measure(spec, {0, 1}, opt), ResourceCapError);
  CHECK_THROWS_AS(delta_stage<Rational>(spec, 1000), ResourceCapError);
}

TEST_CASE("measure model on the unit interval") {
  auto m = MeasureModel::unit_interval();
  std::mt19937_64 rng(31);
  auto check = m.check_unit_interval(rng, 100);
  CHECK(check.balls == 100);
  CHECK(check.violations == 0);
  CHECK(check.min_ratio >= 1.0);
  CHECK(check.max_ratio <= 2.0);
  CHECK_THROWS_AS(MeasureModel(1, 1.0, 2.0, 0.5), ValidationError);
}

TEST_CASE("farey_floor matches a brute-force search") {
  std::mt19937_64 rng(41);
  for (std::int64_t N : {1, 2, 3, 7, 30, 101}) {
    std::vector<Rational> farey;
    for (std::int64_t q = 1; q <= N; ++q)
      for (std::int64_t p = 0; p <= q; ++p)
        if (std::gcd(p, q) == 1) farey.push_back(Q(p, q));
    std::sort(farey.begin(), farey.end());
    std::uniform_int_distribution<long> num(0, 9999);
    for (int t = 0; t < 200; ++t) {
      Rational y = t < 100 ? Q(num(rng), 9999) : farey[static_cast<std::size_t>(t) % farey.size()];
      if (y == 1) continue;
      auto it = std::upper_bound(farey.begin(), farey.end(), y);
      Rational hi = *it, lo = *(it - 1);
      auto fp = farey_floor(y, N);
      CHECK(Q(fp.a, fp.b) == lo);
      CHECK(Q(fp.c, fp.d) == hi);
    }
  }
}

TEST_CASE("totients") {
  auto phi = totients(500);
  for (std::int64_t n = 1; n <= 500; ++n) CHECK(phi[static_cast<std::size_t>(n)] == phi_by_gcd(n));
}
