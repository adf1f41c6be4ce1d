#pragma once

// Resonant systems (rationals with weight q, Ford circle bases with weight
// 2Cq^2), the stage sets Delta(psi, n) built from them, and their measures.

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "ubiq/functions.hpp"
#include "ubiq/intervals.hpp"
#include "ubiq/rational.hpp"

namespace ubiq {

/// a r^delta <= m(B(x,r)) <= b r^delta for r <= r_o.
struct MeasureModel {
  Rational delta;
  double a;
  double b;
  double r_nought;

  MeasureModel(Rational delta, double a, double b, double r_nought);

  /// Lebesgue measure on [0,1].
  static MeasureModel unit_interval();

  struct Check {
    int balls = 0;
    int violations = 0;
    double min_ratio = 0;  // min m(B)/r^delta
    double max_ratio = 0;
  };
  /// Tests the two-sided bound on random balls centred in [0,1] with r <= r_o.
  Check check_unit_interval(std::mt19937_64& rng, int balls) const;
};

enum class SystemKind { ClassicalRationals, FordHoroballs };

class ResonantSystem {
 public:
  static ResonantSystem classical(bool coprime_only = false);
  static ResonantSystem ford(Rational C = 1);

  SystemKind kind() const { return kind_; }
  bool coprime_only() const { return kind_ == SystemKind::FordHoroballs || coprime_only_; }
  const Rational& ford_constant() const { return C_; }

  /// q for rationals, 2Cq^2 for Ford bases.
  Rational weight(std::int64_t q) const;
  /// Denominators whose weight lies in (lo, hi]; empty when first > second.
  std::pair<std::int64_t, std::int64_t> denominator_window(const Rational& lo, const Rational& hi) const;

  std::string to_string() const;

 private:
  SystemKind kind_ = SystemKind::ClassicalRationals;
  bool coprime_only_ = false;
  Rational C_ = 1;
};

struct ResonantPoint {
  std::int64_t p;
  std::int64_t q;
  Rational weight;

  Rational point() const;
  friend bool operator==(const ResonantPoint&, const ResonantPoint&) = default;
};

inline constexpr std::uint64_t kDefaultCap = 100'000'000;

/// Every (point, weight) with lo < weight <= hi, ordered by weight then point.
std::vector<ResonantPoint> enumerate(const ResonantSystem& system, const Rational& lo, const Rational& hi,
                                     std::uint64_t cap = kDefaultCap);
/// Number of pairs enumerate() would return.
std::uint64_t enumerate_count(const ResonantSystem& system, const Rational& lo, const Rational& hi);

/// Radius psi(weight) at each point of the window (k^{n-1}, k^n].
struct PerPoint {
  FunctionForm psi;
};
/// Common radius rho(k^n) at every point with weight <= k^n.
struct Uniform {
  FunctionForm rho;
};

struct StageSpec {
  ResonantSystem system;
  std::variant<PerPoint, Uniform> rule;
  Rational k;
  int n;

  StageSpec(ResonantSystem system, std::variant<PerPoint, Uniform> rule, Rational k, int n);

  /// Weight window (lo, hi]; lo = 0 for the Uniform rule.
  std::pair<Rational, Rational> weight_window() const;
  /// Denominator window [qLo, qHi] matching weight_window().
  std::pair<std::int64_t, std::int64_t> denominator_window() const;
  bool uniform() const { return std::holds_alternative<Uniform>(rule); }
};

enum class StageMethod { Empty, ExactSweep, FloatSweep, DisjointClosedForm };
std::string to_string(StageMethod m);

struct StageOptions {
  std::uint64_t cap = kDefaultCap;
  /// Fail instead of falling back to long double.
  bool require_exact = false;
  /// Allow sum phi(b) 2 r(b) when the balls are provably disjoint.
  bool allow_closed_form = true;
};

struct StageMeasure {
  double value = 0.0;
  std::optional<Rational> exact;
  std::uint64_t points_visited = 0;
  StageMethod method = StageMethod::Empty;
};

/// m(window ∩ Delta), window a subinterval of [0,1].
StageMeasure stage_measure(const StageSpec& spec, const Interval<Rational>& window = {Rational(0), Rational(1)},
                           const StageOptions& options = {});

/// The stage set itself; Rational endpoints need exactly representable radii.
template <class Scalar>
IntervalSet<Scalar> delta_stage(const StageSpec& spec, std::uint64_t cap = kDefaultCap);

extern template ExactSet delta_stage<Rational>(const StageSpec&, std::uint64_t);
extern template FloatSet delta_stage<double>(const StageSpec&, std::uint64_t);

/// Upper bound on reduced points the sweep over `window` would visit.
std::uint64_t sweep_cost_estimate(const StageSpec& spec, const Interval<Rational>& window);

struct ScanRow {
  int n;
  double measure;
  double partial_sum;
  StageMethod method;
};

enum class ScanTrend { Bounded, Growing };
std::string to_string(ScanTrend t);

struct StageScan {
  std::vector<ScanRow> rows;
  ScanTrend trend = ScanTrend::Bounded;
  /// Convergence of the matching volume series, decided symbolically.
  std::optional<Verdict> symbolic;
};

/// Stages n = n_first..n_last of a PerPoint family.
StageScan stage_measure_scan(const ResonantSystem& system, const FunctionForm& psi, const Rational& k,
                             int n_first, int n_last, const StageOptions& options = {});

/// Euler phi(0..n).
std::vector<std::int64_t> totients(std::int64_t n);

/// Consecutive pair a/b <= y < c/d of the Farey sequence of order N (y in [0,1)).
/// For y == 1 returns (1/1, 1/1).
struct FareyPair {
  std::int64_t a, b, c, d;
};
FareyPair farey_floor(const Rational& y, std::int64_t N);

}  // namespace ubiq
