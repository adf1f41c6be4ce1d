#pragma once

// R(x, N) = #{1 <= q <= N : |x - p/q| < psi(q) for some integer p} and the
// Monte Carlo check of R(x, N) ~ 2 sum q psi(q).

#include <cstdint>
#include <optional>
#include <vector>

#include "ubiq/functions.hpp"

namespace ubiq {

/// q psi(q) for q = 1..N (index 0 unused), kept as an exact fraction when
/// psi(q) is rational with small enough terms.
struct PsiTable {
  std::vector<long double> bound;
  std::vector<std::uint64_t> num, den;  // den == 0: no exact value
  std::int64_t N() const { return static_cast<std::int64_t>(bound.size()) - 1; }
};
PsiTable psi_table(const FunctionForm& psi, std::int64_t N);

/// Counts q (not pairs). x is taken exactly as the given double.
std::int64_t count_R(double x, std::int64_t N, const FunctionForm& psi);
std::int64_t count_R(double x, const PsiTable& table);

struct Prediction {
  double value = 0.0;
  /// 2 q psi(q) >= 1 for some q <= N.
  bool violated = false;
  std::optional<std::int64_t> first_violation;
};

/// 2 sum_{q <= N} q psi(q).
Prediction schmidt_prediction(const FunctionForm& psi, std::int64_t N);

struct CountRecord {
  std::uint64_t seed_index;
  double x;
  std::int64_t N;
  std::int64_t count;
  double prediction;
  double ratio;
};

struct SchmidtSummary {
  std::vector<CountRecord> records;
  double mean = 0.0;
  double stddev = 0.0;
  Prediction prediction;
  /// sum q psi(q) diverges, the hypothesis under which R ~ prediction.
  bool divergence_hypothesis = false;
};

/// `samples` uniform x drawn with per-sample sub-seeds; the result does not
/// depend on `threads`.
SchmidtSummary schmidt_experiment(const FunctionForm& psi, std::int64_t N, int samples, std::uint64_t seed,
                                  int threads = 1);

}  // namespace ubiq
