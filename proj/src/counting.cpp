#include "ubiq/counting.hpp"

#include <cmath>
#include <thread>

#include "ubiq/errors.hpp"
#include "ubiq/random.hpp"

namespace ubiq {

namespace {

// Distance from q x to the nearest integer. For x = M 2^-s with s <= 120 the
// fractional part of q x is formed exactly in 128-bit integers.
struct ExactDouble {
  bool exact = false;
  unsigned __int128 mantissa = 0;
  int shift = 0;  // x = mantissa / 2^shift
};

ExactDouble decompose(double x) {
  ExactDouble d;
  if (x == 0) {
    d.exact = true;
    return d;
  }
  int e = 0;
  double m = std::frexp(x, &e);  // x = m 2^e, m in [0.5, 1)
  auto M = static_cast<std::uint64_t>(std::ldexp(m, 53));
  int shift = 53 - e;
  while (shift > 0 && (M & 1) == 0) {
    M >>= 1;
    --shift;
  }
  if (shift < 0 || shift > 60) return d;
  d.exact = true;
  d.mantissa = M;
  d.shift = shift;
  return d;
}

using u128 = unsigned __int128;

// ||q x|| scaled by 2^shift.
u128 scaled_distance(const ExactDouble& d, std::int64_t q) {
  if (d.shift == 0) return 0;
  u128 one = static_cast<u128>(1) << d.shift;
  u128 frac = (d.mantissa * static_cast<u128>(q)) & (one - 1);
  return std::min(frac, one - frac);
}

bool hit(const ExactDouble& d, double x, std::int64_t q, const PsiTable& t) {
  auto i = static_cast<std::size_t>(q);
  if (d.exact) {
    u128 dist = scaled_distance(d, q);
    if (t.den[i] != 0) return dist * t.den[i] < static_cast<u128>(t.num[i]) << d.shift;
    return std::ldexp(static_cast<long double>(dist), -d.shift) < t.bound[i];
  }
  long double qx = static_cast<long double>(q) * x;
  long double p = std::nearbyint(qx);
  long double best = std::fabs(qx - p);
  best = std::min(best, std::fabs(qx - (p - 1)));
  best = std::min(best, std::fabs(qx - (p + 1)));
  return best < t.bound[i];
}

}  // namespace

PsiTable psi_table(const FunctionForm& psi, std::int64_t N) {
  if (N < 1) throw ValidationError("N must be at least 1");
  if (!psi.is_zero() && !psi.in_domain(1.0))
    throw ValidationError("psi is not defined at q = 1: " + psi.to_string());
  auto size = static_cast<std::size_t>(N) + 1;
  PsiTable t{std::vector<long double>(size, 0.0L), std::vector<std::uint64_t>(size, 0),
             std::vector<std::uint64_t>(size, 0)};
  const Integer limit = Integer(1) << 62;
  for (std::int64_t q = 1; q <= N; ++q) {
    auto i = static_cast<std::size_t>(q);
    auto exact = psi.exact_value(Rational(q));
    if (!exact) {
      t.bound[i] = static_cast<long double>(q) * evaluate(psi, double(q));
      continue;
    }
    Rational b = *exact * q;
    t.bound[i] = static_cast<long double>(b.get_d());
    if (b.get_num() < limit && b.get_den() < limit) {
      t.num[i] = b.get_num().get_ui();
      t.den[i] = b.get_den().get_ui();
    }
  }
  return t;
}

std::int64_t count_R(double x, const PsiTable& table) {
  if (!std::isfinite(x)) throw ValidationError("x must be finite");
  x -= std::floor(x);  // R depends on x mod 1
  ExactDouble d = decompose(x);
  std::int64_t count = 0;
  for (std::int64_t q = 1; q <= table.N(); ++q)
    if (hit(d, x, q, table)) ++count;
  return count;
}

std::int64_t count_R(double x, std::int64_t N, const FunctionForm& psi) {
  return count_R(x, psi_table(psi, N));
}

Prediction schmidt_prediction(const FunctionForm& psi, std::int64_t N) {
  auto t = psi_table(psi, N);
  Prediction out;
  long double sum = 0;
  for (std::int64_t q = 1; q <= N; ++q) {
    long double term = t.bound[static_cast<std::size_t>(q)];
    if (2 * term >= 1 && !out.violated) {
      out.violated = true;
      out.first_violation = q;
    }
    sum += term;
  }
  out.value = static_cast<double>(2 * sum);
  return out;
}

SchmidtSummary schmidt_experiment(const FunctionForm& psi, std::int64_t N, int samples, std::uint64_t seed,
                                  int threads) {
  if (samples < 0) throw ValidationError("samples must be non-negative");
  if (threads < 1) throw ValidationError("threads must be positive");
  SchmidtSummary out;
  out.prediction = schmidt_prediction(psi, N);
  try {
    out.divergence_hypothesis = series_classify(SeriesSpec(1, std::nullopt, psi)) == Verdict::Divergent;
  } catch (const ValidationError&) {
    out.divergence_hypothesis = false;
  }
  if (samples == 0) return out;
  auto table = psi_table(psi, N);
  out.records.resize(static_cast<std::size_t>(samples));
  auto work = [&](int first, int step) {
    for (int i = first; i < samples; i += step) {
      auto rng = sample_rng(seed, static_cast<std::uint64_t>(i));
      double x = uniform01(rng);
      std::int64_t c = count_R(x, table);
      double ratio = out.prediction.value > 0 ? static_cast<double>(c) / out.prediction.value : 0.0;
      out.records[static_cast<std::size_t>(i)] = {static_cast<std::uint64_t>(i), x, N, c, out.prediction.value, ratio};
    }
  };
  if (threads == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w) pool.emplace_back(work, w, threads);
    for (auto& th : pool) th.join();
  }
  long double sum = 0;
  for (const auto& r : out.records) sum += r.ratio;
  out.mean = static_cast<double>(sum / samples);
  long double var = 0;
  for (const auto& r : out.records) var += (r.ratio - out.mean) * (r.ratio - out.mean);
  out.stddev = samples > 1 ? static_cast<double>(std::sqrt(var / (samples - 1))) : 0.0;
  return out;
}

}  // namespace ubiq
