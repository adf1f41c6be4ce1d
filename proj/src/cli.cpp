#include "ubiq/cli.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <map>
#include <numbers>
#include <sstream>
#include <thread>
#include <unistd.h>

#include "ubiq/counting.hpp"
#include "ubiq/errors.hpp"
#include "ubiq/functions.hpp"
#include "ubiq/geodesics.hpp"
#include "ubiq/horoballs.hpp"
#include "ubiq/random.hpp"
#include "ubiq/systems.hpp"
#include "ubiq/ubiquity.hpp"

namespace ubiq::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------- rendering

std::size_t Table::column(const std::string& name) const {
  auto it = std::find(columns.begin(), columns.end(), name);
  if (it == columns.end()) throw ValidationError("payload has no column '" + name + "'");
  return static_cast<std::size_t>(it - columns.begin());
}

namespace {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string cell_text(const Cell& c) {
  if (auto* i = std::get_if<std::int64_t>(&c)) return std::to_string(*i);
  if (auto* d = std::get_if<double>(&c)) return format_double(*d);
  return std::get<std::string>(c);
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

nlohmann::ordered_json cell_json(const Cell& c) {
  if (auto* i = std::get_if<std::int64_t>(&c)) return *i;
  if (auto* d = std::get_if<double>(&c)) {
    if (std::isfinite(*d)) return *d;
    return format_double(*d);  // JSON has no inf/nan
  }
  return std::get<std::string>(c);
}

std::string ini_value(const std::string& v) {
  if (v.empty() || v.find_first_of(" \t#;=\"") != std::string::npos) {
    std::string out = "\"";
    for (char ch : v) {
      if (ch == '"' || ch == '\\') out += '\\';
      out += ch;
    }
    return out + "\"";
  }
  return v;
}

}  // namespace

std::string render_csv(const Table& table) {
  std::string out;
  for (std::size_t i = 0; i < table.columns.size(); ++i) out += (i ? "," : "") + csv_field(table.columns[i]);
  out += "\n";
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) out += (i ? "," : "") + csv_field(cell_text(row[i]));
    out += "\n";
  }
  return out;
}

std::string render(const Envelope& env, Format format) {
  std::string out;
  if (format == Format::Csv) {
    out += "# ubiq " + std::string(kVersion) + "\n";
    out += "# [" + env.command + "]\n";
    for (const auto& [k, v] : env.config) out += "# " + k + " = " + ini_value(v) + "\n";
    out += render_csv(env.payload);
    for (const auto& [k, v] : env.summary) out += "# summary " + k + " = " + cell_text(v) + "\n";
    out += "# result: " + env.summary_line + "\n";
    out += "# wall_clock_s = " + format_double(env.wall_clock_s) + "\n";
    return out;
  }
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : env.config) cfg[k] = v;
  nlohmann::ordered_json head = {{"type", "config"}, {"tool", "ubiq"}, {"version", kVersion},
                                 {"command", env.command}, {"config", cfg}};
  out += head.dump() + "\n";
  for (const auto& row : env.payload.rows) {
    nlohmann::ordered_json r = {{"type", "row"}};
    for (std::size_t i = 0; i < row.size(); ++i) r[env.payload.columns[i]] = cell_json(row[i]);
    out += r.dump() + "\n";
  }
  nlohmann::ordered_json s = {{"type", "summary"}};
  for (const auto& [k, v] : env.summary) s[k] = cell_json(v);
  s["result"] = env.summary_line;
  out += s.dump() + "\n";
  out += nlohmann::ordered_json({{"type", "timing"}, {"wall_clock_s", env.wall_clock_s}}).dump() + "\n";
  return out;
}

void write_atomic(const std::string& path, const std::string& contents) {
  fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  fs::path tmp = target;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw ValidationError("cannot open " + tmp.string() + " for writing");
    f << contents;
    f.flush();
    if (!f) throw ValidationError("write to " + tmp.string() + " failed");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) {
    fs::remove(tmp);
    throw ValidationError("cannot move output into place at " + path + ": " + ec.message());
  }
}

// ---------------------------------------------------------------- plot data

namespace {

double number(const Cell& c) {
  if (auto* i = std::get_if<std::int64_t>(&c)) return static_cast<double>(*i);
  if (auto* d = std::get_if<double>(&c)) return *d;
  throw ValidationError("expected a numeric cell");
}

double median(std::vector<double> v) {
  if (v.empty()) return std::nan("");
  std::sort(v.begin(), v.end());
  std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Column `value` aggregated per distinct `key`, keys ascending.
std::map<double, std::vector<double>> group(const Table& t, const std::string& key, const std::string& value) {
  std::map<double, std::vector<double>> out;
  std::size_t k = t.column(key), v = t.column(value);
  for (const auto& row : t.rows) out[number(row[k])].push_back(number(row[v]));
  return out;
}

}  // namespace

Table plot_data(const Envelope& env) {
  const Table& p = env.payload;
  Table out;
  if (env.command == "stage-scan") {
    out.columns = {"n", "measure", "partial_sum"};
    for (const auto& row : p.rows)
      out.rows.push_back({row[p.column("n")], row[p.column("measure")], row[p.column("partial_sum")]});
  } else if (env.command == "ubiquity") {
    out.columns = {"n", "min_ratio", "mean_ratio"};
    for (const auto& [n, v] : group(p, "n", "ratio")) {
      double sum = 0;
      for (double x : v) sum += x;
      out.rows.push_back({static_cast<std::int64_t>(n), *std::min_element(v.begin(), v.end()),
                          sum / static_cast<double>(v.size())});
    }
  } else if (env.command == "schmidt") {
    out.columns = {"bin_lo", "bin_hi", "count"};
    if (p.rows.empty()) return out;
    std::vector<double> r;
    for (const auto& row : p.rows) r.push_back(number(row[p.column("ratio")]));
    double lo = *std::min_element(r.begin(), r.end()), hi = *std::max_element(r.begin(), r.end());
    const int bins = hi > lo ? 20 : 1;
    double width = hi > lo ? (hi - lo) / bins : 1.0;
    std::vector<std::int64_t> counts(static_cast<std::size_t>(bins), 0);
    for (double x : r) ++counts[static_cast<std::size_t>(std::min(bins - 1, static_cast<int>((x - lo) / width)))];
    for (int b = 0; b < bins; ++b) out.rows.push_back({lo + b * width, lo + (b + 1) * width, counts[b]});
  } else if (env.command == "loglaw") {
    out.columns = {"log_t", "median_statistic"};
    for (const auto& [lt, v] : group(p, "log_t", "statistic")) out.rows.push_back({lt, median(v)});
  } else if (env.command == "excursions") {
    out.columns = {"log_t", "pen_over_log_t"};
    std::size_t tp = p.column("t_peak"), pen = p.column("peak_pen");
    for (const auto& row : p.rows) {
      double t = number(row[tp]);
      if (t > std::numbers::e) out.rows.push_back({std::log(t), number(row[pen]) / std::log(t)});
    }
  } else if (env.command == "horoballs" && !p.columns.empty() && p.columns.front() == "R") {
    out.columns = {"log_R", "ratio"};
    for (const auto& row : p.rows) out.rows.push_back({row[p.column("log_R")], row[p.column("ratio")]});
  } else {
    throw ValidationError("no plot data for '" + env.command + "' output");
  }
  return out;
}

// ---------------------------------------------------------------- commands

namespace {

struct Settings {
  std::string series, f, psi, rho, weight = "1", omega, x = "random";
  long n_log = 1;
  std::string system = "classical", C = "1", k;
  int n_first = 1, n_last = 0;
  std::uint64_t cap = kDefaultCap;
  bool exact = false, no_closed_form = false;
  int balls = 20;
  std::string min_length = "1/10";
  double target = 0.5;
  std::int64_t N = 0, samples = 0;
  std::uint64_t seed = 1;
  std::size_t depth = 20;
  unsigned bits = 4096;
  std::int64_t kmax = 10;
  double T = 0, step = 0, alpha = 0;
  int directions = 1, horizons = 20;
  std::string lo = "0", hi = "1", lambda = "1/4", R, R_min, R_max;
  int points = 7;
  bool list = false;
  std::string r_lo, r_hi;
  std::int64_t q_max = 200;
  int threads = 1;
};

FunctionForm parse_form(const std::string& text, const char* what) {
  if (text.empty()) throw ValidationError(std::string("--") + what + " is required");
  try {
    return FunctionForm::parse(text);
  } catch (const ValidationError& e) {
    throw ValidationError(std::string("--") + what + ": " + e.what());
  }
}

Rational parse_q(const std::string& text, const char* what) {
  if (text.empty()) throw ValidationError(std::string("--") + what + " is required");
  try {
    return parse_rational(text);
  } catch (const std::exception& e) {
    throw ValidationError(std::string("--") + what + ": cannot read '" + text + "' as a number");
  }
}

ResonantSystem parse_system(const Settings& s) {
  if (s.system == "classical") return ResonantSystem::classical();
  if (s.system == "coprime") return ResonantSystem::classical(true);
  if (s.system == "ford") {
    Rational C = parse_q(s.C, "C");
    if (C <= 0) throw ValidationError("--C must be positive");
    return ResonantSystem::ford(C);
  }
  throw ValidationError("--system must be classical, coprime or ford");
}

Rational parse_k(const Settings& s) {
  Rational k = parse_q(s.k, "k");
  if (k <= 1) throw ValidationError("--k must exceed 1");
  return k;
}

void check_range(const Settings& s) {
  if (s.n_first < 1) throw ValidationError("--n-first must be at least 1");
  if (s.n_last < s.n_first) throw ValidationError("--n-last must be at least --n-first");
}

// Splits "a,b,c".
std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

BoundaryPoint parse_direction(const std::string& text, unsigned bits, std::uint64_t seed, std::uint64_t index) {
  if (text == "golden") return BoundaryPoint::golden(bits);
  if (text == "sqrt2-1") return BoundaryPoint::sqrt2_minus_1(bits);
  if (text == "random") {
    auto rng = sample_rng(seed, index);
    return BoundaryPoint::random(rng, bits);
  }
  if (text.rfind("planted:", 0) == 0) {
    std::vector<std::int64_t> digits;
    for (const auto& d : split_list(text.substr(8))) {
      try {
        digits.push_back(std::stoll(d));
      } catch (const std::exception&) {
        throw ValidationError("--x planted digits must be integers");
      }
    }
    if (digits.empty()) throw ValidationError("--x planted: needs at least one digit");
    return BoundaryPoint::planted(digits, bits);
  }
  Rational q = parse_q(text, "x");
  if (q <= 0 || q >= 1) throw ValidationError("--x must lie in (0,1)");
  return BoundaryPoint::from_rational(q, bits);
}

int worker_count(const Settings& s) {
  if (s.threads < 1) throw ValidationError("--threads must be positive");
  return s.threads;
}

// Runs body(i) for i in [0, n) across the pool; results are indexed, so the
// merge order never depends on scheduling.
void parallel_for(int n, int threads, const std::function<void(int)>& body) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    for (int i = 0; i < n; ++i) body(i);
    return;
  }
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(threads));
  std::vector<std::thread> pool;
  for (int w = 0; w < threads; ++w)
    pool.emplace_back([&, w] {
      try {
        for (int i = w; i < n; i += threads) body(i);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    });
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

Envelope cmd_classify(const Settings& s) {
  if (s.series.empty()) throw ValidationError("--series is required, e.g. \"r^1 * (r^-2)\"");
  std::optional<FunctionForm> outer;
  if (!s.f.empty()) outer = parse_form(s.f, "f");
  SeriesSpec spec = SeriesSpec::parse(s.series, outer);
  Verdict v = series_classify(spec);
  std::string reading;
  if (!outer)
    reading = v == Verdict::Divergent ? "Khintchine divergence case: full measure"
                                      : "Khintchine convergence case: null set";
  else
    reading = v == Verdict::Divergent ? "Hausdorff f-measure divergence case: H^f(W) = H^f([0,1])"
                                      : "Hausdorff f-measure convergence case: H^f(W) = 0";
  Envelope env;
  env.payload.columns = {"series", "verdict", "interpretation"};
  env.payload.rows.push_back({spec.to_string(), to_string(v), reading});
  env.summary = {{"verdict", to_string(v)}};
  env.summary_line = to_string(v) + " ⇒ " + reading;
  return env;
}

Envelope cmd_critical_exponent(const Settings& s) {
  Envelope env;
  env.payload.columns = {"input", "critical_exponent"};
  std::string value;
  if (!s.psi.empty()) {
    FunctionForm psi = parse_form(s.psi, "psi");
    value = critical_exponent(psi, parse_q(s.weight, "weight")).to_string();
    env.payload.rows.push_back({"psi=" + psi.to_string() + ";weight=" + s.weight, value});
  } else if (!s.omega.empty()) {
    Rational omega = parse_q(s.omega, "omega");
    if (s.n_log < 1) throw ValidationError("--n must be at least 1");
    value = to_string(log_critical_exponent(omega, s.n_log));
    env.payload.rows.push_back({"log-dimension;omega=" + s.omega + ";n=" + std::to_string(s.n_log), value});
  } else {
    throw ValidationError("give --psi (with --weight) or --omega (with --n)");
  }
  env.summary = {{"critical_exponent", value}};
  env.summary_line = value;
  return env;
}

StageOptions stage_options(const Settings& s) {
  StageOptions o;
  o.cap = s.cap;
  o.require_exact = s.exact;
  o.allow_closed_form = !s.no_closed_form;
  return o;
}

Envelope cmd_stage_scan(const Settings& s) {
  ResonantSystem sys = parse_system(s);
  FunctionForm psi = parse_form(s.psi, "psi");
  Rational k = parse_k(s);
  check_range(s);
  StageScan scan = stage_measure_scan(sys, psi, k, s.n_first, s.n_last, stage_options(s));
  Envelope env;
  env.payload.columns = {"n", "measure", "partial_sum", "method"};
  for (const auto& r : scan.rows)
    env.payload.rows.push_back({static_cast<std::int64_t>(r.n), r.measure, r.partial_sum, to_string(r.method)});
  std::string symbolic = scan.symbolic ? to_string(*scan.symbolic) : "unknown";
  env.summary = {{"trend", to_string(scan.trend)}, {"symbolic", symbolic}};
  env.summary_line = "stage measures " + to_string(scan.trend) + "; volume series " + symbolic;
  return env;
}

Envelope cmd_ubiquity(const Settings& s) {
  ResonantSystem sys = parse_system(s);
  FunctionForm rho = parse_form(s.rho, "rho");
  Rational k = parse_k(s);
  check_range(s);
  if (s.balls < 1) throw ValidationError("--balls must be positive");
  Rational min_length = parse_q(s.min_length, "min-length");
  auto rng = sample_rng(s.seed, 0);
  std::vector<Ball> balls = random_balls(rng, s.balls, min_length);
  std::vector<std::optional<UbiquityReport>> slots(balls.size());
  StageOptions opt = stage_options(s);
  opt.require_exact = true;
  parallel_for(static_cast<int>(balls.size()), worker_count(s), [&](int i) {
    auto one = estimate_kappa(sys, rho, k, {balls[static_cast<std::size_t>(i)]}, s.n_first, s.n_last, s.target, opt);
    slots[static_cast<std::size_t>(i)] = std::move(one.front());
  });
  std::vector<UbiquityReport> reports;
  for (auto& r : slots) reports.push_back(std::move(*r));
  Envelope env;
  env.payload.columns = {"ball", "lo", "hi", "n", "ratio"};
  for (std::size_t b = 0; b < reports.size(); ++b) {
    auto w = reports[b].ball.clipped();
    for (auto [n, r] : reports[b].per_n)
      env.payload.rows.push_back({static_cast<std::int64_t>(b), to_string(w.lo), to_string(w.hi),
                                  static_cast<std::int64_t>(n), r});
  }
  double kappa = empirical_kappa(reports);
  std::int64_t reached = 0;
  for (const auto& r : reports) reached += r.n_o.has_value();
  env.summary = {{"kappa_hat", kappa}, {"balls", static_cast<std::int64_t>(reports.size())},
                 {"balls_reaching_target", reached}};
  env.summary_line = "empirical kappa " + format_double(kappa) + " over " + std::to_string(reports.size()) + " balls";
  return env;
}

Envelope cmd_schmidt(const Settings& s) {
  FunctionForm psi = parse_form(s.psi, "psi");
  if (s.N < 1) throw ValidationError("--N must be at least 1");
  if (s.samples < 0 || s.samples > 100'000'000) throw ValidationError("--samples must lie in [0, 1e8]");
  SchmidtSummary sum = schmidt_experiment(psi, s.N, static_cast<int>(s.samples), s.seed, worker_count(s));
  Envelope env;
  env.payload.columns = {"seed_index", "x", "N", "count", "prediction", "ratio"};
  for (const auto& r : sum.records)
    env.payload.rows.push_back({static_cast<std::int64_t>(r.seed_index), r.x, r.N, r.count, r.prediction, r.ratio});
  env.summary = {{"samples", static_cast<std::int64_t>(sum.records.size())},
                 {"mean_ratio", sum.mean},
                 {"stddev_ratio", sum.stddev},
                 {"prediction", sum.prediction.value},
                 {"condition_violated", std::string(sum.prediction.violated ? "true" : "false")},
                 {"divergence_hypothesis", std::string(sum.divergence_hypothesis ? "true" : "false")}};
  env.summary_line = "mean R/prediction " + format_double(sum.mean) + ", stddev " + format_double(sum.stddev);
  if (sum.prediction.violated)
    env.summary_line += "; warning: 2 q psi(q) >= 1 at q = " + std::to_string(*sum.prediction.first_violation);
  if (!sum.divergence_hypothesis) env.summary_line += "; sum q psi(q) converges, outside the asymptotic's hypothesis";
  return env;
}

Envelope cmd_cf(const Settings& s) {
  Envelope env;
  if (s.samples > 0) {
    if (s.depth < 1) throw ValidationError("--depth must be positive");
    auto r = gauss_kuzmin_experiment(s.samples, s.depth, s.seed, s.kmax, s.bits, worker_count(s));
    env.payload.columns = {"k", "frequency", "gauss_kuzmin", "deviation"};
    double worst = 0;
    for (std::int64_t k = 1; k <= s.kmax; ++k) {
      double f = r.frequency[static_cast<std::size_t>(k)], g = gauss_kuzmin_probability(k);
      env.payload.rows.push_back({k, f, g, f - g});
      if (k <= 3) worst = std::max(worst, std::fabs(f - g));
    }
    env.summary = {{"samples", r.samples}, {"depth", r.depth}, {"digits", r.digits}, {"truncated", r.truncated},
                   {"max_deviation_k_le_3", worst}};
    env.summary_line = "max |P(a=k) - GK(k)| for k<=3: " + format_double(worst);
    return env;
  }
  CFExpansion cf;
  bool rational_input = s.x != "golden" && s.x != "sqrt2-1" && s.x != "random" && s.x.rfind("planted:", 0) != 0;
  if (rational_input) {
    cf = cf_expand(parse_q(s.x, "x"), s.depth);
  } else {
    cf = parse_direction(s.x, s.bits, s.seed, 0).cf(s.depth);
  }
  env.payload.columns = {"n", "a_n", "p_n", "q_n"};
  for (std::size_t n = 1; n < cf.convergents.size(); ++n)
    env.payload.rows.push_back({static_cast<std::int64_t>(n), cf.quotients[n - 1], cf.convergents[n].first.get_str(),
                                cf.convergents[n].second.get_str()});
  env.summary = {{"depth", static_cast<std::int64_t>(cf.depth())},
                 {"terminated", std::string(cf.terminated ? "true" : "false")},
                 {"precision_exhausted", std::string(cf.precision_exhausted ? "true" : "false")}};
  std::string digits;
  for (std::size_t i = 0; i < std::min<std::size_t>(cf.depth(), 12); ++i)
    digits += (i ? "," : "") + std::to_string(cf.quotients[i]);
  if (cf.depth() > 12) digits += ",...";
  env.summary_line = "[0; " + digits + "] (" + std::to_string(cf.depth()) + " certified quotients)";
  if (cf.precision_exhausted) env.summary_line += "; precision exhausted";
  if (cf.terminated) env.summary_line += "; rational, expansion ended";
  return env;
}

double default_step(const Settings& s) { return s.step > 0 ? s.step : s.T / 1e6; }

Envelope cmd_excursions(const Settings& s) {
  if (!(s.T > 0)) throw ValidationError("--T must be positive");
  if (s.step < 0) throw ValidationError("--step must be positive");
  BoundaryPoint x = parse_direction(s.x, BoundaryPoint::bits_for(s.T), s.seed, 0);
  ExcursionResult res = excursions(x, s.T, default_step(s));
  Envelope env;
  env.payload.columns = {"index", "t_enter", "t_peak", "t_exit", "peak_pen", "convergent_index", "next_quotient"};
  double top = 0;
  for (const auto& r : res.records) {
    Cell ci = r.convergent_index ? Cell(static_cast<std::int64_t>(*r.convergent_index)) : Cell(std::string());
    Cell nq = r.next_quotient ? Cell(*r.next_quotient) : Cell(std::string());
    env.payload.rows.push_back({static_cast<std::int64_t>(r.index), r.t_enter, r.t_peak, r.t_exit, r.peak_pen, ci, nq});
    top = std::max(top, r.peak_pen);
  }
  env.summary = {{"excursions", static_cast<std::int64_t>(res.records.size())},
                 {"max_peak_pen", top},
                 {"warnings", static_cast<std::int64_t>(res.warnings.size())}};
  for (std::size_t i = 0; i < res.warnings.size(); ++i) env.summary.emplace_back("warning_" + std::to_string(i), res.warnings[i]);
  env.summary_line = std::to_string(res.records.size()) + " excursions, max peak pen " + format_double(top);
  if (!res.warnings.empty()) env.summary_line += "; " + std::to_string(res.warnings.size()) + " warnings";
  return env;
}

Envelope cmd_loglaw(const Settings& s) {
  if (!(s.T > std::numbers::e)) throw ValidationError("--T must exceed e");
  if (s.directions < 1) throw ValidationError("--directions must be positive");
  if (s.horizons < 1) throw ValidationError("--horizons must be positive");
  if (s.directions > 1 && s.x != "random") throw ValidationError("--directions > 1 needs --x random");
  double step = s.step > 0 ? s.step : 0.05;
  if (s.step < 0) throw ValidationError("--step must be positive");
  // log-spaced horizons ending at T
  std::vector<double> hs;
  double a = std::log(std::max(10.0, std::numbers::e + step)), b = std::log(s.T);
  for (int i = 0; i < s.horizons; ++i)
    hs.push_back(s.horizons == 1 || a >= b ? s.T : std::exp(a + (b - a) * i / (s.horizons - 1)));
  hs.back() = s.T;
  unsigned bits = BoundaryPoint::bits_for(s.T);
  std::vector<std::vector<double>> stats(static_cast<std::size_t>(s.directions));
  parallel_for(s.directions, worker_count(s), [&](int d) {
    BoundaryPoint x = parse_direction(s.x, bits, s.seed, static_cast<std::uint64_t>(d));
    stats[static_cast<std::size_t>(d)] = loglaw_statistic_at(x, hs, s.alpha, step);
  });
  Envelope env;
  env.payload.columns = {"direction", "t", "log_t", "statistic"};
  std::vector<double> finals;
  for (int d = 0; d < s.directions; ++d) {
    const auto& v = stats[static_cast<std::size_t>(d)];
    for (std::size_t i = 0; i < hs.size(); ++i)
      env.payload.rows.push_back({static_cast<std::int64_t>(d), hs[i], std::log(hs[i]), v[i]});
    finals.push_back(v.back());
  }
  double med = median(finals);
  env.summary = {{"directions", static_cast<std::int64_t>(s.directions)},
                 {"T", s.T},
                 {"median_statistic", med},
                 {"min_statistic", *std::min_element(finals.begin(), finals.end())},
                 {"max_statistic", *std::max_element(finals.begin(), finals.end())}};
  env.summary_line = "median log-law statistic at T=" + format_double(s.T) + ": " + format_double(med);
  return env;
}

Envelope cmd_horoballs(const Settings& s) {
  Interval<Rational> B{parse_q(s.lo, "lo"), parse_q(s.hi, "hi")};
  Envelope env;
  if (s.list) {
    auto balls = enumerate_horoballs(B, parse_q(s.r_lo, "r-lo"), parse_q(s.r_hi, "r-hi"));
    env.payload.columns = {"p", "q", "radius"};
    for (const auto& h : balls) env.payload.rows.push_back({h.p, h.q, to_string(h.radius())});
    env.summary = {{"horoballs", static_cast<std::int64_t>(balls.size())}};
    env.summary_line = std::to_string(balls.size()) + " horoballs";
    return env;
  }
  Rational lambda = parse_q(s.lambda, "lambda");
  std::vector<Rational> Rs;
  if (!s.R.empty()) {
    for (const auto& r : split_list(s.R)) Rs.push_back(parse_q(r, "R"));
  } else {
    if (s.R_min.empty() || s.R_max.empty()) throw ValidationError("give --R a,b,... or --R-min and --R-max");
    Rational lo = parse_q(s.R_min, "R-min"), hi = parse_q(s.R_max, "R-max");
    if (!(lo > 0 && lo <= hi)) throw ValidationError("need 0 < R-min <= R-max");
    if (s.points < 1) throw ValidationError("--points must be positive");
    // geometric grid, each point rounded to a short decimal so it echoes exactly
    double a = std::log10(lo.get_d()), b = std::log10(hi.get_d());
    for (int i = 0; i < s.points; ++i) {
      double e = s.points == 1 ? b : a + (b - a) * i / (s.points - 1);
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.3e", std::pow(10.0, e));
      Rs.push_back(parse_rational(buf));
    }
  }
  if (Rs.empty()) throw ValidationError("no R values given");
  for (const auto& R : Rs)
    if (R <= 0) throw ValidationError("R values must be positive");
  env.payload.columns = {"R", "lambda", "count", "ratio", "log_R"};
  double lo = INFINITY, hi = 0;
  for (const auto& R : Rs) {
    auto c = horoball_count_ratio(B, R, lambda);
    env.payload.rows.push_back({to_string(R), to_string(lambda), static_cast<std::int64_t>(c.count), c.ratio,
                                std::log(R.get_d())});
    lo = std::min(lo, c.ratio);
    hi = std::max(hi, c.ratio);
  }
  env.summary = {{"min_ratio", lo}, {"max_ratio", hi}, {"max_over_min", hi / lo}};
  env.summary_line = "count ratio in [" + format_double(lo) + ", " + format_double(hi) + "], max/min " +
                     format_double(hi / lo);
  return env;
}

Envelope cmd_disjointness(const Settings& s) {
  DisjointnessReport rep = disjointness_check(s.q_max);
  Envelope env;
  env.payload.columns = {"q_max", "circles", "pairs", "tangent_pairs", "identity_failures", "overlaps",
                         "tangency_mismatches"};
  auto i = [](std::uint64_t v) { return static_cast<std::int64_t>(v); };
  env.payload.rows.push_back({rep.q_max, i(rep.circles), i(rep.pairs), i(rep.tangent_pairs),
                              i(rep.identity_failures), i(rep.overlaps), i(rep.tangency_mismatches)});
  env.summary = {{"ok", std::string(rep.ok() ? "true" : "false")}};
  env.summary_line = rep.ok() ? "all " + std::to_string(rep.pairs) + " pairs disjoint; tangent exactly for Farey neighbours"
                              : "FAILED: disjointness or tangency check violated";
  return env;
}

const std::map<std::string, std::function<Envelope(const Settings&)>>& commands() {
  static const std::map<std::string, std::function<Envelope(const Settings&)>> table = {
      {"classify", cmd_classify},     {"critical-exponent", cmd_critical_exponent},
      {"stage-scan", cmd_stage_scan}, {"ubiquity", cmd_ubiquity},
      {"schmidt", cmd_schmidt},       {"cf", cmd_cf},
      {"excursions", cmd_excursions}, {"loglaw", cmd_loglaw},
      {"horoballs", cmd_horoballs},   {"disjointness", cmd_disjointness}};
  return table;
}

// Output path: relative paths land in $UBIQ_OUTPUT_DIR when it is set.
std::string resolve(const std::string& path) {
  const char* dir = std::getenv("UBIQ_OUTPUT_DIR");
  if (!dir || !*dir || fs::path(path).is_absolute()) return path;
  return (fs::path(dir) / path).string();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Settings s;
  s.threads = static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  std::string output, format = "csv", plot;

  CLI::App app{"Experiments on limsup sets, ubiquity and the modular surface", "ubiq"};
  app.set_version_flag("--version", std::string("ubiq ") + kVersion);
  app.set_config("--config", "", "INI file; [command] sections, flags override it");
  app.add_option("-o,--output", output, "Result file (default: stdout, or <command>.<ext> in $UBIQ_OUTPUT_DIR)");
  app.add_option("--format", format, "csv or jsonl")->check(CLI::IsMember({"csv", "jsonl"}));
  app.add_option("--plot", plot, "Also write plot-ready CSV here");
  app.add_option("--threads", s.threads, "Worker threads (results do not depend on it)");
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();

  auto sub = [&](const char* name, const char* help) { return app.add_subcommand(name, help); };
  auto* classify = sub("classify", "Convergence of sum r^u f(psi(r)) from the exponents alone");
  classify->add_option("--series", s.series, "e.g. \"r^1 * (r^-2)\"");
  classify->add_option("--f", s.f, "Dimension function applied to the inner function");

  auto* crit = sub("critical-exponent", "inf{s : sum r^u psi(r)^s < inf}, or n/omega for the log family");
  crit->add_option("--psi", s.psi);
  crit->add_option("--weight", s.weight, "u");
  crit->add_option("--omega", s.omega);
  crit->add_option("--n", s.n_log);

  auto add_system = [&](CLI::App* c) {
    c->add_option("--system", s.system, "classical, coprime or ford")
        ->check(CLI::IsMember({"classical", "coprime", "ford"}));
    c->add_option("--C", s.C, "Ford weight constant");
    c->add_option("--k", s.k);
    c->add_option("--n-first", s.n_first);
    c->add_option("--n-last", s.n_last);
    c->add_option("--cap", s.cap, "Max points per stage");
  };
  auto* scan = sub("stage-scan", "m(Delta(psi, n)) over a range of stages");
  add_system(scan);
  scan->add_option("--psi", s.psi);
  scan->add_flag("--exact", s.exact, "Fail rather than fall back to floating point");
  scan->add_flag("--no-closed-form", s.no_closed_form);

  auto* ubq = sub("ubiquity", "m(B ∩ Delta(rho, n)) / m(B) on random balls");
  add_system(ubq);
  ubq->add_option("--rho", s.rho);
  ubq->add_option("--balls", s.balls);
  ubq->add_option("--min-length", s.min_length);
  ubq->add_option("--target", s.target);
  ubq->add_option("--seed", s.seed);

  auto* sch = sub("schmidt", "R(x,N) against 2 sum q psi(q) for random x");
  sch->add_option("--psi", s.psi);
  sch->add_option("--N", s.N);
  sch->add_option("--samples", s.samples);
  sch->add_option("--seed", s.seed);

  auto add_direction = [&](CLI::App* c) {
    c->add_option("--x", s.x, "golden, sqrt2-1, random, planted:a1,a2,... or a rational in (0,1)");
    c->add_option("--seed", s.seed);
  };
  auto* cf = sub("cf", "Certified continued fraction digits, or Gauss-Kuzmin statistics with --samples");
  add_direction(cf);
  cf->add_option("--depth", s.depth);
  cf->add_option("--bits", s.bits, "Precision of generated directions");
  cf->add_option("--samples", s.samples, "Random numbers for the frequency experiment");
  cf->add_option("--kmax", s.kmax);

  auto* exc = sub("excursions", "Cusp excursions of the geodesic ray from i toward x");
  add_direction(exc);
  exc->add_option("--T", s.T);
  exc->add_option("--step", s.step, "Sampling step (default T/1e6)");

  auto* ll = sub("loglaw", "max (pen - alpha t)/log t over (e, T]");
  add_direction(ll);
  ll->add_option("--T", s.T);
  ll->add_option("--alpha", s.alpha);
  ll->add_option("--step", s.step, "Sampling step (default 0.05)");
  ll->add_option("--directions", s.directions);
  ll->add_option("--horizons", s.horizons, "Log-spaced report times ending at T");

  auto* hb = sub("horoballs", "Ford circle counts #A_lambda(B,R), or a list with --list");
  hb->add_option("--lo", s.lo);
  hb->add_option("--hi", s.hi);
  hb->add_option("--lambda", s.lambda);
  hb->add_option("--R", s.R, "Comma-separated radii");
  hb->add_option("--R-min", s.R_min);
  hb->add_option("--R-max", s.R_max);
  hb->add_option("--points", s.points);
  hb->add_flag("--list", s.list);
  hb->add_option("--r-lo", s.r_lo);
  hb->add_option("--r-hi", s.r_hi);

  auto* dj = sub("disjointness", "Exact Ford circle disjointness and tangency check");
  dj->add_option("--q-max", s.q_max);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e, out, err);
    return code == 0 ? kOk : kUsage;
  }

  CLI::App* chosen = app.get_subcommands().front();
  Envelope env;
  env.command = chosen->get_name();
  for (const CLI::Option* opt : chosen->get_options()) {
    if (opt->get_name() == "--help") continue;
    std::string name = opt->get_single_name();
    std::string value = opt->count() > 0 ? opt->as<std::string>() : opt->get_default_str();
    if (opt->get_expected_max() == 0) value = opt->count() > 0 ? "true" : "false";
    env.config.emplace_back(name, value);
  }

  try {
    auto start = std::chrono::steady_clock::now();
    Envelope result = commands().at(env.command)(s);
    result.command = env.command;
    result.config = std::move(env.config);
    result.wall_clock_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

    Format fmt = format == "jsonl" ? Format::Jsonl : Format::Csv;
    std::string text = render(result, fmt);
    std::string path = output;
    if (path.empty() && std::getenv("UBIQ_OUTPUT_DIR") && *std::getenv("UBIQ_OUTPUT_DIR"))
      path = result.command + (fmt == Format::Csv ? ".csv" : ".jsonl");
    if (path.empty()) {
      out << text;
    } else {
      path = resolve(path);
      write_atomic(path, text);
      out << result.summary_line << "\n";
      out << "wrote " << path << "\n";
    }
    if (!plot.empty()) {
      std::string p = resolve(plot);
      write_atomic(p, render_csv(plot_data(result)));
      out << "wrote " << p << "\n";
    }
    if (result.command == "disjointness" && std::get<std::string>(result.summary.front().second) != "true") {
      err << "error: " << result.summary_line << "\n";
      return kInternal;
    }
    return kOk;
  } catch (const ResourceCapError& e) {
    err << "resource cap: " << e.what() << "\n";
    return kResourceCap;
  } catch (const ValidationError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const DomainError& e) {
    err << "invalid input: " << e.what() << "\n";
    return kUsage;
  } catch (const InvariantViolation& e) {
    err << "internal invariant violated: " << e.what() << "\n";
    return kInternal;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kInternal;
  }
}

}  // namespace ubiq::cli
