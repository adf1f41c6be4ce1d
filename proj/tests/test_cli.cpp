#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "doctest.h"
#include "json.hpp"
#include "ubiq/cli.hpp"

namespace fs = std::filesystem;
using namespace ubiq::cli;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result call(std::vector<std::string> args) {
  args.insert(args.begin(), "ubiq");
  std::vector<const char*> argv;
  for (auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  int code = run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

// Everything but the timing line.
std::string without_timing(const std::string& text) {
  std::stringstream in(text);
  std::string line, out;
  while (std::getline(in, line))
    if (line.find("wall_clock_s") == std::string::npos) out += line + "\n";
  return out;
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("ubiq_cli_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

}  // namespace

TEST_CASE("classify reports the Khintchine reading") {
  auto r = call({"classify", "--series", "r^1 * (r^-2)"});
  CHECK(r.code == 0);
  CHECK(r.out.find("# result: Divergent ⇒ Khintchine divergence case: full measure") != std::string::npos);
  r = call({"classify", "--series", "r^1 * (r^-2*log(r)^-2)"});
  CHECK(r.code == 0);
  CHECK(r.out.find("Convergent ⇒ Khintchine convergence case: null set") != std::string::npos);
}

TEST_CASE("critical exponent values") {
  auto r = call({"critical-exponent", "--psi", "r^-3/2", "--weight", "0"});
  CHECK(r.code == 0);
  CHECK(r.out.find("# result: 2/3\n") != std::string::npos);
  r = call({"critical-exponent", "--omega", "3", "--n", "2", "--format", "jsonl"});
  CHECK(r.code == 0);
  std::stringstream in(r.out);
  std::string line;
  std::vector<nlohmann::json> lines;
  while (std::getline(in, line)) lines.push_back(nlohmann::json::parse(line));
  REQUIRE(lines.size() == 4);
  CHECK(lines[0]["type"] == "config");
  CHECK(lines[0]["config"]["omega"] == "3");
  CHECK(lines[1]["critical_exponent"] == "2/3");
  CHECK(lines[2]["result"] == "2/3");
  CHECK(lines[3]["type"] == "timing");
}

TEST_CASE("usage errors exit 1") {
  CHECK(call({}).code == kUsage);
  CHECK(call({"bogus"}).code == kUsage);
  CHECK(call({"classify", "--no-such-flag"}).code == kUsage);
  CHECK(call({"classify"}).code == kUsage);
  CHECK(call({"stage-scan", "--psi", "r^-2", "--k", "1", "--n-last", "3"}).code == kUsage);
  CHECK(call({"schmidt", "--psi", "r^-2", "--N", "0"}).code == kUsage);
  CHECK(call({"horoballs", "--R", "1/100", "--lambda", "999/1000"}).code == kUsage);
  CHECK(call({"--help"}).code == kOk);
}

TEST_CASE("resource caps exit 2") {
  auto r = call({"stage-scan", "--psi", "r^-2", "--k", "10", "--n-first", "6", "--n-last", "6", "--cap", "1000",
                 "--exact"});
  CHECK(r.code == kResourceCap);
  CHECK_FALSE(r.err.empty());
}

TEST_CASE("output does not depend on the thread count") {
  std::vector<std::vector<std::string>> runs = {
      {"schmidt", "--psi", "r^-2", "--N", "2000", "--samples", "12", "--seed", "7"},
      {"ubiquity", "--rho", "r^-2", "--k", "6", "--n-first", "2", "--n-last", "3", "--balls", "5", "--seed", "3"},
      {"loglaw", "--x", "random", "--directions", "5", "--T", "300", "--horizons", "4", "--seed", "11"},
      {"cf", "--samples", "30", "--depth", "40", "--bits", "512", "--seed", "5"}};
  for (auto args : runs) {
    CAPTURE(args[0]);
    auto serial = args, parallel = args;
    serial.insert(serial.begin(), {"--threads", "1"});
    parallel.insert(parallel.begin(), {"--threads", "4"});
    auto a = call(serial), b = call(parallel);
    REQUIRE(a.code == 0);
    REQUIRE(b.code == 0);
    CHECK(without_timing(a.out) == without_timing(b.out));
    CHECK(without_timing(a.out) == without_timing(call(serial).out));
  }
}

TEST_CASE("files, config and output directory") {
  fs::path dir = scratch("files");
  fs::path out = dir / "nested" / "scan.csv";
  auto r = call({"stage-scan", "--psi", "r^-2", "--k", "2", "--n-last", "4", "-o", out.string()});
  REQUIRE(r.code == 0);
  std::string text = slurp(out);
  CHECK(text.find("n,measure,partial_sum,method\n") != std::string::npos);
  CHECK(r.out.find("wrote " + out.string()) != std::string::npos);
  for (const auto& e : fs::directory_iterator(out.parent_path()))
    CHECK(e.path().filename().string().find(".tmp.") == std::string::npos);

  SUBCASE("config file with a flag override") {
    fs::path ini = dir / "run.ini";
    std::ofstream(ini) << "[schmidt]\npsi = r^-2\nN = 500\nsamples = 4\nseed = 9\n";
    auto from_file = call({"--config", ini.string(), "schmidt", "--samples", "6"});
    REQUIRE(from_file.code == 0);
    CHECK(from_file.out.find("# N = 500\n") != std::string::npos);
    CHECK(from_file.out.find("# samples = 6\n") != std::string::npos);
    CHECK(from_file.out.find("# summary samples = 6\n") != std::string::npos);
    auto direct = call({"schmidt", "--psi", "r^-2", "--N", "500", "--samples", "6", "--seed", "9"});
    CHECK(without_timing(from_file.out) == without_timing(direct.out));
  }

  SUBCASE("echoed config reproduces the run") {
    auto first = call({"cf", "--x", "355/113", "--depth", "8"});
    REQUIRE(first.code == 0);
    std::stringstream in(first.out);
    std::string line, ini;
    while (std::getline(in, line)) {
      if (line.rfind("# [", 0) == 0 || line.find(" = ") != std::string::npos) {
        if (line.rfind("# summary", 0) == 0 || line.find("wall_clock_s") != std::string::npos) continue;
        if (line.rfind("# ubiq", 0) == 0) continue;
        ini += line.substr(2) + "\n";
      }
    }
    fs::path p = dir / "echo.ini";
    std::ofstream(p) << ini;
    auto again = call({"--config", p.string(), "cf"});
    REQUIRE(again.code == 0);
    CHECK(without_timing(again.out) == without_timing(first.out));
  }

  SUBCASE("output directory from the environment") {
    fs::path env_dir = dir / "env";
    ::setenv("UBIQ_OUTPUT_DIR", env_dir.c_str(), 1);
    auto a = call({"disjointness", "--q-max", "20"});
    auto b = call({"classify", "--series", "r^1 * (r^-2)", "-o", "c.jsonl", "--format", "jsonl"});
    ::unsetenv("UBIQ_OUTPUT_DIR");
    CHECK(a.code == 0);
    CHECK(b.code == 0);
    CHECK(fs::exists(env_dir / "disjointness.csv"));
    CHECK(fs::exists(env_dir / "c.jsonl"));
  }
  fs::remove_all(dir);
}

TEST_CASE("plot output") {
  fs::path dir = scratch("plot");
  auto r = call({"loglaw", "--x", "golden", "--T", "200", "--horizons", "3", "--plot", (dir / "p.csv").string()});
  REQUIRE(r.code == 0);
  std::string plot = slurp(dir / "p.csv");
  CHECK(plot.rfind("log_t,median_statistic\n", 0) == 0);
  CHECK(std::count(plot.begin(), plot.end(), '\n') == 4);

  // no samples: header only
  r = call({"schmidt", "--psi", "r^-2", "--N", "10", "--samples", "0", "--plot", (dir / "h.csv").string()});
  REQUIRE(r.code == 0);
  CHECK(slurp(dir / "h.csv") == "bin_lo,bin_hi,count\n");

  r = call({"classify", "--series", "r^1 * (r^-2)", "--plot", (dir / "x.csv").string()});
  CHECK(r.code == kUsage);
  fs::remove_all(dir);
}

TEST_CASE("csv quoting and rendering") {
  Envelope env;
  env.command = "demo";
  env.config = {{"a", "x y"}};
  env.payload.columns = {"s", "v"};
  env.payload.rows = {{std::string("p,q"), 0.1}, {std::string("say \"hi\""), std::int64_t{3}}};
  env.summary_line = "done";
  std::string csv = render(env, Format::Csv);
  CHECK(csv.find("# a = \"x y\"\n") != std::string::npos);
  CHECK(csv.find("\"p,q\",0.10000000000000001\n") != std::string::npos);
  CHECK(csv.find("\"say \"\"hi\"\"\",3\n") != std::string::npos);
  CHECK_THROWS(plot_data(env));
}

TEST_CASE("atomic write replaces the whole file") {
  fs::path dir = scratch("atomic");
  fs::path p = dir / "f.txt";
  write_atomic(p.string(), "first version, long\n");
  write_atomic(p.string(), "second\n");
  CHECK(slurp(p) == "second\n");
  CHECK(std::distance(fs::directory_iterator(dir), fs::directory_iterator{}) == 1);
  fs::remove_all(dir);
}
