#pragma once

// Experiment driver behind the `ubiq` tool: every subcommand builds an
// Envelope (config echo, rows, summary) that is rendered as CSV or JSON lines.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ubiq::cli {

inline constexpr const char* kVersion = "0.1.0";

enum ExitCode : int { kOk = 0, kUsage = 1, kResourceCap = 2, kInternal = 3 };

using Cell = std::variant<std::int64_t, double, std::string>;

struct Table {
  std::vector<std::string> columns;
  std::vector<std::vector<Cell>> rows;

  std::size_t column(const std::string& name) const;  // throws if absent
};

struct Envelope {
  std::string command;
  /// (option, value) pairs; as INI under [command] they reproduce the run.
  std::vector<std::pair<std::string, std::string>> config;
  Table payload;
  std::vector<std::pair<std::string, Cell>> summary;
  std::string summary_line;
  double wall_clock_s = 0.0;
};

enum class Format { Csv, Jsonl };

/// Whole output file. Everything except the wall-clock line is a pure function
/// of the config.
std::string render(const Envelope& env, Format format);

/// Plot-ready CSV table for the envelope's command; throws ValidationError for
/// commands without a plot.
Table plot_data(const Envelope& env);
std::string render_csv(const Table& table);

/// Write via a temporary file in the same directory and rename.
void write_atomic(const std::string& path, const std::string& contents);

/// Full command-line entry point; returns the process exit status.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ubiq::cli
