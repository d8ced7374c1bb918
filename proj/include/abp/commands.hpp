#pragma once

// The batch workflow behind the CLI: simulate -> fit -> classify -> evaluate.
// Every command reads and writes files under one output directory; every file
// starts with a provenance line naming the config hash and seed.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "abp/config.hpp"

namespace abp {

struct CommandContext {
  RunConfig config;
  std::string out_dir = ".";
  unsigned threads = 1;
  bool verbose = false;
  std::ostream* log = nullptr;  // progress messages when verbose
};

/// Output file names inside the output directory.
namespace files {
inline constexpr const char* cohort = "cohort.csv";
inline constexpr const char* truth = "truth.csv";
inline constexpr const char* resolved_config = "config.resolved.json";
inline constexpr const char* chain_dir = "chains";
inline constexpr const char* diagnostics = "fit_diagnostics.csv";
inline constexpr const char* mu0 = "univariate_mu0.csv";
inline constexpr const char* decisions = "decisions.csv";
inline constexpr const char* report = "report.csv";
inline constexpr const char* curves = "curves.csv";
inline constexpr const char* svg = "curves.svg";
}  // namespace files

/// "# config_hash=<hex>, seed=<n>"
std::string provenance_line(const RunConfig& config);

/// Chain file stem for a marker list and sex, e.g. "ratios_female".
std::string chain_stem(const std::vector<Marker>& markers, Sex sex);

void cmd_simulate(const CommandContext& ctx);
void cmd_fit(const CommandContext& ctx);
void cmd_classify(const CommandContext& ctx);
void cmd_evaluate(const CommandContext& ctx);
/// All four in order.
void cmd_run(const CommandContext& ctx);

}  // namespace abp
