#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "abp/commands.hpp"
#include "abp/error.hpp"

namespace {

constexpr int kExitRuntime = 1;
constexpr int kExitUsage = 2;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian adaptive monitoring of longitudinal steroid profiles"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = ".";
  unsigned threads = 1;
  bool verbose = false;
  app.add_option("--config", config_path, "JSON run configuration (version 1)")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "master seed; overrides the config");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads for classification")->check(CLI::Range(1u, 1024u));
  app.add_flag("--verbose", verbose, "progress messages on stderr");
  app.fallthrough();

  auto* simulate = app.add_subcommand("simulate", "write a synthetic cohort and its injection truth");
  auto* fit = app.add_subcommand("fit", "fit multivariate population chains");
  auto* classify = app.add_subcommand("classify", "classify every monitored sample");
  auto* evaluate = app.add_subcommand("evaluate", "score decisions, write report and curves");
  auto* run = app.add_subcommand("run", "simulate, fit, classify and evaluate");
  auto* show = app.add_subcommand("config", "print the resolved configuration");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitUsage;
  }

  abp::CommandContext ctx;
  try {
    ctx.config = config_path.empty() ? abp::RunConfig{} : abp::load_config(config_path);
    if (seed) ctx.config.seed = *seed;
    ctx.config.validate();
  } catch (const abp::Error& e) {
    std::cerr << "abpmon: config error: " << e.what() << '\n';
    return kExitUsage;
  }
  ctx.out_dir = out_dir;
  ctx.threads = threads;
  ctx.verbose = verbose;
  ctx.log = &std::cerr;

  try {
    if (*show) std::cout << abp::dump_config(ctx.config);
    if (*simulate) abp::cmd_simulate(ctx);
    if (*fit) abp::cmd_fit(ctx);
    if (*classify) abp::cmd_classify(ctx);
    if (*evaluate) abp::cmd_evaluate(ctx);
    if (*run) abp::cmd_run(ctx);
  } catch (const abp::Error& e) {
    std::cerr << "abpmon: " << e.what() << '\n';
    return e.code() == abp::Errc::ConfigError ? kExitUsage : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "abpmon: " << e.what() << '\n';
    return kExitRuntime;
  }
  return 0;
}
