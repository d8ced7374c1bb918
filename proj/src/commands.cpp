#include "abp/commands.hpp"

#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "abp/error.hpp"

namespace abp {
namespace {

namespace fs = std::filesystem;

constexpr std::array<Sex, 2> kSexes = {Sex::male, Sex::female};

void note(const CommandContext& ctx, const std::string& message) {
  if (ctx.verbose && ctx.log) *ctx.log << "abpmon: " << message << '\n';
}

fs::path out_path(const CommandContext& ctx, const std::string& name) {
  return fs::path(ctx.out_dir) / name;
}

std::ofstream open_output(const fs::path& path) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(Errc::IoError, "cannot write '" + path.string() + "'");
  return out;
}

void close_output(std::ofstream& out, const fs::path& path) {
  out.close();
  if (!out) fail(Errc::IoError, "failed writing '" + path.string() + "'");
}

std::ifstream open_input(const fs::path& path, const char* hint) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot read '" + path.string() + "' (" + hint + ")");
  return in;
}

void write_resolved_config(const CommandContext& ctx) {
  const auto path = out_path(ctx, files::resolved_config);
  auto out = open_output(path);
  out << dump_config(ctx.config);
  close_output(out, path);
}

ProfileCollection load_profiles(const CommandContext& ctx) {
  const fs::path path = ctx.config.profiles.empty() ? out_path(ctx, files::cohort)
                                                    : fs::path(ctx.config.profiles);
  auto in = open_input(path, "set data.profiles or run simulate first");
  // the simulated cohort is always in canonical form
  auto profiles = ingest_csv(in, ctx.config.profiles.empty() ? canonical_schema() : ctx.config.schema);
  if (!profiles.rejects.empty())
    note(ctx, std::to_string(profiles.rejects.size()) + " rows rejected while reading " + path.string());
  return profiles;
}

// Distinct multivariate marker lists across the policy grid, in grid order.
std::vector<std::vector<Marker>> mv_marker_lists(const RunConfig& config) {
  std::vector<std::vector<Marker>> out;
  for (const auto& p : config.policies)
    if (p.model == ModelKind::multivariate &&
        std::find(out.begin(), out.end(), p.markers) == out.end())
      out.push_back(p.markers);
  return out;
}

SexMarkerTable resolved_mu0(const CommandContext& ctx, const ProfileCollection& profiles) {
  return ctx.config.mu0_table(baseline_log_means(profiles, ctx.config.ratio_source));
}

std::uint64_t stream_of(std::string_view purpose) { return stable_hash(purpose); }

}  // namespace

std::string provenance_line(const RunConfig& config) {
  return "# config_hash=" + config_hash(config) + ", seed=" + std::to_string(config.seed);
}

std::string chain_stem(const std::vector<Marker>& markers, Sex sex) {
  ClassifierPolicy p;
  p.model = ModelKind::multivariate;
  p.markers = markers;
  return p.name().substr(3) + "_" + std::string(to_string(sex));
}

void cmd_simulate(const CommandContext& ctx) {
  const auto& c = ctx.config;
  write_resolved_config(ctx);
  Rng rng(c.seed, stream_of("simulate"));
  const auto cohort = simulate_cohort(c.cohort, rng);
  note(ctx, "simulated " + std::to_string(cohort.profiles.sample_count()) + " samples");

  const auto cpath = out_path(ctx, files::cohort);
  auto out = open_output(cpath);
  out << provenance_line(c) << '\n';
  write_canonical_csv(out, cohort.profiles);
  close_output(out, cpath);

  const auto tpath = out_path(ctx, files::truth);
  auto truth = open_output(tpath);
  truth << provenance_line(c) << '\n';
  write_truth_csv(truth, cohort);
  close_output(truth, tpath);
}

void cmd_fit(const CommandContext& ctx) {
  const auto& c = ctx.config;
  write_resolved_config(ctx);
  const auto profiles = load_profiles(ctx);
  const auto mu0 = resolved_mu0(ctx, profiles);

  const auto mpath = out_path(ctx, files::mu0);
  auto mu0_out = open_output(mpath);
  mu0_out << provenance_line(c) << "\nsex,marker,mu0\n";
  for (Sex sex : kSexes)
    for (Marker m : kAllMarkers)
      if (const auto v = mu0.find(sex, m))
        mu0_out << to_string(sex) << ',' << marker_code(m) << ',' << format_double(*v) << '\n';
  close_output(mu0_out, mpath);

  const auto dpath = out_path(ctx, files::diagnostics);
  auto diag = open_output(dpath);
  diag << provenance_line(c) << "\nmodel,sex,scalar,mean,sd,ess,split_rhat\n";
  for (const auto& markers : mv_marker_lists(c)) {
    for (Sex sex : kSexes) {
      const std::string stem = chain_stem(markers, sex);
      const auto chain_path = out_path(ctx, std::string(files::chain_dir) + "/" + stem + ".chain");
      const auto data = population_data(profiles, sex, markers, c.ratio_source);
      const auto prior = population_prior(sex, markers, mu0, c.prior);
      MvChain chain;
      if (c.resume_iterations > 0 && fs::exists(chain_path)) {
        auto in = open_input(chain_path, "chain to resume");
        const MvChain previous = read_chain(in);
        require(previous.markers == markers, Errc::FormatError,
                "chain '" + chain_path.string() + "' was fitted on different markers");
        chain = extend_chain(previous, data, prior, c.resume_iterations);
        note(ctx, "extended " + stem + " by " + std::to_string(c.resume_iterations) + " iterations");
      } else {
        Rng rng(c.seed, stream_of("fit/" + stem));
        GibbsConfig g = c.gibbs;
        g.keep_athlete_means = false;
        chain = run_gibbs(data, prior, g, rng);
        chain.markers = markers;
        note(ctx, "fitted " + stem + " (" + std::to_string(data.athletes()) + " reference athletes, " +
                      std::to_string(chain.states.size()) + " retained states)");
      }
      auto out = open_output(chain_path);
      out << provenance_line(c) << '\n';
      write_chain(out, chain);
      close_output(out, chain_path);
      const std::string model = stem.substr(0, stem.rfind('_'));
      for (const auto& d : chain.diagnostics)
        diag << model << ',' << to_string(sex) << ',' << d.name << ',' << format_double(d.mean) << ','
             << format_double(d.sd) << ',' << format_double(d.ess) << ','
             << format_double(d.split_rhat) << '\n';
    }
  }
  close_output(diag, dpath);
}

void cmd_classify(const CommandContext& ctx) {
  const auto& c = ctx.config;
  write_resolved_config(ctx);
  const auto profiles = load_profiles(ctx);
  const auto mu0 = resolved_mu0(ctx, profiles);

  SequenceModels models;
  models.univariate = c.univariate(mu0);
  models.thresholds = c.threshold_table();
  models.ratio_source = c.ratio_source;
  models.alpha_grid = c.alpha_grid;
  models.mv_replicates = c.mv_replicates;
  models.refit = c.refit;
  models.gibbs = c.gibbs;
  for (const auto& markers : mv_marker_lists(c)) {
    for (Sex sex : kSexes) {
      const std::string stem = chain_stem(markers, sex);
      const auto chain_path = out_path(ctx, std::string(files::chain_dir) + "/" + stem + ".chain");
      auto in = open_input(chain_path, "run fit first");
      auto chain = std::make_shared<MvChain>(read_chain(in));
      require(chain->markers == markers, Errc::FormatError,
              "chain '" + chain_path.string() + "' was fitted on different markers");
      auto model = population_model(std::move(chain), sex);
      if (c.refit == RefitMode::full) {
        model.data = std::make_shared<const MvData>(population_data(profiles, sex, markers, c.ratio_source));
        model.prior = population_prior(sex, markers, mu0, c.prior);
      }
      models.multivariate.push_back(std::move(model));
    }
  }

  std::vector<HpdDecision> all;
  for (const auto& policy : c.policies) {
    auto d = classify_cohort(profiles, policy, models, c.seed, ctx.threads);
    note(ctx, "classified " + std::to_string(d.size()) + " samples with " + policy.name());
    all.insert(all.end(), std::make_move_iterator(d.begin()), std::make_move_iterator(d.end()));
  }
  const auto path = out_path(ctx, files::decisions);
  auto out = open_output(path);
  out << provenance_line(c) << '\n';
  write_decisions_csv(out, all);
  close_output(out, path);
}

void cmd_evaluate(const CommandContext& ctx) {
  const auto& c = ctx.config;
  write_resolved_config(ctx);
  auto in = open_input(out_path(ctx, files::decisions), "run classify first");
  const auto decisions = read_decisions_csv(in);
  std::map<std::string, std::vector<HpdDecision>> by_policy;
  for (const auto& d : decisions) by_policy[d.policy].push_back(d);

  std::vector<EvalReport> reports;
  for (const auto& policy : c.policies) {
    const std::string name = policy.name();
    const auto it = by_policy.find(name);
    if (it == by_policy.end())
      fail(Errc::FormatError, "decisions file has no rows for policy " + name);
    const auto& rows = it->second;
    bool has_pos = false;
    bool has_neg = false;
    for (const auto& d : rows) (binarize_label(d.label) == BinaryLabel::non_normal ? has_pos : has_neg) = true;
    if (c.report_pre) {
      Rng rng(c.seed, stream_of("oversample/" + name));
      reports.push_back(evaluate(rows, false, rng));
    }
    if (c.report_post) {
      if (has_pos && has_neg) {
        Rng rng(c.seed, stream_of("oversample/" + name));
        reports.push_back(evaluate(rows, true, rng));
      } else {
        note(ctx, name + ": one class only, no post-oversampling row");
      }
    }
  }

  const auto rpath = out_path(ctx, files::report);
  auto rep = open_output(rpath);
  rep << provenance_line(c) << '\n';
  write_report_csv(rep, reports);
  close_output(rep, rpath);

  const auto cpath = out_path(ctx, files::curves);
  auto cur = open_output(cpath);
  cur << provenance_line(c) << '\n';
  write_curves_csv(cur, reports);
  close_output(cur, cpath);

  if (c.svg) {
    const auto spath = out_path(ctx, files::svg);
    auto svg = open_output(spath);
    svg << "<!-- " << provenance_line(c).substr(2) << " -->\n";
    write_curves_svg(svg, reports);
    close_output(svg, spath);
  }
}

void cmd_run(const CommandContext& ctx) {
  cmd_simulate(ctx);
  cmd_fit(ctx);
  cmd_classify(ctx);
  cmd_evaluate(ctx);
}

}  // namespace abp
