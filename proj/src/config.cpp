#include "abp/config.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "abp/error.hpp"

namespace abp {
namespace {

using json = nlohmann::json;

[[noreturn]] void bad(const std::string& path, const std::string& what) {
  fail(Errc::ConfigError, path + ": " + what);
}

// Object view that remembers which keys were read so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) bad(where(), "expected an object");
  }
  ~Section() = default;

  [[nodiscard]] std::string key_path(std::string_view key) const {
    return path_.empty() ? std::string(key) : path_ + "." + std::string(key);
  }
  [[nodiscard]] std::string where() const { return path_.empty() ? "<root>" : path_; }

  const json* get(std::string_view key) {
    seen_.insert(std::string(key));
    const auto it = j_.find(std::string(key));
    return it == j_.end() ? nullptr : &*it;
  }

  void read(std::string_view key, double& out) {
    if (const json* v = get(key)) {
      if (!v->is_number() || !std::isfinite(v->get<double>())) bad(key_path(key), "expected a finite number");
      out = v->get<double>();
    }
  }
  void read(std::string_view key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) bad(key_path(key), "expected true or false");
      out = v->get<bool>();
    }
  }
  void read(std::string_view key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) bad(key_path(key), "expected a string");
      out = v->get<std::string>();
    }
  }
  template <class Int>
    requires std::is_integral_v<Int>
  void read(std::string_view key, Int& out) {
    if (const json* v = get(key)) {
      if (!v->is_number_integer() || (v->is_number_integer() && !v->is_number_unsigned() && v->get<std::int64_t>() < 0))
        bad(key_path(key), "expected a non-negative integer");
      out = static_cast<Int>(v->get<std::uint64_t>());
    }
  }

  void finish() const {
    for (const auto& [k, v] : j_.items())
      if (!seen_.contains(k)) bad(key_path(k), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

Sex sex_of(const json& v, const std::string& path) {
  if (v.is_string())
    if (const auto s = parse_sex(v.get<std::string>())) return *s;
  bad(path, "expected \"male\" or \"female\"");
}

Marker marker_of(const json& v, const std::string& path) {
  if (v.is_string())
    if (const auto m = parse_marker(v.get<std::string>())) return *m;
  bad(path, "unknown marker");
}

Label label_of(const std::string& text, const std::string& path) {
  if (const auto l = parse_label(text)) return *l;
  bad(path, "unknown label '" + text + "'");
}

std::string_view to_string(RatioSource r) {
  switch (r) {
    case RatioSource::recorded: return "recorded";
    case RatioSource::derived: return "derived";
    case RatioSource::recorded_else_derived: return "recorded_else_derived";
  }
  return "?";
}

void read_group(Section& parent, std::string_view key, GroupSpec& g) {
  const json* v = parent.get(key);
  if (!v) return;
  Section s(*v, parent.key_path(key));
  s.read("athletes", g.athletes);
  s.read("total_samples", g.total_samples);
  s.read("injected_samples", g.injected_samples);
  std::string label(to_string(g.label));
  s.read("label", label);
  g.label = label_of(label, s.key_path("label"));
  s.read("delta_min", g.delta_min);
  s.read("delta_max", g.delta_max);
  s.read("min_samples", g.min_samples);
  s.finish();
}

json group_json(const GroupSpec& g) {
  return {{"athletes", g.athletes},         {"total_samples", g.total_samples},
          {"injected_samples", g.injected_samples}, {"label", std::string(to_string(g.label))},
          {"delta_min", g.delta_min},       {"delta_max", g.delta_max},
          {"min_samples", g.min_samples}};
}

void read_simulate(Section& root, RunConfig& c) {
  const json* v = root.get("simulate");
  if (!v) return;
  Section s(*v, "simulate");
  s.read("preset", c.cohort_preset);
  if (c.cohort_preset == "default")
    c.cohort = CohortSpec{};
  else if (c.cohort_preset == "benchmark")
    c.cohort = CohortSpec::benchmark();
  else
    bad("simulate.preset", "expected \"default\" or \"benchmark\"");
  read_group(s, "normal", c.cohort.normal);
  read_group(s, "atypical", c.cohort.atypical);
  read_group(s, "abnormal", c.cohort.abnormal);
  read_group(s, "training", c.cohort.training);
  s.read("baseline_male", c.cohort.baseline_male);
  s.read("baseline_female", c.cohort.baseline_female);
  s.read("female_fraction", c.cohort.female_fraction);
  s.read("ratio_noise_sd", c.cohort.ratio_noise_sd);
  s.read("censor_limits", c.cohort.censor_limits);
  s.read("min_gap_days", c.cohort.min_gap_days);
  s.read("max_gap_days", c.cohort.max_gap_days);
  s.finish();
  try {
    c.cohort.validate();
  } catch (const Error& e) {
    bad("simulate", e.what());
  }
}

void read_data(Section& root, RunConfig& c) {
  const json* v = root.get("data");
  if (!v) return;
  Section s(*v, "data");
  s.read("profiles", c.profiles);
  std::string flags = c.schema.flags == FlagEncoding::sentinel ? "sentinel" : "flag_columns";
  s.read("flag_encoding", flags);
  if (flags == "sentinel")
    c.schema.flags = FlagEncoding::sentinel;
  else if (flags == "flag_columns")
    c.schema.flags = FlagEncoding::flag_columns;
  else
    bad("data.flag_encoding", "expected \"sentinel\" or \"flag_columns\"");
  s.read("flag_suffix", c.schema.flag_suffix);
  s.read("missing", c.schema.missing);
  s.read("strict", c.schema.strict);
  std::string ratios(to_string(c.ratio_source));
  s.read("ratio_source", ratios);
  if (ratios == "recorded")
    c.ratio_source = RatioSource::recorded;
  else if (ratios == "derived")
    c.ratio_source = RatioSource::derived;
  else if (ratios == "recorded_else_derived")
    c.ratio_source = RatioSource::recorded_else_derived;
  else
    bad("data.ratio_source", "expected \"recorded\", \"derived\" or \"recorded_else_derived\"");
  s.finish();
}

void read_univariate(Section& root, RunConfig& c) {
  const json* v = root.get("univariate");
  if (!v) return;
  Section s(*v, "univariate");
  s.read("kappa0", c.kappa0);
  s.read("alpha0", c.alpha0);
  s.read("beta0", c.beta0);
  s.read("draws", c.n_draws);
  s.read("burn_in", c.burn_in);
  if (const json* m = s.get("mu0")) {
    const std::string path = s.key_path("mu0");
    Section by_sex(*m, path);
    for (const char* sx : {"male", "female"}) {
      const json* table = by_sex.get(sx);
      if (!table) continue;
      const std::string sp = path + "." + sx;
      if (!table->is_object()) bad(sp, "expected an object of marker: log value");
      for (const auto& [name, val] : table->items()) {
        const std::string mp = sp + "." + name;
        const auto marker = parse_marker(name);
        if (!marker) bad(mp, "unknown marker");
        if (!val.is_number()) bad(mp, "expected a number");
        c.mu0.push_back({*parse_sex(sx), *marker, val.get<double>()});
      }
    }
    by_sex.finish();
  }
  s.finish();
}

void read_multivariate(Section& root, RunConfig& c) {
  const json* v = root.get("multivariate");
  if (!v) return;
  Section s(*v, "multivariate");
  s.read("scale_e", c.prior.scale_e);
  s.read("scale_mu", c.prior.scale_mu);
  s.read("scale_b", c.prior.scale_b);
  if (const json* df = s.get("df")) {
    if (df->is_null())
      c.prior.df.reset();
    else if (df->is_number())
      c.prior.df = df->get<double>();
    else
      bad("multivariate.df", "expected a number or null (null means K)");
  }
  s.read("iterations", c.gibbs.iterations);
  s.read("burn_in_fraction", c.gibbs.burn_in_fraction);
  s.read("thinning", c.gibbs.thinning);
  s.read("replicates", c.mv_replicates);
  s.read("resume_iterations", c.resume_iterations);
  std::string refit = c.refit == RefitMode::conditional ? "conditional" : "full";
  s.read("refit", refit);
  if (refit == "conditional")
    c.refit = RefitMode::conditional;
  else if (refit == "full")
    c.refit = RefitMode::full;
  else
    bad("multivariate.refit", "expected \"conditional\" or \"full\"");
  s.finish();
}

void read_classify(Section& root, RunConfig& c) {
  const json* v = root.get("classify");
  if (!v) return;
  Section s(*v, "classify");
  double alpha = c.policies.empty() ? 0.05 : c.policies.front().alpha_level;
  bool exclude = c.policies.empty() || c.policies.front().exclude_flagged;
  s.read("alpha", alpha);
  s.read("exclude_flagged", exclude);
  if (const json* p = s.get("policies")) {
    const std::string path = s.key_path("policies");
    if (p->is_string() && p->get<std::string>() == "default") {
      c.policies = default_policy_grid();
    } else {
      if (!p->is_array() || p->empty()) bad(path, "expected \"default\" or a non-empty list of policy names");
      c.policies.clear();
      for (std::size_t i = 0; i < p->size(); ++i) {
        const std::string ip = path + "[" + std::to_string(i) + "]";
        if (!(*p)[i].is_string()) bad(ip, "expected a policy name such as \"mv:ratios\"");
        try {
          c.policies.push_back(ClassifierPolicy::parse((*p)[i].get<std::string>()));
        } catch (const Error& e) {
          bad(ip, e.what());
        }
      }
    }
  }
  for (auto& pol : c.policies) {
    pol.alpha_level = alpha;
    pol.exclude_flagged = exclude;
  }
  if (const json* g = s.get("alpha_grid")) {
    const std::string path = s.key_path("alpha_grid");
    if (!g->is_array() || g->empty()) bad(path, "expected a non-empty list of numbers");
    c.alpha_grid.clear();
    for (const auto& a : *g) {
      if (!a.is_number()) bad(path, "expected numbers");
      c.alpha_grid.push_back(a.get<double>());
    }
  }
  if (const json* t = s.get("thresholds")) {
    const std::string path = s.key_path("thresholds");
    if (!t->is_array()) bad(path, "expected a list of {marker, sex, upper[, lower]}");
    for (std::size_t i = 0; i < t->size(); ++i) {
      Section e((*t)[i], path + "[" + std::to_string(i) + "]");
      ThresholdOverride o;
      const json* m = e.get("marker");
      if (!m) bad(e.key_path("marker"), "required");
      o.marker = marker_of(*m, e.key_path("marker"));
      const json* sx = e.get("sex");
      if (!sx) bad(e.key_path("sex"), "required");
      o.sex = sex_of(*sx, e.key_path("sex"));
      if (!e.get("upper")) bad(e.key_path("upper"), "required");
      e.read("upper", o.entry.upper);
      if (e.get("lower")) {
        double lo = 0.0;
        e.read("lower", lo);
        o.entry.lower = lo;
      }
      o.entry.source = ThresholdSource::user;
      e.finish();
      c.thresholds.push_back(o);
    }
  }
  s.finish();
}

void read_evaluate(Section& root, RunConfig& c) {
  const json* v = root.get("evaluate");
  if (!v) return;
  Section s(*v, "evaluate");
  s.read("pre_oversampling", c.report_pre);
  s.read("post_oversampling", c.report_post);
  s.read("svg", c.svg);
  s.finish();
}

}  // namespace

void RunConfig::validate() const {
  auto check = [](bool ok, const char* key, const char* what) {
    if (!ok) bad(key, what);
  };
  check(version == kConfigVersion, "version", "unsupported config version (expected 1)");
  check(kappa0 > 0.0, "univariate.kappa0", "must be positive");
  check(alpha0 > 0.0, "univariate.alpha0", "must be positive");
  check(beta0 > 0.0, "univariate.beta0", "must be positive");
  check(n_draws >= kMinPredictiveDraws, "univariate.draws", "must be at least 1000");
  check(prior.scale_e > 0.0, "multivariate.scale_e", "must be positive");
  check(prior.scale_mu > 0.0, "multivariate.scale_mu", "must be positive");
  check(prior.scale_b > 0.0, "multivariate.scale_b", "must be positive");
  check(!prior.df || *prior.df > 0.0, "multivariate.df", "must be positive");
  check(gibbs.iterations >= 1, "multivariate.iterations", "must be positive");
  check(gibbs.burn_in_fraction >= 0.0 && gibbs.burn_in_fraction < 1.0,
        "multivariate.burn_in_fraction", "must lie in [0, 1)");
  check(gibbs.thinning >= 1, "multivariate.thinning", "must be at least 1");
  check(gibbs.retained() >= 1, "multivariate.iterations", "no states left after burn-in");
  check(mv_replicates >= kMinReplicates, "multivariate.replicates", "must be at least 1000");
  check(!policies.empty(), "classify.policies", "must not be empty");
  for (const auto& p : policies) {
    check(p.alpha_level > 0.0 && p.alpha_level < 1.0, "classify.alpha", "must lie in (0, 1)");
    if (p.model == ModelKind::multivariate && prior.df)
      check(*prior.df > static_cast<double>(p.markers.size()) - 1.0, "multivariate.df",
            "must exceed K - 1 for every multivariate policy");
  }
  for (std::size_t i = 0; i < alpha_grid.size(); ++i) {
    check(alpha_grid[i] > 0.0 && alpha_grid[i] < 1.0, "classify.alpha_grid", "values must lie in (0, 1)");
    check(i == 0 || alpha_grid[i] > alpha_grid[i - 1], "classify.alpha_grid", "must be strictly ascending");
  }
  check(report_pre || report_post, "evaluate", "enable pre_oversampling or post_oversampling");
}

SexMarkerTable RunConfig::mu0_table(const SexMarkerTable& baseline_mu0) const {
  SexMarkerTable t = baseline_mu0;
  for (const auto& o : mu0) t.set(o.sex, o.marker, o.log_value);
  return t;
}

UnivariateConfig RunConfig::univariate(const SexMarkerTable& baseline_mu0) const {
  UnivariateConfig u;
  u.kappa0 = kappa0;
  u.alpha0 = alpha0;
  u.beta0 = beta0;
  u.n_draws = n_draws;
  u.burn_in = burn_in;
  u.mu0 = mu0_table(baseline_mu0);
  if (!policies.empty()) u.alpha_level = policies.front().alpha_level;
  return u;
}

PopulationThresholds RunConfig::threshold_table() const {
  auto t = PopulationThresholds::defaults();
  for (const auto& o : thresholds) {
    try {
      t.set(o.marker, o.sex, o.entry);
    } catch (const Error& e) {
      bad("classify.thresholds", e.what());
    }
  }
  return t;
}

RunConfig parse_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    fail(Errc::ConfigError, std::string("<root>: not valid JSON: ") + e.what());
  }
  RunConfig c;
  Section root(j, "");
  const json* ver = root.get("version");
  if (!ver) bad("version", "required (use 1)");
  if (!ver->is_number_integer() || ver->get<int>() != kConfigVersion)
    bad("version", "unsupported config version (expected 1)");
  root.read("seed", c.seed);
  read_simulate(root, c);
  read_data(root, c);
  read_univariate(root, c);
  read_multivariate(root, c);
  read_classify(root, c);
  read_evaluate(root, c);
  root.finish();
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) fail(Errc::ConfigError, "--config: cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& c) {
  json j;
  j["version"] = c.version;
  j["seed"] = c.seed;
  const auto& co = c.cohort;
  j["simulate"] = {{"preset", c.cohort_preset},
                   {"normal", group_json(co.normal)},
                   {"atypical", group_json(co.atypical)},
                   {"abnormal", group_json(co.abnormal)},
                   {"training", group_json(co.training)},
                   {"baseline_male", co.baseline_male},
                   {"baseline_female", co.baseline_female},
                   {"female_fraction", co.female_fraction},
                   {"ratio_noise_sd", co.ratio_noise_sd},
                   {"censor_limits", co.censor_limits},
                   {"min_gap_days", co.min_gap_days},
                   {"max_gap_days", co.max_gap_days}};
  j["data"] = {{"profiles", c.profiles},
               {"flag_encoding", c.schema.flags == FlagEncoding::sentinel ? "sentinel" : "flag_columns"},
               {"flag_suffix", c.schema.flag_suffix},
               {"missing", c.schema.missing},
               {"strict", c.schema.strict},
               {"ratio_source", std::string(to_string(c.ratio_source))}};
  json mu0 = json::object();
  for (const auto& o : c.mu0)
    mu0[std::string(to_string(o.sex))][std::string(marker_code(o.marker))] = o.log_value;
  j["univariate"] = {{"kappa0", c.kappa0}, {"alpha0", c.alpha0}, {"beta0", c.beta0},
                     {"draws", c.n_draws}, {"burn_in", c.burn_in}, {"mu0", mu0}};
  j["multivariate"] = {{"scale_e", c.prior.scale_e},
                       {"scale_mu", c.prior.scale_mu},
                       {"scale_b", c.prior.scale_b},
                       {"df", c.prior.df ? json(*c.prior.df) : json(nullptr)},
                       {"iterations", c.gibbs.iterations},
                       {"burn_in_fraction", c.gibbs.burn_in_fraction},
                       {"thinning", c.gibbs.thinning},
                       {"replicates", c.mv_replicates},
                       {"resume_iterations", c.resume_iterations},
                       {"refit", c.refit == RefitMode::conditional ? "conditional" : "full"}};
  json policies = json::array();
  for (const auto& p : c.policies) policies.push_back(p.name());
  json thresholds = json::array();
  for (const auto& o : c.thresholds) {
    json e = {{"marker", std::string(marker_code(o.marker))},
              {"sex", std::string(to_string(o.sex))},
              {"upper", o.entry.upper}};
    if (o.entry.lower) e["lower"] = *o.entry.lower;
    thresholds.push_back(e);
  }
  j["classify"] = {{"alpha", c.policies.empty() ? 0.05 : c.policies.front().alpha_level},
                   {"exclude_flagged", c.policies.empty() || c.policies.front().exclude_flagged},
                   {"policies", policies},
                   {"alpha_grid", c.alpha_grid},
                   {"thresholds", thresholds}};
  j["evaluate"] = {{"pre_oversampling", c.report_pre},
                   {"post_oversampling", c.report_post},
                   {"svg", c.svg}};
  return j.dump(2) + "\n";
}

std::string config_hash(const RunConfig& config) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(stable_hash(dump_config(config))));
  return buf;
}

}  // namespace abp
