#include "abp/occ_pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>
#include <unordered_map>

#include "abp/error.hpp"

namespace abp {

std::string_view to_string(ThresholdSource s) noexcept {
  switch (s) {
    case ThresholdSource::wada_td: return "WADA_TD";
    case ThresholdSource::population_max: return "population_max";
    case ThresholdSource::q3_fallback: return "Q3_fallback";
    case ThresholdSource::user: return "user";
  }
  return "?";
}

std::string_view to_string(Flag f) noexcept {
  return f == Flag::normal ? "normal" : "suspicious";
}

std::string_view to_string(RuleFired r) noexcept {
  switch (r) {
    case RuleFired::population_threshold: return "population_threshold";
    case RuleFired::marginal_hpd: return "marginal_hpd";
    case RuleFired::joint_region: return "joint_region";
  }
  return "?";
}

std::string_view to_string(BinaryLabel b) noexcept {
  return b == BinaryLabel::normal ? "normal" : "non_normal";
}

// ---------------------------------------------------------------- thresholds

PopulationThresholds PopulationThresholds::defaults() {
  PopulationThresholds t;
  auto both = [&](Marker m, double v, ThresholdSource src) {
    t.set(m, Sex::male, {v, std::nullopt, src});
    t.set(m, Sex::female, {v, std::nullopt, src});
  };
  auto split = [&](Marker m, double male, double female, ThresholdSource src) {
    t.set(m, Sex::male, {male, std::nullopt, src});
    t.set(m, Sex::female, {female, std::nullopt, src});
  };
  both(Marker::T_E, 4.0, ThresholdSource::wada_td);
  both(Marker::A_ETIO, 4.0, ThresholdSource::wada_td);
  both(Marker::A, 10000.0, ThresholdSource::wada_td);
  both(Marker::ETIO, 10000.0, ThresholdSource::wada_td);
  split(Marker::T, 200.0, 50.0, ThresholdSource::wada_td);
  split(Marker::E, 200.0, 50.0, ThresholdSource::wada_td);
  split(Marker::A5, 250.0, 150.0, ThresholdSource::wada_td);
  split(Marker::B5, 1260.0, 471.0, ThresholdSource::population_max);
  both(Marker::A5_B5, 4.0, ThresholdSource::q3_fallback);
  both(Marker::A5_E, 10.0, ThresholdSource::q3_fallback);
  both(Marker::A_T, 10000.0, ThresholdSource::q3_fallback);
  return t;
}

void PopulationThresholds::set(Marker marker, Sex sex, ThresholdEntry entry) {
  if (!(entry.upper > 0.0 && (!entry.lower || (*entry.lower > 0.0 && *entry.lower < entry.upper))))
    fail(Errc::InvalidParameter,
         "threshold for " + std::string(marker_code(marker)) + " must satisfy 0 < lower < upper");
  table_[index_of(marker)][static_cast<std::size_t>(sex)] = entry;
}

const ThresholdEntry* PopulationThresholds::find(Marker marker, Sex sex) const {
  const auto& e = table_[index_of(marker)][static_cast<std::size_t>(sex)];
  return e ? &*e : nullptr;
}

const ThresholdEntry& PopulationThresholds::at(Marker marker, Sex sex) const {
  const auto* e = find(marker, sex);
  if (!(e != nullptr))
    fail(Errc::MissingThreshold,
         "no population threshold for " + std::string(marker_code(marker)) + " (" +
           std::string(to_string(sex)) + ")");
  return *e;
}

// ---------------------------------------------------------------- policies

namespace {

constexpr std::array<MarkerSubset, 3> kSubsets = {MarkerSubset::eaas, MarkerSubset::ratios,
                                                  MarkerSubset::all};

std::string marker_list_name(const std::vector<Marker>& markers) {
  for (MarkerSubset s : kSubsets)
    if (markers_of(s) == markers) return std::string(to_string(s));
  std::string out;
  for (Marker m : markers) {
    if (!out.empty()) out += '+';
    out += marker_column(m);
  }
  return out;
}

std::vector<std::string_view> split(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = text.find(sep, start);
    out.push_back(text.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string ClassifierPolicy::name() const {
  std::string out = model == ModelKind::univariate ? "uv:" : "mv:";
  out += marker_list_name(markers);
  if (rule == DecisionRule::joint) out += ":joint";
  return out;
}

ClassifierPolicy ClassifierPolicy::parse(std::string_view text) {
  const auto parts = split(text, ':');
  if (!(parts.size() == 2 || parts.size() == 3))
    fail(Errc::InvalidParameter,
         "policy '" + std::string(text) + "' must look like uv:<markers> or mv:<markers>[:joint]");
  ClassifierPolicy p;
  if (parts[0] == "uv")
    p.model = ModelKind::univariate;
  else if (parts[0] == "mv")
    p.model = ModelKind::multivariate;
  else
    fail(Errc::InvalidParameter, "policy model must be 'uv' or 'mv', got '" + std::string(parts[0]) + "'");
  if (const auto subset = parse_subset(parts[1])) {
    p.markers = markers_of(*subset);
  } else {
    for (auto token : split(parts[1], '+')) {
      const auto m = parse_marker(token);
      if (!(m.has_value()))
        fail(Errc::InvalidParameter,
             "unknown marker '" + std::string(token) + "' in policy");
      p.markers.push_back(*m);
    }
  }
  if (parts.size() == 3) {
    if (parts[2] == "joint")
      p.rule = DecisionRule::joint;
    else if (parts[2] != "marginal")
      fail(Errc::InvalidParameter, "decision rule must be 'marginal' or 'joint'");
  }
  p.validate();
  return p;
}

void ClassifierPolicy::validate() const {
  require(!markers.empty(), Errc::InvalidParameter, "policy has no markers");
  for (std::size_t a = 0; a < markers.size(); ++a)
    for (std::size_t b = a + 1; b < markers.size(); ++b)
      require(markers[a] != markers[b], Errc::InvalidParameter, "policy lists a marker twice");
  require(alpha_level > 0.0 && alpha_level < 1.0, Errc::InvalidParameter,
          "alpha_level must lie in (0, 1)");
  require(!(model == ModelKind::univariate && rule == DecisionRule::joint), Errc::InvalidParameter,
          "the joint rule needs the multivariate model");
}

std::vector<ClassifierPolicy> default_policy_grid() {
  std::vector<ClassifierPolicy> out;
  for (Marker m : kAllMarkers) {
    ClassifierPolicy p;
    p.markers = {m};
    out.push_back(p);
  }
  for (MarkerSubset s : kSubsets) {
    ClassifierPolicy p;
    p.model = ModelKind::multivariate;
    p.markers = markers_of(s);
    out.push_back(p);
  }
  return out;
}

std::vector<double> default_alpha_grid() {
  return {0.001, 0.002, 0.005, 0.01, 0.02, 0.03, 0.05, 0.075, 0.1, 0.15,
          0.2,   0.3,   0.4,   0.5,  0.6,  0.7,  0.8,  0.9};
}

// ---------------------------------------------------------------- threshold rule

HpdDecision threshold_check(std::span<const Marker> markers, std::span<const double> raw_values,
                            Sex sex, const PopulationThresholds& thresholds) {
  require(markers.size() == raw_values.size(), Errc::LengthMismatch,
          "marker and value lists differ in length");
  HpdDecision d;
  d.rule = RuleFired::population_threshold;
  d.markers.assign(markers.begin(), markers.end());
  bool any_out = false;
  for (std::size_t k = 0; k < markers.size(); ++k) {
    const auto& e = thresholds.at(markers[k], sex);
    const double lo = e.lower ? std::log(*e.lower) : -std::numeric_limits<double>::infinity();
    const Interval iv{lo, std::log(e.upper)};
    const double v = raw_values[k];
    require(v > 0.0, Errc::NonPositiveValue, "raw values must be positive for the threshold check");
    // compared on the raw scale so exact limit values are not blurred by log rounding
    const bool inside = v <= e.upper && (!e.lower || v >= *e.lower);
    d.intervals.push_back(iv);
    d.inside.push_back(inside);
    any_out = any_out || !inside;
  }
  d.flag = any_out ? Flag::suspicious : Flag::normal;
  d.score = any_out ? 1.0 : 0.0;
  return d;
}

HpdDecision threshold_check(const RawSample& sample, std::span<const Marker> markers,
                            const PopulationThresholds& thresholds, RatioSource ratios) {
  const RawSample s = substitute_limits(sample);
  std::vector<double> raw;
  for (Marker m : markers) {
    const auto v = raw_value(s, m, ratios);
    if (!(v.has_value()))
      fail(Errc::IncompleteSample,
           "sample " + s.athlete_id + "@" + std::to_string(s.timestamp) + " lacks " +
             std::string(marker_code(m)));
    raw.push_back(*v);
  }
  HpdDecision d = threshold_check(markers, raw, s.sex, thresholds);
  d.athlete_id = s.athlete_id;
  d.timestamp = s.timestamp;
  d.label = s.label;
  return d;
}

// ---------------------------------------------------------------- population models

const MvPopulationModel& SequenceModels::population(Sex sex, std::span<const Marker> markers) const {
  for (const auto& m : multivariate)
    if (m.sex == sex && std::equal(m.markers.begin(), m.markers.end(), markers.begin(), markers.end()))
      return m;
  std::vector<Marker> list(markers.begin(), markers.end());
  fail(Errc::InvalidParameter, "no fitted population model for " + marker_list_name(list) + " (" +
                                   std::string(to_string(sex)) + ")");
}

namespace {

bool is_reference_sample(const RawSample& s) {
  return !s.label || *s.label == Label::normal;
}

// Log vector of a reference sample; samples that cannot be transformed
// (missing marker, non-positive value) are skipped rather than aborting a fit.
std::optional<Vector> reference_vector(const RawSample& raw, std::span<const Marker> markers,
                                       RatioSource ratios) {
  try {
    return log_transform(substitute_limits(raw), markers, ratios).log_values;
  } catch (const Error& e) {
    if (e.code() == Errc::IncompleteSample || e.code() == Errc::NonPositiveValue ||
        e.code() == Errc::SubstitutionUndefined)
      return std::nullopt;
    throw;
  }
}

template <class Fn>
void for_each_reference_block(const ProfileCollection& profiles, Sex sex,
                              std::span<const Marker> markers, RatioSource ratios,
                              bool include_training, Fn&& fn) {
  for (const auto& s : profiles.baseline) {
    if (s.sex != sex || !is_reference_sample(s)) continue;
    if (auto v = reference_vector(s, markers, ratios)) {
      Matrix b(1, v->size());
      b.row(0) = v->transpose();
      fn("baseline:" + s.athlete_id, std::move(b));
    }
  }
  if (!include_training) return;
  for (const Athlete* a : profiles.athletes_in(Cohort::training)) {
    if (a->sex != sex) continue;
    std::vector<Vector> rows;
    for (const auto& s : a->samples)
      if (is_reference_sample(s))
        if (auto v = reference_vector(s, markers, ratios)) rows.push_back(std::move(*v));
    if (rows.empty()) continue;
    Matrix b(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(markers.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) b.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
    fn(a->id, std::move(b));
  }
}

}  // namespace

MvData population_data(const ProfileCollection& profiles, Sex sex, std::span<const Marker> markers,
                       RatioSource ratios, bool include_training) {
  std::vector<Matrix> blocks;
  std::vector<std::string> ids;
  for_each_reference_block(profiles, sex, markers, ratios, include_training,
                           [&](std::string id, Matrix b) {
                             ids.push_back(std::move(id));
                             blocks.push_back(std::move(b));
                           });
  if (!(!blocks.empty()))
    fail(Errc::TooFewObservations,
         "no reference samples for " + std::string(to_string(sex)));
  return MvData(std::move(blocks), std::move(ids));
}

SexMarkerTable baseline_log_means(const ProfileCollection& profiles, RatioSource ratios,
                                  bool include_training) {
  SexMarkerTable table;
  for (Sex sex : {Sex::male, Sex::female}) {
    for (Marker m : kAllMarkers) {
      const std::array<Marker, 1> one{m};
      double sum = 0.0;
      std::size_t n = 0;
      for_each_reference_block(profiles, sex, one, ratios, include_training,
                               [&](const std::string&, const Matrix& b) {
                                 sum += b.sum();
                                 n += static_cast<std::size_t>(b.rows());
                               });
      if (n > 0) table.set(sex, m, sum / static_cast<double>(n));
    }
  }
  return table;
}

MvPriorConfig MvPriorSettings::build(const Vector& mu0) const {
  const double d = df.value_or(static_cast<double>(mu0.size()));
  const auto k = mu0.size();
  MvPriorConfig prior{mu0,
                      SpdMatrix::identity(k, scale_e),
                      SpdMatrix::identity(k, scale_mu),
                      SpdMatrix::identity(k, scale_b),
                      d,
                      d,
                      d};
  prior.validate();
  return prior;
}

MvPriorConfig population_prior(Sex sex, std::span<const Marker> markers, const SexMarkerTable& mu0,
                               const MvPriorSettings& settings) {
  Vector m0(static_cast<Eigen::Index>(markers.size()));
  for (std::size_t k = 0; k < markers.size(); ++k)
    m0(static_cast<Eigen::Index>(k)) = mu0.at(sex, markers[k]);
  return settings.build(m0);
}

MvPopulationModel population_model(std::shared_ptr<const MvChain> chain, Sex sex) {
  require(chain != nullptr && !chain->states.empty(), Errc::InvalidParameter,
          "population chain has no retained states");
  MvPopulationModel model;
  model.sex = sex;
  model.markers = chain->markers;
  model.engine = std::make_shared<const ConditionalPredictive>(*chain);
  model.chain = std::move(chain);
  return model;
}

MvPopulationModel fit_population_model(const ProfileCollection& profiles, Sex sex,
                                       std::span<const Marker> markers, const SexMarkerTable& mu0,
                                       const GibbsConfig& gibbs, RatioSource ratios, Rng& rng,
                                       bool keep_data, const MvPriorSettings& settings) {
  auto data = std::make_shared<const MvData>(population_data(profiles, sex, markers, ratios));
  const auto prior = population_prior(sex, markers, mu0, settings);
  GibbsConfig cfg = gibbs;
  cfg.keep_athlete_means = false;
  auto chain = std::make_shared<MvChain>(run_gibbs(*data, prior, cfg, rng));
  chain->markers.assign(markers.begin(), markers.end());
  MvPopulationModel model = population_model(std::move(chain), sex);
  if (keep_data) {
    model.data = std::move(data);
    model.prior = prior;
  }
  return model;
}

// ---------------------------------------------------------------- sequential rule

namespace {

// Largest alpha on the grid at which `accepted(alpha)` holds, scanning down.
template <class Pred>
double suspicion_score(const std::vector<double>& grid, Pred&& accepted) {
  for (auto it = grid.rbegin(); it != grid.rend(); ++it)
    if (accepted(*it)) return 1.0 - *it;
  return 1.0;
}

void decide_marginal(HpdDecision& d, const std::vector<std::vector<double>>& sorted_cols,
                     const Vector& y, double alpha, const std::vector<double>& grid) {
  bool any_out = false;
  for (std::size_t k = 0; k < sorted_cols.size(); ++k) {
    const Interval iv = hpd_interval(sorted_cols[k], alpha);
    const bool in = iv.contains(y(static_cast<Eigen::Index>(k)));
    d.intervals.push_back(iv);
    d.inside.push_back(in);
    any_out = any_out || !in;
  }
  d.flag = any_out ? Flag::suspicious : Flag::normal;
  d.rule = RuleFired::marginal_hpd;
  d.score = suspicion_score(grid, [&](double a) {
    for (std::size_t k = 0; k < sorted_cols.size(); ++k)
      if (!hpd_interval(sorted_cols[k], a).contains(y(static_cast<Eigen::Index>(k)))) return false;
    return true;
  });
}

HpdDecision univariate_decision(const std::vector<Vector>& history, const Vector& y, Sex sex,
                                const ClassifierPolicy& policy, const SequenceModels& models,
                                Rng& rng) {
  const auto& cfg = models.univariate;
  std::vector<std::vector<double>> cols;
  std::vector<double> h(history.size());
  for (std::size_t k = 0; k < policy.markers.size(); ++k) {
    for (std::size_t i = 0; i < history.size(); ++i) h[i] = history[i](static_cast<Eigen::Index>(k));
    const auto post = posterior_update(cfg.prior(sex, policy.markers[k]), h);
    const auto draws = sample_posterior(post, cfg.n_draws, rng, cfg.burn_in);
    cols.push_back(predictive_replicates(draws, rng));
  }
  HpdDecision d;
  decide_marginal(d, cols, y, policy.alpha_level, models.alpha_grid);
  return d;
}

HpdDecision multivariate_decision(const std::vector<Vector>& history, const Vector& y, Sex sex,
                                  const ClassifierPolicy& policy, const SequenceModels& models,
                                  Rng& rng) {
  const auto& pop = models.population(sex, policy.markers);
  const auto k = static_cast<Eigen::Index>(policy.markers.size());
  Matrix hist(static_cast<Eigen::Index>(history.size()), k);
  for (std::size_t i = 0; i < history.size(); ++i) hist.row(static_cast<Eigen::Index>(i)) = history[i].transpose();

  PredictiveSet set;
  if (models.refit == RefitMode::full) {
    require(pop.data && pop.prior, Errc::InvalidParameter,
            "full refit needs the population data kept with the model");
    set = refit_with_athlete(*pop.data, hist, *pop.prior, models.gibbs, pop.chain.get(), rng);
  } else {
    set = pop.engine->draw(hist, rng);
  }
  const std::size_t n_rep = std::max(models.mv_replicates, kMinReplicates);
  const Matrix reps = predictive_replicates(set, n_rep, rng);

  std::vector<std::vector<double>> cols(static_cast<std::size_t>(k));
  for (Eigen::Index a = 0; a < k; ++a) {
    auto& c = cols[static_cast<std::size_t>(a)];
    c.assign(reps.col(a).data(), reps.col(a).data() + reps.rows());
    std::sort(c.begin(), c.end());
  }
  HpdDecision d;
  decide_marginal(d, cols, y, policy.alpha_level, models.alpha_grid);
  if (policy.rule == DecisionRule::joint) {
    const PredictiveDensity density(set);
    std::vector<double> logs(static_cast<std::size_t>(reps.rows()));
    for (Eigen::Index i = 0; i < reps.rows(); ++i)
      logs[static_cast<std::size_t>(i)] = density.log_density(reps.row(i).transpose());
    const double ly = density.log_density(y);
    const double gamma = density_threshold(logs, policy.alpha_level);
    d.joint_log_density = ly;
    d.log_gamma = gamma;
    d.joint_member = ly >= gamma;
    d.flag = *d.joint_member ? Flag::normal : Flag::suspicious;
    d.rule = RuleFired::joint_region;
    d.score = suspicion_score(models.alpha_grid,
                              [&](double a) { return ly >= density_threshold(logs, a); });
  }
  return d;
}

}  // namespace

std::vector<HpdDecision> classify_sequence(const Athlete& athlete, const ClassifierPolicy& policy,
                                           const SequenceModels& models, Rng& rng) {
  policy.validate();
  for (std::size_t i = 1; i < athlete.samples.size(); ++i)
    if (!(athlete.samples[i - 1].timestamp < athlete.samples[i].timestamp))
      fail(Errc::InvalidParameter,
           "samples of " + athlete.id + " are not time-ordered");
  const std::string policy_name = policy.name();
  std::vector<HpdDecision> out;
  out.reserve(athlete.samples.size());
  std::vector<Vector> accepted;
  for (std::size_t i = 0; i < athlete.samples.size(); ++i) {
    const RawSample s = substitute_limits(athlete.samples[i]);
    const Vector y = log_transform(s, policy.markers, models.ratio_source).log_values;
    HpdDecision d;
    if (accepted.empty())
      d = threshold_check(s, policy.markers, models.thresholds, models.ratio_source);
    else if (policy.model == ModelKind::univariate)
      d = univariate_decision(accepted, y, athlete.sex, policy, models, rng);
    else
      d = multivariate_decision(accepted, y, athlete.sex, policy, models, rng);
    d.athlete_id = athlete.id;
    d.timestamp = s.timestamp;
    d.sample_index = i;
    d.policy = policy_name;
    d.markers = policy.markers;
    d.training_size = accepted.size();
    d.label = s.label;
    if (!d.suspicious() || !policy.exclude_flagged) accepted.push_back(y);
    out.push_back(std::move(d));
  }
  return out;
}

std::vector<HpdDecision> classify_cohort(const ProfileCollection& profiles,
                                         const ClassifierPolicy& policy,
                                         const SequenceModels& models, std::uint64_t seed,
                                         unsigned threads) {
  const auto athletes = profiles.athletes_in(Cohort::monitored);
  const std::string name = policy.name();
  std::vector<std::vector<HpdDecision>> per(athletes.size());
  std::vector<std::exception_ptr> errors(athletes.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t a = next++; a < athletes.size(); a = next++) {
      try {
        Rng rng(seed, stable_hash(name + "/" + athletes[a]->id));
        per[a] = classify_sequence(*athletes[a], policy, models, rng);
      } catch (...) {
        errors[a] = std::current_exception();
      }
    }
  };
  const unsigned n_threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(athletes.size())));
  if (n_threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (const auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<HpdDecision> out;
  for (auto& v : per)
    for (auto& d : v) out.push_back(std::move(d));
  return out;
}

// ---------------------------------------------------------------- labels, oversampling

BinaryLabel binarize_label(std::optional<Label> label) {
  require(label.has_value(), Errc::MissingLabel, "sample has no label");
  return *label == Label::normal ? BinaryLabel::normal : BinaryLabel::non_normal;
}

OversampleResult random_oversample(std::span<const BinaryLabel> labels, Rng& rng) {
  std::vector<std::size_t> pos;
  std::vector<std::size_t> neg;
  for (std::size_t i = 0; i < labels.size(); ++i)
    (labels[i] == BinaryLabel::non_normal ? pos : neg).push_back(i);
  require(!pos.empty() && !neg.empty(), Errc::SingleClassInput,
          "oversampling needs both classes present");
  OversampleResult r;
  r.indices.resize(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) r.indices[i] = i;
  const auto& minority = pos.size() < neg.size() ? pos : neg;
  const std::size_t deficit = std::max(pos.size(), neg.size()) - minority.size();
  for (std::size_t i = 0; i < deficit; ++i)
    r.indices.push_back(minority[static_cast<std::size_t>(rng.uniform_index(minority.size()))]);
  r.replicated = deficit;
  return r;
}

// ---------------------------------------------------------------- decision export

namespace {

std::string cell(double v) { return format_double(v); }

double parse_number(std::string_view s) {
  const std::string tmp(s);
  char* end = nullptr;
  const double v = std::strtod(tmp.c_str(), &end);
  if (!(end != tmp.c_str() && *end == '\0')) fail(Errc::FormatError, "bad number '" + tmp + "'");
  return v;
}

}  // namespace

void write_decisions_csv(std::ostream& out, std::span<const HpdDecision> decisions) {
  out << "athlete_id,timestamp,sample_index,policy,label,rule_fired,flag,score,training_size";
  for (Marker m : kAllMarkers) {
    const auto c = marker_column(m);
    out << ',' << c << "_lo," << c << "_hi," << c << "_in";
  }
  out << ",joint_log_density,log_gamma,joint_in\n";
  for (const auto& d : decisions) {
    out << d.athlete_id << ',' << d.timestamp << ',' << d.sample_index << ',' << d.policy << ','
        << (d.label ? to_string(*d.label) : std::string_view("NA")) << ',' << to_string(d.rule)
        << ',' << to_string(d.flag) << ',' << cell(d.score) << ',' << d.training_size;
    std::array<std::optional<std::size_t>, kMarkerCount> slot{};
    for (std::size_t k = 0; k < d.markers.size(); ++k) slot[index_of(d.markers[k])] = k;
    for (Marker m : kAllMarkers) {
      if (const auto k = slot[index_of(m)]) {
        out << ',' << cell(d.intervals[*k].lo) << ',' << cell(d.intervals[*k].hi) << ','
            << (d.inside[*k] ? 1 : 0);
      } else {
        out << ",,,";
      }
    }
    out << ',' << (d.joint_log_density ? cell(*d.joint_log_density) : "") << ','
        << (d.log_gamma ? cell(*d.log_gamma) : "") << ','
        << (d.joint_member ? (*d.joint_member ? "1" : "0") : "") << '\n';
  }
}

std::vector<HpdDecision> read_decisions_csv(std::istream& in) {
  std::string line;
  std::vector<std::string> header;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    for (auto f : split(line, ',')) header.emplace_back(f);
    break;
  }
  require(!header.empty(), Errc::FormatError, "decision file has no header");
  std::unordered_map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  auto idx = [&](const std::string& name) {
    const auto it = col.find(name);
    if (!(it != col.end())) fail(Errc::FormatError, "decision file lacks column " + name);
    return it->second;
  };
  std::vector<HpdDecision> out;
  while (std::getline(in, line)) {
    if (line.empty() || line.front() == '#') continue;
    const auto f = split(line, ',');
    require(f.size() == header.size(), Errc::FormatError, "decision row has wrong field count");
    HpdDecision d;
    d.athlete_id = std::string(f[idx("athlete_id")]);
    d.timestamp = static_cast<std::int64_t>(parse_number(f[idx("timestamp")]));
    d.sample_index = static_cast<std::size_t>(parse_number(f[idx("sample_index")]));
    d.policy = std::string(f[idx("policy")]);
    d.label = parse_label(f[idx("label")]);
    const auto rule = f[idx("rule_fired")];
    d.rule = rule == "population_threshold" ? RuleFired::population_threshold
             : rule == "joint_region"       ? RuleFired::joint_region
                                            : RuleFired::marginal_hpd;
    d.flag = f[idx("flag")] == "suspicious" ? Flag::suspicious : Flag::normal;
    d.score = parse_number(f[idx("score")]);
    d.training_size = static_cast<std::size_t>(parse_number(f[idx("training_size")]));
    for (Marker m : kAllMarkers) {
      const std::string c(marker_column(m));
      const auto lo = f[idx(c + "_lo")];
      if (lo.empty()) continue;
      d.markers.push_back(m);
      d.intervals.push_back({parse_number(lo), parse_number(f[idx(c + "_hi")])});
      d.inside.push_back(f[idx(c + "_in")] == "1");
    }
    if (const auto v = f[idx("joint_log_density")]; !v.empty()) d.joint_log_density = parse_number(v);
    if (const auto v = f[idx("log_gamma")]; !v.empty()) d.log_gamma = parse_number(v);
    if (const auto v = f[idx("joint_in")]; !v.empty()) d.joint_member = v == "1";
    out.push_back(std::move(d));
  }
  return out;
}

}  // namespace abp
