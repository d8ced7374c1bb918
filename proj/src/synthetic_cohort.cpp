#include "abp/synthetic_cohort.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "abp/error.hpp"

namespace abp {
namespace {

// Reference-population mean and SD (ng/mL), ordered as kConcentrations.
constexpr std::array<double, kConcentrationCount> kRawMean = {61.7, 139.92, 2997.3, 33.71, 2719.4, 39.37};
constexpr std::array<double, kConcentrationCount> kRawSd = {64.68, 164.27, 2169.41, 42.94, 1803.23, 46.27};
// Male / female ratio of the sex-specific upper limits, used as the sex
// effect on the log scale.
constexpr std::array<double, kConcentrationCount> kSexRatio = {250.0 / 150.0, 1260.0 / 471.0, 1.0,
                                                               4.0, 1.0, 4.0};
constexpr double kDilutionVar = 0.12;
constexpr double kBetweenShare = 0.65;
constexpr double kBetweenCorr = 0.5;
constexpr double kWithinCorr = 0.3;

Matrix equicorrelated(const Vector& var, double rho) {
  const auto k = var.size();
  Matrix c(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b < k; ++b)
      c(a, b) = (a == b ? 1.0 : rho) * std::sqrt(var(a) * var(b));
  return c;
}

Vector draw_normal(const Vector& mean, const Matrix& chol_lower, Rng& rng) {
  Vector z(mean.size());
  for (Eigen::Index a = 0; a < z.size(); ++a) z(a) = rng.normal();
  return mean + chol_lower.triangularView<Eigen::Lower>() * z;
}

std::string make_id(const char* prefix, std::size_t i) {
  std::string n = std::to_string(i + 1);
  while (n.size() < 3) n.insert(n.begin(), '0');
  return prefix + n;
}

// Linear map from the six log concentrations to the requested log markers.
Matrix marker_map(std::span<const Marker> markers) {
  Matrix m = Matrix::Zero(static_cast<Eigen::Index>(markers.size()), kConcentrationCount);
  for (std::size_t r = 0; r < markers.size(); ++r) {
    const auto row = static_cast<Eigen::Index>(r);
    if (kind_of(markers[r]) == MarkerKind::concentration) {
      m(row, static_cast<Eigen::Index>(index_of(markers[r]))) = 1.0;
    } else {
      const auto& def = ratio_definition(markers[r]);
      m(row, static_cast<Eigen::Index>(index_of(def.numerator))) = 1.0;
      m(row, static_cast<Eigen::Index>(index_of(def.denominator))) = -1.0;
    }
  }
  return m;
}

}  // namespace

std::array<TruthParameters, 2> default_truth() {
  std::array<TruthParameters, 2> out;
  Vector pooled(kConcentrationCount);
  Vector half_sex(kConcentrationCount);
  Vector var_b(kConcentrationCount);
  Vector var_w(kConcentrationCount);
  for (std::size_t k = 0; k < kConcentrationCount; ++k) {
    const auto a = static_cast<Eigen::Index>(k);
    const double cv = kRawSd[k] / kRawMean[k];
    const double total = std::log1p(cv * cv);
    pooled(a) = std::log(kRawMean[k]) - total / 2.0;
    half_sex(a) = std::log(kSexRatio[k]) / 2.0;
    // a 50/50 sex mixture adds (delta/2)^2 to the pooled variance
    const double within_sex = std::max(total - half_sex(a) * half_sex(a), 0.2);
    const double rest = within_sex - kDilutionVar;
    var_b(a) = kBetweenShare * rest;
    var_w(a) = (1.0 - kBetweenShare) * rest;
  }
  const Matrix cov_b = equicorrelated(var_b, kBetweenCorr);
  const Matrix cov_e = Matrix::Constant(kConcentrationCount, kConcentrationCount, kDilutionVar) +
                       equicorrelated(var_w, kWithinCorr);
  out[static_cast<std::size_t>(Sex::male)] = {pooled + half_sex, cov_b, cov_e};
  out[static_cast<std::size_t>(Sex::female)] = {pooled - half_sex, cov_b, cov_e};
  return out;
}

MarkerTruth marker_truth(const TruthParameters& truth, std::span<const Marker> markers,
                         double ratio_noise_sd) {
  const Matrix m = marker_map(markers);
  MarkerTruth t;
  t.mean = m * truth.mean;
  t.cov_b = m * truth.cov_b * m.transpose();
  t.cov_e = m * truth.cov_e * m.transpose();
  for (std::size_t r = 0; r < markers.size(); ++r)
    if (kind_of(markers[r]) == MarkerKind::ratio)
      t.cov_e(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r)) += ratio_noise_sd * ratio_noise_sd;
  return t;
}

std::vector<InjectionPattern> default_patterns() {
  // Each regime moves several markers moderately; no single concentration or
  // ratio responds to every regime.
  //                                A5   B5    A     E    ETIO  T
  return {{"testosterone", {0.0, 0.0, 0.3, -0.2, 0.2, 0.8}},
          {"dihydrotestosterone", {0.8, 0.0, 0.4, 0.0, 0.0, 0.0}},
          {"androstenedione", {0.0, 0.5, 0.5, 0.0, 0.5, 0.2}},
          {"masked_testosterone", {0.0, 0.0, 0.0, 0.6, 0.0, 0.6}},
          {"dhea", {0.3, 0.3, 0.6, 0.0, 0.3, 0.0}}};
}

CohortSpec CohortSpec::benchmark() {
  CohortSpec s;
  s.normal = {20, 280, 0, Label::normal, 0.0, 0.0, 2};
  s.atypical = {20, 300, 40, Label::atypical, 0.8, 1.4, 2};
  s.abnormal = {10, 150, 20, Label::abnormal, 1.4, 2.2, 2};
  s.training = {40, 480, 0, Label::normal, 0.0, 0.0, 2};
  return s;
}

void CohortSpec::validate() const {
  for (const GroupSpec* g : {&normal, &atypical, &abnormal, &training}) {
    if (g->athletes == 0) {
      require(g->total_samples == 0 && g->injected_samples == 0, Errc::InvalidSpec,
              "a group without athletes cannot have samples");
      continue;
    }
    require(g->min_samples >= 1, Errc::InvalidSpec, "min_samples must be at least 1");
    require(g->total_samples >= g->athletes * g->min_samples, Errc::InvalidSpec,
            "group total_samples below athletes * min_samples");
    if (g->injected_samples > 0) {
      require(g->label != Label::normal, Errc::InvalidSpec, "normal groups cannot carry injections");
      require(g->min_samples >= 2, Errc::InvalidSpec, "doped groups need min_samples >= 2");
      require(g->injected_samples >= g->athletes, Errc::InvalidSpec,
              "every doped athlete needs at least one injected sample");
      require(g->injected_samples <= g->total_samples - g->athletes, Errc::InvalidSpec,
              "too many injected samples: the first sample of each athlete stays clean");
      require(g->delta_min >= 0.0 && g->delta_max >= g->delta_min, Errc::InvalidSpec,
              "injection intensity range is invalid");
    }
  }
  require(training.injected_samples == 0, Errc::InvalidSpec, "the training group must be clean");
  require(female_fraction >= 0.0 && female_fraction <= 1.0, Errc::InvalidSpec,
          "female_fraction must lie in [0, 1]");
  require(ratio_noise_sd >= 0.0, Errc::InvalidSpec, "ratio_noise_sd must be non-negative");
  require(min_gap_days >= 1 && max_gap_days >= min_gap_days, Errc::InvalidSpec,
          "sampling gaps must satisfy 1 <= min <= max");
  require(!patterns.empty() || (atypical.injected_samples == 0 && abnormal.injected_samples == 0),
          Errc::InvalidSpec, "injections need at least one pattern");
  for (const auto& t : truth) {
    require(t.mean.size() == static_cast<Eigen::Index>(kConcentrationCount) &&
                t.cov_b.rows() == t.mean.size() && t.cov_e.rows() == t.mean.size(),
            Errc::InvalidSpec, "true parameters must cover the six concentrations");
    try {
      (void)cholesky(t.cov_b, "true between-athlete covariance");
      (void)cholesky(t.cov_e, "true within-athlete covariance");
    } catch (const Error& e) {
      fail(Errc::InvalidSpec, e.what());
    }
  }
}

std::vector<std::size_t> allocate_counts(std::size_t total, std::size_t parts, std::size_t min_each,
                                         Rng& rng) {
  require(parts > 0, Errc::InvalidSpec, "cannot split into zero parts");
  require(total >= parts * min_each, Errc::InvalidSpec, "total too small for the minimum per part");
  std::vector<std::size_t> out(parts, min_each);
  std::size_t rest = total - parts * min_each;
  // Gamma(2) weights give a moderately skewed spread of series lengths.
  std::vector<double> w(parts);
  double sum = 0.0;
  for (auto& x : w) sum += (x = rng.gamma(2.0, 1.0));
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t given = 0;
  for (std::size_t j = 0; j < parts; ++j) {
    const double share = static_cast<double>(rest) * w[j] / sum;
    const auto whole = static_cast<std::size_t>(std::floor(share));
    out[j] += whole;
    given += whole;
    remainders.emplace_back(share - static_cast<double>(whole), j);
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; given < rest; ++i, ++given) ++out[remainders[i % parts].second];
  return out;
}

std::vector<Matrix> simulate_hierarchical(const Vector& mu, const Matrix& cov_b, const Matrix& cov_e,
                                          std::span<const std::size_t> counts, Rng& rng) {
  const Matrix lb = cholesky(cov_b, "between-athlete covariance");
  const Matrix le = cholesky(cov_e, "within-athlete covariance");
  std::vector<Matrix> out;
  out.reserve(counts.size());
  for (std::size_t n : counts) {
    const Vector mj = draw_normal(mu, lb, rng);
    Matrix block(static_cast<Eigen::Index>(n), mu.size());
    for (std::size_t i = 0; i < n; ++i) block.row(static_cast<Eigen::Index>(i)) = draw_normal(mj, le, rng).transpose();
    out.push_back(std::move(block));
  }
  return out;
}

namespace {

struct Simulator {
  const CohortSpec& spec;
  Rng& rng;
  std::array<Matrix, 2> chol_b;
  std::array<Matrix, 2> chol_e;

  Simulator(const CohortSpec& s, Rng& r) : spec(s), rng(r) {
    for (std::size_t x = 0; x < 2; ++x) {
      chol_b[x] = cholesky(spec.truth[x].cov_b, "true between-athlete covariance");
      chol_e[x] = cholesky(spec.truth[x].cov_e, "true within-athlete covariance");
    }
  }

  RawSample make_sample(const std::string& id, Sex sex, std::int64_t ts, const Vector& log_conc,
                        Label label) {
    RawSample s;
    s.athlete_id = id;
    s.sex = sex;
    s.timestamp = ts;
    s.label = label;
    std::array<double, kConcentrationCount> conc{};
    for (std::size_t k = 0; k < kConcentrationCount; ++k) {
      conc[k] = std::exp(log_conc(static_cast<Eigen::Index>(k)));
      LimitFlag flag = LimitFlag::measured;
      if (spec.censor_limits) {
        const Marker m = kConcentrations[k];
        const bool te = m == Marker::T || m == Marker::E;
        const bool diol = m == Marker::A5 || m == Marker::B5;
        if (te || diol) {
          const double lod = te ? 0.1 : 1.0;
          const double loq = te ? 1.0 : 5.0;
          if (conc[k] < lod)
            flag = LimitFlag::below_lod;
          else if (conc[k] < loq)
            flag = LimitFlag::below_loq;
        }
      }
      s.at(kConcentrations[k]) = MarkerReading{conc[k], flag};
    }
    for (const auto& def : kRatioDefinitions) {
      const double log_ratio = log_conc(static_cast<Eigen::Index>(index_of(def.numerator))) -
                               log_conc(static_cast<Eigen::Index>(index_of(def.denominator))) +
                               spec.ratio_noise_sd * rng.normal();
      s.at(def.ratio) = MarkerReading{std::exp(log_ratio), LimitFlag::measured};
    }
    return s;
  }

  Sex sex_of(std::size_t j) const {
    const double f = spec.female_fraction;
    return std::floor(static_cast<double>(j + 1) * f) > std::floor(static_cast<double>(j) * f) ? Sex::female
                                                                                                : Sex::male;
  }

  void baseline(ProfileCollection& pc) {
    std::size_t idx = 0;
    for (Sex sex : {Sex::male, Sex::female}) {
      const std::size_t n = sex == Sex::male ? spec.baseline_male : spec.baseline_female;
      const auto x = static_cast<std::size_t>(sex);
      for (std::size_t i = 0; i < n; ++i, ++idx) {
        const Vector mj = draw_normal(spec.truth[x].mean, chol_b[x], rng);
        const Vector y = draw_normal(mj, chol_e[x], rng);
        pc.baseline.push_back(make_sample(make_id("B", idx), sex, 0, y, Label::normal));
      }
    }
  }

  void group(const GroupSpec& g, const char* prefix, Cohort cohort, ProfileCollection& pc,
             std::vector<InjectionRecord>& injections) {
    if (g.athletes == 0) return;
    const auto counts = allocate_counts(g.total_samples, g.athletes, g.min_samples, rng);
    std::vector<std::size_t> doped(g.athletes, 0);
    if (g.injected_samples > 0) {
      // one injected sample each, the rest spread without touching first samples
      std::vector<std::size_t> room(g.athletes);
      for (std::size_t j = 0; j < g.athletes; ++j) {
        doped[j] = 1;
        room[j] = counts[j] - 2;
      }
      std::size_t left = g.injected_samples - g.athletes;
      std::vector<std::size_t> open;
      for (std::size_t j = 0; j < g.athletes; ++j)
        if (room[j] > 0) open.push_back(j);
      while (left > 0) {
        require(!open.empty(), Errc::InvalidSpec, "not enough room for the requested injections");
        const std::size_t pick = static_cast<std::size_t>(rng.uniform_index(open.size()));
        const std::size_t j = open[pick];
        ++doped[j];
        --left;
        if (--room[j] == 0) open.erase(open.begin() + static_cast<std::ptrdiff_t>(pick));
      }
    }
    for (std::size_t j = 0; j < g.athletes; ++j) {
      Athlete a;
      a.id = make_id(prefix, j);
      a.sex = sex_of(j);
      a.cohort = cohort;
      const auto x = static_cast<std::size_t>(a.sex);
      const Vector mj = draw_normal(spec.truth[x].mean, chol_b[x], rng);
      std::size_t start = counts[j];
      Vector shift = Vector::Zero(kConcentrationCount);
      std::string pattern;
      double intensity = 0.0;
      if (doped[j] > 0) {
        // contiguous doping episode somewhere after the first sample
        start = 1 + static_cast<std::size_t>(rng.uniform_index(counts[j] - doped[j]));
        const auto& p = spec.patterns[static_cast<std::size_t>(rng.uniform_index(spec.patterns.size()))];
        intensity = g.delta_min + (g.delta_max - g.delta_min) * rng.uniform();
        for (std::size_t k = 0; k < kConcentrationCount; ++k)
          shift(static_cast<Eigen::Index>(k)) = intensity * p.shift[k];
        pattern = p.name;
      }
      std::int64_t t = static_cast<std::int64_t>(rng.uniform_index(365));
      for (std::size_t i = 0; i < counts[j]; ++i) {
        if (i > 0)
          t += spec.min_gap_days +
               static_cast<std::int64_t>(rng.uniform_index(
                   static_cast<std::uint64_t>(spec.max_gap_days - spec.min_gap_days + 1)));
        Vector y = draw_normal(mj, chol_e[x], rng);
        const bool injected = i >= start && i < start + doped[j];
        if (injected) {
          y += shift;
          injections.push_back({a.id, i, t, pattern, intensity});
        }
        a.samples.push_back(make_sample(a.id, a.sex, t, y, injected ? g.label : Label::normal));
      }
      pc.athletes.push_back(std::move(a));
    }
  }
};

}  // namespace

SimulatedCohort simulate_cohort(const CohortSpec& spec, Rng& rng) {
  spec.validate();
  SimulatedCohort out;
  Simulator sim(spec, rng);
  sim.baseline(out.profiles);
  sim.group(spec.training, "TR", Cohort::training, out.profiles, out.injections);
  sim.group(spec.normal, "N", Cohort::monitored, out.profiles, out.injections);
  sim.group(spec.atypical, "AT", Cohort::monitored, out.profiles, out.injections);
  sim.group(spec.abnormal, "AB", Cohort::monitored, out.profiles, out.injections);
  return out;
}

BaselineMoments estimate_baseline_moments(const ProfileCollection& profiles,
                                          std::span<const Marker> markers, RatioSource ratios) {
  BaselineMoments bm;
  bm.markers.assign(markers.begin(), markers.end());
  const auto k = static_cast<Eigen::Index>(markers.size());
  for (Sex sex : {Sex::male, Sex::female}) {
    const auto x = static_cast<std::size_t>(sex);
    std::vector<Vector> rows;
    for (const auto& s : profiles.baseline)
      if (s.sex == sex) rows.push_back(log_transform(substitute_limits(s), markers, ratios).log_values);
    if (!(rows.size() >= 2))
      fail(Errc::TooFewObservations,
           "baseline moments need at least two " + std::string(to_string(sex)) + " samples");
    Vector mean = Vector::Zero(k);
    for (const auto& r : rows) mean += r;
    mean /= static_cast<double>(rows.size());
    Matrix cov = Matrix::Zero(k, k);
    for (const auto& r : rows) cov += (r - mean) * (r - mean).transpose();
    cov /= static_cast<double>(rows.size() - 1);
    bm.mean[x] = std::move(mean);
    bm.cov[x] = std::move(cov);
    bm.count[x] = rows.size();
  }
  return bm;
}

void write_truth_csv(std::ostream& out, const SimulatedCohort& cohort) {
  out << "athlete_id,sample_index,timestamp,pattern,intensity\n";
  for (const auto& r : cohort.injections)
    out << r.athlete_id << ',' << r.sample_index << ',' << r.timestamp << ',' << r.pattern << ','
        << format_double(r.intensity) << '\n';
}

}  // namespace abp
