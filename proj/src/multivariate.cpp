#include "abp/multivariate.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <istream>
#include <limits>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>
#include <unordered_map>

#include "abp/diagnostics.hpp"
#include "abp/error.hpp"

namespace abp {
namespace {

Matrix symmetrize(const Matrix& m) { return 0.5 * (m + m.transpose()); }

void require_df(double df, Eigen::Index k, const char* name) {
  if (!(df > static_cast<double>(k) - 1.0))
    fail(Errc::DegreesOfFreedomTooSmall,
         std::string(name) + " = " + std::to_string(df) + " must exceed K - 1 = " +
           std::to_string(k - 1));
}

}  // namespace

// ---------------------------------------------------------------- configuration

MvPriorConfig MvPriorConfig::defaults(const Vector& mu0) {
  const auto k = mu0.size();
  require(k >= 1, Errc::DimensionMismatch, "prior mean must have at least one component");
  const double df = static_cast<double>(k);
  return {mu0,
          SpdMatrix::identity(k, 1000.0),
          SpdMatrix::identity(k, 1.0 / 1000.0),
          SpdMatrix::identity(k, 1000.0),
          df,
          df,
          df};
}

MvPriorConfig MvPriorConfig::uniform(const Vector& mu0, double scale, double df) {
  const auto k = mu0.size();
  require(k >= 1, Errc::DimensionMismatch, "prior mean must have at least one component");
  require(scale > 0.0, Errc::InvalidParameter, "prior scale must be positive");
  return {mu0, SpdMatrix::identity(k, scale), SpdMatrix::identity(k, scale),
          SpdMatrix::identity(k, scale), df, df, df};
}

void MvPriorConfig::validate() const {
  const auto k = dim();
  require(k >= 1, Errc::DimensionMismatch, "prior mean must have at least one component");
  require(mu0.allFinite(), Errc::InvalidParameter, "prior mean must be finite");
  require(scale_e.dim() == k && scale_mu.dim() == k && scale_b.dim() == k,
          Errc::DimensionMismatch, "prior scale matrices must be K x K");
  require_df(df_e, k, "d_e");
  require_df(df_mu, k, "d_mu");
  require_df(df_b, k, "d_b");
}

std::size_t GibbsConfig::burn_in() const {
  return static_cast<std::size_t>(std::llround(burn_in_fraction * static_cast<double>(iterations)));
}

std::size_t GibbsConfig::retained() const {
  const std::size_t b = burn_in();
  return b >= iterations ? 0 : (iterations - b) / thinning;
}

void GibbsConfig::validate() const {
  require(iterations >= 1, Errc::InvalidParameter, "iterations must be positive");
  require(burn_in_fraction >= 0.0 && burn_in_fraction < 1.0, Errc::InvalidParameter,
          "burn_in_fraction must lie in [0, 1)");
  require(thinning >= 1, Errc::InvalidParameter, "thinning must be at least 1");
}

// ---------------------------------------------------------------- data

MvData::MvData(std::vector<Matrix> blocks, std::vector<std::string> ids)
    : blocks_(std::move(blocks)), ids_(std::move(ids)) {
  require(!blocks_.empty(), Errc::EmptyAthlete, "no athletes in the data");
  require(ids_.empty() || ids_.size() == blocks_.size(), Errc::LengthMismatch,
          "athlete ids and data blocks differ in number");
  k_ = blocks_.front().cols();
  require(k_ >= 1, Errc::DimensionMismatch, "data must have at least one marker");
  for (std::size_t j = 0; j < blocks_.size(); ++j) {
    const Matrix& b = blocks_[j];
    if (!(b.rows() >= 1))
      fail(Errc::EmptyAthlete,
           "athlete " + std::to_string(j) + " has no samples");
    if (!(b.cols() == k_))
      fail(Errc::DimensionMismatch,
           "athlete " + std::to_string(j) + " has " + std::to_string(b.cols()) +
             " markers, expected " + std::to_string(k_));
    require(b.allFinite(), Errc::InvalidParameter, "data must be finite");
    Vector s = b.colwise().sum().transpose();
    const Vector m = s / static_cast<double>(b.rows());
    const Matrix centred = b.rowwise() - m.transpose();
    scatters_.push_back(symmetrize(centred.transpose() * centred));
    sums_.push_back(std::move(s));
    total_ += static_cast<std::size_t>(b.rows());
  }
}

std::optional<std::size_t> MvData::find(const std::string& id) const {
  const auto it = std::find(ids_.begin(), ids_.end(), id);
  if (it == ids_.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ids_.begin());
}

// ---------------------------------------------------------------- sampler

MvModelState gibbs_init(const MvData& data, const MvPriorConfig& prior, Rng& rng) {
  prior.validate();
  const auto k = data.dim();
  if (!(prior.dim() == k))
    fail(Errc::DimensionMismatch,
         "prior has dimension " + std::to_string(prior.dim()) + " but data has " +
           std::to_string(k));
  Matrix mu_j(static_cast<Eigen::Index>(data.athletes()), k);
  for (std::size_t j = 0; j < data.athletes(); ++j)
    mu_j.row(static_cast<Eigen::Index>(j)) = data.mean(j).transpose();
  auto omega_e = sample_wishart(prior.df_e, prior.scale_e, rng);
  auto omega_mu = sample_wishart(prior.df_mu, prior.scale_mu, rng);
  auto omega_b = sample_wishart(prior.df_b, prior.scale_b, rng);
  return {prior.mu0, std::move(mu_j), std::move(omega_e), std::move(omega_mu), std::move(omega_b)};
}

MvModelState gibbs_step(const MvModelState& state, const MvData& data, const MvPriorConfig& prior,
                        Rng& rng) {
  const auto k = data.dim();
  const auto J = static_cast<Eigen::Index>(data.athletes());
  require(state.dim() == k && state.mu_j.rows() == J && state.mu_j.cols() == k,
          Errc::DimensionMismatch, "state does not match the data dimensions");
  const double jd = static_cast<double>(J);
  const Matrix& oe = state.omega_e.matrix();
  const Matrix& ob = state.omega_b.matrix();
  const Matrix& om = state.omega_mu.matrix();

  // mu | mu_j, Omega_mu, Omega_b
  const Vector mu_bar = state.mu_j.colwise().mean().transpose();
  const SpdMatrix a_mu(symmetrize(jd * ob + om), "mu conditional precision");
  const Vector b_mu = om * prior.mu0 + jd * (ob * mu_bar);
  Vector mu = sample_mvn_canonical(a_mu, b_mu, rng);

  // mu_j | mu, Omega_e, Omega_b, y_j ; precision depends on n_j only
  const Vector ob_mu = ob * mu;
  std::unordered_map<std::size_t, SpdMatrix> precision_by_n;
  Matrix mu_j(J, k);
  for (Eigen::Index j = 0; j < J; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const std::size_t n = data.count(jj);
    auto it = precision_by_n.find(n);
    if (it == precision_by_n.end())
      it = precision_by_n
               .emplace(n, SpdMatrix(symmetrize(ob + static_cast<double>(n) * oe),
                                     "mu_j conditional precision"))
               .first;
    const Vector shift = ob_mu + oe * data.sum(jj);
    mu_j.row(j) = sample_mvn_canonical(it->second, shift, rng).transpose();
  }

  // Omega_e | mu_j, y
  Matrix se = prior.scale_e.inverse().matrix();
  for (Eigen::Index j = 0; j < J; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    const Vector d = data.mean(jj) - mu_j.row(j).transpose();
    se += data.scatter(jj) + static_cast<double>(data.count(jj)) * d * d.transpose();
  }
  auto omega_e = sample_wishart_inverse_scale(prior.df_e + static_cast<double>(data.total()),
                                              SpdMatrix(symmetrize(se), "Omega_e conditional"), rng);

  // Omega_mu | mu
  const Vector dm = mu - prior.mu0;
  const Matrix smu = prior.scale_mu.inverse().matrix() + dm * dm.transpose();
  auto omega_mu = sample_wishart_inverse_scale(prior.df_mu + 1.0,
                                               SpdMatrix(symmetrize(smu), "Omega_mu conditional"), rng);

  // Omega_b | mu, mu_j
  const Matrix centred = mu_j.rowwise() - mu.transpose();
  const Matrix sb = prior.scale_b.inverse().matrix() + centred.transpose() * centred;
  auto omega_b = sample_wishart_inverse_scale(prior.df_b + jd,
                                              SpdMatrix(symmetrize(sb), "Omega_b conditional"), rng);

  return {std::move(mu), std::move(mu_j), std::move(omega_e), std::move(omega_mu),
          std::move(omega_b)};
}

namespace {

MvModelState retained_copy(const MvModelState& s, bool keep_means) {
  if (keep_means) return s;
  return {s.mu, Matrix(), s.omega_e, s.omega_mu, s.omega_b};
}

void advance(MvChain& chain, MvModelState state, const MvData& data, const MvPriorConfig& prior,
             Rng& rng, std::size_t steps, std::size_t burn_in) {
  const auto& cfg = chain.config;
  for (std::size_t s = 0; s < steps; ++s) {
    state = gibbs_step(state, data, prior, rng);
    ++chain.iterations_done;
    const std::size_t it = chain.iterations_done;  // 1-based iteration index
    if (it > burn_in && (it - burn_in) % cfg.thinning == 0)
      chain.states.push_back(retained_copy(state, cfg.keep_athlete_means));
  }
  chain.last_state = std::move(state);
  chain.rng_state = rng.serialize();
  chain.diagnostics = chain.states.size() >= 4 ? chain_diagnostics(chain.states)
                                               : std::vector<ScalarDiagnostic>{};
}

}  // namespace

MvChain run_gibbs(const MvData& data, const MvPriorConfig& prior, const GibbsConfig& config,
                  Rng& rng, const MvModelState* start) {
  config.validate();
  prior.validate();
  MvChain chain;
  chain.config = config;
  chain.athlete_ids = data.ids();
  chain.states.reserve(config.retained());
  MvModelState state = start ? *start : gibbs_init(data, prior, rng);
  require(state.dim() == data.dim() &&
              state.mu_j.rows() == static_cast<Eigen::Index>(data.athletes()),
          Errc::DimensionMismatch, "starting state does not match the data");
  advance(chain, std::move(state), data, prior, rng, config.iterations, config.burn_in());
  return chain;
}

MvChain extend_chain(const MvChain& chain, const MvData& data, const MvPriorConfig& prior,
                     std::size_t extra_iterations) {
  require(chain.last_state.has_value() && !chain.rng_state.empty(), Errc::InvalidParameter,
          "chain carries no resumable state");
  MvChain out = chain;
  Rng rng = Rng::deserialize(chain.rng_state);
  out.config.iterations = chain.iterations_done + extra_iterations;
  // burn-in already happened; every further state (after thinning) counts
  advance(out, *chain.last_state, data, prior, rng, extra_iterations, chain.iterations_done);
  return out;
}

Eigen::Index MvChain::dim() const {
  require(!states.empty(), Errc::TooFewSamples, "chain has no retained states");
  return states.front().dim();
}

Vector MvChain::posterior_mean_mu() const {
  Vector acc = Vector::Zero(dim());
  for (const auto& s : states) acc += s.mu;
  return acc / static_cast<double>(states.size());
}

Matrix MvChain::posterior_mean_mu_j() const {
  require(!states.empty() && states.front().has_athlete_means(), Errc::UnknownAthlete,
          "chain does not retain athlete means");
  Matrix acc = Matrix::Zero(states.front().mu_j.rows(), states.front().mu_j.cols());
  for (const auto& s : states) acc += s.mu_j;
  return acc / static_cast<double>(states.size());
}

std::vector<ScalarDiagnostic> chain_diagnostics(const std::vector<MvModelState>& states) {
  std::vector<ScalarDiagnostic> out;
  if (states.empty()) return out;
  const auto k = states.front().dim();
  auto summarize = [&](std::string name, auto&& get) {
    std::vector<double> x(states.size());
    for (std::size_t t = 0; t < states.size(); ++t) x[t] = get(states[t]);
    ScalarDiagnostic d;
    d.name = std::move(name);
    d.mean = mean_of(x);
    d.sd = std::sqrt(variance_of(x));
    d.ess = effective_sample_size(x);
    d.split_rhat = split_rhat(std::span<const double>(x));
    out.push_back(std::move(d));
  };
  for (Eigen::Index a = 0; a < k; ++a)
    summarize("mu[" + std::to_string(a) + "]", [a](const MvModelState& s) { return s.mu(a); });
  const std::pair<const char*, SpdMatrix MvModelState::*> mats[] = {
      {"omega_e", &MvModelState::omega_e},
      {"omega_mu", &MvModelState::omega_mu},
      {"omega_b", &MvModelState::omega_b}};
  for (const auto& [label, member] : mats)
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index b = 0; b <= a; ++b)
        summarize(std::string(label) + "[" + std::to_string(a) + "][" + std::to_string(b) + "]",
                  [=](const MvModelState& s) { return (s.*member).matrix()(a, b); });
  return out;
}

// ---------------------------------------------------------------- serialization
//
// Text records, one state per line: mu (K), lower triangles of Omega_e,
// Omega_mu, Omega_b (row-major), then mu_j (J x K) when present.

namespace {

constexpr const char* kChainMagic = "abp-mvchain";
constexpr int kChainVersion = 1;

void write_lower(std::ostream& out, const Matrix& m) {
  for (Eigen::Index a = 0; a < m.rows(); ++a)
    for (Eigen::Index b = 0; b <= a; ++b) out << ' ' << m(a, b);
}

Matrix read_lower(std::istream& in, Eigen::Index k) {
  Matrix m(k, k);
  for (Eigen::Index a = 0; a < k; ++a)
    for (Eigen::Index b = 0; b <= a; ++b) {
      require(static_cast<bool>(in >> m(a, b)), Errc::FormatError, "truncated chain record");
      m(b, a) = m(a, b);
    }
  return m;
}

void write_state(std::ostream& out, const MvModelState& s) {
  out << (s.has_athlete_means() ? s.mu_j.rows() : 0);
  for (Eigen::Index a = 0; a < s.mu.size(); ++a) out << ' ' << s.mu(a);
  write_lower(out, s.omega_e.matrix());
  write_lower(out, s.omega_mu.matrix());
  write_lower(out, s.omega_b.matrix());
  for (Eigen::Index j = 0; j < s.mu_j.rows(); ++j)
    for (Eigen::Index a = 0; a < s.mu_j.cols(); ++a) out << ' ' << s.mu_j(j, a);
  out << '\n';
}

MvModelState read_state(std::istream& in, Eigen::Index k) {
  Eigen::Index j_count = 0;
  require(static_cast<bool>(in >> j_count) && j_count >= 0, Errc::FormatError,
          "malformed chain record");
  Vector mu(k);
  for (Eigen::Index a = 0; a < k; ++a)
    require(static_cast<bool>(in >> mu(a)), Errc::FormatError, "truncated chain record");
  SpdMatrix oe(read_lower(in, k), "stored Omega_e");
  SpdMatrix om(read_lower(in, k), "stored Omega_mu");
  SpdMatrix ob(read_lower(in, k), "stored Omega_b");
  Matrix mu_j(j_count, k);
  for (Eigen::Index j = 0; j < j_count; ++j)
    for (Eigen::Index a = 0; a < k; ++a)
      require(static_cast<bool>(in >> mu_j(j, a)), Errc::FormatError, "truncated chain record");
  return {std::move(mu), std::move(mu_j), std::move(oe), std::move(om), std::move(ob)};
}

std::string expect_key(std::istream& in, const char* key) {
  std::string word;
  if (!(static_cast<bool>(in >> word) && word == key))
    fail(Errc::FormatError,
         std::string("chain file: expected '") + key + "'");
  std::string rest;
  std::getline(in, rest);
  if (!rest.empty() && rest.front() == ' ') rest.erase(0, 1);
  return rest;
}

}  // namespace

void write_chain(std::ostream& out, const MvChain& chain) {
  const auto k = chain.last_state ? chain.last_state->dim() : chain.dim();
  const auto old_precision = out.precision(17);
  out << kChainMagic << ' ' << kChainVersion << '\n';
  out << "K " << k << '\n';
  out << "markers";
  for (Marker m : chain.markers) out << ' ' << marker_column(m);
  out << '\n';
  out << "athletes";
  for (const auto& id : chain.athlete_ids) out << ' ' << id;
  out << '\n';
  const auto& c = chain.config;
  out << "config " << c.iterations << ' ' << c.burn_in_fraction << ' ' << c.thinning << ' '
      << c.seed << ' ' << (c.keep_athlete_means ? 1 : 0) << '\n';
  out << "iterations_done " << chain.iterations_done << '\n';
  out << "rng " << chain.rng_state << '\n';
  out << "states " << chain.states.size() << '\n';
  for (const auto& s : chain.states) write_state(out, s);
  out << "last " << (chain.last_state ? 1 : 0) << '\n';
  if (chain.last_state) write_state(out, *chain.last_state);
  out.precision(old_precision);
}

MvChain read_chain(std::istream& in) {
  for (std::string skip; (in >> std::ws).peek() == '#';) std::getline(in, skip);
  std::string magic;
  int version = 0;
  require(static_cast<bool>(in >> magic >> version) && magic == kChainMagic, Errc::FormatError,
          "not a chain file");
  if (!(version == kChainVersion))
    fail(Errc::FormatError,
         "unsupported chain file version " + std::to_string(version));
  MvChain chain;
  const Eigen::Index k = std::stol(expect_key(in, "K"));
  require(k >= 1, Errc::FormatError, "chain file: K must be positive");
  {
    std::istringstream ss(expect_key(in, "markers"));
    std::string name;
    while (ss >> name) {
      const auto m = parse_marker(name);
      if (!(m.has_value())) fail(Errc::FormatError, "chain file: unknown marker " + name);
      chain.markers.push_back(*m);
    }
  }
  {
    std::istringstream ss(expect_key(in, "athletes"));
    std::string id;
    while (ss >> id) chain.athlete_ids.push_back(id);
  }
  {
    std::istringstream ss(expect_key(in, "config"));
    int keep = 1;
    auto& c = chain.config;
    require(static_cast<bool>(ss >> c.iterations >> c.burn_in_fraction >> c.thinning >> c.seed >> keep),
            Errc::FormatError, "chain file: malformed config line");
    c.keep_athlete_means = keep != 0;
  }
  chain.iterations_done = std::stoull(expect_key(in, "iterations_done"));
  chain.rng_state = expect_key(in, "rng");
  const std::size_t n_states = std::stoull(expect_key(in, "states"));
  chain.states.reserve(n_states);
  for (std::size_t t = 0; t < n_states; ++t) chain.states.push_back(read_state(in, k));
  if (std::stoi(expect_key(in, "last")) != 0) chain.last_state = read_state(in, k);
  if (chain.states.size() >= 4) chain.diagnostics = chain_diagnostics(chain.states);
  return chain;
}

// ---------------------------------------------------------------- predictive

Eigen::Index PredictiveSet::dim() const {
  require(!means.empty(), Errc::TooFewSamples, "predictive set is empty");
  return means.front().size();
}

PredictiveSet athlete_predictive(const MvChain& chain, std::size_t athlete_index) {
  require(!chain.states.empty(), Errc::TooFewSamples, "chain has no retained states");
  const auto& first = chain.states.front();
  require(first.has_athlete_means(), Errc::UnknownAthlete,
          "chain does not retain athlete means");
  if (!(athlete_index < static_cast<std::size_t>(first.mu_j.rows())))
    fail(Errc::UnknownAthlete,
         "athlete index " + std::to_string(athlete_index) + " is not part of the fit");
  PredictiveSet set;
  set.means.reserve(chain.size());
  set.omega_e.reserve(chain.size());
  const auto j = static_cast<Eigen::Index>(athlete_index);
  for (const auto& s : chain.states) {
    set.means.push_back(s.mu_j.row(j).transpose());
    set.omega_e.push_back(s.omega_e);
  }
  return set;
}

PredictiveDensity::PredictiveDensity(const PredictiveSet& set) : k_(set.dim()) {
  require(set.size() > 0, Errc::TooFewSamples, "predictive set is empty");
  const auto k = static_cast<std::size_t>(k_);
  means_.reserve(set.size() * k);
  factors_.reserve(set.size() * k * k);
  log_norm_.reserve(set.size());
  const double base = -0.5 * static_cast<double>(k) * std::log(2.0 * std::numbers::pi);
  for (std::size_t t = 0; t < set.size(); ++t) {
    require(set.means[t].size() == k_ && set.omega_e[t].dim() == k_, Errc::DimensionMismatch,
            "predictive set states differ in dimension");
    means_.insert(means_.end(), set.means[t].data(), set.means[t].data() + k);
    const Matrix& l = set.omega_e[t].factor();
    factors_.insert(factors_.end(), l.data(), l.data() + k * k);
    log_norm_.push_back(base + 0.5 * set.omega_e[t].log_det());
  }
}

double PredictiveDensity::log_density(const Vector& y) const {
  require(y.size() == k_, Errc::DimensionMismatch, "observation dimension mismatch");
  const auto k = static_cast<std::size_t>(k_);
  const std::size_t states = log_norm_.size();
  std::array<double, kMarkerCount> d{};
  std::vector<double> heap;
  double* diff = d.data();
  if (k > d.size()) {
    heap.resize(k);
    diff = heap.data();
  }
  // streaming log-sum-exp over states
  double top = -std::numeric_limits<double>::infinity();
  double acc = 0.0;
  for (std::size_t t = 0; t < states; ++t) {
    const double* m = means_.data() + t * k;
    const double* l = factors_.data() + t * k * k;
    for (std::size_t i = 0; i < k; ++i) diff[i] = y(static_cast<Eigen::Index>(i)) - m[i];
    double q = 0.0;
    for (std::size_t j = 0; j < k; ++j) {  // r = L^T diff
      const double* col = l + j * k;
      double r = 0.0;
      for (std::size_t i = j; i < k; ++i) r += col[i] * diff[i];
      q += r * r;
    }
    const double v = log_norm_[t] - 0.5 * q;
    if (v > top) {
      acc = acc * std::exp(top - v) + 1.0;
      top = v;
    } else {
      acc += std::exp(v - top);
    }
  }
  if (!std::isfinite(top)) return top;
  return top + std::log(acc / static_cast<double>(states));
}

double predictive_log_density_mv(const PredictiveSet& set, const Vector& y) {
  return PredictiveDensity(set).log_density(y);
}

double predictive_density_mv(const MvChain& chain, std::size_t athlete_index, const Vector& y) {
  return std::exp(predictive_log_density_mv(athlete_predictive(chain, athlete_index), y));
}

Matrix predictive_replicates(const PredictiveSet& set, std::size_t n_rep, Rng& rng) {
  const auto k = set.dim();
  Matrix reps(static_cast<Eigen::Index>(n_rep), k);
  for (std::size_t i = 0; i < n_rep; ++i) {
    const std::size_t t = i % set.size();
    reps.row(static_cast<Eigen::Index>(i)) = sample_mvn(set.means[t], set.omega_e[t], rng).transpose();
  }
  return reps;
}

Matrix predictive_replicates(const MvChain& chain, std::size_t athlete_index, std::size_t n_rep,
                             Rng& rng) {
  return predictive_replicates(athlete_predictive(chain, athlete_index), n_rep, rng);
}

std::vector<Interval> marginal_hpds(const Matrix& replicates, double alpha_level) {
  if (!(static_cast<std::size_t>(replicates.rows()) >= kMinReplicates))
    fail(Errc::TooFewSamples,
         "marginal HPDs need at least " + std::to_string(kMinReplicates) + " replicates");
  std::vector<Interval> out;
  out.reserve(static_cast<std::size_t>(replicates.cols()));
  std::vector<double> col(static_cast<std::size_t>(replicates.rows()));
  for (Eigen::Index a = 0; a < replicates.cols(); ++a) {
    for (Eigen::Index i = 0; i < replicates.rows(); ++i) col[static_cast<std::size_t>(i)] = replicates(i, a);
    std::sort(col.begin(), col.end());
    out.push_back(hpd_interval(col, alpha_level));
  }
  return out;
}

JointRegion joint_hpd_region(const PredictiveSet& set, const Matrix& replicates, double alpha_level) {
  if (!(static_cast<std::size_t>(replicates.rows()) >= kMinHpdSamples))
    fail(Errc::TooFewSamples,
         "joint region needs at least " + std::to_string(kMinHpdSamples) + " replicates");
  auto density = std::make_shared<const PredictiveDensity>(set);
  std::vector<double> logs(static_cast<std::size_t>(replicates.rows()));
  for (Eigen::Index i = 0; i < replicates.rows(); ++i)
    logs[static_cast<std::size_t>(i)] = density->log_density(replicates.row(i).transpose());
  JointRegion region;
  region.log_gamma = density_threshold(logs, alpha_level);
  region.log_density = [density](const Vector& y) { return density->log_density(y); };
  return region;
}

JointRegion joint_hpd_region(const MvChain& chain, std::size_t athlete_index,
                             const Matrix& replicates, double alpha_level) {
  return joint_hpd_region(athlete_predictive(chain, athlete_index), replicates, alpha_level);
}

// ---------------------------------------------------------------- new athletes

ConditionalPredictive::ConditionalPredictive(const MvChain& population) {
  require(!population.states.empty(), Errc::TooFewSamples, "population chain is empty");
  k_ = population.dim();
  cache_.reserve(population.size());
  omega_e_.reserve(population.size());
  for (const auto& s : population.states) {
    const Matrix& l = s.omega_e.factor();
    const auto lower = l.triangularView<Eigen::Lower>();
    const Matrix x = lower.solve(s.omega_b.matrix());          // L^-1 Omega_b
    const Matrix m = lower.solve(Matrix(x.transpose()));       // L^-1 Omega_b L^-T
    Eigen::SelfAdjointEigenSolver<Matrix> eig(symmetrize(m));
    require(eig.info() == Eigen::Success, Errc::NotPositiveDefinite,
            "eigendecomposition of the between/within precision pair failed");
    const Matrix& q = eig.eigenvectors();
    StateCache c;
    c.lambda = eig.eigenvalues().cwiseMax(0.0);
    c.g = l.transpose().triangularView<Eigen::Upper>().solve(q);
    c.h = q.transpose() * l.transpose();
    c.c = c.h * s.mu;
    cache_.push_back(std::move(c));
    omega_e_.push_back(s.omega_e);
  }
}

PredictiveSet ConditionalPredictive::draw(const Matrix& history, Rng& rng) const {
  if (!(history.rows() == 0 || history.cols() == k_))
    fail(Errc::DimensionMismatch,
         "history has " + std::to_string(history.cols()) + " markers, expected " +
           std::to_string(k_));
  const double n = static_cast<double>(history.rows());
  const Vector s = history.rows() > 0 ? Vector(history.colwise().sum().transpose()) : Vector::Zero(k_);
  PredictiveSet set;
  set.means.reserve(cache_.size());
  set.omega_e = omega_e_;
  Vector v(k_);
  for (const auto& c : cache_) {
    const Vector hs = c.h * s;
    for (Eigen::Index a = 0; a < k_; ++a) {
      const double d = c.lambda(a) + n;
      require(d > 0.0, Errc::NotPositiveDefinite, "athlete mean conditional precision is singular");
      v(a) = (c.lambda(a) * c.c(a) + hs(a)) / d + rng.normal() / std::sqrt(d);
    }
    set.means.push_back(c.g * v);
  }
  return set;
}

PredictiveSet refit_with_athlete(const MvData& population, const Matrix& history,
                                 const MvPriorConfig& prior, const GibbsConfig& config,
                                 const MvChain* warm_start, Rng& rng) {
  if (history.rows() == 0) {
    GibbsConfig cfg = config;
    cfg.keep_athlete_means = false;
    const MvChain chain = run_gibbs(population, prior, cfg, rng);
    return ConditionalPredictive(chain).draw(history, rng);
  }
  std::vector<Matrix> blocks;
  blocks.reserve(population.athletes() + 1);
  for (std::size_t j = 0; j < population.athletes(); ++j) blocks.push_back(population.block(j));
  blocks.push_back(history);
  const MvData data(std::move(blocks));
  const auto j_new = data.athletes() - 1;

  std::optional<MvModelState> start;
  if (warm_start != nullptr && !warm_start->states.empty()) {
    const auto& states = warm_start->states;
    const double t = static_cast<double>(states.size());
    Matrix se = Matrix::Zero(data.dim(), data.dim());
    Matrix sm = se;
    Matrix sb = se;
    for (const auto& s : states) {
      se += s.omega_e.matrix();
      sm += s.omega_mu.matrix();
      sb += s.omega_b.matrix();
    }
    Matrix mu_j(static_cast<Eigen::Index>(data.athletes()), data.dim());
    const bool have_means = states.front().has_athlete_means() &&
                            states.front().mu_j.rows() == static_cast<Eigen::Index>(population.athletes());
    const Matrix prev = have_means ? warm_start->posterior_mean_mu_j() : Matrix();
    for (std::size_t j = 0; j < data.athletes(); ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      mu_j.row(jj) = (have_means && j < j_new) ? Vector(prev.row(jj).transpose()).transpose()
                                               : data.mean(j).transpose();
    }
    start = MvModelState{warm_start->posterior_mean_mu(), std::move(mu_j),
                         SpdMatrix(symmetrize(se / t), "warm-start Omega_e"),
                         SpdMatrix(symmetrize(sm / t), "warm-start Omega_mu"),
                         SpdMatrix(symmetrize(sb / t), "warm-start Omega_b")};
  }
  GibbsConfig cfg = config;
  cfg.keep_athlete_means = true;
  const MvChain chain = run_gibbs(data, prior, cfg, rng, start ? &*start : nullptr);
  return athlete_predictive(chain, j_new);
}

}  // namespace abp
