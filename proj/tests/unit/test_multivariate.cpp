#include <cmath>
#include <sstream>

#include "doctest.h"
#include "frozen_values.hpp"

#include "abp/diagnostics.hpp"
#include "abp/error.hpp"
#include "abp/multivariate.hpp"
#include "abp/synthetic_cohort.hpp"
#include "abp/univariate.hpp"

using namespace abp;

namespace {

Matrix one_by_one(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return m;
}

MvModelState scalar_state(double mu, double mu_j, double oe, double omu, double ob) {
  Vector m(1);
  m(0) = mu;
  return {m, one_by_one(mu_j), SpdMatrix(one_by_one(oe)), SpdMatrix(one_by_one(omu)),
          SpdMatrix(one_by_one(ob))};
}

// One-state chain whose athlete 0 has mean `mean` and within precision `omega_e`.
MvChain single_state_chain(const Vector& mean, const Matrix& omega_e) {
  const auto k = mean.size();
  MvChain c;
  c.states.push_back({Vector::Zero(k), mean.transpose(), SpdMatrix(omega_e), SpdMatrix::identity(k),
                      SpdMatrix::identity(k)});
  return c;
}

MvData small_data(std::uint64_t seed, Eigen::Index k = 2, std::size_t j = 8, std::size_t n = 5) {
  Rng rng(seed);
  std::vector<std::size_t> counts(j, n);
  const Vector mu = Vector::LinSpaced(k, 1.0, 2.0);
  return MvData(simulate_hierarchical(mu, 0.2 * Matrix::Identity(k, k), 0.05 * Matrix::Identity(k, k),
                                      counts, rng));
}

}  // namespace

TEST_SUITE("multivariate") {
  TEST_CASE("data validation") {
    CHECK_THROWS_AS(MvData({}), Error);
    std::vector<Matrix> blocks{Matrix::Zero(2, 2), Matrix::Zero(2, 3)};
    try {
      MvData d(blocks);
      FAIL("expected DimensionMismatch");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::DimensionMismatch);
    }
    std::vector<Matrix> empty{Matrix::Zero(0, 2)};
    try {
      MvData d(empty);
      FAIL("expected EmptyAthlete");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::EmptyAthlete);
    }
  }

  TEST_CASE("init: one sample gives that sample as athlete mean; precisions are SPD") {
    const MvData data({one_by_one(2.5)});
    const auto prior = MvPriorConfig::defaults(Vector::Zero(1));
    Rng a(1), b(1);
    const auto s = gibbs_init(data, prior, a);
    CHECK(s.mu_j(0, 0) == 2.5);
    CHECK_NOTHROW((void)cholesky(s.omega_e.matrix()));
    CHECK_NOTHROW((void)cholesky(s.omega_mu.matrix()));
    CHECK_NOTHROW((void)cholesky(s.omega_b.matrix()));
    const auto t = gibbs_init(data, prior, b);
    CHECK(t.omega_e.matrix() == s.omega_e.matrix());
    CHECK(t.omega_b.matrix() == s.omega_b.matrix());
  }

  TEST_CASE("prior validation: df must exceed K - 1") {
    auto prior = MvPriorConfig::defaults(Vector::Zero(3));
    prior.df_b = 1.5;
    try {
      prior.validate();
      FAIL("expected DegreesOfFreedomTooSmall");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::DegreesOfFreedomTooSmall);
    }
  }

  TEST_CASE("K=1 athlete-mean conditional matches the scalar precision-weighted mean") {
    // Omega_mu is huge, so the freshly drawn mu equals mu0 to ~1e-6 and the
    // mu_j conditional can be checked against the scalar formula.
    Matrix y(4, 1);
    y << 1.0, 1.4, 0.8, 1.2;
    const MvData data({y});
    const double mu0 = 0.5, oe = 3.0, ob = 2.0;
    auto prior = MvPriorConfig::defaults(Vector::Constant(1, mu0));
    const auto state = scalar_state(mu0, 0.0, oe, 1e12, ob);
    const double prec = ob + 4.0 * oe;
    const double mean = (ob * mu0 + oe * y.sum()) / prec;
    Rng rng(31);
    std::vector<double> draws;
    for (int i = 0; i < 20000; ++i) draws.push_back(gibbs_step(state, data, prior, rng).mu_j(0, 0));
    const double se = std::sqrt(1.0 / prec / draws.size());
    CHECK(std::abs(mean_of(draws) - mean) < 4.0 * se);
    CHECK(std::abs(variance_of(draws) * prec - 1.0) < 0.05);
  }

  TEST_CASE("shrinkage limit: huge Omega_b pins athlete means to mu") {
    Matrix y(3, 1);
    y << 4.0, 4.2, 3.8;
    const MvData data({y});
    const auto prior = MvPriorConfig::defaults(Vector::Constant(1, 1.0));
    const auto state = scalar_state(1.0, 0.0, 1.0, 1e12, 1e8);
    Rng rng(32);
    std::vector<double> diff;
    for (int i = 0; i < 10000; ++i) {
      const auto s = gibbs_step(state, data, prior, rng);
      diff.push_back(s.mu_j(0, 0) - s.mu(0));
    }
    CHECK(std::abs(mean_of(diff)) < 0.01);
  }

  TEST_CASE("Omega_mu scale reduces to S_mu when mu sits at mu0") {
    // with mu pinned at mu0 the Omega_mu conditional is Wishart(df + 1, S_mu)
    const MvData data({one_by_one(0.0)});
    auto prior = MvPriorConfig::uniform(Vector::Zero(1), 2.0, 3.0);
    const auto state = scalar_state(0.0, 0.0, 1.0, 1e12, 1.0);
    Rng rng(33);
    std::vector<double> w;
    for (int i = 0; i < 100000; ++i) w.push_back(gibbs_step(state, data, prior, rng).omega_mu.matrix()(0, 0));
    CHECK(mean_of(w) == doctest::Approx((3.0 + 1.0) * 2.0).epsilon(0.01));
  }

  TEST_CASE("run_gibbs keeps the post-burn-in states and is deterministic") {
    const auto data = small_data(34);
    const auto prior = MvPriorConfig::defaults(Vector::Constant(2, 1.5));
    GibbsConfig cfg;
    Rng a(35), b(35);
    const auto c1 = run_gibbs(data, prior, cfg, a);
    const auto c2 = run_gibbs(data, prior, cfg, b);
    CHECK(c1.states.size() == 2000);
    CHECK(c1.iterations_done == 3000);
    CHECK(c1.states.back().mu == c2.states.back().mu);
    CHECK(c1.states[1234].omega_b.matrix() == c2.states[1234].omega_b.matrix());
  }

  TEST_CASE("serialization round-trips and extension is deterministic") {
    const auto data = small_data(36);
    const auto prior = MvPriorConfig::defaults(Vector::Constant(2, 1.5));
    GibbsConfig cfg;
    cfg.iterations = 300;
    Rng rng(37);
    auto chain = run_gibbs(data, prior, cfg, rng);
    chain.markers = {Marker::T, Marker::E};
    std::stringstream ss;
    write_chain(ss, chain);
    const std::string text = ss.str();
    const auto back = read_chain(ss);
    std::ostringstream again;
    write_chain(again, back);
    CHECK(again.str() == text);
    CHECK(back.markers == chain.markers);
    REQUIRE(back.states.size() == chain.states.size());
    CHECK(back.states[7].omega_e.matrix() == chain.states[7].omega_e.matrix());

    const auto e1 = extend_chain(chain, data, prior, 150);
    const auto e2 = extend_chain(back, data, prior, 150);
    CHECK(e1.states.size() == chain.states.size() + 150);
    CHECK(e1.iterations_done == 450);
    std::ostringstream s1, s2;
    write_chain(s1, e1);
    write_chain(s2, e2);
    CHECK(s1.str() == s2.str());
  }

  TEST_CASE("extending in two steps equals one longer run") {
    const auto data = small_data(38);
    const auto prior = MvPriorConfig::defaults(Vector::Constant(2, 1.5));
    GibbsConfig cfg;
    cfg.iterations = 300;
    cfg.burn_in_fraction = 0.0;
    Rng a(39), b(39);
    const auto short_run = run_gibbs(data, prior, cfg, a);
    cfg.iterations = 400;
    const auto long_run = run_gibbs(data, prior, cfg, b);
    const auto extended = extend_chain(short_run, data, prior, 100);
    REQUIRE(extended.states.size() == long_run.states.size());
    CHECK(extended.states.back().mu == long_run.states.back().mu);
  }

  TEST_CASE("predictive density closed forms") {
    const auto c1 = single_state_chain(Vector::Zero(1), Matrix::Identity(1, 1));
    CHECK(predictive_density_mv(c1, 0, Vector::Zero(1)) == doctest::Approx(oracle::npdf_0).epsilon(1e-14));
    const auto c2 = single_state_chain(Vector::Zero(2), Matrix::Identity(2, 2));
    CHECK(predictive_density_mv(c2, 0, Vector::Zero(2)) == doctest::Approx(oracle::bvn_pdf_0).epsilon(1e-14));
    CHECK_THROWS_AS((void)predictive_density_mv(c2, 3, Vector::Zero(2)), Error);
  }

  TEST_CASE("K=2 predictive density integrates to one") {
    Matrix oe(2, 2);
    oe << 2.0, 0.6, 0.6, 1.0;
    const auto c = single_state_chain(Vector::Zero(2), oe);
    constexpr double h = 0.05;
    double s = 0.0;
    for (double x = -6.0; x <= 6.0; x += h)
      for (double y = -6.0; y <= 6.0; y += h) {
        Vector v(2);
        v << x, y;
        s += predictive_density_mv(c, 0, v);
      }
    CHECK(std::abs(s * h * h - 1.0) < 0.02);
  }

  TEST_CASE("replicates: mean converges to the posterior mean of mu_j; seeded") {
    const auto data = small_data(40);
    const auto prior = MvPriorConfig::defaults(Vector::Constant(2, 1.5));
    Rng rng(41);
    const auto chain = run_gibbs(data, prior, GibbsConfig{}, rng);
    Rng a(42), b(42);
    const Matrix r = predictive_replicates(chain, 3, 20000, a);
    CHECK(r == predictive_replicates(chain, 3, 20000, b));
    const Vector target = chain.posterior_mean_mu_j().row(3).transpose();
    for (Eigen::Index k = 0; k < 2; ++k) {
      const auto col = r.col(k);
      const double m = col.mean();
      const double sd = std::sqrt((col.array() - m).square().sum() / (col.size() - 1));
      CHECK(std::abs(m - target(k)) < 4.0 * sd / std::sqrt(static_cast<double>(col.size())));
    }
  }

  TEST_CASE("K=1 replicates agree with the univariate predictive hpd") {
    Rng rng(43);
    const auto draws = sample_posterior({0.0, 2.0, 10.0, 1.0}, 5000, rng);
    PredictiveSet set;
    for (const auto& d : draws) {
      set.means.push_back(Vector::Constant(1, d.mu));
      set.omega_e.push_back(SpdMatrix(one_by_one(d.tau)));
    }
    Rng a(44), b(45);
    const auto uv = predictive_hpd(draws, 0.05, a);
    const auto mv = marginal_hpds(predictive_replicates(set, 5000, b), 0.05)[0];
    CHECK(std::abs(uv.lo - mv.lo) < 0.05 * uv.width());
    CHECK(std::abs(uv.hi - mv.hi) < 0.05 * uv.width());
  }

  TEST_CASE("marginal hpds") {
    Rng rng(46);
    Matrix r(200000, 2);
    for (Eigen::Index i = 0; i < r.rows(); ++i) {
      r(i, 0) = rng.normal();
      r(i, 1) = rng.normal();
    }
    const auto iv = marginal_hpds(r, 0.05);
    for (const auto& v : iv) {
      CHECK(std::abs(v.lo + oracle::z_975) < 0.05);
      CHECK(std::abs(v.hi - oracle::z_975) < 0.05);
    }
    Matrix same(r.rows(), 2);
    same.col(0) = r.col(0);
    same.col(1) = r.col(0);
    const auto s = marginal_hpds(same, 0.05);
    CHECK(s[0].lo == s[1].lo);
    CHECK(s[0].hi == s[1].hi);
    const auto wide = marginal_hpds(r, 0.01);
    CHECK(wide[0].width() >= iv[0].width());
  }

  TEST_CASE("joint region contains the athlete's posterior mean") {
    const auto data = small_data(47, 3);
    const auto prior = MvPriorConfig::defaults(Vector::Constant(3, 1.5));
    Rng rng(48);
    const auto chain = run_gibbs(data, prior, GibbsConfig{}, rng);
    const Matrix r = predictive_replicates(chain, 0, 4000, rng);
    const auto region = joint_hpd_region(chain, 0, r, 0.05);
    CHECK(region.contains(chain.posterior_mean_mu_j().row(0).transpose()));
    Vector far = chain.posterior_mean_mu_j().row(0).transpose();
    far(0) += 5.0;
    CHECK_FALSE(region.contains(far));
  }

  TEST_CASE("conditional predictive matches the direct conditional for one state") {
    Matrix oe(2, 2), ob(2, 2);
    oe << 4.0, 1.0, 1.0, 3.0;
    ob << 2.0, -0.5, -0.5, 1.0;
    Vector mu(2);
    mu << 1.0, -1.0;
    MvChain pop;
    pop.states.push_back({mu, Matrix(), SpdMatrix(oe), SpdMatrix::identity(2), SpdMatrix(ob)});
    pop.config.keep_athlete_means = false;
    const ConditionalPredictive engine(pop);
    Matrix hist(3, 2);
    hist << 1.5, 0.0, 2.0, -0.5, 1.0, 0.5;
    // direct oracle: A = Ob + n Oe, mean = A^-1 (Ob mu + Oe sum y)
    const Matrix a = ob + 3.0 * oe;
    const Vector mean = a.ldlt().solve(ob * mu + oe * hist.colwise().sum().transpose());
    const Matrix cov = a.inverse();
    Rng rng(49);
    Vector s = Vector::Zero(2);
    Matrix ss = Matrix::Zero(2, 2);
    constexpr int n = 100000;
    for (int i = 0; i < n; ++i) {
      const Vector d = engine.draw(hist, rng).means[0] - mean;
      s += d;
      ss += d * d.transpose();
    }
    s /= n;
    ss /= n;
    CHECK(std::abs(s(0)) < 4.0 * std::sqrt(cov(0, 0) / n));
    CHECK(std::abs(s(1)) < 4.0 * std::sqrt(cov(1, 1) / n));
    CHECK((ss - cov).cwiseAbs().maxCoeff() < 0.03 * cov.cwiseAbs().maxCoeff());
  }
}
