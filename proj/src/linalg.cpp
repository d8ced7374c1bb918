#include "abp/linalg.hpp"

#include <cmath>
#include <numbers>

#include "abp/error.hpp"

namespace abp {
namespace {

void check_square(const Matrix& m, const std::string& what) {
  if (!(m.rows() == m.cols() && m.rows() > 0))
    fail(Errc::DimensionMismatch,
         what + " must be a non-empty square matrix");
}

/// Lower-triangular Bartlett factor for Wishart(df, I_k).
Matrix bartlett_factor(double df, Eigen::Index k, Rng& rng) {
  Matrix b = Matrix::Zero(k, k);
  for (Eigen::Index i = 0; i < k; ++i) {
    b(i, i) = std::sqrt(rng.chi_squared(df - static_cast<double>(i)));
    for (Eigen::Index j = 0; j < i; ++j) b(i, j) = rng.normal();
  }
  return b;
}

void check_df(double df, Eigen::Index k) {
  if (!(df > static_cast<double>(k) - 1.0))
    fail(Errc::DegreesOfFreedomTooSmall,
         "Wishart degrees of freedom " + std::to_string(df) + " must exceed K-1 = " +
           std::to_string(k - 1));
}

}  // namespace

Matrix cholesky(const Matrix& m, const std::string& context) {
  check_square(m, context.empty() ? "matrix" : context);
  const Eigen::Index n = m.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = m(j, j);
    for (Eigen::Index k = 0; k < j; ++k) d -= l(j, k) * l(j, k);
    if (!(d > 0.0) || !std::isfinite(d)) throw NotPositiveDefiniteError(static_cast<std::size_t>(j + 1), context);
    const double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double s = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) s -= l(i, k) * l(j, k);
      l(i, j) = s / ljj;
    }
  }
  return l;
}

SpdMatrix::SpdMatrix(const Matrix& m, const std::string& context) {
  check_square(m, context.empty() ? "SPD matrix" : context);
  const double scale = std::max(m.cwiseAbs().maxCoeff(), 1e-300);
  const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
  if (!(asym <= 1e-10 * scale))
    fail(Errc::NotSymmetric,
         (context.empty() ? std::string("matrix") : context) + " is not symmetric");
  m_ = 0.5 * (m + m.transpose());
  l_ = cholesky(m_, context);
}

SpdMatrix SpdMatrix::from_factor(const Matrix& lower) {
  check_square(lower, "Cholesky factor");
  SpdMatrix out;
  out.l_ = lower.triangularView<Eigen::Lower>();
  for (Eigen::Index i = 0; i < lower.rows(); ++i)
    if (!(out.l_(i, i) > 0.0)) throw NotPositiveDefiniteError(static_cast<std::size_t>(i + 1), "factor");
  out.m_ = out.l_ * out.l_.transpose();
  out.m_ = 0.5 * (out.m_ + out.m_.transpose()).eval();
  return out;
}

SpdMatrix SpdMatrix::identity(Eigen::Index k, double scale) {
  require(scale > 0.0, Errc::InvalidParameter, "identity scale must be positive");
  SpdMatrix out;
  out.m_ = Matrix::Identity(k, k) * scale;
  out.l_ = Matrix::Identity(k, k) * std::sqrt(scale);
  return out;
}

double SpdMatrix::log_det() const noexcept {
  return 2.0 * l_.diagonal().array().log().sum();
}

Vector SpdMatrix::solve(const Vector& b) const {
  require(b.size() == dim(), Errc::DimensionMismatch, "solve: vector length differs from matrix order");
  Vector y = l_.triangularView<Eigen::Lower>().solve(b);
  return l_.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix SpdMatrix::solve(const Matrix& b) const {
  require(b.rows() == dim(), Errc::DimensionMismatch, "solve: row count differs from matrix order");
  Matrix y = l_.triangularView<Eigen::Lower>().solve(b);
  return l_.transpose().triangularView<Eigen::Upper>().solve(y);
}

SpdMatrix SpdMatrix::inverse() const {
  Matrix inv = solve(Matrix(Matrix::Identity(dim(), dim())));
  return SpdMatrix(0.5 * (inv + inv.transpose()), "inverse");
}

Vector sample_mvn(const Vector& mean, const SpdMatrix& precision, Rng& rng) {
  if (!(mean.size() == precision.dim()))
    fail(Errc::DimensionMismatch,
         "mean has dimension " + std::to_string(mean.size()) + " but precision is " +
           std::to_string(precision.dim()) + "x" + std::to_string(precision.dim()));
  Vector z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = rng.normal();
  // Cov = (L L^T)^-1 = L^-T L^-1, so x = L^-T z has the right covariance.
  return mean + precision.factor().transpose().triangularView<Eigen::Upper>().solve(z);
}

Vector sample_mvn_canonical(const SpdMatrix& precision, const Vector& shift, Rng& rng) {
  require(shift.size() == precision.dim(), Errc::DimensionMismatch,
          "canonical shift dimension differs from precision order");
  const auto& l = precision.factor();
  Vector w = l.triangularView<Eigen::Lower>().solve(shift);
  for (Eigen::Index i = 0; i < w.size(); ++i) w[i] += rng.normal();
  return l.transpose().triangularView<Eigen::Upper>().solve(w);
}

SpdMatrix sample_wishart(double df, const SpdMatrix& scale, Rng& rng) {
  const Eigen::Index k = scale.dim();
  check_df(df, k);
  const Matrix b = bartlett_factor(df, k, rng);
  // (L_S B)(L_S B)^T with both factors lower triangular: L_S B is the Cholesky factor.
  return SpdMatrix::from_factor(scale.factor() * b);
}

SpdMatrix sample_wishart_inverse_scale(double df, const SpdMatrix& inv_scale, Rng& rng) {
  const Eigen::Index k = inv_scale.dim();
  check_df(df, k);
  const Matrix b = bartlett_factor(df, k, rng);
  // scale = L^-T L^-1 for inv_scale = L L^T; W = (L^-T B)(L^-T B)^T.
  const Matrix c = inv_scale.factor().transpose().triangularView<Eigen::Upper>().solve(b);
  Matrix w = c * c.transpose();
  return SpdMatrix(0.5 * (w + w.transpose()), "Wishart draw");
}

double mvn_log_density(const Vector& y, const Vector& mean, const SpdMatrix& precision) {
  require(y.size() == precision.dim() && mean.size() == precision.dim(), Errc::DimensionMismatch,
          "density argument dimension differs from precision order");
  const Vector r = precision.factor().transpose() * (y - mean);
  const double k = static_cast<double>(y.size());
  return -0.5 * k * std::log(2.0 * std::numbers::pi) + 0.5 * precision.log_det() - 0.5 * r.squaredNorm();
}

}  // namespace abp
