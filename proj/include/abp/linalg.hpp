#pragma once

// Dense SPD algebra and the Gaussian / Wishart samplers built on it.

#include <string>

#include <Eigen/Dense>

#include "abp/rng.hpp"

namespace abp {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Lower Cholesky factor L with L * L^T = m. Only the lower triangle of `m`
/// is read. Throws NotPositiveDefiniteError naming the failing minor order.
Matrix cholesky(const Matrix& m, const std::string& context = {});

/// Symmetric positive-definite matrix with its Cholesky factor cached.
class SpdMatrix {
 public:
  /// Validates symmetry (1e-10 relative) and positive definiteness.
  explicit SpdMatrix(const Matrix& m, const std::string& context = {});

  /// Builds L * L^T from a lower-triangular factor with positive diagonal.
  static SpdMatrix from_factor(const Matrix& lower);
  static SpdMatrix identity(Eigen::Index k, double scale = 1.0);

  [[nodiscard]] Eigen::Index dim() const noexcept { return m_.rows(); }
  [[nodiscard]] const Matrix& matrix() const noexcept { return m_; }
  [[nodiscard]] const Matrix& factor() const noexcept { return l_; }
  [[nodiscard]] double log_det() const noexcept;
  /// Solves m * x = b through the cached factor.
  [[nodiscard]] Vector solve(const Vector& b) const;
  [[nodiscard]] Matrix solve(const Matrix& b) const;
  /// Explicit inverse; used for reporting and prior scale conversion only.
  [[nodiscard]] SpdMatrix inverse() const;

 private:
  SpdMatrix() = default;
  Matrix m_;
  Matrix l_;
};

/// Draw from N(mean, precision^-1) using L^-T z; no explicit inverse.
Vector sample_mvn(const Vector& mean, const SpdMatrix& precision, Rng& rng);

/// Draw from N(A^-1 b, A^-1) given the precision A and its "canonical" shift b.
Vector sample_mvn_canonical(const SpdMatrix& precision, const Vector& shift, Rng& rng);

/// Wishart(df, scale) via the Bartlett decomposition; E[W] = df * scale.
SpdMatrix sample_wishart(double df, const SpdMatrix& scale, Rng& rng);

/// Wishart(df, inv_scale^-1) without forming the inverse scale.
SpdMatrix sample_wishart_inverse_scale(double df, const SpdMatrix& inv_scale, Rng& rng);

/// Log density of N(mean, precision^-1) at y.
double mvn_log_density(const Vector& y, const Vector& mean, const SpdMatrix& precision);

}  // namespace abp
