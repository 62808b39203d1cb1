#pragma once

#include <cmath>

#include <Eigen/Dense>

#include "hsgp/errors.hpp"

namespace hsgp {

/// Number of free coordinates of a D x D correlation matrix.
[[nodiscard]] constexpr int corr_free_size(int D) noexcept { return D * (D - 1) / 2; }

namespace detail {

// log(1 - tanh(y)^2) without cancellation for large |y|.
inline double log1m_tanh_sq(double y) noexcept {
  const double a = std::abs(y);
  return -2.0 * (a + std::log1p(std::exp(-2.0 * a)) - std::log(2.0));
}

}  // namespace detail

struct CorrCholesky {
  Eigen::MatrixXd factor;  // lower triangular, unit row norms
  double log_jacobian = 0.0;
};

/// Maps R^{D(D-1)/2} onto Cholesky factors of correlation matrices via
/// tanh-transformed canonical partial correlations, filled row by row.
/// The log-Jacobian covers y -> strictly-lower entries of the factor.
[[nodiscard]] inline CorrCholesky corr_cholesky_constrain(const Eigen::Ref<const Eigen::VectorXd>& y, int D) {
  if (D < 1) throw DomainError("correlation dimension must be >= 1");
  if (y.size() != corr_free_size(D)) throw DomainError("correlation coordinate count mismatch");
  CorrCholesky out;
  out.factor = Eigen::MatrixXd::Zero(D, D);
  out.factor(0, 0) = 1.0;
  Eigen::Index k = 0;
  for (int i = 1; i < D; ++i) {
    double log_r = 0.0;
    for (int j = 0; j < i; ++j, ++k) {
      const double z = std::tanh(y[k]);
      const double t = detail::log1m_tanh_sq(y[k]);
      out.factor(i, j) = z * std::exp(0.5 * log_r);
      out.log_jacobian += t + 0.5 * log_r;
      log_r += t;
    }
    out.factor(i, i) = std::exp(0.5 * log_r);
  }
  return out;
}

/// Inverse of corr_cholesky_constrain.
[[nodiscard]] inline Eigen::VectorXd corr_cholesky_unconstrain(const Eigen::Ref<const Eigen::MatrixXd>& factor) {
  const int D = static_cast<int>(factor.rows());
  Eigen::VectorXd y(corr_free_size(D));
  Eigen::Index k = 0;
  for (int i = 1; i < D; ++i) {
    double r = 1.0;
    for (int j = 0; j < i; ++j, ++k) {
      const double z = factor(i, j) / std::sqrt(r);
      y[k] = std::atanh(z);
      r -= factor(i, j) * factor(i, j);
    }
  }
  return y;
}

/// Unnormalized LKJ(eta) log-density of C = A A^T, i.e. (eta - 1) log det C.
[[nodiscard]] inline double lkj_corr_log_density(const Eigen::Ref<const Eigen::MatrixXd>& factor, double eta) {
  if (!(eta > 0.0)) throw DomainError("LKJ shape eta must be > 0");
  double log_det = 0.0;
  for (Eigen::Index i = 1; i < factor.rows(); ++i) log_det += 2.0 * std::log(factor(i, i));
  return (eta - 1.0) * log_det;
}

/// log |dC / dA| for the map from the strictly-lower Cholesky entries to C.
[[nodiscard]] inline double corr_from_cholesky_log_jacobian(const Eigen::Ref<const Eigen::MatrixXd>& factor) {
  const auto D = factor.rows();
  double acc = 0.0;
  for (Eigen::Index i = 1; i < D; ++i) acc += static_cast<double>(D - i - 1) * std::log(factor(i, i));
  return acc;
}

/// Value and gradient of
///   g(A(y)) + lkj(A(y); eta) + log|dC/dA| + log|dA/dy|
/// with respect to y, given grad_factor = dg/dA (only the lower triangle is read).
/// Returns the scalar part excluding g.
inline double corr_block_gradient(const Eigen::Ref<const Eigen::VectorXd>& y, int D, double eta,
                                  const Eigen::Ref<const Eigen::MatrixXd>& grad_factor, Eigen::Ref<Eigen::VectorXd> grad_y) {
  double value = 0.0;
  Eigen::Index k0 = 0;
  Eigen::VectorXd z(D), t(D), sqrt_r(D + 1), a(D);
  for (int i = 1; i < D; ++i) {
    double log_r = 0.0;
    for (int j = 0; j < i; ++j) {
      z[j] = std::tanh(y[k0 + j]);
      t[j] = detail::log1m_tanh_sq(y[k0 + j]);
      sqrt_r[j] = std::exp(0.5 * log_r);
      a[j] = z[j] * sqrt_r[j];
      log_r += t[j];
    }
    const double a_ii = std::exp(0.5 * log_r);
    // t_m coefficients: tanh Jacobian (1), stick-breaking Jacobian, and the
    // combined (2(eta - 1) + D - i - 1) log A_ii term.
    const double diag_coef = 0.5 * (2.0 * (eta - 1.0) + static_cast<double>(D - i - 1));
    double suffix = grad_factor(i, i) * a_ii;
    for (int m = i - 1; m >= 0; --m) {
      const double coef = 1.0 + 0.5 * static_cast<double>(i - 1 - m) + diag_coef;
      value += coef * t[m];
      const double one_m_z2 = 1.0 - z[m] * z[m];
      grad_y[k0 + m] = one_m_z2 * grad_factor(i, m) * sqrt_r[m] - z[m] * suffix - 2.0 * z[m] * coef;
      suffix += grad_factor(i, m) * a[m];
    }
    k0 += i;
  }
  return value;
}

}  // namespace hsgp
