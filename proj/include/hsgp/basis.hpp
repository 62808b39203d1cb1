#pragma once

#include <cmath>
#include <cstddef>
#include <numbers>

#include <Eigen/Dense>

#include "hsgp/errors.hpp"
#include "hsgp/kernels.hpp"

namespace hsgp {

/// Boundary half-width L, truncation M and the boundary factor c that produced L.
struct BasisConfig {
  double L = 1.0;
  int M = 1;
  double c = 1.25;

  void validate() const {
    if (!(L > 0.0) || !std::isfinite(L)) throw DomainError("basis half-width L must be finite and > 0");
    if (M < 1) throw DomainError("number of basis functions M must be >= 1");
    if (!(c >= 1.0)) throw DomainError("boundary factor c must be >= 1");
  }
};

/// Shift applied to raw inputs so the working interval is symmetric about zero.
struct InputDomain {
  double lower = 0.0;
  double upper = 1.0;

  [[nodiscard]] double center() const noexcept { return 0.5 * (lower + upper); }
  [[nodiscard]] double half_width() const noexcept { return 0.5 * (upper - lower); }
  [[nodiscard]] double range() const noexcept { return upper - lower; }
};

/// L = c * half-width of the domain.
[[nodiscard]] inline BasisConfig make_basis_config(const InputDomain& domain, int M, double c = 1.25) {
  BasisConfig cfg{c * domain.half_width(), M, c};
  cfg.validate();
  return cfg;
}

/// Laplacian eigenvalue lambda_j = (j pi / 2L)^2 on [-L, L], j >= 1.
[[nodiscard]] inline double eigenvalue(int j, double L) {
  if (j < 1) throw DomainError("eigen index j must be >= 1");
  if (!(L > 0.0)) throw DomainError("L must be > 0");
  const double s = j * std::numbers::pi / (2.0 * L);
  return s * s;
}

/// Dirichlet eigenfunction phi_j(x) = sqrt(1/L) sin(sqrt(lambda_j) (x + L)).
[[nodiscard]] inline double eigenfunction(int j, double L, double x) {
  const double sq = std::sqrt(eigenvalue(j, L));
  return std::sin(sq * (x + L)) / std::sqrt(L);
}

struct BasisMatrix {
  Eigen::MatrixXd values;       // N x M, values(i, j) = phi_{j+1}(x_i)
  Eigen::VectorXd eigenvalues;  // lambda_1..lambda_M
};

namespace detail {

// Fills phi (and optionally dphi/dx) using the angle-addition recurrence
// sin((j+1)a) = sin(ja)cos(a) + cos(ja)sin(a). Inputs must already be range checked.
inline void fill_basis_rows(const Eigen::Ref<const Eigen::VectorXd>& x, double L, int M, Eigen::MatrixXd& phi,
                            Eigen::MatrixXd* dphi) {
  const auto n = x.size();
  phi.resize(n, M);
  if (dphi != nullptr) dphi->resize(n, M);
  const double inv_sqrt_l = 1.0 / std::sqrt(L);
  const double step = std::numbers::pi / (2.0 * L);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double a = step * (x[i] + L);
    const double sa = std::sin(a);
    const double ca = std::cos(a);
    double s = sa;
    double c = ca;
    for (int j = 0; j < M; ++j) {
      phi(i, j) = inv_sqrt_l * s;
      if (dphi != nullptr) (*dphi)(i, j) = inv_sqrt_l * step * (j + 1) * c;
      const double s_next = s * ca + c * sa;
      c = c * ca - s * sa;
      s = s_next;
    }
  }
}

inline Eigen::VectorXd eigenvalue_vector(double L, int M) {
  Eigen::VectorXd lambda(M);
  for (int j = 0; j < M; ++j) lambda[j] = eigenvalue(j + 1, L);
  return lambda;
}

}  // namespace detail

/// Evaluates the first M eigenfunctions at the (already centered) inputs.
/// Throws BoundaryError naming the first input with |x_i| >= L.
[[nodiscard]] inline BasisMatrix build_basis(const Eigen::Ref<const Eigen::VectorXd>& x, const BasisConfig& config) {
  config.validate();
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    if (!(std::abs(x[i]) < config.L)) throw BoundaryError(static_cast<std::size_t>(i), x[i], config.L);
  }
  BasisMatrix out;
  out.values.resize(x.size(), config.M);
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    for (int j = 0; j < config.M; ++j) out.values(i, j) = eigenfunction(j + 1, config.L, x[i]);
  }
  out.eigenvalues = detail::eigenvalue_vector(config.L, config.M);
  return out;
}

/// Diagonal of Delta: S(sqrt(lambda_j)) for every basis function.
[[nodiscard]] inline Eigen::VectorXd spectral_weights(const Eigen::VectorXd& eigenvalues, KernelFamily family,
                                                      const KernelHyper& hyper) {
  Eigen::VectorXd s(eigenvalues.size());
  for (Eigen::Index j = 0; j < eigenvalues.size(); ++j) {
    s[j] = spectral_density(family, std::sqrt(eigenvalues[j]), hyper);
  }
  return s;
}

/// Phi Delta Phi^T, accumulated symmetrically.
[[nodiscard]] inline Eigen::MatrixXd approx_covariance(const BasisMatrix& basis, KernelFamily family,
                                                       const KernelHyper& hyper) {
  const Eigen::VectorXd s = spectral_weights(basis.eigenvalues, family, hyper);
  const auto n = basis.values.rows();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index l = 0; l <= i; ++l) {
      double acc = 0.0;
      for (Eigen::Index j = 0; j < basis.values.cols(); ++j) acc += basis.values(i, j) * s[j] * basis.values(l, j);
      k(i, l) = acc;
      k(l, i) = acc;
    }
  }
  return k;
}

/// Heuristic family constant in M_min = ceil(kappa * c * S / mu_rho).
[[nodiscard]] inline double min_basis_constant(KernelFamily family) noexcept {
  switch (family) {
    case KernelFamily::SquaredExponential: return 1.75;
    case KernelFamily::Matern32: return 3.42;
    case KernelFamily::Matern52: return 2.65;
  }
  return 1.75;
}

/// Minimum number of basis functions for an input range S and prior mean length-scale mu_rho.
[[nodiscard]] inline int min_basis(KernelFamily family, double c, double input_range, double mu_rho) {
  if (!(c > 0.0) || !(input_range > 0.0) || !(mu_rho > 0.0)) throw DomainError("min_basis arguments must be > 0");
  const double v = min_basis_constant(family) * c * input_range / mu_rho;
  // Guard against products like 21.000000000004 rounding up an extra step.
  return static_cast<int>(std::ceil(v * (1.0 - 1e-12)));
}

}  // namespace hsgp
