#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "hsgp/basis.hpp"
#include "hsgp/correlation.hpp"
#include "hsgp/errors.hpp"
#include "hsgp/kernels.hpp"
#include "hsgp/random.hpp"

namespace hsgp {

enum class ModelVariant { Hsgp, Exact };

[[nodiscard]] inline std::string_view to_string(ModelVariant v) { return v == ModelVariant::Hsgp ? "hsgp" : "exact"; }

[[nodiscard]] inline std::optional<ModelVariant> parse_variant(std::string_view name) {
  if (name == "hsgp") return ModelVariant::Hsgp;
  if (name == "exact") return ModelVariant::Exact;
  return std::nullopt;
}

struct NormalPrior {
  double mean = 0.0;
  double sd = 1.0;
};

/// Priors of one output dimension's hyperparameters (shared by all dimensions).
/// rho, alpha and sigma are normal priors truncated at zero.
struct PriorSet {
  NormalPrior rho{1.0, 0.05};
  NormalPrior alpha{3.0, 0.25};
  NormalPrior sigma{1.0, 0.25};
  NormalPrior mu{0.0, 5.0};
  double eta = 1.0;

  void validate() const {
    for (const auto* p : {&rho, &alpha, &sigma, &mu}) {
      if (!(p->sd > 0.0)) throw DomainError("prior standard deviations must be > 0");
    }
    if (!(eta > 0.0)) throw DomainError("LKJ shape eta must be > 0");
  }
};

/// Named prior presets: "aligned" (GP scenarios), "wide-rho", "periodic-high",
/// "wide" (robustness study) and "case-study".
[[nodiscard]] inline std::optional<PriorSet> prior_preset(std::string_view name) {
  PriorSet p;
  if (name == "aligned" || name == "gp" || name == "periodic-low-rho") {
    if (name == "periodic-low-rho") p.rho = {1.0, 0.25};
    return p;
  }
  if (name == "wide-rho") {
    p.rho = {1.0, 0.25};
    return p;
  }
  if (name == "periodic-high") {
    p.rho = {0.5, 0.05};
    return p;
  }
  if (name == "wide") {
    p.rho = {1.5, 0.5};
    p.alpha = {3.5, 1.0};
    p.sigma = {1.5, 1.0};
    return p;
  }
  if (name == "case-study") {
    p.rho = {0.4, 0.1};
    p.alpha = {14.0, 3.5};
    p.sigma = {7.0, 3.5};
    return p;
  }
  return std::nullopt;
}

/// Full description of a multi-output latent-input GP model.
struct ModelSpec {
  KernelFamily family = KernelFamily::SquaredExponential;
  ModelVariant variant = ModelVariant::Hsgp;
  int D = 1;
  BasisConfig basis;
  double center = 0.0;  // subtracted from x before basis evaluation
  PriorSet priors;
  Eigen::VectorXd x_tilde;
  double s = 0.3;

  [[nodiscard]] int N() const noexcept { return static_cast<int>(x_tilde.size()); }

  void validate() const {
    if (D < 1) throw DomainError("output dimension D must be >= 1");
    if (N() < 2) throw DomainError("sample size N must be >= 2");
    if (!(s > 0.0)) throw DomainError("measurement sd s must be > 0");
    if (!x_tilde.allFinite()) throw DataError("x_tilde contains non-finite values");
    if (variant == ModelVariant::Hsgp) basis.validate();
    priors.validate();
  }
};

/// Offsets of each block inside the unconstrained parameter vector.
struct ParameterLayout {
  int N = 0;
  int D = 0;
  int beta_rows = 0;  // M for HSGP, N for the exact GP
  int x = 0;
  int log_rho = 0;
  int log_alpha = 0;
  int log_sigma = 0;
  int mu = 0;
  int beta = 0;  // column-major beta_rows x D block
  int corr = 0;
  int size = 0;

  [[nodiscard]] int primary_size() const noexcept { return N + 4 * D + corr_free_size(D); }
};

[[nodiscard]] inline ParameterLayout make_layout(const ModelSpec& spec) {
  ParameterLayout l;
  l.N = spec.N();
  l.D = spec.D;
  l.beta_rows = spec.variant == ModelVariant::Hsgp ? spec.basis.M : l.N;
  l.x = 0;
  l.log_rho = l.N;
  l.log_alpha = l.log_rho + l.D;
  l.log_sigma = l.log_alpha + l.D;
  l.mu = l.log_sigma + l.D;
  l.beta = l.mu + l.D;
  l.corr = l.beta + l.beta_rows * l.D;
  l.size = l.corr + corr_free_size(l.D);
  return l;
}

/// Parameter values on their natural scales.
struct ConstrainedParams {
  Eigen::VectorXd x;
  Eigen::VectorXd rho;
  Eigen::VectorXd alpha;
  Eigen::VectorXd sigma;
  Eigen::VectorXd mu;
  Eigen::MatrixXd beta;  // beta_rows x D
  Eigen::MatrixXd A;     // Cholesky factor of the output correlation
  double log_jacobian = 0.0;

  [[nodiscard]] Eigen::MatrixXd C() const { return A * A.transpose(); }
};

[[nodiscard]] inline ConstrainedParams constrain(const Eigen::Ref<const Eigen::VectorXd>& q, const ModelSpec& spec) {
  const auto l = make_layout(spec);
  if (q.size() != l.size) {
    throw DomainError("parameter vector has length " + std::to_string(q.size()) + ", expected " +
                      std::to_string(l.size));
  }
  ConstrainedParams p;
  p.x = q.segment(l.x, l.N);
  p.rho = q.segment(l.log_rho, l.D).array().exp();
  p.alpha = q.segment(l.log_alpha, l.D).array().exp();
  p.sigma = q.segment(l.log_sigma, l.D).array().exp();
  p.mu = q.segment(l.mu, l.D);
  p.beta = Eigen::Map<const Eigen::MatrixXd>(q.data() + l.beta, l.beta_rows, l.D);
  auto corr = corr_cholesky_constrain(q.segment(l.corr, corr_free_size(l.D)), l.D);
  p.A = std::move(corr.factor);
  p.log_jacobian = q.segment(l.log_rho, 3 * l.D).sum() + corr.log_jacobian;
  return p;
}

[[nodiscard]] inline Eigen::VectorXd unconstrain(const ConstrainedParams& p, const ModelSpec& spec) {
  const auto l = make_layout(spec);
  Eigen::VectorXd q(l.size);
  q.segment(l.x, l.N) = p.x;
  q.segment(l.log_rho, l.D) = p.rho.array().log();
  q.segment(l.log_alpha, l.D) = p.alpha.array().log();
  q.segment(l.log_sigma, l.D) = p.sigma.array().log();
  q.segment(l.mu, l.D) = p.mu;
  Eigen::Map<Eigen::MatrixXd>(q.data() + l.beta, l.beta_rows, l.D) = p.beta;
  q.segment(l.corr, corr_free_size(l.D)) = corr_cholesky_unconstrain(p.A);
  return q;
}

/// Starting point: x at x_tilde, scales at their prior means, beta and
/// correlations at zero, mu at the per-column data mean.
[[nodiscard]] inline Eigen::VectorXd initial_point(const ModelSpec& spec, const Eigen::MatrixXd& Y) {
  const auto l = make_layout(spec);
  Eigen::VectorXd q = Eigen::VectorXd::Zero(l.size);
  q.segment(l.x, l.N) = spec.x_tilde;
  q.segment(l.log_rho, l.D).setConstant(std::log(spec.priors.rho.mean));
  q.segment(l.log_alpha, l.D).setConstant(std::log(spec.priors.alpha.mean));
  q.segment(l.log_sigma, l.D).setConstant(std::log(spec.priors.sigma.mean));
  q.segment(l.mu, l.D) = Y.colwise().mean().transpose();
  return q;
}

/// f_d = mu_d + Phi (sqrt(S(sqrt(lambda))) .* beta_d).
[[nodiscard]] inline Eigen::VectorXd gp_functions_hsgp(const BasisMatrix& basis, const Eigen::Ref<const Eigen::VectorXd>& beta,
                                                       KernelFamily family, const KernelHyper& hyper, double mu) {
  if (beta.size() != basis.values.cols()) throw DomainError("beta length must equal the number of basis functions");
  const Eigen::VectorXd w = spectral_weights(basis.eigenvalues, family, hyper).array().sqrt();
  Eigen::VectorXd f = basis.values * (w.array() * beta.array()).matrix();
  f.array() += mu;
  return f;
}

/// Row i of the result is A times row i of F, i.e. F A^T.
[[nodiscard]] inline Eigen::MatrixXd mix_outputs(const Eigen::Ref<const Eigen::MatrixXd>& A,
                                                 const Eigen::Ref<const Eigen::MatrixXd>& F) {
  if (A.rows() != A.cols() || A.cols() != F.cols()) throw DomainError("mixing matrix and function matrix shapes disagree");
  return F * A.transpose();
}

/// Gaussian log-likelihood of Y given mixed function values and per-dimension noise.
[[nodiscard]] inline double log_likelihood(const Eigen::Ref<const Eigen::MatrixXd>& Y, const Eigen::Ref<const Eigen::MatrixXd>& Fstar,
                                           const Eigen::Ref<const Eigen::VectorXd>& sigma) {
  if (Y.rows() != Fstar.rows() || Y.cols() != Fstar.cols() || sigma.size() != Y.cols()) {
    throw DomainError("likelihood shapes disagree");
  }
  double lp = 0.0;
  for (Eigen::Index d = 0; d < Y.cols(); ++d) {
    for (Eigen::Index i = 0; i < Y.rows(); ++i) lp += normal_log_density(Y(i, d), Fstar(i, d), sigma[d]);
  }
  return lp;
}

/// Measurement model for the latent inputs, sum_i log N(x_tilde_i | x_i, s^2).
[[nodiscard]] inline double log_latent_prior(const Eigen::Ref<const Eigen::VectorXd>& x,
                                             const Eigen::Ref<const Eigen::VectorXd>& x_tilde, double s) {
  if (x.size() != x_tilde.size()) throw DomainError("latent and measured inputs differ in length");
  if (!(s > 0.0)) throw DomainError("measurement sd must be > 0");
  double lp = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) lp += normal_log_density(x_tilde[i], x[i], s);
  return lp;
}

/// Exact Gram matrix k(|x_i - x_j|).
[[nodiscard]] inline Eigen::MatrixXd gram_matrix(const Eigen::Ref<const Eigen::VectorXd>& x, KernelFamily family,
                                                 const KernelHyper& hyper) {
  const auto n = x.size();
  Eigen::MatrixXd k(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    k(i, i) = hyper.alpha() * hyper.alpha();
    for (Eigen::Index j = 0; j < i; ++j) {
      k(i, j) = detail::kernel_value(family, std::abs(x[i] - x[j]), hyper.rho(), hyper.alpha());
      k(j, i) = k(i, j);
    }
  }
  return k;
}

struct JitteredCholesky {
  Eigen::MatrixXd L;
  double jitter = 0.0;
};

/// Cholesky of K + jitter I with jitter = 1e-8 scale, escalated x10 up to 1e-4 scale.
[[nodiscard]] inline std::optional<JitteredCholesky> try_jittered_cholesky(const Eigen::MatrixXd& K, double scale) {
  for (double rel = 1e-8; rel <= 1e-4 * (1.0 + 1e-9); rel *= 10.0) {
    const double jitter = rel * scale;
    Eigen::LLT<Eigen::MatrixXd> llt(K + jitter * Eigen::MatrixXd::Identity(K.rows(), K.cols()));
    if (llt.info() == Eigen::Success && llt.matrixLLT().diagonal().allFinite()) {
      return JitteredCholesky{llt.matrixL(), jitter};
    }
  }
  return std::nullopt;
}

[[nodiscard]] inline JitteredCholesky jittered_cholesky(const Eigen::MatrixXd& K, double scale) {
  auto r = try_jittered_cholesky(K, scale);
  if (!r) throw NumericalError("Cholesky factorization failed after jitter escalation to 1e-4");
  return *std::move(r);
}

/// f_d = mu_d + chol(K_d + jitter I) beta_d.
[[nodiscard]] inline Eigen::VectorXd exact_gp_functions(const Eigen::Ref<const Eigen::VectorXd>& x,
                                                        const Eigen::Ref<const Eigen::VectorXd>& beta, KernelFamily family,
                                                        const KernelHyper& hyper, double mu) {
  if (beta.size() != x.size()) throw DomainError("whitened beta length must equal N");
  const auto chol = jittered_cholesky(gram_matrix(x, family, hyper), hyper.alpha() * hyper.alpha());
  Eigen::VectorXd f = chol.L * beta;
  f.array() += mu;
  return f;
}

namespace detail {

inline constexpr double kHalfLog2Pi = 0.91893853320467274178;
inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Reverse-mode step through K = L L^T: returns the symmetric adjoint of K given
// the adjoint of the lower factor.
inline Eigen::MatrixXd cholesky_adjoint(const Eigen::MatrixXd& L, const Eigen::MatrixXd& L_bar) {
  Eigen::MatrixXd P = (L.transpose() * L_bar.triangularView<Eigen::Lower>()).triangularView<Eigen::Lower>();
  P.diagonal() *= 0.5;
  const Eigen::MatrixXd X = L.transpose().triangularView<Eigen::Upper>().solve(P);
  const Eigen::MatrixXd S = L.transpose().triangularView<Eigen::Upper>().solve(X.transpose()).transpose();
  return 0.5 * (S + S.transpose());
}

// Log truncated-normal prior (without truncation constant) of theta = exp(u),
// including the log-Jacobian u. Adds d/du to grad.
inline double log_scale_prior(double u, const NormalPrior& prior, double& grad) {
  const double theta = std::exp(u);
  const double z = (theta - prior.mean) / prior.sd;
  grad += -z / prior.sd * theta + 1.0;
  return -0.5 * z * z - std::log(prior.sd) - kHalfLog2Pi + u;
}

// Joint log density; fills grad when non-null. Returns -inf outside the support.
inline double evaluate_log_joint(const ModelSpec& spec, const Eigen::MatrixXd& Y, const Eigen::Ref<const Eigen::VectorXd>& q,
                                 Eigen::VectorXd* grad) {
  const auto l = make_layout(spec);
  if (q.size() != l.size) throw DomainError("parameter vector length mismatch");
  const int N = l.N;
  const int D = l.D;
  if (grad != nullptr) grad->setZero(l.size);
  if (!q.allFinite()) return kNegInf;
  double lp = 0.0;
  double dummy = 0.0;
  auto g = [&](int idx) -> double& { return grad != nullptr ? (*grad)[idx] : dummy; };

  const auto x = q.segment(l.x, N);
  for (int i = 0; i < N; ++i) {
    lp += normal_log_density(spec.x_tilde[i], x[i], spec.s);
    g(l.x + i) += -(x[i] - spec.x_tilde[i]) / (spec.s * spec.s);
  }

  Eigen::VectorXd rho(D), alpha(D), sigma(D), mu(D);
  for (int d = 0; d < D; ++d) {
    lp += log_scale_prior(q[l.log_rho + d], spec.priors.rho, g(l.log_rho + d));
    lp += log_scale_prior(q[l.log_alpha + d], spec.priors.alpha, g(l.log_alpha + d));
    lp += log_scale_prior(q[l.log_sigma + d], spec.priors.sigma, g(l.log_sigma + d));
    rho[d] = std::exp(q[l.log_rho + d]);
    alpha[d] = std::exp(q[l.log_alpha + d]);
    sigma[d] = std::exp(q[l.log_sigma + d]);
    mu[d] = q[l.mu + d];
    lp += normal_log_density(mu[d], spec.priors.mu.mean, spec.priors.mu.sd);
    g(l.mu + d) += -(mu[d] - spec.priors.mu.mean) / (spec.priors.mu.sd * spec.priors.mu.sd);
  }
  if (!(rho.array() > 0.0).all() || !(alpha.array() > 0.0).all() || !(sigma.array() > 0.0).all() ||
      !rho.allFinite() || !alpha.allFinite() || !sigma.allFinite()) {
    return kNegInf;
  }

  const Eigen::Map<const Eigen::MatrixXd> B(q.data() + l.beta, l.beta_rows, D);
  lp += -0.5 * B.squaredNorm() - kHalfLog2Pi * static_cast<double>(B.size());
  if (grad != nullptr) Eigen::Map<Eigen::MatrixXd>(grad->data() + l.beta, l.beta_rows, D) -= B;

  const auto corr_y = q.segment(l.corr, corr_free_size(D));
  const Eigen::MatrixXd A = corr_cholesky_constrain(corr_y, D).factor;

  // Latent GP values.
  Eigen::MatrixXd F(N, D);
  Eigen::MatrixXd phi, dphi, W, V;
  Eigen::VectorXd omega;
  std::vector<Eigen::MatrixXd> chol_factors;
  std::vector<double> jitters;
  if (spec.variant == ModelVariant::Hsgp) {
    const double L = spec.basis.L;
    const int M = spec.basis.M;
    Eigen::VectorXd xc = x.array() - spec.center;
    for (int i = 0; i < N; ++i) {
      if (!(std::abs(xc[i]) < L)) return kNegInf;
    }
    fill_basis_rows(xc, L, M, phi, grad != nullptr ? &dphi : nullptr);
    omega = eigenvalue_vector(L, M).array().sqrt();
    W.resize(M, D);
    for (int d = 0; d < D; ++d) {
      for (int j = 0; j < M; ++j) {
        W(j, d) = alpha[d] * std::exp(0.5 * log_spectral_density_unit(spec.family, omega[j], rho[d]));
      }
    }
    V = W.cwiseProduct(B);
    F.noalias() = phi * V;
  } else {
    chol_factors.resize(D);
    jitters.resize(D);
    for (int d = 0; d < D; ++d) {
      const KernelHyper h(rho[d], alpha[d]);
      auto chol = try_jittered_cholesky(gram_matrix(x, spec.family, h), alpha[d] * alpha[d]);
      if (!chol) return kNegInf;
      chol_factors[d] = std::move(chol->L);
      jitters[d] = chol->jitter;
      F.col(d).noalias() = chol_factors[d] * B.col(d);
    }
  }
  F.rowwise() += mu.transpose();

  const Eigen::MatrixXd Fstar = F * A.transpose();
  const Eigen::MatrixXd R = Y - Fstar;
  Eigen::MatrixXd Gs(N, D);
  for (int d = 0; d < D; ++d) {
    const double inv_var = 1.0 / (sigma[d] * sigma[d]);
    const double ss = R.col(d).squaredNorm();
    lp += -static_cast<double>(N) * (std::log(sigma[d]) + kHalfLog2Pi) - 0.5 * ss * inv_var;
    Gs.col(d) = R.col(d) * inv_var;
    g(l.log_sigma + d) += -static_cast<double>(N) + ss * inv_var;
  }

  Eigen::MatrixXd grad_A;
  if (grad != nullptr) {
    const Eigen::MatrixXd G = Gs * A;  // adjoint of F
    grad_A = Gs.transpose() * F;
    for (int d = 0; d < D; ++d) (*grad)[l.mu + d] += G.col(d).sum();
    Eigen::Map<Eigen::MatrixXd> grad_B(grad->data() + l.beta, l.beta_rows, D);

    if (spec.variant == ModelVariant::Hsgp) {
      const Eigen::MatrixXd PtG = phi.transpose() * G;  // M x D
      grad_B += W.cwiseProduct(PtG);
      const Eigen::MatrixXd T = V.cwiseProduct(PtG);  // adjoint of log w
      for (int d = 0; d < D; ++d) {
        double d_rho = 0.0;
        for (Eigen::Index j = 0; j < T.rows(); ++j) {
          d_rho += T(j, d) * 0.5 * dlog_spectral_dlog_rho(spec.family, omega[j], rho[d]);
        }
        (*grad)[l.log_rho + d] += d_rho;
        (*grad)[l.log_alpha + d] += T.col(d).sum();
      }
      const Eigen::MatrixXd GVt = G * V.transpose();  // N x M
      for (int i = 0; i < N; ++i) (*grad)[l.x + i] += dphi.row(i).dot(GVt.row(i));
    } else {
      for (int d = 0; d < D; ++d) {
        const Eigen::MatrixXd& Ld = chol_factors[d];
        grad_B.col(d) += Ld.transpose() * G.col(d);
        const Eigen::MatrixXd L_bar = G.col(d) * B.col(d).transpose();
        const Eigen::MatrixXd K_bar = cholesky_adjoint(Ld, L_bar);
        double d_rho = 0.0;
        double d_alpha = 2.0 * jitters[d] * K_bar.trace();
        for (int i = 0; i < N; ++i) {
          d_alpha += 2.0 * alpha[d] * alpha[d] * K_bar(i, i);
          for (int j = 0; j < i; ++j) {
            const double diff = x[i] - x[j];
            const auto kd = kernel_derivs(spec.family, std::abs(diff), rho[d], alpha[d]);
            const double w = 2.0 * K_bar(i, j);
            d_rho += w * kd.d_log_rho;
            d_alpha += w * 2.0 * kd.value;
            const double dx = w * kd.d_r * (diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0));
            (*grad)[l.x + i] += dx;
            (*grad)[l.x + j] -= dx;
          }
        }
        (*grad)[l.log_rho + d] += d_rho;
        (*grad)[l.log_alpha + d] += d_alpha;
      }
    }
    lp += corr_block_gradient(corr_y, D, spec.priors.eta, grad_A, grad->segment(l.corr, corr_free_size(D)));
  } else {
    Eigen::VectorXd scratch(corr_free_size(D));
    lp += corr_block_gradient(corr_y, D, spec.priors.eta, Eigen::MatrixXd::Zero(D, D), scratch);
  }
  return std::isfinite(lp) ? lp : kNegInf;
}

}  // namespace detail

/// Joint log-density of latent inputs, hyperparameters, weights and correlations
/// on the unconstrained scale (Jacobian terms included).
[[nodiscard]] inline double log_joint(const Eigen::Ref<const Eigen::VectorXd>& q, const ModelSpec& spec, const Eigen::MatrixXd& Y) {
  return detail::evaluate_log_joint(spec, Y, q, nullptr);
}

/// Analytic gradient of log_joint. Zero vector where log_joint is -inf.
[[nodiscard]] inline Eigen::VectorXd grad_log_joint(const Eigen::Ref<const Eigen::VectorXd>& q, const ModelSpec& spec,
                                                    const Eigen::MatrixXd& Y) {
  Eigen::VectorXd g;
  detail::evaluate_log_joint(spec, Y, q, &g);
  return g;
}

/// Immutable model bound to its data; safe to share between concurrent chains.
class LatentGpModel {
 public:
  LatentGpModel(ModelSpec spec, Eigen::MatrixXd Y) : spec_(std::move(spec)), Y_(std::move(Y)), layout_(make_layout(spec_)) {
    spec_.validate();
    if (Y_.rows() != spec_.N() || Y_.cols() != spec_.D) throw DataError("data matrix must be N x D");
    if (!Y_.allFinite()) throw DataError("data matrix contains non-finite values");
  }

  [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }
  [[nodiscard]] const Eigen::MatrixXd& data() const noexcept { return Y_; }
  [[nodiscard]] const ParameterLayout& layout() const noexcept { return layout_; }
  [[nodiscard]] int dimension() const noexcept { return layout_.size; }

  [[nodiscard]] double log_density(const Eigen::Ref<const Eigen::VectorXd>& q) const {
    return detail::evaluate_log_joint(spec_, Y_, q, nullptr);
  }

  double log_density_gradient(const Eigen::Ref<const Eigen::VectorXd>& q, Eigen::VectorXd& grad) const {
    return detail::evaluate_log_joint(spec_, Y_, q, &grad);
  }

  [[nodiscard]] Eigen::VectorXd initial_point() const { return hsgp::initial_point(spec_, Y_); }

  /// Names of the primary parameters: x, rho, alpha, sigma, mu, then C[i,j] for i > j.
  [[nodiscard]] std::vector<std::string> primary_names() const {
    std::vector<std::string> names;
    const int N = layout_.N;
    const int D = layout_.D;
    names.reserve(static_cast<std::size_t>(layout_.primary_size()));
    for (int i = 1; i <= N; ++i) names.push_back("x[" + std::to_string(i) + "]");
    for (const char* block : {"rho", "alpha", "sigma", "mu"}) {
      for (int d = 1; d <= D; ++d) names.push_back(std::string(block) + "[" + std::to_string(d) + "]");
    }
    for (int i = 2; i <= D; ++i) {
      for (int j = 1; j < i; ++j) names.push_back("C[" + std::to_string(i) + "," + std::to_string(j) + "]");
    }
    return names;
  }

  /// Primary names followed by beta[j,d].
  [[nodiscard]] std::vector<std::string> constrained_names() const {
    auto names = primary_names();
    for (int d = 1; d <= layout_.D; ++d) {
      for (int j = 1; j <= layout_.beta_rows; ++j) {
        names.push_back("beta[" + std::to_string(j) + "," + std::to_string(d) + "]");
      }
    }
    return names;
  }

  /// Constrained values in constrained_names() order.
  [[nodiscard]] Eigen::VectorXd write_constrained(const Eigen::Ref<const Eigen::VectorXd>& q) const {
    const auto p = constrain(q, spec_);
    const int D = layout_.D;
    Eigen::VectorXd out(layout_.primary_size() + layout_.beta_rows * D);
    Eigen::Index k = 0;
    out.segment(k, layout_.N) = p.x;
    k += layout_.N;
    for (const Eigen::VectorXd* v : {&p.rho, &p.alpha, &p.sigma, &p.mu}) {
      out.segment(k, D) = *v;
      k += D;
    }
    const Eigen::MatrixXd C = p.C();
    for (int i = 1; i < D; ++i) {
      for (int j = 0; j < i; ++j) out[k++] = C(i, j);
    }
    out.segment(k, p.beta.size()) = Eigen::Map<const Eigen::VectorXd>(p.beta.data(), p.beta.size());
    return out;
  }

 private:
  ModelSpec spec_;
  Eigen::MatrixXd Y_;
  ParameterLayout layout_;
};

}  // namespace hsgp
