#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <Eigen/Dense>

#include "hsgp/errors.hpp"
#include "hsgp/kernels.hpp"
#include "hsgp/model.hpp"
#include "hsgp/random.hpp"

namespace hsgp {

enum class ScenarioKind { GpSe, GpM32, GpM52, GpSeWideRho, PeriodicLow, PeriodicHigh };

[[nodiscard]] inline std::string_view to_string(ScenarioKind k) {
  switch (k) {
    case ScenarioKind::GpSe: return "gp-se";
    case ScenarioKind::GpM32: return "gp-m32";
    case ScenarioKind::GpM52: return "gp-m52";
    case ScenarioKind::GpSeWideRho: return "gp-se-wide-rho";
    case ScenarioKind::PeriodicLow: return "periodic-low";
    case ScenarioKind::PeriodicHigh: return "periodic-high";
  }
  return "?";
}

[[nodiscard]] inline std::optional<ScenarioKind> parse_scenario(std::string_view name) {
  for (auto k : {ScenarioKind::GpSe, ScenarioKind::GpM32, ScenarioKind::GpM52, ScenarioKind::GpSeWideRho,
                 ScenarioKind::PeriodicLow, ScenarioKind::PeriodicHigh}) {
    if (to_string(k) == name) return k;
  }
  return std::nullopt;
}

[[nodiscard]] inline bool is_periodic(ScenarioKind k) noexcept {
  return k == ScenarioKind::PeriodicLow || k == ScenarioKind::PeriodicHigh;
}

/// Covariance family that generates a GP scenario (SE for the periodic ones).
[[nodiscard]] inline KernelFamily scenario_family(ScenarioKind k) noexcept {
  switch (k) {
    case ScenarioKind::GpM32: return KernelFamily::Matern32;
    case ScenarioKind::GpM52: return KernelFamily::Matern52;
    default: return KernelFamily::SquaredExponential;
  }
}

/// How latent inputs and their measurements are drawn.
enum class LatentDraw {
  UniformTruth,        // x ~ U(lo, hi), x_tilde = x + N(0, s^2)
  UniformMeasurement,  // x_tilde ~ U(lo, hi), x = x_tilde + N(0, s^2); matches the fitted latent prior
};

struct ScenarioSpec {
  ScenarioKind kind = ScenarioKind::GpSe;
  int N = 20;
  int D = 5;
  NormalPrior rho{1.0, 0.05};
  NormalPrior alpha{3.0, 0.25};
  NormalPrior sigma{1.0, 0.25};
  std::optional<NormalPrior> mu;  // when set, mu_d is drawn and added; otherwise mu_d = 0
  double s = 0.3;
  double x_lower = 0.0;
  double x_upper = 10.0;
  double eta = 1.0;
  LatentDraw latent = LatentDraw::UniformTruth;
  std::uint64_t seed = 1;

  void validate() const {
    if (N < 2) throw DomainError("scenario N must be >= 2");
    if (D < 1) throw DomainError("scenario D must be >= 1");
    if (!(rho.sd > 0.0 && alpha.sd > 0.0 && sigma.sd > 0.0)) throw DomainError("scenario prior sds must be > 0");
    if (mu && !(mu->sd > 0.0)) throw DomainError("scenario mean prior sd must be > 0");
    if (!(s >= 0.0)) throw DomainError("measurement sd must be >= 0");
    if (!(x_upper > x_lower)) throw DomainError("x range must be non-empty");
    if (!(eta > 0.0)) throw DomainError("LKJ eta must be > 0");
  }

  /// Fitting priors aligned with this scenario's generating distributions.
  [[nodiscard]] PriorSet aligned_priors() const {
    PriorSet p;
    p.rho = rho;
    p.alpha = alpha;
    p.sigma = sigma;
    if (mu) p.mu = *mu;
    p.eta = eta;
    return p;
  }
};

/// Scenario constants for the six simulation settings.
[[nodiscard]] inline ScenarioSpec make_scenario(ScenarioKind kind, int N, int D, std::uint64_t seed) {
  ScenarioSpec spec;
  spec.kind = kind;
  spec.N = N;
  spec.D = D;
  spec.seed = seed;
  if (kind == ScenarioKind::GpSeWideRho || kind == ScenarioKind::PeriodicLow) spec.rho = {1.0, 0.25};
  if (kind == ScenarioKind::PeriodicHigh) spec.rho = {0.5, 0.05};
  return spec;
}

struct SimulatedDataset {
  Eigen::MatrixXd Y;         // N x D
  Eigen::VectorXd x_true;    // N
  Eigen::VectorXd x_tilde;   // N
  Eigen::VectorXd rho;       // D
  Eigen::VectorXd alpha;     // D
  Eigen::VectorXd sigma;     // D
  Eigen::VectorXd mu;        // D
  Eigen::MatrixXd C;         // D x D
  Eigen::MatrixXd f_latent;  // N x D, independent functions before mixing
  Eigen::MatrixXd f_true;    // N x D, mixed noiseless means of Y
};

struct LkjDraw {
  Eigen::MatrixXd C;
  Eigen::MatrixXd A;  // lower Cholesky factor
};

/// Correlation matrix from LKJ(eta) via Beta-distributed canonical partial correlations.
[[nodiscard]] inline LkjDraw lkj_draw(int D, double eta, Random& rng) {
  if (D < 1) throw DomainError("LKJ dimension must be >= 1");
  if (!(eta > 0.0)) throw DomainError("LKJ eta must be > 0");
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(D, D);
  A(0, 0) = 1.0;
  if (D > 1) {
    // column i uses Beta(b_i, b_i) with b_i = eta + (D - 2 - i) / 2
    Eigen::VectorXd remaining = Eigen::VectorXd::Ones(D);
    for (int i = 0; i < D - 1; ++i) {
      const double b = eta + 0.5 * (D - 2 - i);
      A(i, i) = std::sqrt(remaining[i]);
      for (int r = i + 1; r < D; ++r) {
        const double cpc = 2.0 * rng.beta(b, b) - 1.0;
        A(r, i) = cpc * std::sqrt(remaining[r]);
        remaining[r] *= 1.0 - cpc * cpc;
      }
    }
    A(D - 1, D - 1) = std::sqrt(remaining[D - 1]);
  }
  return {A * A.transpose(), A};
}

/// alpha sin(x / rho)
[[nodiscard]] inline Eigen::VectorXd periodic_function(const Eigen::VectorXd& x, double rho, double alpha) {
  return alpha * (x.array() / rho).sin();
}

namespace detail {

// Draws hyperparameters, the correlation and the inputs; returns chol(C).
inline Eigen::MatrixXd draw_common(const ScenarioSpec& spec, Random& rng, SimulatedDataset& ds) {
  const int D = spec.D;
  ds.rho.resize(D);
  ds.alpha.resize(D);
  ds.sigma.resize(D);
  ds.mu = Eigen::VectorXd::Zero(D);
  for (int d = 0; d < D; ++d) {
    ds.rho[d] = draw_truncated_normal(spec.rho.mean, spec.rho.sd, rng);
    ds.alpha[d] = draw_truncated_normal(spec.alpha.mean, spec.alpha.sd, rng);
    ds.sigma[d] = draw_truncated_normal(spec.sigma.mean, spec.sigma.sd, rng);
    if (spec.mu) ds.mu[d] = rng.normal(spec.mu->mean, spec.mu->sd);
  }
  auto lkj = lkj_draw(D, spec.eta, rng);
  ds.C = std::move(lkj.C);
  ds.x_true.resize(spec.N);
  ds.x_tilde.resize(spec.N);
  for (int i = 0; i < spec.N; ++i) {
    const double u = rng.uniform(spec.x_lower, spec.x_upper);
    const double e = spec.s > 0.0 ? rng.normal(0.0, spec.s) : 0.0;
    if (spec.latent == LatentDraw::UniformTruth) {
      ds.x_true[i] = u;
      ds.x_tilde[i] = u + e;
    } else {
      ds.x_tilde[i] = u;
      ds.x_true[i] = u + e;
    }
  }
  ds.f_latent.resize(spec.N, spec.D);
  return std::move(lkj.A);
}

inline void finish(SimulatedDataset& ds, const Eigen::MatrixXd& A, Random& rng) {
  ds.f_true = ds.f_latent * A.transpose();
  ds.f_true.rowwise() += ds.mu.transpose();
  ds.Y = ds.f_true;
  for (Eigen::Index d = 0; d < ds.Y.cols(); ++d) {
    for (Eigen::Index i = 0; i < ds.Y.rows(); ++i) ds.Y(i, d) += rng.normal(0.0, ds.sigma[d]);
  }
}

}  // namespace detail

/// Multi-output GP scenario: exact-GP function draws mixed by chol(C), plus noise.
[[nodiscard]] inline SimulatedDataset gen_gp_scenario(const ScenarioSpec& spec) {
  spec.validate();
  if (is_periodic(spec.kind)) throw DomainError("gen_gp_scenario called with a periodic scenario");
  Random rng(spec.seed);
  SimulatedDataset ds;
  const Eigen::MatrixXd A = detail::draw_common(spec, rng, ds);
  const KernelFamily family = scenario_family(spec.kind);
  for (int d = 0; d < spec.D; ++d) {
    const KernelHyper h(ds.rho[d], ds.alpha[d]);
    const auto chol = jittered_cholesky(gram_matrix(ds.x_true, family, h), h.alpha() * h.alpha());
    Eigen::VectorXd z(spec.N);
    for (int i = 0; i < spec.N; ++i) z[i] = rng.normal();
    ds.f_latent.col(d) = chol.L * z;
  }
  detail::finish(ds, A, rng);
  return ds;
}

/// Periodic scenario: f_id = alpha_d sin(x_i / rho_d), mixed by chol(C), plus noise.
[[nodiscard]] inline SimulatedDataset gen_periodic_scenario(const ScenarioSpec& spec) {
  spec.validate();
  if (!is_periodic(spec.kind)) throw DomainError("gen_periodic_scenario called with a GP scenario");
  Random rng(spec.seed);
  SimulatedDataset ds;
  const Eigen::MatrixXd A = detail::draw_common(spec, rng, ds);
  for (int d = 0; d < spec.D; ++d) ds.f_latent.col(d) = periodic_function(ds.x_true, ds.rho[d], ds.alpha[d]);
  detail::finish(ds, A, rng);
  return ds;
}

[[nodiscard]] inline SimulatedDataset generate(const ScenarioSpec& spec) {
  return is_periodic(spec.kind) ? gen_periodic_scenario(spec) : gen_gp_scenario(spec);
}

}  // namespace hsgp
