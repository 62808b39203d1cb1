#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <string_view>

#include "hsgp/errors.hpp"

namespace hsgp {

enum class KernelFamily { SquaredExponential, Matern32, Matern52 };

inline constexpr std::array<KernelFamily, 3> kAllFamilies = {
    KernelFamily::SquaredExponential, KernelFamily::Matern32, KernelFamily::Matern52};

[[nodiscard]] inline std::string_view to_string(KernelFamily family) {
  switch (family) {
    case KernelFamily::SquaredExponential: return "se";
    case KernelFamily::Matern32: return "m32";
    case KernelFamily::Matern52: return "m52";
  }
  return "?";
}

[[nodiscard]] inline std::optional<KernelFamily> parse_family(std::string_view name) {
  if (name == "se" || name == "squared-exponential") return KernelFamily::SquaredExponential;
  if (name == "m32" || name == "matern32") return KernelFamily::Matern32;
  if (name == "m52" || name == "matern52") return KernelFamily::Matern52;
  return std::nullopt;
}

/// Length-scale and marginal standard deviation of a stationary kernel.
class KernelHyper {
 public:
  KernelHyper(double rho, double alpha) : rho_(rho), alpha_(alpha) {
    if (!(rho > 0.0) || !std::isfinite(rho)) throw DomainError("length-scale rho must be finite and > 0");
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw DomainError("marginal sd alpha must be finite and > 0");
  }

  [[nodiscard]] double rho() const noexcept { return rho_; }
  [[nodiscard]] double alpha() const noexcept { return alpha_; }

 private:
  double rho_;
  double alpha_;
};

namespace detail {

inline constexpr double kSqrt3 = 1.7320508075688772935274463415059;
inline constexpr double kSqrt5 = 2.2360679774997896964091736687313;
inline constexpr double kSqrt2Pi = 2.5066282746310005024157652848110;

// Unchecked kernel value at distance r >= 0.
inline double kernel_value(KernelFamily family, double r, double rho, double alpha) noexcept {
  const double a2 = alpha * alpha;
  switch (family) {
    case KernelFamily::SquaredExponential: return a2 * std::exp(-0.5 * r * r / (rho * rho));
    case KernelFamily::Matern32: {
      const double u = kSqrt3 * r / rho;
      return a2 * (1.0 + u) * std::exp(-u);
    }
    case KernelFamily::Matern52: {
      const double u = kSqrt5 * r / rho;
      return a2 * (1.0 + u + u * u / 3.0) * std::exp(-u);
    }
  }
  return 0.0;
}

// Kernel value together with dk/dr and dk/dlog(rho).
struct KernelDerivs {
  double value;
  double d_r;
  double d_log_rho;
};

inline KernelDerivs kernel_derivs(KernelFamily family, double r, double rho, double alpha) noexcept {
  const double a2 = alpha * alpha;
  switch (family) {
    case KernelFamily::SquaredExponential: {
      const double k = a2 * std::exp(-0.5 * r * r / (rho * rho));
      return {k, -k * r / (rho * rho), k * r * r / (rho * rho)};
    }
    case KernelFamily::Matern32: {
      const double u = kSqrt3 * r / rho;
      const double e = std::exp(-u);
      const double dk_du = -a2 * u * e;
      return {a2 * (1.0 + u) * e, dk_du * kSqrt3 / rho, -u * dk_du};
    }
    case KernelFamily::Matern52: {
      const double u = kSqrt5 * r / rho;
      const double e = std::exp(-u);
      const double dk_du = -a2 * e * u * (1.0 + u) / 3.0;
      return {a2 * (1.0 + u + u * u / 3.0) * e, dk_du * kSqrt5 / rho, -u * dk_du};
    }
  }
  return {0.0, 0.0, 0.0};
}

inline double matern_nu(KernelFamily family) noexcept {
  return family == KernelFamily::Matern32 ? 1.5 : 2.5;
}

// log S(omega) for alpha = 1; the alpha^2 factor is added by callers.
inline double log_spectral_density_unit(KernelFamily family, double omega, double rho) noexcept {
  if (family == KernelFamily::SquaredExponential) {
    return std::log(rho * kSqrt2Pi) - 0.5 * rho * rho * omega * omega;
  }
  // 2 sqrt(pi) Gamma(nu + 1/2) (2 nu)^nu / Gamma(nu) = 4 * 3^{3/2} (nu = 3/2), (16/3) 5^{5/2} (nu = 5/2)
  const double nu = matern_nu(family);
  const double log_const =
      family == KernelFamily::Matern32 ? std::log(4.0 * 3.0 * kSqrt3) : std::log(16.0 / 3.0 * 25.0 * kSqrt5);
  return log_const - 2.0 * nu * std::log(rho) - (nu + 0.5) * std::log(2.0 * nu / (rho * rho) + omega * omega);
}

// d log S / d log(rho), independent of alpha.
inline double dlog_spectral_dlog_rho(KernelFamily family, double omega, double rho) noexcept {
  const double ro2 = rho * rho * omega * omega;
  if (family == KernelFamily::SquaredExponential) return 1.0 - ro2;
  const double nu = matern_nu(family);
  return -2.0 * nu + (2.0 * nu + 1.0) * 2.0 * nu / (2.0 * nu + ro2);
}

}  // namespace detail

/// Covariance k(r) of the given family at distance r.
[[nodiscard]] inline double kernel_eval(KernelFamily family, double r, const KernelHyper& hyper) {
  if (!std::isfinite(r)) throw DomainError("distance must be finite");
  if (r < 0.0) throw DomainError("distance must be non-negative");
  return detail::kernel_value(family, r, hyper.rho(), hyper.alpha());
}

/// One-dimensional spectral density S(omega), the Fourier dual of kernel_eval.
/// Returns 0.0 when the value underflows.
[[nodiscard]] inline double spectral_density(KernelFamily family, double omega, const KernelHyper& hyper) {
  if (!std::isfinite(omega)) throw DomainError("frequency must be finite");
  const double a = hyper.alpha();
  return a * a * std::exp(detail::log_spectral_density_unit(family, omega, hyper.rho()));
}

/// log S(omega); finite even where spectral_density underflows.
[[nodiscard]] inline double log_spectral_density(KernelFamily family, double omega, const KernelHyper& hyper) {
  if (!std::isfinite(omega)) throw DomainError("frequency must be finite");
  return 2.0 * std::log(hyper.alpha()) + detail::log_spectral_density_unit(family, omega, hyper.rho());
}

}  // namespace hsgp
