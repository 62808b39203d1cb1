#pragma once

// Reference computations written independently of the library.

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

enum class Kernel { SE, M32, M52 };

inline double kernel(Kernel k, double r, double rho, double alpha) {
  const double a2 = alpha * alpha;
  switch (k) {
    case Kernel::SE: return a2 * std::exp(-r * r / (2 * rho * rho));
    case Kernel::M32: {
      const double t = std::sqrt(3.0) * r / rho;
      return a2 * (1 + t) * std::exp(-t);
    }
    case Kernel::M52: {
      const double t = std::sqrt(5.0) * r / rho;
      return a2 * (1 + t + t * t / 3) * std::exp(-t);
    }
  }
  return 0;
}

// 2 * int_0^inf k(r) cos(w r) dr, integrated panel by panel until the kernel is negligible.
inline double fourier_cosine(Kernel k, double w, double rho, double alpha) {
  using boost::math::quadrature::gauss_kronrod;
  const double panel = std::min(rho, w > 0 ? std::numbers::pi / w : rho);
  double total = 0;
  for (int i = 0;; ++i) {
    const double a = i * panel;
    if (kernel(k, a, rho, alpha) < 1e-18 * alpha * alpha && a > 5 * rho) break;
    total += gauss_kronrod<double, 61>::integrate([&](double r) { return kernel(k, r, rho, alpha) * std::cos(w * r); },
                                                  a, a + panel, 10, 1e-14);
  }
  return 2 * total;
}

}  // namespace oracle
