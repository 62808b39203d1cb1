#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include <boost/math/distributions/normal.hpp>

#include "hsgp/errors.hpp"

namespace hsgp {

/// SplitMix64 finalizer; used to derive decorrelated seeds for sub-streams.
[[nodiscard]] constexpr std::uint64_t mix_seed(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Seed of stream `index` derived from a master seed.
[[nodiscard]] constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) noexcept {
  return mix_seed(mix_seed(seed) ^ mix_seed(index + 0x632be59bd9b4e019ULL));
}

/// 64-bit Mersenne twister with the handful of draws the library needs.
class Random {
 public:
  explicit Random(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return std::uniform_real_distribution<double>(0.0, 1.0)(engine_); }

  /// Uniform on (0, 1].
  double uniform_positive() { return 1.0 - uniform(); }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  double normal() { return std::normal_distribution<double>(0.0, 1.0)(engine_); }

  double normal(double mean, double sd) { return mean + sd * normal(); }

  double gamma(double shape) { return std::gamma_distribution<double>(shape, 1.0)(engine_); }

  double beta(double a, double b) {
    const double x = gamma(a);
    const double y = gamma(b);
    return x / (x + y);
  }

  std::uint64_t next() { return engine_(); }

  std::mt19937_64& engine() noexcept { return engine_; }

 private:
  std::mt19937_64 engine_;
};

/// Normal(mean, sd^2) conditioned on being positive, by inverse CDF on the upper tail.
[[nodiscard]] inline double draw_truncated_normal(double mean, double sd, Random& rng) {
  if (!(sd > 0.0)) throw DomainError("truncated normal sd must be > 0");
  const boost::math::normal_distribution<double> std_normal(0.0, 1.0);
  const double lower = -mean / sd;
  const double tail = boost::math::cdf(boost::math::complement(std_normal, lower));
  if (!(tail > 0.0)) throw DomainError("truncated normal has no mass above zero");
  double z;
  do {
    const double q = rng.uniform_positive() * tail;
    z = boost::math::quantile(boost::math::complement(std_normal, q));
  } while (!(z > lower));
  return mean + sd * z;
}

/// Normal log-density.
[[nodiscard]] inline double normal_log_density(double x, double mean, double sd) noexcept {
  constexpr double kHalfLog2Pi = 0.91893853320467274178;
  const double z = (x - mean) / sd;
  return -0.5 * z * z - std::log(sd) - kHalfLog2Pi;
}

}  // namespace hsgp
