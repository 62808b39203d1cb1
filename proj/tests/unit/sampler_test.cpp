#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include <boost/math/distributions/normal.hpp>

#include "hsgp/sampler.hpp"

using namespace hsgp;

namespace {

// Zero-mean Gaussian with precision matrix P.
struct Gaussian {
  Eigen::MatrixXd precision;
  [[nodiscard]] int dimension() const { return static_cast<int>(precision.rows()); }
  double log_density_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& g) const {
    g = -precision * q;
    return 0.5 * q.dot(g);
  }
};

Gaussian standard_normal(int d) { return {Eigen::MatrixXd::Identity(d, d)}; }

Gaussian correlated(double r) {
  Eigen::MatrixXd S(2, 2);
  S << 1, r, r, 1;
  return {S.inverse()};
}

SamplerConfig config(std::uint64_t seed, int iterations = 2000, int warmup = 1000) {
  SamplerConfig c;
  c.seed = seed;
  c.iterations = iterations;
  c.warmup = warmup;
  return c;
}

}  // namespace

TEST(Leapfrog, ZeroStepIsIdentity) {
  const auto m = standard_normal(3);
  PhasePoint z;
  z.q = Eigen::VectorXd::Constant(3, 0.4);
  z.p = Eigen::VectorXd::Constant(3, -1.1);
  z.lp = m.log_density_gradient(z.q, z.grad);
  const PhasePoint before = z;
  leapfrog(z, 0.0, Eigen::VectorXd::Ones(3), m);
  EXPECT_EQ(z.q, before.q);
  EXPECT_EQ(z.p, before.p);
}

TEST(Leapfrog, EnergyDriftIsSmall) {
  const auto m = standard_normal(1);
  PhasePoint z;
  z.q = Eigen::VectorXd::Constant(1, 1.0);
  z.p = Eigen::VectorXd::Constant(1, 0.5);
  z.lp = m.log_density_gradient(z.q, z.grad);
  const Eigen::VectorXd unit = Eigen::VectorXd::Ones(1);
  const double h0 = hamiltonian(z, unit);
  double worst = 0;
  for (int i = 0; i < 100; ++i) {
    leapfrog(z, 0.01, unit, m);
    worst = std::max(worst, std::abs(hamiltonian(z, unit) - h0));
  }
  EXPECT_LT(worst, 1e-4);
}

TEST(Leapfrog, Reversible) {
  const auto m = correlated(0.7);
  PhasePoint z;
  z.q = Eigen::Vector2d(0.3, -1.2);
  z.p = Eigen::Vector2d(1.0, 0.4);
  z.lp = m.log_density_gradient(z.q, z.grad);
  const Eigen::VectorXd q0 = z.q;
  const Eigen::VectorXd metric = Eigen::Vector2d(1.3, 0.8);
  for (int i = 0; i < 25; ++i) leapfrog(z, 0.1, metric, m);
  z.p = -z.p;
  for (int i = 0; i < 25; ++i) leapfrog(z, 0.1, metric, m);
  EXPECT_LT((z.q - q0).cwiseAbs().maxCoeff(), 1e-10);
}

namespace {

// +-0.05 on the mean of 1000 draws is only ~1.6 Monte Carlo SEs (a quarter of seeds fail even
// for iid draws), so the tolerances are applied to 4 x 2500 pooled draws.
Eigen::MatrixXd pooled_draws(const std::vector<ChainDraws>& chains) {
  Eigen::MatrixXd d(static_cast<Eigen::Index>(chains.size()) * chains.front().draws.rows(), chains.front().draws.cols());
  Eigen::Index row = 0;
  for (const auto& c : chains) {
    d.middleRows(row, c.draws.rows()) = c.draws;
    row += c.draws.rows();
  }
  return d;
}

SamplerConfig pooled_config(std::uint64_t seed) {
  auto cfg = config(seed, 3500, 1000);
  cfg.chains = 4;
  return cfg;
}

}  // namespace

TEST(Sampler, StandardNormalMoments) {
  const auto chains = sample(standard_normal(2), pooled_config(1), Eigen::VectorXd::Zero(2));
  const Eigen::MatrixXd d = pooled_draws(chains);
  ASSERT_EQ(d.rows(), 10000);
  for (int k = 0; k < 2; ++k) {
    const double mean = d.col(k).mean();
    const double sd = std::sqrt((d.col(k).array() - mean).square().sum() / (d.rows() - 1));
    EXPECT_NEAR(mean, 0.0, 0.05);
    EXPECT_NEAR(sd, 1.0, 0.05);
  }
  for (const auto& c : chains) {
    EXPECT_EQ(c.divergences(), 0);
    // In two dimensions the averaged step size overshoots the target (typically 0.90-0.94).
    EXPECT_GE(c.mean_accept_stat(), 0.7);
  }
}

TEST(Sampler, AcceptStatNearTargetInHigherDimension) {
  for (std::uint64_t seed : {1, 2, 3}) {
    const auto chains = sample(standard_normal(100), config(seed), Eigen::VectorXd::Zero(100));
    EXPECT_NEAR(chains.front().mean_accept_stat(), 0.8, 0.1) << "seed " << seed;
    EXPECT_EQ(chains.front().divergences(), 0);
  }
}

TEST(Sampler, CorrelatedGaussianMoments) {
  const auto chains = sample(correlated(0.9), pooled_config(2), Eigen::Vector2d(0.5, -0.5));
  const Eigen::MatrixXd d = pooled_draws(chains);
  const Eigen::RowVectorXd mean = d.colwise().mean();
  const Eigen::MatrixXd c = d.rowwise() - mean;
  const Eigen::MatrixXd cov = c.transpose() * c / static_cast<double>(d.rows() - 1);
  EXPECT_NEAR(mean[0], 0.0, 0.05);
  EXPECT_NEAR(mean[1], 0.0, 0.05);
  EXPECT_NEAR(std::sqrt(cov(0, 0)), 1.0, 0.05);
  EXPECT_NEAR(std::sqrt(cov(1, 1)), 1.0, 0.05);
  EXPECT_NEAR(cov(0, 1) / std::sqrt(cov(0, 0) * cov(1, 1)), 0.9, 0.03);
  for (const auto& ch : chains) {
    EXPECT_EQ(ch.divergences(), 0);
    EXPECT_GE(ch.mean_accept_stat(), 0.7);
  }
}

TEST(Sampler, DeterministicGivenSeed) {
  auto cfg = config(42, 600, 300);
  cfg.chains = 2;
  const auto a = sample(correlated(0.5), cfg, Eigen::VectorXd::Zero(2));
  const auto b = sample(correlated(0.5), cfg, Eigen::VectorXd::Zero(2));
  for (int c = 0; c < 2; ++c) {
    EXPECT_TRUE((a[c].draws.array() == b[c].draws.array()).all());
    EXPECT_EQ(a[c].step_size, b[c].step_size);
  }
  EXPECT_FALSE((a[0].draws.array() == a[1].draws.array()).all());
}

TEST(Sampler, KolmogorovSmirnovAcrossSeeds) {
  const boost::math::normal_distribution<double> N01;
  int failures = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto chains = sample(standard_normal(1), config(seed, 5000, 1000), Eigen::VectorXd::Zero(1));
    std::vector<double> v(chains.front().draws.data(), chains.front().draws.data() + chains.front().draws.size());
    std::sort(v.begin(), v.end());
    const double n = static_cast<double>(v.size());
    double dmax = 0;
    for (std::size_t i = 0; i < v.size(); ++i) {
      const double F = boost::math::cdf(N01, v[i]);
      dmax = std::max({dmax, (i + 1) / n - F, F - i / n});
    }
    if (dmax * std::sqrt(n) > 1.6276) ++failures;  // 1% critical value
    EXPECT_EQ(chains.front().divergences(), 0);
  }
  EXPECT_LE(failures, 2);
}

TEST(Sampler, RejectsInvalidStart) {
  const FunctionDensity bad(1, [](const Eigen::VectorXd&, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Zero(1);
    return -std::numeric_limits<double>::infinity();
  });
  EXPECT_THROW((void)sample(bad, config(1, 20, 10), Eigen::VectorXd::Zero(1)), DomainError);
  EXPECT_THROW((void)sample(standard_normal(2), config(1, 20, 10), Eigen::VectorXd::Zero(3)), DomainError);
  SamplerConfig c;
  c.warmup = c.iterations;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(Sampler, AllWarmupDivergencesIsFatal) {
  // Finite only at the start point's neighbourhood: every trajectory leaves the support.
  const FunctionDensity cliff(1, [](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
    g = Eigen::VectorXd::Constant(1, -1e6 * q[0]);
    return std::abs(q[0]) < 1e-12 ? 0.0 : -std::numeric_limits<double>::infinity();
  });
  SamplerConfig c = config(3, 40, 20);
  EXPECT_THROW((void)sample(cliff, c, Eigen::VectorXd::Zero(1)), NumericalError);
}
