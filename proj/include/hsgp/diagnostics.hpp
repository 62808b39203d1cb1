#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include "hsgp/errors.hpp"

namespace hsgp {

using ChainSet = std::vector<Eigen::VectorXd>;

/// Splits every chain in half; the middle draw of an odd-length chain is dropped.
[[nodiscard]] inline ChainSet split_chains(std::span<const Eigen::VectorXd> chains) {
  ChainSet out;
  out.reserve(2 * chains.size());
  for (const auto& c : chains) {
    const auto n = c.size();
    const auto half = n / 2;
    out.emplace_back(c.head(half));
    out.emplace_back(c.tail(half));
  }
  return out;
}

/// Inverse-normal transform of pooled fractional ranks, (r - 3/8) / (S + 1/4), ties averaged.
[[nodiscard]] inline ChainSet rank_normalize(std::span<const Eigen::VectorXd> chains) {
  std::vector<std::pair<double, std::size_t>> pooled;
  for (std::size_t c = 0; c < chains.size(); ++c) {
    for (Eigen::Index i = 0; i < chains[c].size(); ++i) pooled.emplace_back(chains[c][i], pooled.size());
  }
  const std::size_t total = pooled.size();
  std::vector<double> ranks(total);
  std::vector<std::size_t> order(total);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return pooled[a].first < pooled[b].first; });
  for (std::size_t i = 0; i < total;) {
    std::size_t j = i;
    while (j + 1 < total && pooled[order[j + 1]].first == pooled[order[i]].first) ++j;
    const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = avg;
    i = j + 1;
  }
  const boost::math::normal_distribution<double> std_normal;
  const double s = static_cast<double>(total);
  ChainSet out;
  std::size_t k = 0;
  for (const auto& c : chains) {
    Eigen::VectorXd z(c.size());
    for (Eigen::Index i = 0; i < c.size(); ++i, ++k) z[i] = boost::math::quantile(std_normal, (ranks[k] - 0.375) / (s + 0.25));
    out.push_back(std::move(z));
  }
  return out;
}

namespace detail {

inline bool degenerate(std::span<const Eigen::VectorXd> chains) {
  bool first = true;
  double ref = 0.0;
  bool varying = false;
  for (const auto& c : chains) {
    if (!c.allFinite()) return true;
    for (Eigen::Index i = 0; i < c.size(); ++i) {
      if (first) {
        ref = c[i];
        first = false;
      } else if (c[i] != ref) {
        varying = true;
      }
    }
  }
  return first || !varying;
}

inline double sample_variance(const Eigen::VectorXd& v) {
  const double m = v.mean();
  return (v.array() - m).square().sum() / static_cast<double>(v.size() - 1);
}

inline void require_shape(std::span<const Eigen::VectorXd> chains) {
  if (chains.empty()) throw DomainError("no chains supplied");
  for (const auto& c : chains) {
    if (c.size() != chains.front().size()) throw DomainError("chains must have equal length");
  }
}

}  // namespace detail

/// Classic potential scale reduction on the given (already split) chains.
[[nodiscard]] inline std::optional<double> rhat_basic(std::span<const Eigen::VectorXd> chains) {
  detail::require_shape(chains);
  if (chains.size() < 2 || chains.front().size() < 2 || detail::degenerate(chains)) return std::nullopt;
  const auto m = chains.size();
  const double n = static_cast<double>(chains.front().size());
  Eigen::VectorXd means(m), vars(m);
  for (std::size_t c = 0; c < m; ++c) {
    means[c] = chains[c].mean();
    vars[c] = detail::sample_variance(chains[c]);
  }
  const double var_between = n * detail::sample_variance(means);
  const double var_within = vars.mean();
  if (!(var_within > 0.0)) return std::nullopt;
  return std::sqrt((var_between / var_within + n - 1.0) / n);
}

/// Rank-normalized split-Rhat. Undefined (nullopt) for constant or non-finite draws.
[[nodiscard]] inline std::optional<double> split_rhat(std::span<const Eigen::VectorXd> chains) {
  detail::require_shape(chains);
  if (chains.front().size() < 8) throw DomainError("split-Rhat needs at least 4 draws per split");
  if (detail::degenerate(chains)) return std::nullopt;
  const auto splits = split_chains(chains);
  return rhat_basic(rank_normalize(splits));
}

/// Effective sample size by Geyer's initial monotone sequence on the given chains.
[[nodiscard]] inline std::optional<double> ess_basic(std::span<const Eigen::VectorXd> chains) {
  detail::require_shape(chains);
  if (chains.front().size() < 4 || detail::degenerate(chains)) return std::nullopt;
  const auto m = chains.size();
  const auto n = chains.front().size();
  const double nd = static_cast<double>(n);

  std::vector<Eigen::VectorXd> centered(m);
  Eigen::VectorXd chain_mean(m), chain_var(m);
  for (std::size_t c = 0; c < m; ++c) {
    chain_mean[c] = chains[c].mean();
    centered[c] = chains[c].array() - chain_mean[c];
    chain_var[c] = centered[c].squaredNorm() / nd * nd / (nd - 1.0);
  }
  auto mean_acov = [&](Eigen::Index lag) {
    double acc = 0.0;
    for (std::size_t c = 0; c < m; ++c) acc += centered[c].head(n - lag).dot(centered[c].tail(n - lag)) / nd;
    return acc / static_cast<double>(m);
  };
  const double mean_var = chain_var.mean();
  double var_plus = mean_var * (nd - 1.0) / nd;
  if (m > 1) var_plus += detail::sample_variance(chain_mean);
  if (!(var_plus > 0.0)) return std::nullopt;

  std::vector<double> rho(static_cast<std::size_t>(n), 0.0);
  Eigen::Index t = 0;
  double rho_even = 1.0;
  rho[0] = rho_even;
  double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
  rho[1] = rho_odd;
  while (t < n - 5 && !std::isnan(rho_even + rho_odd) && rho_even + rho_odd > 0.0) {
    t += 2;
    rho_even = 1.0 - (mean_var - mean_acov(t)) / var_plus;
    rho_odd = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
    if (rho_even + rho_odd >= 0.0) {
      rho[static_cast<std::size_t>(t)] = rho_even;
      rho[static_cast<std::size_t>(t + 1)] = rho_odd;
    }
  }
  const auto max_t = static_cast<std::size_t>(t);
  if (rho_even > 0.0) rho[max_t] = rho_even;

  // Geyer's initial monotone sequence.
  for (std::size_t k = 2; k + 2 <= max_t; k += 2) {
    if (rho[k] + rho[k + 1] > rho[k - 2] + rho[k - 1]) {
      rho[k] = 0.5 * (rho[k - 2] + rho[k - 1]);
      rho[k + 1] = rho[k];
    }
  }
  const double total = static_cast<double>(m) * nd;
  double tau = -1.0 + rho[max_t];
  for (std::size_t k = 0; k < max_t; ++k) tau += 2.0 * rho[k];
  tau = std::max(tau, 1.0 / std::log10(total));
  return total / tau;
}

enum class EssKind { Bulk, Tail };

/// Sample quantile with linear interpolation between order statistics (type 7).
[[nodiscard]] inline double quantile(std::vector<double> values, double prob) {
  if (values.empty()) throw DomainError("quantile of empty sample");
  std::sort(values.begin(), values.end());
  const double h = (static_cast<double>(values.size()) - 1.0) * prob;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const auto hi = std::min(lo + 1, values.size() - 1);
  return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

namespace detail {

inline std::vector<double> pooled(std::span<const Eigen::VectorXd> chains) {
  std::vector<double> all;
  for (const auto& c : chains) all.insert(all.end(), c.data(), c.data() + c.size());
  return all;
}

}  // namespace detail

/// Bulk ESS (rank-normalized split chains) or tail ESS (minimum over the 5% and
/// 95% exceedance indicators of the split chains).
[[nodiscard]] inline std::optional<double> ess(std::span<const Eigen::VectorXd> chains, EssKind kind) {
  detail::require_shape(chains);
  if (chains.front().size() < 8) throw DomainError("ESS needs at least 4 draws per split");
  if (detail::degenerate(chains)) return std::nullopt;
  const auto splits = split_chains(chains);
  if (kind == EssKind::Bulk) return ess_basic(rank_normalize(splits));
  const auto all = detail::pooled(splits);
  std::optional<double> best;
  for (double prob : {0.05, 0.95}) {
    const double q = quantile(all, prob);
    ChainSet indicators;
    for (const auto& c : splits) indicators.emplace_back((c.array() <= q).cast<double>());
    const auto e = ess_basic(indicators);
    if (!e) return std::nullopt;
    best = best ? std::min(*best, *e) : *e;
  }
  return best;
}

/// Location, spread and recovery error of one scalar's draws.
struct PosteriorSummary {
  double mean = 0.0;
  double sd = 0.0;      // sample sd (n - 1)
  double sd_pop = 0.0;  // population sd (n), used in rmse^2 = bias^2 + sd_pop^2
  double q5 = 0.0;
  double q95 = 0.0;
  std::optional<double> bias;
  std::optional<double> rmse;
};

[[nodiscard]] inline PosteriorSummary summarize(std::span<const double> draws, std::optional<double> truth = std::nullopt) {
  if (draws.empty()) throw DomainError("cannot summarize an empty draw set");
  PosteriorSummary s;
  const double n = static_cast<double>(draws.size());
  s.mean = std::accumulate(draws.begin(), draws.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : draws) ss += (v - s.mean) * (v - s.mean);
  s.sd_pop = std::sqrt(ss / n);
  s.sd = draws.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
  std::vector<double> v(draws.begin(), draws.end());
  s.q5 = quantile(v, 0.05);
  s.q95 = quantile(v, 0.95);
  if (truth) {
    s.bias = s.mean - *truth;
    s.rmse = std::sqrt(*s.bias * *s.bias + s.sd_pop * s.sd_pop);
  }
  return s;
}

inline constexpr double kRhatStrict = 1.01;
inline constexpr double kRhatRelaxed = 1.1;

struct ParameterDiagnostics {
  std::string name;
  PosteriorSummary summary;
  std::optional<double> rhat;
  std::optional<double> bulk_ess;
  std::optional<double> tail_ess;

  [[nodiscard]] bool exceeds_strict() const { return !rhat || *rhat > kRhatStrict; }
  [[nodiscard]] bool exceeds_relaxed() const { return !rhat || *rhat > kRhatRelaxed; }
};

struct ConvergenceReport {
  std::vector<ParameterDiagnostics> parameters;

  [[nodiscard]] int count_strict() const {
    return static_cast<int>(std::count_if(parameters.begin(), parameters.end(), [](const auto& p) { return p.exceeds_strict(); }));
  }
  [[nodiscard]] int count_relaxed() const {
    return static_cast<int>(std::count_if(parameters.begin(), parameters.end(), [](const auto& p) { return p.exceeds_relaxed(); }));
  }
};

/// Diagnostics for the first names.size() columns of every chain's draw matrix.
/// truths, when non-empty, must align with names.
[[nodiscard]] inline ConvergenceReport convergence_report(const std::vector<std::string>& names,
                                                          std::span<const Eigen::MatrixXd> chain_draws,
                                                          std::span<const std::optional<double>> truths = {}) {
  if (chain_draws.empty()) throw DomainError("no chains supplied");
  if (!truths.empty() && truths.size() != names.size()) throw DomainError("truth vector must align with names");
  ConvergenceReport report;
  report.parameters.reserve(names.size());
  for (std::size_t k = 0; k < names.size(); ++k) {
    ChainSet chains;
    for (const auto& m : chain_draws) chains.emplace_back(m.col(static_cast<Eigen::Index>(k)));
    ParameterDiagnostics p;
    p.name = names[k];
    const auto all = detail::pooled(chains);
    p.summary = summarize(all, truths.empty() ? std::nullopt : truths[k]);
    if (chains.front().size() >= 8) {
      p.rhat = split_rhat(chains);
      p.bulk_ess = ess(chains, EssKind::Bulk);
      p.tail_ess = ess(chains, EssKind::Tail);
    }
    report.parameters.push_back(std::move(p));
  }
  return report;
}

}  // namespace hsgp
