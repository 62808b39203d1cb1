#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <limits>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <boost/math/distributions/binomial.hpp>

#include "hsgp/diagnostics.hpp"
#include "hsgp/errors.hpp"
#include "hsgp/random.hpp"

namespace hsgp {

/// Number of posterior draws strictly below the true value.
[[nodiscard]] inline int rank_statistic(std::span<const double> draws, double truth) {
  if (draws.empty()) throw DomainError("rank statistic needs at least one draw");
  if (!std::isfinite(truth)) throw DomainError("true value must be finite");
  return static_cast<int>(std::count_if(draws.begin(), draws.end(), [truth](double d) { return d < truth; }));
}

/// Binomial CDF tables for the ECDF evaluation points of J ranks on {0..H}.
/// Point k = 1..H sits at z_k = k / (H + 1); under uniformity the count of
/// ranks below k is Binomial(J, z_k).
class RankEcdfTables {
 public:
  RankEcdfTables(int J, int H) : J_(J), H_(H), cdf_(H, J + 1) {
    if (J < 1 || H < 1) throw DomainError("J and H must be >= 1");
    for (int k = 1; k <= H; ++k) {
      const boost::math::binomial_distribution<double> bin(J, static_cast<double>(k) / (H + 1.0));
      for (int r = 0; r <= J; ++r) cdf_(k - 1, r) = boost::math::cdf(bin, r);
      survival_.emplace_back(J + 2);
      // survival_[k-1][r] = P(X >= r)
      survival_.back()[0] = 1.0;
      for (int r = 1; r <= J; ++r) survival_.back()[r] = boost::math::cdf(boost::math::complement(bin, r - 1));
      survival_.back()[J + 1] = 0.0;
    }
  }

  [[nodiscard]] int J() const noexcept { return J_; }
  [[nodiscard]] int H() const noexcept { return H_; }
  [[nodiscard]] double cdf(int k, int r) const { return cdf_(k - 1, r); }
  [[nodiscard]] double survival(int k, int r) const { return survival_[static_cast<std::size_t>(k - 1)][static_cast<std::size_t>(r)]; }

  /// log gamma = log(2 min_k min{F_k(R_k), P_k(X >= R_k)}), R_k = #{ranks < k}.
  [[nodiscard]] double log_gamma(std::span<const int> ranks) const {
    if (static_cast<int>(ranks.size()) != J_) throw DomainError("rank count differs from J");
    std::vector<int> counts(static_cast<std::size_t>(H_) + 1, 0);
    for (int r : ranks) {
      if (r < 0 || r > H_) throw DomainError("rank outside {0..H}");
      ++counts[static_cast<std::size_t>(r)];
    }
    double worst = 1.0;
    int below = 0;
    for (int k = 1; k <= H_; ++k) {
      below += counts[static_cast<std::size_t>(k - 1)];
      worst = std::min({worst, cdf(k, below), survival(k, below)});
    }
    return std::log(std::min(1.0, 2.0 * worst));
  }

 private:
  int J_;
  int H_;
  Eigen::MatrixXd cdf_;
  std::vector<std::vector<double>> survival_;
};

/// Simulated null distribution of log gamma for uniform ranks.
struct GammaNull {
  int J = 0;
  int H = 0;
  double coverage = 0.95;
  double threshold = 0.0;  // (1 - coverage) quantile of null log gamma
  std::vector<double> samples;
};

[[nodiscard]] inline GammaNull simulate_gamma_null(int J, int H, double coverage = 0.95, int replications = 10000,
                                                   std::uint64_t seed = 0x5bc) {
  if (replications < 100) throw DomainError("null simulation needs at least 100 replications");
  if (!(coverage > 0.0 && coverage <= 1.0)) throw DomainError("coverage must lie in (0, 1]");
  const RankEcdfTables tables(J, H);
  Random rng(derive_seed(seed, (static_cast<std::uint64_t>(J) << 32) ^ static_cast<std::uint64_t>(H)));
  GammaNull null{J, H, coverage, 0.0, {}};
  null.samples.resize(static_cast<std::size_t>(replications));
  std::vector<int> ranks(static_cast<std::size_t>(J));
  std::uniform_int_distribution<int> uniform_rank(0, H);
  for (auto& s : null.samples) {
    for (auto& r : ranks) r = uniform_rank(rng.engine());
    s = tables.log_gamma(ranks);
  }
  null.threshold = coverage >= 1.0 ? -std::numeric_limits<double>::infinity() : quantile(null.samples, 1.0 - coverage);
  return null;
}

struct GammaScore {
  double log_gamma = 0.0;
  double threshold = 0.0;
  bool pass = true;

  [[nodiscard]] double offset() const { return log_gamma - threshold; }
};

/// Uniformity test of J ranks on {0..H} against a simulated null threshold.
[[nodiscard]] inline GammaScore gamma_score(std::span<const int> ranks, int H, const GammaNull& null) {
  if (ranks.size() < 2) throw DomainError("gamma score needs at least two ranks");
  if (null.J != static_cast<int>(ranks.size()) || null.H != H) throw DomainError("null simulation was built for another (J, H)");
  const RankEcdfTables tables(static_cast<int>(ranks.size()), H);
  GammaScore g;
  g.log_gamma = tables.log_gamma(ranks);
  g.threshold = null.threshold;
  g.pass = g.log_gamma >= g.threshold;
  return g;
}

[[nodiscard]] inline GammaScore gamma_score(std::span<const int> ranks, int H, double coverage = 0.95, int replications = 10000) {
  return gamma_score(ranks, H, simulate_gamma_null(static_cast<int>(ranks.size()), H, coverage, replications));
}

/// Simultaneous ECDF bands on the count of ranks below each evaluation point k = 1..H.
struct EcdfBands {
  std::vector<double> z;  // k / (H + 1)
  std::vector<int> lower;
  std::vector<int> upper;
  double pointwise_level = 0.0;  // adjusted two-sided pointwise probability
};

[[nodiscard]] inline EcdfBands ecdf_bands(int J, int H, double coverage = 0.95, int replications = 10000,
                                          std::uint64_t seed = 0x5bc) {
  const RankEcdfTables tables(J, H);
  EcdfBands bands;
  bands.pointwise_level = coverage >= 1.0 ? 0.0 : std::exp(simulate_gamma_null(J, H, coverage, replications, seed).threshold);
  const double half = 0.5 * bands.pointwise_level;
  for (int k = 1; k <= H; ++k) {
    bands.z.push_back(static_cast<double>(k) / (H + 1.0));
    int lo = 0;
    while (lo < J && tables.cdf(k, lo) < half) ++lo;
    int hi = J;
    while (hi > 0 && tables.survival(k, hi) < half) --hi;
    bands.lower.push_back(lo);
    bands.upper.push_back(hi);
  }
  return bands;
}

/// Evenly spaced subset of H rows out of the draws.
[[nodiscard]] inline Eigen::MatrixXd thin_draws(const Eigen::MatrixXd& draws, int H) {
  const auto S = static_cast<int>(draws.rows());
  if (H < 1 || H > S) throw DomainError("cannot thin " + std::to_string(S) + " draws to " + std::to_string(H));
  const int step = S / H;
  Eigen::MatrixXd out(H, draws.cols());
  for (int k = 0; k < H; ++k) out.row(k) = draws.row((k + 1) * step - 1);
  return out;
}

/// Posterior fit of one SBC trial.
struct SbcFit {
  Eigen::MatrixXd draws;                   // S x P, column order = parameter_names()
  std::vector<std::optional<double>> rhat;  // per parameter; empty when not applicable
};

template <class P>
concept SbcProblem = requires(const P& p, Random& rng, const typename P::Data& data, std::uint64_t seed) {
  typename P::Data;
  { p.parameter_names() } -> std::convertible_to<std::vector<std::string>>;
  { p.simulate(rng) } -> std::convertible_to<std::pair<Eigen::VectorXd, typename P::Data>>;
  { p.fit(data, seed) } -> std::convertible_to<SbcFit>;
};

struct SbcOptions {
  int H = 99;
  std::uint64_t seed = 1;
  int workers = 0;  // 0 = HSGP_NUM_WORKERS or hardware concurrency
  int null_replications = 10000;
  double coverage = 0.95;
  double rhat_flag = kRhatRelaxed;
  double flagged_fraction = 0.1;  // trial is flagged when more than this share exceeds rhat_flag
};

/// Per-trial outcome: truth, rank and posterior moments per parameter.
struct SbcRecord {
  int trial = 0;
  int H = 0;
  Eigen::VectorXd truth;
  std::vector<int> ranks;
  Eigen::VectorXd post_mean;
  Eigen::VectorXd post_sd;
  std::vector<std::optional<double>> rhat;
  bool flagged = false;
  std::string error;  // non-empty when the fit failed
};

struct SbcParameterResult {
  std::string name;
  int trials_used = 0;
  GammaScore headline;                // non-flagged, successful trials
  std::optional<GammaScore> with_flagged;  // all successful trials
};

struct SbcResult {
  std::vector<std::string> names;
  std::vector<SbcRecord> records;
  std::vector<SbcParameterResult> parameters;
  int flagged_trials = 0;
  int failed_trials = 0;

  [[nodiscard]] double pass_fraction(std::string_view prefix = "") const {
    int total = 0;
    int passed = 0;
    for (const auto& p : parameters) {
      if (!p.name.starts_with(prefix)) continue;
      ++total;
      passed += p.headline.pass ? 1 : 0;
    }
    return total == 0 ? 0.0 : static_cast<double>(passed) / total;
  }
  [[nodiscard]] bool all_pass() const { return pass_fraction() == 1.0; }
};

/// Worker count from HSGP_NUM_WORKERS, else hardware concurrency.
[[nodiscard]] inline int default_workers() {
  if (const char* env = std::getenv("HSGP_NUM_WORKERS")) {
    const int n = std::atoi(env);
    if (n > 0) return n;
  }
  return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
}

/// Runs `count` independent jobs over a bounded pool; job(i) must not share mutable state.
template <class Job>
void run_parallel(int count, int workers, Job&& job) {
  workers = std::max(1, std::min(workers, count));
  std::atomic<int> next{0};
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(count));
  auto loop = [&] {
    for (int i = next++; i < count; i = next++) {
      try {
        job(i);
      } catch (...) {
        errors[static_cast<std::size_t>(i)] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    loop();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(loop);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Simulation-based calibration over J trials.
template <SbcProblem Problem>
[[nodiscard]] SbcResult run_sbc(const Problem& problem, int J, const SbcOptions& options = {}) {
  if (J < 2) throw DomainError("SBC needs J >= 2 trials");
  SbcResult result;
  result.names = problem.parameter_names();
  const auto P = result.names.size();
  result.records.resize(static_cast<std::size_t>(J));

  run_parallel(J, options.workers > 0 ? options.workers : default_workers(), [&](int j) {
    SbcRecord& rec = result.records[static_cast<std::size_t>(j)];
    rec.trial = j;
    rec.H = options.H;
    Random rng(derive_seed(options.seed, static_cast<std::uint64_t>(2 * j)));
    auto [truth, data] = problem.simulate(rng);
    rec.truth = truth;
    try {
      const SbcFit fit = problem.fit(data, derive_seed(options.seed, static_cast<std::uint64_t>(2 * j + 1)));
      if (fit.draws.cols() != static_cast<Eigen::Index>(P)) throw DomainError("fit returned the wrong parameter count");
      const Eigen::MatrixXd thinned = thin_draws(fit.draws, options.H);
      rec.post_mean = fit.draws.colwise().mean().transpose();
      rec.post_sd.resize(static_cast<Eigen::Index>(P));
      for (std::size_t p = 0; p < P; ++p) {
        const auto col = thinned.col(static_cast<Eigen::Index>(p));
        rec.ranks.push_back(rank_statistic(std::span<const double>(col.data(), static_cast<std::size_t>(col.size())),
                                           truth[static_cast<Eigen::Index>(p)]));
        const auto full = fit.draws.col(static_cast<Eigen::Index>(p));
        rec.post_sd[static_cast<Eigen::Index>(p)] = std::sqrt((full.array() - full.mean()).square().sum() /
                                                              static_cast<double>(std::max<Eigen::Index>(1, full.size() - 1)));
      }
      rec.rhat = fit.rhat;
      if (!fit.rhat.empty()) {
        const auto bad = std::count_if(fit.rhat.begin(), fit.rhat.end(),
                                       [&](const auto& r) { return !r || *r > options.rhat_flag; });
        rec.flagged = static_cast<double>(bad) > options.flagged_fraction * static_cast<double>(fit.rhat.size());
      }
    } catch (const std::exception& e) {
      rec.error = e.what();
      rec.flagged = true;
    }
  });

  std::map<int, GammaNull> nulls;
  auto null_for = [&](int j) -> const GammaNull& {
    auto it = nulls.find(j);
    if (it == nulls.end()) {
      it = nulls.emplace(j, simulate_gamma_null(j, options.H, options.coverage, options.null_replications, options.seed)).first;
    }
    return it->second;
  };

  for (const auto& rec : result.records) {
    if (!rec.error.empty()) ++result.failed_trials;
    else if (rec.flagged) ++result.flagged_trials;
  }
  for (std::size_t p = 0; p < P; ++p) {
    SbcParameterResult pr;
    pr.name = result.names[p];
    std::vector<int> headline;
    std::vector<int> all;
    for (const auto& rec : result.records) {
      if (!rec.error.empty()) continue;
      all.push_back(rec.ranks[p]);
      if (!rec.flagged) headline.push_back(rec.ranks[p]);
    }
    pr.trials_used = static_cast<int>(headline.size());
    if (headline.size() >= 2) {
      pr.headline = gamma_score(headline, options.H, null_for(static_cast<int>(headline.size())));
    } else {
      pr.headline = GammaScore{-std::numeric_limits<double>::infinity(), 0.0, false};
    }
    if (all.size() >= 2 && all.size() != headline.size()) {
      pr.with_flagged = gamma_score(all, options.H, null_for(static_cast<int>(all.size())));
    }
    result.parameters.push_back(std::move(pr));
  }
  return result;
}

}  // namespace hsgp
