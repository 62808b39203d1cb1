#pragma once

// Dynamic multinomial no-U-turn sampler with a diagonal metric.
//
// Tree building, the generalized U-turn check across sub-trees and the
// windowed warmup schedule follow the conventions of Stan's adaptive
// diag_e NUTS, so step sizes and metrics are comparable with Stan output.

#include <algorithm>
#include <cmath>
#include <concepts>
#include <cstdint>
#include <exception>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hsgp/errors.hpp"
#include "hsgp/random.hpp"

namespace hsgp {

/// A log-density with gradient over R^n. Evaluation must be re-entrant.
template <class M>
concept DifferentiableDensity = requires(const M& m, const Eigen::VectorXd& q, Eigen::VectorXd& g) {
  { m.dimension() } -> std::convertible_to<int>;
  { m.log_density_gradient(q, g) } -> std::convertible_to<double>;
};

/// Optional hook mapping unconstrained draws to the stored representation.
template <class M>
concept WritesConstrained = requires(const M& m, const Eigen::VectorXd& q) {
  { m.write_constrained(q) } -> std::convertible_to<Eigen::VectorXd>;
};

/// Adapts a callable double(const VectorXd&, VectorXd&) to DifferentiableDensity.
template <class Fn>
class FunctionDensity {
 public:
  FunctionDensity(int dim, Fn fn) : dim_(dim), fn_(std::move(fn)) {}
  [[nodiscard]] int dimension() const noexcept { return dim_; }
  double log_density_gradient(const Eigen::VectorXd& q, Eigen::VectorXd& g) const { return fn_(q, g); }

 private:
  int dim_;
  Fn fn_;
};

struct SamplerConfig {
  int iterations = 2000;  // including warmup
  int warmup = 1000;
  int chains = 1;
  double target_accept = 0.8;
  int max_depth = 10;
  std::uint64_t seed = 1;
  double initial_step_size = 1.0;
  double max_delta_h = 1000.0;  // divergence threshold in nats

  void validate() const {
    if (warmup < 0 || !(warmup < iterations)) throw DomainError("warmup must be in [0, iterations)");
    if (chains < 1) throw DomainError("chains must be >= 1");
    if (!(target_accept > 0.0 && target_accept < 1.0)) throw DomainError("target acceptance must lie in (0, 1)");
    if (max_depth < 1) throw DomainError("max tree depth must be >= 1");
    if (!(initial_step_size > 0.0)) throw DomainError("initial step size must be > 0");
  }
};

struct DrawStats {
  double lp = 0.0;
  double accept_stat = 0.0;
  double step_size = 0.0;
  double energy = 0.0;
  int tree_depth = 0;
  int n_leapfrog = 0;
  bool divergent = false;
};

/// Post-warmup output of one chain.
struct ChainDraws {
  Eigen::MatrixXd draws;  // (iterations - warmup) x stored dimension
  std::vector<DrawStats> stats;
  double step_size = 0.0;
  Eigen::VectorXd inv_metric;
  int warmup_divergences = 0;

  [[nodiscard]] int divergences() const {
    return static_cast<int>(std::count_if(stats.begin(), stats.end(), [](const DrawStats& s) { return s.divergent; }));
  }
  [[nodiscard]] double mean_accept_stat() const {
    double acc = 0.0;
    for (const auto& s : stats) acc += s.accept_stat;
    return stats.empty() ? 0.0 : acc / static_cast<double>(stats.size());
  }
};

/// Position, momentum and the cached density/gradient at the position.
struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;  // gradient of the log density at q
  double lp = 0.0;
};

/// Kinetic energy 1/2 p^T M^{-1} p.
[[nodiscard]] inline double kinetic_energy(const Eigen::VectorXd& p, const Eigen::VectorXd& inv_metric) {
  return 0.5 * p.cwiseProduct(inv_metric).dot(p);
}

[[nodiscard]] inline double hamiltonian(const PhasePoint& z, const Eigen::VectorXd& inv_metric) {
  const double h = -z.lp + kinetic_energy(z.p, inv_metric);
  return std::isnan(h) ? std::numeric_limits<double>::infinity() : h;
}

/// One symplectic leapfrog step of size `step` (negative steps integrate backwards).
template <DifferentiableDensity Model>
void leapfrog(PhasePoint& z, double step, const Eigen::VectorXd& inv_metric, const Model& model) {
  z.p += 0.5 * step * z.grad;
  z.q += step * inv_metric.cwiseProduct(z.p);
  z.lp = model.log_density_gradient(z.q, z.grad);
  if (!std::isfinite(z.lp)) z.lp = -std::numeric_limits<double>::infinity();
  z.p += 0.5 * step * z.grad;
}

namespace detail {

// Dual averaging of log step size toward a target acceptance statistic.
class StepSizeAdaptation {
 public:
  explicit StepSizeAdaptation(double delta) : delta_(delta) {}

  void set_mu(double mu) { mu_ = mu; }
  void restart() {
    counter_ = 0;
    s_bar_ = 0.0;
    x_bar_ = 0.0;
  }

  void learn(double& epsilon, double accept_stat) {
    ++counter_;
    accept_stat = std::min(1.0, accept_stat);
    const double eta = 1.0 / (counter_ + t0_);
    s_bar_ = (1.0 - eta) * s_bar_ + eta * (delta_ - accept_stat);
    const double x = mu_ - s_bar_ * std::sqrt(static_cast<double>(counter_)) / gamma_;
    const double x_eta = std::pow(static_cast<double>(counter_), -kappa_);
    x_bar_ = (1.0 - x_eta) * x_bar_ + x_eta * x;
    epsilon = std::exp(x);
  }

  void complete(double& epsilon) const { epsilon = std::exp(x_bar_); }

 private:
  double delta_;
  double mu_ = std::log(10.0);
  double gamma_ = 0.05;
  double kappa_ = 0.75;
  double t0_ = 10.0;
  double counter_ = 0;
  double s_bar_ = 0.0;
  double x_bar_ = 0.0;
};

// Expanding windows (base 25, doubling) between an initial and terminal buffer.
class VarianceAdaptation {
 public:
  VarianceAdaptation(int dim, int num_warmup)
      : num_warmup_(num_warmup), mean_(Eigen::VectorXd::Zero(dim)), m2_(Eigen::VectorXd::Zero(dim)) {
    if (num_warmup_ < 20) {
      init_buffer_ = num_warmup_;
      term_buffer_ = 0;
      base_window_ = 0;
    } else if (init_buffer_ + base_window_ + term_buffer_ > num_warmup_) {
      init_buffer_ = static_cast<int>(0.15 * num_warmup_);
      term_buffer_ = static_cast<int>(0.1 * num_warmup_);
      base_window_ = num_warmup_ - (init_buffer_ + term_buffer_);
    }
    window_size_ = base_window_;
    next_window_ = init_buffer_ + window_size_ - 1;
  }

  // Returns true when the metric has been updated.
  bool learn(Eigen::VectorXd& inv_metric, const Eigen::VectorXd& q) {
    if (num_warmup_ < 20) {
      ++counter_;
      return false;
    }
    if (in_window()) {
      ++n_;
      const Eigen::VectorXd delta = q - mean_;
      mean_ += delta / static_cast<double>(n_);
      m2_ += delta.cwiseProduct(q - mean_);
    }
    if (end_of_window()) {
      compute_next_window();
      const double n = static_cast<double>(n_);
      const Eigen::VectorXd var = m2_ / (n - 1.0);
      inv_metric = (n / (n + 5.0)) * var.array() + 1e-3 * (5.0 / (n + 5.0));
      n_ = 0;
      mean_.setZero();
      m2_.setZero();
      ++counter_;
      return true;
    }
    ++counter_;
    return false;
  }

 private:
  [[nodiscard]] bool in_window() const {
    return counter_ >= init_buffer_ && counter_ < num_warmup_ - term_buffer_ && counter_ != num_warmup_;
  }
  [[nodiscard]] bool end_of_window() const { return counter_ == next_window_ && counter_ != num_warmup_; }
  void compute_next_window() {
    if (next_window_ == num_warmup_ - term_buffer_ - 1) return;
    window_size_ *= 2;
    next_window_ = counter_ + window_size_;
    if (next_window_ != num_warmup_ - term_buffer_ - 1) {
      const int boundary = next_window_ + 2 * window_size_;
      if (boundary >= num_warmup_ - term_buffer_) next_window_ = num_warmup_ - term_buffer_ - 1;
    }
  }

  int num_warmup_;
  int init_buffer_ = 75;
  int term_buffer_ = 50;
  int base_window_ = 25;
  int window_size_ = 25;
  int next_window_ = 0;
  int counter_ = 0;
  long n_ = 0;
  Eigen::VectorXd mean_;  // Welford running mean
  Eigen::VectorXd m2_;
};

inline double log_sum_exp(double a, double b) {
  if (a == -std::numeric_limits<double>::infinity()) return b;
  if (b == -std::numeric_limits<double>::infinity()) return a;
  const double m = std::max(a, b);
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

template <DifferentiableDensity Model>
class Nuts {
 public:
  Nuts(const Model& model, const SamplerConfig& config, Random& rng)
      : model_(model), config_(config), rng_(rng), inv_metric_(Eigen::VectorXd::Ones(model.dimension())) {}

  double step_size = 1.0;

  Eigen::VectorXd& inv_metric() { return inv_metric_; }

  void sample_momentum(PhasePoint& z) {
    for (Eigen::Index i = 0; i < z.p.size(); ++i) z.p[i] = rng_.normal() / std::sqrt(inv_metric_[i]);
  }

  // Doubles or halves the step size until a single step crosses acceptance 0.8.
  void init_step_size(PhasePoint& z) {
    const PhasePoint z_init = z;
    int direction = 0;
    for (int iter = 0; iter < 200; ++iter) {
      z = z_init;
      sample_momentum(z);
      const double h0 = hamiltonian(z, inv_metric_);
      leapfrog(z, step_size, inv_metric_, model_);
      const double delta_h = h0 - hamiltonian(z, inv_metric_);
      if (direction == 0) direction = delta_h > std::log(0.8) ? 1 : -1;
      if (direction == 1 && !(delta_h > std::log(0.8))) break;
      if (direction == -1 && !(delta_h < std::log(0.8))) break;
      step_size = direction == 1 ? 2.0 * step_size : 0.5 * step_size;
      if (step_size > 1e7) throw NumericalError("posterior is improper: step size diverged");
      if (step_size == 0.0) throw NumericalError("no acceptably small step size found");
    }
    z = z_init;
  }

  DrawStats transition(PhasePoint& z_current) {
    PhasePoint z = z_current;
    sample_momentum(z);
    PhasePoint z_fwd = z;
    PhasePoint z_bck = z;
    PhasePoint z_sample = z;
    PhasePoint z_propose = z;

    const Eigen::VectorXd p_sharp = inv_metric_.cwiseProduct(z.p);
    Eigen::VectorXd p_fwd_fwd = z.p, p_sharp_fwd_fwd = p_sharp;
    Eigen::VectorXd p_fwd_bck = z.p, p_sharp_fwd_bck = p_sharp;
    Eigen::VectorXd p_bck_fwd = z.p, p_sharp_bck_fwd = p_sharp;
    Eigen::VectorXd p_bck_bck = z.p, p_sharp_bck_bck = p_sharp;
    Eigen::VectorXd rho = z.p;

    double log_sum_weight = 0.0;
    const double h0 = hamiltonian(z, inv_metric_);
    n_leapfrog_ = 0;
    sum_metro_prob_ = 0.0;
    divergent_ = false;
    int depth = 0;
    const auto n = z.q.size();

    while (depth < config_.max_depth) {
      Eigen::VectorXd rho_fwd = Eigen::VectorXd::Zero(n);
      Eigen::VectorXd rho_bck = Eigen::VectorXd::Zero(n);
      bool valid_subtree = false;
      double log_sum_weight_subtree = -std::numeric_limits<double>::infinity();

      if (rng_.uniform() > 0.5) {
        z = z_fwd;
        rho_bck = rho;
        p_bck_fwd = p_fwd_bck;
        p_sharp_bck_fwd = p_sharp_fwd_bck;
        valid_subtree = build_tree(depth, z, z_propose, p_sharp_fwd_bck, p_sharp_fwd_fwd, rho_fwd, p_fwd_bck, p_fwd_fwd,
                                   h0, 1.0, log_sum_weight_subtree);
        z_fwd = z;
      } else {
        z = z_bck;
        rho_fwd = rho;
        p_fwd_bck = p_bck_fwd;
        p_sharp_fwd_bck = p_sharp_bck_fwd;
        valid_subtree = build_tree(depth, z, z_propose, p_sharp_bck_fwd, p_sharp_bck_bck, rho_bck, p_bck_fwd, p_bck_bck,
                                   h0, -1.0, log_sum_weight_subtree);
        z_bck = z;
      }
      if (!valid_subtree) break;
      ++depth;

      if (log_sum_weight_subtree > log_sum_weight) {
        z_sample = z_propose;
      } else if (rng_.uniform() < std::exp(log_sum_weight_subtree - log_sum_weight)) {
        z_sample = z_propose;
      }
      log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);

      rho = rho_bck + rho_fwd;
      bool persist = criterion(p_sharp_bck_bck, p_sharp_fwd_fwd, rho);
      persist = persist && criterion(p_sharp_bck_bck, p_sharp_fwd_bck, rho_bck + p_fwd_bck);
      persist = persist && criterion(p_sharp_bck_fwd, p_sharp_fwd_fwd, rho_fwd + p_bck_fwd);
      if (!persist) break;
    }

    z_current = z_sample;
    DrawStats stats;
    stats.lp = z_sample.lp;
    stats.accept_stat = n_leapfrog_ > 0 ? sum_metro_prob_ / static_cast<double>(n_leapfrog_) : 0.0;
    stats.step_size = step_size;
    stats.energy = hamiltonian(z_sample, inv_metric_);
    stats.tree_depth = depth;
    stats.n_leapfrog = n_leapfrog_;
    stats.divergent = divergent_;
    return stats;
  }

 private:
  static bool criterion(const Eigen::VectorXd& p_sharp_minus, const Eigen::VectorXd& p_sharp_plus,
                        const Eigen::VectorXd& rho) {
    return p_sharp_plus.dot(rho) > 0.0 && p_sharp_minus.dot(rho) > 0.0;
  }

  bool build_tree(int depth, PhasePoint& z, PhasePoint& z_propose, Eigen::VectorXd& p_sharp_beg, Eigen::VectorXd& p_sharp_end,
                  Eigen::VectorXd& rho, Eigen::VectorXd& p_beg, Eigen::VectorXd& p_end, double h0, double sign,
                  double& log_sum_weight) {
    if (depth == 0) {
      leapfrog(z, sign * step_size, inv_metric_, model_);
      ++n_leapfrog_;
      const double h = hamiltonian(z, inv_metric_);
      if (h - h0 > config_.max_delta_h) divergent_ = true;
      log_sum_weight = log_sum_exp(log_sum_weight, h0 - h);
      sum_metro_prob_ += h0 - h > 0.0 ? 1.0 : std::exp(h0 - h);
      z_propose = z;
      p_sharp_beg = inv_metric_.cwiseProduct(z.p);
      p_sharp_end = p_sharp_beg;
      rho += z.p;
      p_beg = z.p;
      p_end = p_beg;
      return !divergent_;
    }

    const auto n = z.q.size();
    double log_sum_weight_init = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd p_init_end(n), p_sharp_init_end(n), rho_init = Eigen::VectorXd::Zero(n);
    if (!build_tree(depth - 1, z, z_propose, p_sharp_beg, p_sharp_init_end, rho_init, p_beg, p_init_end, h0, sign,
                    log_sum_weight_init)) {
      return false;
    }

    PhasePoint z_propose_final = z;
    double log_sum_weight_final = -std::numeric_limits<double>::infinity();
    Eigen::VectorXd p_final_beg(n), p_sharp_final_beg(n), rho_final = Eigen::VectorXd::Zero(n);
    if (!build_tree(depth - 1, z, z_propose_final, p_sharp_final_beg, p_sharp_end, rho_final, p_final_beg, p_end, h0, sign,
                    log_sum_weight_final)) {
      return false;
    }

    const double log_sum_weight_subtree = log_sum_exp(log_sum_weight_init, log_sum_weight_final);
    log_sum_weight = log_sum_exp(log_sum_weight, log_sum_weight_subtree);
    if (log_sum_weight_final > log_sum_weight_subtree) {
      z_propose = z_propose_final;
    } else if (rng_.uniform() < std::exp(log_sum_weight_final - log_sum_weight_subtree)) {
      z_propose = z_propose_final;
    }

    const Eigen::VectorXd rho_subtree = rho_init + rho_final;
    rho += rho_subtree;
    bool persist = criterion(p_sharp_beg, p_sharp_end, rho_subtree);
    persist = persist && criterion(p_sharp_beg, p_sharp_final_beg, rho_init + p_final_beg);
    persist = persist && criterion(p_sharp_init_end, p_sharp_end, rho_final + p_init_end);
    return persist;
  }

  const Model& model_;
  const SamplerConfig& config_;
  Random& rng_;
  Eigen::VectorXd inv_metric_;
  int n_leapfrog_ = 0;
  double sum_metro_prob_ = 0.0;
  bool divergent_ = false;
};

}  // namespace detail

/// Runs one adaptive chain. `chain` selects the random stream derived from config.seed.
template <DifferentiableDensity Model>
[[nodiscard]] ChainDraws sample_chain(const Model& model, const SamplerConfig& config, const Eigen::VectorXd& init,
                                      int chain = 0) {
  config.validate();
  if (init.size() != model.dimension()) throw DomainError("initial point has the wrong dimension");
  Random rng(derive_seed(config.seed, static_cast<std::uint64_t>(chain)));

  PhasePoint z;
  z.q = init;
  z.p = Eigen::VectorXd::Zero(init.size());
  z.lp = model.log_density_gradient(z.q, z.grad);
  if (!std::isfinite(z.lp) || !z.grad.allFinite()) {
    throw DomainError("initial point has non-finite log density or gradient");
  }

  detail::Nuts<Model> nuts(model, config, rng);
  nuts.step_size = config.initial_step_size;
  nuts.init_step_size(z);
  detail::StepSizeAdaptation step_adapt(config.target_accept);
  step_adapt.set_mu(std::log(10.0 * nuts.step_size));
  step_adapt.restart();
  detail::VarianceAdaptation var_adapt(static_cast<int>(init.size()), config.warmup);

  ChainDraws out;
  const int kept = config.iterations - config.warmup;
  out.stats.reserve(static_cast<std::size_t>(kept));

  auto store = [&](const Eigen::VectorXd& q) -> Eigen::VectorXd {
    if constexpr (WritesConstrained<Model>) {
      return model.write_constrained(q);
    } else {
      return q;
    }
  };

  for (int it = 0; it < config.iterations; ++it) {
    const bool warmup = it < config.warmup;
    DrawStats stats = nuts.transition(z);
    if (warmup) {
      if (stats.divergent) ++out.warmup_divergences;
      step_adapt.learn(nuts.step_size, stats.accept_stat);
      if (var_adapt.learn(nuts.inv_metric(), z.q)) {
        nuts.init_step_size(z);
        step_adapt.set_mu(std::log(10.0 * nuts.step_size));
        step_adapt.restart();
      }
      if (it + 1 == config.warmup) {
        step_adapt.complete(nuts.step_size);
        if (out.warmup_divergences == config.warmup) {
          std::ostringstream msg;
          msg << "every warmup iteration diverged (" << config.warmup << " of " << config.warmup
              << "); final step size " << nuts.step_size << ", log density " << z.lp;
          throw NumericalError(msg.str());
        }
      }
      continue;
    }
    const Eigen::VectorXd row = store(z.q);
    if (out.draws.size() == 0) out.draws.resize(kept, row.size());
    out.draws.row(static_cast<Eigen::Index>(out.stats.size())) = row.transpose();
    out.stats.push_back(stats);
  }
  out.step_size = nuts.step_size;
  out.inv_metric = nuts.inv_metric();
  return out;
}

/// Runs config.chains chains concurrently (one thread per chain) from the same initial point.
template <DifferentiableDensity Model>
[[nodiscard]] std::vector<ChainDraws> sample(const Model& model, const SamplerConfig& config, const Eigen::VectorXd& init) {
  config.validate();
  std::vector<ChainDraws> chains(static_cast<std::size_t>(config.chains));
  std::vector<std::exception_ptr> errors(chains.size());
  if (config.chains == 1) {
    chains[0] = sample_chain(model, config, init, 0);
    return chains;
  }
  std::vector<std::thread> workers;
  for (int c = 0; c < config.chains; ++c) {
    workers.emplace_back([&, c] {
      try {
        chains[static_cast<std::size_t>(c)] = sample_chain(model, config, init, c);
      } catch (...) {
        errors[static_cast<std::size_t>(c)] = std::current_exception();
      }
    });
  }
  for (auto& w : workers) w.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return chains;
}

}  // namespace hsgp
