#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <optional>
#include <regex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "hsgp/basis.hpp"
#include "hsgp/diagnostics.hpp"
#include "hsgp/io.hpp"
#include "hsgp/model.hpp"
#include "hsgp/sampler.hpp"
#include "hsgp/sbc.hpp"
#include "hsgp/simgen.hpp"

namespace hsgp {

struct FitOptions {
  KernelFamily family = KernelFamily::SquaredExponential;
  ModelVariant variant = ModelVariant::Hsgp;
  std::optional<int> M;  // default: min_basis for the declared input range
  double c = 1.25;
  PriorSet priors;
  double s = 0.3;
  SamplerConfig sampler;
};

/// Model specification plus the basis-size bookkeeping used to build it.
struct FitPlan {
  ModelSpec spec;
  InputDomain declared;  // range used by the basis-size heuristic
  int M_min = 0;
};

/// Declared input range: x_lower/x_upper from the metadata if present, else the observed x_tilde range.
[[nodiscard]] inline InputDomain declared_domain(const io::Dataset& data) {
  const auto lo = data.meta.get_double("x_lower");
  const auto hi = data.meta.get_double("x_upper");
  if (lo && hi && *hi > *lo) return {*lo, *hi};
  return {data.x_tilde.minCoeff(), data.x_tilde.maxCoeff()};
}

/// Basis centred on the union of the declared range and the observed x_tilde, L = c * half-width.
[[nodiscard]] inline FitPlan plan_fit(const io::Dataset& data, const FitOptions& opt) {
  FitPlan plan;
  plan.declared = declared_domain(data);
  if (!(plan.declared.range() > 0.0)) throw DataError("x_tilde has zero range");
  plan.M_min = min_basis(opt.family, opt.c, plan.declared.range(), opt.priors.rho.mean);
  const InputDomain dom{std::min(plan.declared.lower, data.x_tilde.minCoeff()),
                        std::max(plan.declared.upper, data.x_tilde.maxCoeff())};
  ModelSpec& spec = plan.spec;
  spec.family = opt.family;
  spec.variant = opt.variant;
  spec.D = data.D();
  spec.basis = make_basis_config(dom, opt.M.value_or(plan.M_min), opt.c);
  spec.center = dom.center();
  spec.priors = opt.priors;
  spec.x_tilde = data.x_tilde;
  spec.s = opt.s;
  spec.validate();
  return plan;
}

struct FitResult {
  FitPlan plan;
  std::vector<std::string> names;  // constrained names; the first primary_count are primary
  int primary_count = 0;
  std::vector<ChainDraws> chains;
  double seconds = 0.0;

  [[nodiscard]] std::vector<Eigen::MatrixXd> draw_matrices() const {
    std::vector<Eigen::MatrixXd> out;
    for (const auto& c : chains) out.push_back(c.draws);
    return out;
  }
  [[nodiscard]] std::vector<std::string> primary_names() const {
    return {names.begin(), names.begin() + primary_count};
  }
  [[nodiscard]] int divergences() const {
    int n = 0;
    for (const auto& c : chains) n += c.divergences();
    return n;
  }
};

[[nodiscard]] inline FitResult fit_plan(const FitPlan& plan, const Eigen::MatrixXd& Y, const SamplerConfig& config) {
  FitResult r;
  r.plan = plan;
  const LatentGpModel model(plan.spec, Y);
  r.names = model.constrained_names();
  r.primary_count = model.layout().primary_size();
  const auto t0 = std::chrono::steady_clock::now();
  r.chains = sample(model, config, model.initial_point());
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

[[nodiscard]] inline FitResult fit_dataset(const io::Dataset& data, const FitOptions& opt) {
  return fit_plan(plan_fit(data, opt), data.Y, opt.sampler);
}

/// Ground truth aligned with parameter names, from x_true and truth.* metadata.
[[nodiscard]] inline std::vector<std::optional<double>> dataset_truths(const io::Dataset& data,
                                                                        const std::vector<std::string>& names) {
  static const std::regex vec_re(R"(^(x|rho|alpha|sigma|mu)\[(\d+)\]$)");
  static const std::regex corr_re(R"(^C\[(\d+),(\d+)\]$)");
  std::vector<std::optional<double>> out;
  out.reserve(names.size());
  for (const auto& n : names) {
    std::smatch m;
    std::optional<double> t;
    if (std::regex_match(n, m, vec_re)) {
      const int idx = std::stoi(m[2].str());
      if (m[1] == "x") {
        if (data.x_true && idx >= 1 && idx <= data.x_true->size()) t = (*data.x_true)[idx - 1];
      } else {
        t = data.meta.get_double("truth." + m[1].str() + "." + m[2].str());
      }
    } else if (std::regex_match(n, m, corr_re)) {
      t = data.meta.get_double("truth.C." + m[1].str() + "." + m[2].str());
    }
    out.push_back(t);
  }
  return out;
}

[[nodiscard]] inline ConvergenceReport report_for(const FitResult& fit, const std::vector<std::optional<double>>& truths = {}) {
  const auto mats = fit.draw_matrices();
  return convergence_report(fit.primary_names(), mats, truths);
}

[[nodiscard]] inline io::CsvTable summary_table(const ConvergenceReport& report) {
  io::CsvTable t;
  t.header = io::summary_columns();
  for (const auto& p : report.parameters) {
    t.rows.push_back({p.name, io::format_double(p.summary.mean), io::format_double(p.summary.sd),
                      io::format_double(p.summary.q5), io::format_double(p.summary.q95), io::format_optional(p.rhat),
                      io::format_optional(p.bulk_ess), io::format_optional(p.tail_ess),
                      io::format_optional(p.summary.bias), io::format_optional(p.summary.rmse)});
  }
  return t;
}

/// theta ~ N(0, 1), y_i ~ N(theta, 1): posterior N(sum y / (n + 1), 1 / (n + 1)).
/// sd_scale != 1 deliberately miscalibrates the analytic posterior.
struct ConjugateNormalProblem {
  using Data = Eigen::VectorXd;
  int n_obs = 10;
  bool use_sampler = false;
  double sd_scale = 1.0;
  int draws = 999;
  SamplerConfig sampler{.iterations = 2000, .warmup = 1000};

  [[nodiscard]] std::vector<std::string> parameter_names() const { return {"theta"}; }

  [[nodiscard]] std::pair<Eigen::VectorXd, Data> simulate(Random& rng) const {
    const double theta = rng.normal();
    Data y(n_obs);
    for (int i = 0; i < n_obs; ++i) y[i] = rng.normal(theta, 1.0);
    return {Eigen::VectorXd::Constant(1, theta), y};
  }

  [[nodiscard]] SbcFit fit(const Data& y, std::uint64_t seed) const {
    const double prec = 1.0 + static_cast<double>(y.size());
    const double mean = y.sum() / prec;
    SbcFit out;
    if (!use_sampler) {
      Random rng(seed);
      const double sd = sd_scale / std::sqrt(prec);
      out.draws.resize(draws, 1);
      for (int i = 0; i < draws; ++i) out.draws(i, 0) = rng.normal(mean, sd);
      return out;
    }
    const FunctionDensity density(1, [mean, prec](const Eigen::VectorXd& q, Eigen::VectorXd& g) {
      g.resize(1);
      g[0] = -prec * (q[0] - mean);
      return -0.5 * prec * (q[0] - mean) * (q[0] - mean);
    });
    SamplerConfig cfg = sampler;
    cfg.seed = seed;
    const auto chain = sample_chain(density, cfg, Eigen::VectorXd::Zero(1));
    out.draws = chain.draws;
    const std::vector<Eigen::VectorXd> cs{chain.draws.col(0)};
    out.rhat = {split_rhat(cs)};
    return out;
  }
};

/// Self-consistent SBC for the latent HSGP: generating priors equal fitting priors,
/// x_tilde uniform on the range and x | x_tilde ~ N(x_tilde, s^2).
struct LatentGpSbcProblem {
  using Data = io::Dataset;
  ScenarioSpec scenario;
  FitOptions fit_options;

  LatentGpSbcProblem(ScenarioSpec sc, FitOptions opt) : scenario(std::move(sc)), fit_options(std::move(opt)) {
    scenario.latent = LatentDraw::UniformMeasurement;
    scenario.mu = fit_options.priors.mu;
    fit_options.priors.rho = scenario.rho;
    fit_options.priors.alpha = scenario.alpha;
    fit_options.priors.sigma = scenario.sigma;
    fit_options.priors.eta = scenario.eta;
    fit_options.s = scenario.s;
  }

  [[nodiscard]] std::vector<std::string> parameter_names() const {
    std::vector<std::string> names;
    for (int i = 1; i <= scenario.N; ++i) names.push_back("x[" + std::to_string(i) + "]");
    for (const char* b : {"rho", "alpha", "sigma", "mu"}) {
      for (int d = 1; d <= scenario.D; ++d) names.push_back(std::string(b) + "[" + std::to_string(d) + "]");
    }
    for (int i = 2; i <= scenario.D; ++i) {
      for (int j = 1; j < i; ++j) names.push_back("C[" + std::to_string(i) + "," + std::to_string(j) + "]");
    }
    return names;
  }

  [[nodiscard]] std::pair<Eigen::VectorXd, Data> simulate(Random& rng) const {
    ScenarioSpec sc = scenario;
    sc.seed = rng.next();
    const SimulatedDataset sim = generate(sc);
    Data data = io::to_dataset(sim, sc);
    const auto truths = dataset_truths(data, parameter_names());
    Eigen::VectorXd truth(static_cast<Eigen::Index>(truths.size()));
    for (std::size_t k = 0; k < truths.size(); ++k) truth[static_cast<Eigen::Index>(k)] = truths[k].value();
    return {truth, std::move(data)};
  }

  [[nodiscard]] SbcFit fit(const Data& data, std::uint64_t seed) const {
    FitOptions opt = fit_options;
    opt.sampler.seed = seed;
    const FitResult r = fit_dataset(data, opt);
    SbcFit out;
    out.draws = r.chains.front().draws.leftCols(r.primary_count);
    const auto report = report_for(r);
    for (const auto& p : report.parameters) out.rhat.push_back(p.rhat);
    return out;
  }
};

static_assert(SbcProblem<ConjugateNormalProblem>);
static_assert(SbcProblem<LatentGpSbcProblem>);

}  // namespace hsgp
