#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "hsgp/io.hpp"
#include "hsgp/pipeline.hpp"
#include "hsgp/sbc.hpp"
#include "hsgp/simgen.hpp"

#ifndef HSGP_VERSION
#define HSGP_VERSION "0.0.0"
#endif

namespace hsgp::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Bad flags or arguments; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Streams {
  std::ostream& out;
  std::ostream& err;
};

/// Records the command, its configuration and the outputs of one run.
class Manifest {
 public:
  Manifest(std::string command, std::uint64_t seed) : command_(std::move(command)), seed_(seed), start_(now()) {}

  void config(const std::string& key, const std::string& value) { config_.emplace_back(key, value); }
  void config(const std::string& key, double value) { config(key, io::format_double(value)); }
  void config(const std::string& key, int value) { config(key, std::to_string(value)); }
  void output(const fs::path& p) { outputs_.push_back(p.filename().string()); }

  void write(const fs::path& dir) const {
    io::Metadata m;
    m.set("command", command_);
    m.set("version", HSGP_VERSION);
    m.set("seed", seed_);
    for (const auto& [k, v] : config_) m.set("config." + k, v);
    std::string outs;
    for (const auto& o : outputs_) outs += (outs.empty() ? "" : ",") + o;
    m.set("outputs", outs);
    m.set("start_time", start_);
    m.set("end_time", now());
    io::write_metadata(dir / "manifest.txt", m);
  }

 private:
  static std::string now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    std::ostringstream s;
    s << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return s.str();
  }

  std::string command_;
  std::uint64_t seed_;
  std::string start_;
  std::vector<std::pair<std::string, std::string>> config_;
  std::vector<std::string> outputs_;
};

[[nodiscard]] inline KernelFamily family_arg(const std::string& name) {
  auto f = parse_family(name);
  if (!f) throw UsageError("unknown kernel family '" + name + "' (expected se, m32 or m52)");
  return *f;
}

[[nodiscard]] inline ScenarioKind scenario_arg(const std::string& name) {
  auto k = parse_scenario(name);
  if (!k) {
    throw UsageError("unknown scenario '" + name +
                     "' (expected gp-se, gp-m32, gp-m52, gp-se-wide-rho, periodic-low or periodic-high)");
  }
  return *k;
}

// ---------------------------------------------------------------- simulate

struct SimulateArgs {
  std::string scenario = "gp-se";
  int N = 20;
  int D = 5;
  std::uint64_t seed = 1;
  fs::path out;
};

inline int cmd_simulate(const SimulateArgs& a, Streams io_) {
  const ScenarioKind kind = scenario_arg(a.scenario);
  if (a.N < 2 || a.D < 1) throw UsageError("--n must be >= 2 and --d >= 1");
  if (a.out.empty()) throw UsageError("--out is required");
  Manifest manifest("simulate", a.seed);
  manifest.config("scenario", a.scenario);
  manifest.config("n", a.N);
  manifest.config("d", a.D);
  const ScenarioSpec spec = make_scenario(kind, a.N, a.D, a.seed);
  const SimulatedDataset sim = generate(spec);
  io::write_simulated(a.out, sim, spec);
  for (auto f : {io::kDataFile, io::kMetaFile, io::kTruthFile}) manifest.output(a.out / f);
  manifest.write(a.out);
  io_.out << "simulated " << a.scenario << ": N=" << a.N << " D=" << a.D << " seed=" << a.seed << " -> " << a.out.string()
          << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- fit

struct FitArgs {
  fs::path data;
  fs::path out;
  std::string family = "se";
  std::string variant = "hsgp";
  std::optional<int> M;
  bool force_m = false;
  double c = 1.25;
  std::optional<std::string> priors;  // preset; default: scenario priors recorded with the data, else "aligned"
  std::optional<double> s;            // default: value recorded with the data, else 0.3
  int iterations = 2000;
  int warmup = 1000;
  int chains = 1;
  double target_accept = 0.8;
  int max_depth = 10;
  std::uint64_t seed = 1;
  bool allow_large_exact = false;
  bool strict = false;
};

inline constexpr int kLargeExactN = 200;

/// Priors recorded next to simulated data (prior.* keys), if complete.
[[nodiscard]] inline std::optional<PriorSet> recorded_priors(const io::Metadata& meta) {
  PriorSet p;
  auto read = [&](const std::string& k, NormalPrior& target) {
    auto m = meta.get_double("prior." + k + ".mean");
    auto s = meta.get_double("prior." + k + ".sd");
    if (!m || !s) return false;
    target = {*m, *s};
    return true;
  };
  if (!read("rho", p.rho) || !read("alpha", p.alpha) || !read("sigma", p.sigma)) return std::nullopt;
  read("mu", p.mu);
  if (auto eta = meta.get_double("prior.eta")) p.eta = *eta;
  return p;
}

inline int cmd_fit(const FitArgs& a, Streams io_) {
  if (a.data.empty() || a.out.empty()) throw UsageError("--data and --out are required");
  FitOptions opt;
  opt.family = family_arg(a.family);
  const auto variant = parse_variant(a.variant);
  if (!variant) throw UsageError("unknown variant '" + a.variant + "' (expected hsgp or exact)");
  opt.variant = *variant;
  opt.M = a.M;
  opt.c = a.c;
  if (a.M && *a.M < 1) throw UsageError("--m must be >= 1");
  opt.sampler.iterations = a.iterations;
  opt.sampler.warmup = a.warmup;
  opt.sampler.chains = a.chains;
  opt.sampler.target_accept = a.target_accept;
  opt.sampler.max_depth = a.max_depth;
  opt.sampler.seed = a.seed;
  try {
    opt.sampler.validate();
  } catch (const DomainError& e) {
    throw UsageError(e.what());
  }

  const io::Dataset data = io::read_dataset(a.data);
  if (a.priors) {
    auto p = prior_preset(*a.priors);
    if (!p) throw UsageError("unknown prior preset '" + *a.priors + "'");
    opt.priors = *p;
  } else if (auto p = recorded_priors(data.meta)) {
    opt.priors = *p;
  }
  opt.s = a.s ? *a.s : data.meta.get_double("s").value_or(0.3);

  if (opt.variant == ModelVariant::Exact && data.N() > kLargeExactN && !a.allow_large_exact) {
    throw UsageError("exact GP with N=" + std::to_string(data.N()) + " > " + std::to_string(kLargeExactN) +
                     " refused; pass --allow-large-exact to override");
  }

  const FitPlan plan = plan_fit(data, opt);
  if (opt.variant == ModelVariant::Hsgp && plan.spec.basis.M < plan.M_min && !a.force_m) {
    io_.err << "warning: M=" << plan.spec.basis.M << " is below the recommended minimum " << plan.M_min
            << " for this family, input range and length-scale prior\n";
  }

  Manifest manifest("fit", a.seed);
  manifest.config("data", fs::absolute(a.data).lexically_normal().string());
  manifest.config("family", a.family);
  manifest.config("variant", a.variant);
  manifest.config("m", plan.spec.basis.M);
  manifest.config("c", a.c);
  manifest.config("iterations", a.iterations);
  manifest.config("warmup", a.warmup);
  manifest.config("chains", a.chains);

  const FitResult fit = fit_plan(plan, data.Y, opt.sampler);
  const auto truths = dataset_truths(data, fit.primary_names());
  const bool has_truth = std::any_of(truths.begin(), truths.end(), [](const auto& t) { return t.has_value(); });
  const auto report = report_for(fit, has_truth ? truths : std::vector<std::optional<double>>{});

  fs::create_directories(a.out);
  io::write_draws_ndjson(a.out / "draws.ndjson", fit.names, fit.chains);
  io::write_csv(a.out / "summary.csv", summary_table(report));
  io::Metadata meta;
  meta.set("data", fs::absolute(a.data).lexically_normal().string());
  meta.set("scenario", data.meta.get("scenario").value_or("none"));
  meta.set("N", data.N());
  meta.set("D", data.D());
  meta.set("family", std::string(to_string(opt.family)));
  meta.set("variant", std::string(to_string(opt.variant)));
  meta.set("M", opt.variant == ModelVariant::Hsgp ? plan.spec.basis.M : 0);
  meta.set("M_min", plan.M_min);
  meta.set("L", plan.spec.basis.L);
  meta.set("c", plan.spec.basis.c);
  meta.set("center", plan.spec.center);
  meta.set("s", opt.s);
  meta.set("chains", a.chains);
  meta.set("divergences", fit.divergences());
  meta.set("rhat_above_1.01", report.count_strict());
  meta.set("rhat_above_1.1", report.count_relaxed());
  for (std::size_t c = 0; c < fit.chains.size(); ++c) meta.set("step_size." + std::to_string(c + 1), fit.chains[c].step_size);
  io::write_metadata(a.out / "fit.meta", meta);
  for (auto f : {"draws.ndjson", "summary.csv", "fit.meta"}) manifest.output(a.out / f);
  manifest.write(a.out);

  io_.out << "fit " << to_string(opt.variant) << "/" << to_string(opt.family) << " M=" << plan.spec.basis.M << ": "
          << report.parameters.size() << " primary parameters, " << fit.divergences() << " divergences, "
          << report.count_strict() << " with R-hat > 1.01, " << report.count_relaxed() << " with R-hat > 1.1\n";
  if (report.count_strict() > 0) {
    io_.err << "warning: " << report.count_strict() << " parameters have R-hat above 1.01\n";
  }
  if (report.count_relaxed() > 0) {
    io_.err << (a.strict ? "error: " : "warning: ") << report.count_relaxed() << " parameters have R-hat above 1.1\n";
    if (a.strict) return kExitFailure;
  }
  return kExitOk;
}

// ---------------------------------------------------------------- sbc

struct SbcArgs {
  std::string scenario = "gp-se";  // or "conjugate"
  int N = 20;
  int D = 5;
  int J = 10;
  int H = 99;
  std::optional<std::string> family;
  std::optional<int> M;
  int iterations = 2000;
  int warmup = 1000;
  std::uint64_t seed = 1;
  int workers = 0;
  bool conjugate_sampler = false;
  fs::path out;
};

template <SbcProblem Problem>
inline SbcResult write_sbc(const Problem& problem, const SbcArgs& a, Manifest& manifest) {
  SbcOptions o;
  o.H = a.H;
  o.seed = a.seed;
  o.workers = a.workers;
  const SbcResult r = run_sbc(problem, a.J, o);
  fs::create_directories(a.out);

  std::ofstream rec(a.out / "sbc_records.ndjson", std::ios::binary);
  for (const auto& t : r.records) {
    for (std::size_t p = 0; p < r.names.size(); ++p) {
      nlohmann::ordered_json j;
      j["trial"] = t.trial + 1;
      j["parameter"] = r.names[p];
      if (t.error.empty()) {
        j["rank"] = t.ranks[p];
        j["H"] = t.H;
        j["truth"] = t.truth[static_cast<Eigen::Index>(p)];
        j["post_mean"] = t.post_mean[static_cast<Eigen::Index>(p)];
        j["post_sd"] = t.post_sd[static_cast<Eigen::Index>(p)];
        if (!t.rhat.empty() && t.rhat[p]) j["rhat"] = *t.rhat[p];
        else j["rhat"] = nullptr;
      } else {
        j["error"] = t.error;
      }
      j["flagged"] = t.flagged;
      rec << j.dump() << '\n';
    }
  }
  rec.close();
  manifest.output(a.out / "sbc_records.ndjson");

  io::CsvTable g;
  g.header = {"name", "trials_used", "log_gamma", "threshold", "offset", "pass", "offset_with_flagged"};
  for (const auto& p : r.parameters) {
    g.rows.push_back({p.name, std::to_string(p.trials_used), io::format_double(p.headline.log_gamma),
                      io::format_double(p.headline.threshold), io::format_double(p.headline.offset()),
                      p.headline.pass ? "1" : "0",
                      p.with_flagged ? io::format_double(p.with_flagged->offset()) : std::string("NA")});
  }
  io::write_csv(a.out / "gamma.csv", g);
  manifest.output(a.out / "gamma.csv");

  io::Metadata m;
  m.set("J", a.J);
  m.set("H", a.H);
  m.set("flagged_trials", r.flagged_trials);
  m.set("failed_trials", r.failed_trials);
  m.set("pass_fraction", r.pass_fraction());
  m.set("pass_fraction_x", r.pass_fraction("x["));
  m.set("all_pass", r.all_pass() ? "true" : "false");
  io::write_metadata(a.out / "sbc.meta", m);
  manifest.output(a.out / "sbc.meta");
  return r;
}

inline int cmd_sbc(const SbcArgs& a, Streams io_) {
  if (a.J < 2) throw UsageError("--trials must be >= 2");
  if (a.H < 1) throw UsageError("--draws-per-rank must be >= 1");
  if (a.out.empty()) throw UsageError("--out is required");
  if (a.iterations - a.warmup < a.H) throw UsageError("post-warmup iterations must be >= H");
  Manifest manifest("sbc", a.seed);
  manifest.config("scenario", a.scenario);
  manifest.config("trials", a.J);
  manifest.config("H", a.H);

  SbcResult r;
  if (a.scenario == "conjugate") {
    ConjugateNormalProblem p;
    p.use_sampler = a.conjugate_sampler;
    p.sampler.iterations = a.iterations;
    p.sampler.warmup = a.warmup;
    r = write_sbc(p, a, manifest);
  } else {
    const ScenarioKind kind = scenario_arg(a.scenario);
    if (a.N < 2 || a.D < 1) throw UsageError("--n must be >= 2 and --d >= 1");
    manifest.config("n", a.N);
    manifest.config("d", a.D);
    FitOptions opt;
    opt.family = a.family ? family_arg(*a.family) : scenario_family(kind);
    opt.M = a.M;
    opt.sampler.iterations = a.iterations;
    opt.sampler.warmup = a.warmup;
    r = write_sbc(LatentGpSbcProblem(make_scenario(kind, a.N, a.D, a.seed), opt), a, manifest);
  }
  manifest.write(a.out);
  io_.out << "sbc " << a.scenario << " J=" << a.J << " H=" << a.H << ": pass_fraction=" << r.pass_fraction()
          << " all_pass=" << (r.all_pass() ? "true" : "false") << " flagged=" << r.flagged_trials
          << " failed=" << r.failed_trials << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- ingest

struct IngestArgs {
  fs::path input;
  std::string time_col = "time";
  std::vector<std::string> genes;  // empty: every other column
  double s = 0.03;
  fs::path out;
};

inline int cmd_ingest(const IngestArgs& a, Streams io_) {
  if (a.input.empty() || a.out.empty()) throw UsageError("--input and --out are required");
  if (!(a.s > 0.0)) throw UsageError("--s must be > 0");
  const io::CsvTable t = io::read_csv(a.input);
  std::set<std::string> seen;
  for (const auto& h : t.header) {
    if (!seen.insert(h).second) throw DataError("duplicate column name '" + h + "'");
  }
  const std::size_t tc = t.require_column(a.time_col);
  std::vector<std::size_t> cols;
  std::vector<std::string> names;
  if (a.genes.empty()) {
    for (std::size_t c = 0; c < t.header.size(); ++c) {
      if (c != tc) {
        cols.push_back(c);
        names.push_back(t.header[c]);
      }
    }
  } else {
    for (const auto& g : a.genes) {
      cols.push_back(t.require_column(g));
      names.push_back(g);
    }
  }
  if (cols.empty()) throw DataError("no output columns selected");
  if (t.rows.size() < 2) throw DataError("need at least two rows");

  std::vector<std::string> problems;
  auto cell = [&](std::size_t r, std::size_t c) {
    auto v = io::parse_double(t.rows[r][c]);
    if (!v || !std::isfinite(*v)) {
      problems.push_back("row " + std::to_string(r + 1) + ", column '" + t.header[c] + "'");
      return 0.0;
    }
    return *v;
  };
  io::Dataset ds;
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  ds.Y.resize(n, static_cast<Eigen::Index>(cols.size()));
  ds.x_tilde.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    ds.x_tilde[i] = cell(static_cast<std::size_t>(i), tc);
    for (std::size_t d = 0; d < cols.size(); ++d) ds.Y(i, static_cast<Eigen::Index>(d)) = cell(static_cast<std::size_t>(i), cols[d]);
  }
  if (!problems.empty()) {
    std::string msg = "missing or non-numeric values at:";
    for (std::size_t k = 0; k < problems.size() && k < 20; ++k) msg += "\n  " + problems[k];
    if (problems.size() > 20) msg += "\n  ... and " + std::to_string(problems.size() - 20) + " more";
    throw DataError(msg);
  }
  const double lo = ds.x_tilde.minCoeff();
  const double hi = ds.x_tilde.maxCoeff();
  if (lo < 0.0 || hi > 1.0) {
    if (!(hi > lo)) throw DataError("time column is constant");
    io_.err << "warning: time column '" << a.time_col << "' spans [" << lo << ", " << hi << "]; rescaled to [0, 1]\n";
    ds.x_tilde = (ds.x_tilde.array() - lo) / (hi - lo);
  }
  ds.meta.set("format", "hsgp-dataset-1");
  ds.meta.set("source", a.input.filename().string());
  ds.meta.set("time_col", a.time_col);
  ds.meta.set("s", a.s);
  ds.meta.set("x_lower", 0.0);
  ds.meta.set("x_upper", 1.0);
  for (std::size_t d = 0; d < names.size(); ++d) ds.meta.set("output." + std::to_string(d + 1), names[d]);

  Manifest manifest("ingest", 0);
  manifest.config("input", a.input.filename().string());
  manifest.config("time_col", a.time_col);
  manifest.config("s", a.s);
  io::write_dataset(a.out, ds);
  manifest.output(a.out / io::kDataFile);
  manifest.output(a.out / io::kMetaFile);
  manifest.write(a.out);
  io_.out << "ingested " << ds.N() << " rows x " << ds.D() << " outputs -> " << a.out.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- report

struct ReportArgs {
  std::vector<fs::path> fits;
  std::optional<fs::path> truth;  // dataset directory; default: the one recorded by the fit
  bool case_study = false;
  fs::path out;
};

struct LoadedFit {
  fs::path dir;
  io::Metadata meta;
  io::DrawFile draws;
  std::vector<std::string> primary;
  ConvergenceReport report;
  std::optional<io::Dataset> data;
};

[[nodiscard]] inline std::string parameter_group(const std::string& name) {
  const auto b = name.find('[');
  return b == std::string::npos ? name : name.substr(0, b);
}

[[nodiscard]] inline LoadedFit load_fit(const fs::path& dir, const std::optional<fs::path>& truth) {
  LoadedFit f;
  f.dir = dir;
  f.meta = io::read_metadata(dir / "fit.meta");
  f.draws = io::read_draws_ndjson(dir / "draws.ndjson");
  if (f.draws.chains.empty()) throw DataError(dir.string() + ": draws file is empty");
  for (const auto& n : f.draws.names) {
    if (n.rfind("beta[", 0) != 0) f.primary.push_back(n);
  }
  const fs::path data_dir = truth ? *truth : fs::path(f.meta.require("data"));
  if (fs::exists(data_dir / io::kDataFile)) f.data = io::read_dataset(data_dir);
  std::vector<std::optional<double>> truths;
  if (f.data) {
    truths = dataset_truths(*f.data, f.primary);
    if (std::none_of(truths.begin(), truths.end(), [](const auto& t) { return t.has_value(); })) truths.clear();
  }
  f.report = convergence_report(f.primary, f.draws.chains, truths);
  return f;
}

inline int cmd_report(const ReportArgs& a, Streams io_) {
  if (a.fits.empty()) throw UsageError("at least one --fit directory is required");
  if (a.out.empty()) throw UsageError("--out is required");
  std::vector<LoadedFit> fits;
  for (const auto& d : a.fits) fits.push_back(load_fit(d, a.truth));
  fs::create_directories(a.out);
  Manifest manifest("report", 0);
  for (std::size_t k = 0; k < a.fits.size(); ++k) manifest.config("fit." + std::to_string(k + 1), a.fits[k].string());

  io::CsvTable params;
  params.header = {"run", "scenario", "N", "D", "family", "variant", "M", "name", "mean", "sd", "bias", "rmse"};
  io::CsvTable groups;
  groups.header = {"scenario", "N", "D", "family", "variant", "M", "group", "count", "mean_abs_bias", "mean_sd", "mean_rmse"};
  for (std::size_t k = 0; k < fits.size(); ++k) {
    const auto& f = fits[k];
    const std::vector<std::string> key = {f.meta.get("scenario").value_or("none"), f.meta.require("N"), f.meta.require("D"),
                                          f.meta.require("family"), f.meta.require("variant"), f.meta.require("M")};
    std::map<std::string, std::array<double, 4>> acc;  // count, |bias|, sd, rmse
    std::vector<std::string> order;
    for (const auto& p : f.report.parameters) {
      std::vector<std::string> row = {std::to_string(k + 1)};
      row.insert(row.end(), key.begin(), key.end());
      row.insert(row.end(), {p.name, io::format_double(p.summary.mean), io::format_double(p.summary.sd_pop),
                             io::format_optional(p.summary.bias), io::format_optional(p.summary.rmse)});
      params.rows.push_back(std::move(row));
      const auto g = parameter_group(p.name);
      if (!acc.contains(g)) order.push_back(g);
      auto& a4 = acc[g];
      a4[0] += 1;
      a4[1] += p.summary.bias ? std::abs(*p.summary.bias) : NAN;
      a4[2] += p.summary.sd_pop;
      a4[3] += p.summary.rmse ? *p.summary.rmse : NAN;
    }
    for (const auto& g : order) {
      const auto& a4 = acc[g];
      std::vector<std::string> row = key;
      row.insert(row.end(), {g, std::to_string(static_cast<int>(a4[0])), io::format_double(a4[1] / a4[0]),
                             io::format_double(a4[2] / a4[0]), io::format_double(a4[3] / a4[0])});
      groups.rows.push_back(std::move(row));
    }
  }
  io::write_csv(a.out / "report_parameters.csv", params);
  io::write_csv(a.out / "report_groups.csv", groups);
  manifest.output(a.out / "report_parameters.csv");
  manifest.output(a.out / "report_groups.csv");

  if (a.case_study) {
    const auto& f = fits.front();
    if (!f.data) throw DataError("case-study report needs the fitted dataset");
    io::CsvTable cs;
    cs.header = {"cell", "x_tilde", "posterior_mean", "difference"};
    for (int i = 0; i < f.data->N(); ++i) {
      const std::string name = "x[" + std::to_string(i + 1) + "]";
      const auto it = std::find_if(f.report.parameters.begin(), f.report.parameters.end(),
                                   [&](const auto& p) { return p.name == name; });
      if (it == f.report.parameters.end()) throw DataError("draws have no column '" + name + "'");
      // x is fitted on the dataset's scale; the reported difference is posterior minus prior centre
      cs.rows.push_back({std::to_string(i + 1), io::format_double(f.data->x_tilde[i]), io::format_double(it->summary.mean),
                         io::format_double(it->summary.mean - f.data->x_tilde[i])});
    }
    io::write_csv(a.out / "case_study.csv", cs);
    manifest.output(a.out / "case_study.csv");
  }

  if (fits.size() >= 2) {
    const auto& f1 = fits[0];
    const auto& f2 = fits[1];
    io::CsvTable cmp;
    cmp.header = {"name", "mean_a", "mean_b", "difference"};
    for (const auto& p : f1.report.parameters) {
      const auto it = std::find_if(f2.report.parameters.begin(), f2.report.parameters.end(),
                                   [&](const auto& q) { return q.name == p.name; });
      if (it == f2.report.parameters.end()) continue;
      cmp.rows.push_back({p.name, io::format_double(p.summary.mean), io::format_double(it->summary.mean),
                          io::format_double(p.summary.mean - it->summary.mean)});
    }
    io::write_csv(a.out / "comparison.csv", cmp);
    manifest.output(a.out / "comparison.csv");
  }
  manifest.write(a.out);
  io_.out << "report: " << fits.size() << " run(s) -> " << a.out.string() << "\n";
  return kExitOk;
}

/// Runs a command, mapping exceptions to exit codes and messages on err.
template <class Fn>
int guarded(Fn&& fn, std::ostream& err) {
  try {
    return fn();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace hsgp::cli
