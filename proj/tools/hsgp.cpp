// Command-line front end: simulate, fit, sbc, ingest, report.

#include <iostream>

#include <CLI11.hpp>

#include "hsgp/cli.hpp"

namespace cli = hsgp::cli;

int main(int argc, char** argv) {
  CLI::App app{"Latent-input multi-output Hilbert-space GP toolkit"};
  app.set_version_flag("--version", HSGP_VERSION);
  app.require_subcommand(1);

  cli::SimulateArgs sim;
  auto* s = app.add_subcommand("simulate", "Generate a scenario dataset");
  s->add_option("--scenario", sim.scenario, "gp-se, gp-m32, gp-m52, gp-se-wide-rho, periodic-low, periodic-high")
      ->capture_default_str();
  s->add_option("--n", sim.N, "Number of observations")->capture_default_str();
  s->add_option("--d", sim.D, "Number of output dimensions")->capture_default_str();
  s->add_option("--seed", sim.seed)->capture_default_str();
  s->add_option("--out", sim.out, "Output directory")->required();

  cli::FitArgs fit;
  auto* f = app.add_subcommand("fit", "Fit the latent GP model to a dataset");
  f->add_option("--data", fit.data, "Dataset directory")->required();
  f->add_option("--out", fit.out, "Output directory")->required();
  f->add_option("--family", fit.family, "se, m32 or m52")->capture_default_str();
  f->add_option("--variant", fit.variant, "hsgp or exact")->capture_default_str();
  f->add_option("--m", fit.M, "Number of basis functions (default: heuristic minimum)");
  f->add_flag("--force-m", fit.force_m, "Accept M below the heuristic minimum silently");
  f->add_option("--c", fit.c, "Boundary factor")->capture_default_str();
  f->add_option("--priors", fit.priors, "Prior preset: aligned, wide-rho, periodic-high, wide, case-study");
  f->add_option("--s", fit.s, "Measurement sd of x_tilde (default: recorded with the data)");
  f->add_option("--iterations", fit.iterations)->capture_default_str();
  f->add_option("--warmup", fit.warmup)->capture_default_str();
  f->add_option("--chains", fit.chains)->capture_default_str();
  f->add_option("--adapt-delta", fit.target_accept)->capture_default_str();
  f->add_option("--max-depth", fit.max_depth)->capture_default_str();
  f->add_option("--seed", fit.seed)->capture_default_str();
  f->add_flag("--allow-large-exact", fit.allow_large_exact, "Allow the exact GP for N > 200");
  f->add_flag("--strict", fit.strict, "Fail when any R-hat exceeds 1.1");

  cli::SbcArgs sbc;
  auto* b = app.add_subcommand("sbc", "Simulation-based calibration");
  b->add_option("--scenario", sbc.scenario, "A scenario name or 'conjugate'")->capture_default_str();
  b->add_option("--n", sbc.N)->capture_default_str();
  b->add_option("--d", sbc.D)->capture_default_str();
  b->add_option("--trials", sbc.J, "Number of trials J")->capture_default_str();
  b->add_option("--draws-per-rank", sbc.H, "Thinned draws H per trial")->capture_default_str();
  b->add_option("--family", sbc.family, "Fitted family (default: the scenario's)");
  b->add_option("--m", sbc.M);
  b->add_option("--iterations", sbc.iterations)->capture_default_str();
  b->add_option("--warmup", sbc.warmup)->capture_default_str();
  b->add_option("--seed", sbc.seed)->capture_default_str();
  b->add_option("--workers", sbc.workers, "Worker threads (default: HSGP_NUM_WORKERS or all cores)");
  b->add_flag("--conjugate-sampler", sbc.conjugate_sampler, "Fit the conjugate model with NUTS instead of exact draws");
  b->add_option("--out", sbc.out)->required();

  cli::IngestArgs ing;
  auto* g = app.add_subcommand("ingest", "Convert a CSV table into the dataset format");
  g->add_option("--input", ing.input)->required()->check(CLI::ExistingFile);
  g->add_option("--time-col", ing.time_col, "Column holding the measured input")->capture_default_str();
  g->add_option("--genes", ing.genes, "Output columns (default: all others)")->delimiter(',');
  g->add_option("--s", ing.s, "Measurement sd of the time column")->capture_default_str();
  g->add_option("--out", ing.out)->required();

  cli::ReportArgs rep;
  auto* r = app.add_subcommand("report", "Summary tables from one or more fits");
  r->add_option("--fit", rep.fits, "Fit output directory (repeatable)")->required();
  r->add_option("--truth", rep.truth, "Dataset directory with ground truth");
  r->add_flag("--case-study", rep.case_study, "Per-observation posterior vs measured input table");
  r->add_option("--out", rep.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? cli::kExitOk : cli::kExitUsage;
  }

  const cli::Streams io{std::cout, std::cerr};
  return cli::guarded(
      [&] {
        if (*s) return cli::cmd_simulate(sim, io);
        if (*f) return cli::cmd_fit(fit, io);
        if (*b) return cli::cmd_sbc(sbc, io);
        if (*g) return cli::cmd_ingest(ing, io);
        return cli::cmd_report(rep, io);
      },
      std::cerr);
}
