#include <filesystem>
#include <fstream>
#include <sstream>

#include <gtest/gtest.h>

#include "hsgp/cli.hpp"

using namespace hsgp;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("hsgp_cli_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

struct Run {
  int code;
  std::string out;
  std::string err;
};

template <class Fn>
Run run(Fn&& fn) {
  std::ostringstream out, err;
  const cli::Streams io{out, err};
  const int code = cli::guarded([&] { return fn(io); }, err);
  return {code, out.str(), err.str()};
}

Run simulate(const fs::path& out, const std::string& scenario = "gp-se", int n = 20, int d = 5) {
  cli::SimulateArgs a;
  a.scenario = scenario;
  a.N = n;
  a.D = d;
  a.out = out;
  return run([&](cli::Streams io) { return cli::cmd_simulate(a, io); });
}

cli::FitArgs quick_fit(const fs::path& data, const fs::path& out) {
  cli::FitArgs a;
  a.data = data;
  a.out = out;
  a.iterations = 300;
  a.warmup = 150;
  return a;
}

}  // namespace

TEST(CliSimulate, WritesDatasetDeterministically) {
  const auto a = temp_dir("sim_a"), b = temp_dir("sim_b");
  ASSERT_EQ(simulate(a).code, 0);
  ASSERT_EQ(simulate(b).code, 0);
  const auto ds = io::read_dataset(a);
  EXPECT_EQ(ds.N(), 20);
  EXPECT_EQ(ds.D(), 5);
  for (auto f : {"data.csv", "data.meta", "truth.csv"}) EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  EXPECT_TRUE(fs::exists(a / "manifest.txt"));
}

TEST(CliSimulate, UnknownScenarioIsUsageError) {
  const auto r = simulate(temp_dir("sim_bad"), "gp-rq");
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("unknown scenario"), std::string::npos);
}

TEST(CliSimulate, PeriodicHighRecordsPrior) {
  const auto d = temp_dir("sim_ph");
  ASSERT_EQ(simulate(d, "periodic-high").code, 0);
  EXPECT_EQ(io::read_metadata(d / "data.meta").require("prior.rho.mean"), "0.5");
}

TEST(CliFit, SummaryHasPrimaryRowsAndWarnsOnSmallM) {
  const auto data = temp_dir("fit_data"), out = temp_dir("fit_out");
  ASSERT_EQ(simulate(data).code, 0);
  auto a = quick_fit(data, out);
  a.M = 4;
  const auto r = run([&](cli::Streams io) { return cli::cmd_fit(a, io); });
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.err.find("below the recommended minimum 22"), std::string::npos);
  const auto t = io::read_csv(out / "summary.csv");
  EXPECT_EQ(t.header, io::summary_columns());
  EXPECT_EQ(t.rows.size(), 20u + 3 * 5 + 5 + 10);
  const auto draws = io::read_draws_ndjson(out / "draws.ndjson");
  EXPECT_EQ(draws.chains.front().rows(), 150);
  EXPECT_EQ(io::read_metadata(out / "fit.meta").require("M"), "4");
}

TEST(CliFit, DefaultMIsHeuristicMinimum) {
  const auto data = temp_dir("fitm_data"), out = temp_dir("fitm_out");
  ASSERT_EQ(simulate(data).code, 0);
  auto a = quick_fit(data, out);
  const auto r = run([&](cli::Streams io) { return cli::cmd_fit(a, io); });
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.err.find("below the recommended"), std::string::npos);
  EXPECT_EQ(io::read_metadata(out / "fit.meta").require("M"), "22");
}

TEST(CliFit, LargeExactIsRefused) {
  const auto data = temp_dir("big_data");
  ASSERT_EQ(simulate(data, "periodic-low", 500, 1).code, 0);
  auto a = quick_fit(data, temp_dir("big_out"));
  a.variant = "exact";
  const auto r = run([&](cli::Streams io) { return cli::cmd_fit(a, io); });
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("--allow-large-exact"), std::string::npos);
}

TEST(CliFit, BadFlagsAreUsageErrors) {
  const auto data = temp_dir("flags_data");
  ASSERT_EQ(simulate(data).code, 0);
  auto a = quick_fit(data, temp_dir("flags_out"));
  a.family = "rq";
  EXPECT_EQ(run([&](cli::Streams io) { return cli::cmd_fit(a, io); }).code, cli::kExitUsage);
  a = quick_fit(data, temp_dir("flags_out"));
  a.priors = "nope";
  EXPECT_EQ(run([&](cli::Streams io) { return cli::cmd_fit(a, io); }).code, cli::kExitUsage);
  a = quick_fit(temp_dir("missing"), temp_dir("flags_out"));
  EXPECT_EQ(run([&](cli::Streams io) { return cli::cmd_fit(a, io); }).code, cli::kExitFailure);
}

TEST(CliSbc, ConjugateSelfTestPasses) {
  cli::SbcArgs a;
  a.scenario = "conjugate";
  a.J = 200;
  a.out = temp_dir("sbc_conj");
  const auto r = run([&](cli::Streams io) { return cli::cmd_sbc(a, io); });
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(io::read_metadata(a.out / "sbc.meta").require("all_pass"), "true");
}

TEST(CliSbc, TwoTrialSmokeRunWritesWellFormedFiles) {
  cli::SbcArgs a;
  a.scenario = "gp-se";
  a.N = 8;
  a.D = 2;
  a.J = 2;
  a.H = 19;
  a.iterations = 200;
  a.warmup = 100;
  a.workers = 1;
  a.out = temp_dir("sbc_smoke");
  const auto r = run([&](cli::Streams io) { return cli::cmd_sbc(a, io); });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto g = io::read_csv(a.out / "gamma.csv");
  EXPECT_EQ(g.rows.size(), 8u + 4 * 2 + 1);
  std::ifstream in(a.out / "sbc_records.ndjson");
  std::string line;
  int lines = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    EXPECT_TRUE(j.contains("trial") && j.contains("parameter"));
    ++lines;
  }
  EXPECT_EQ(lines, 2 * 17);
}

TEST(CliIngest, CaseStudyShape) {
  const auto dir = temp_dir("ingest_in");
  fs::create_directories(dir);
  {
    std::ofstream csv(dir / "cells.csv");
    csv << "time";
    for (int g = 1; g <= 12; ++g) csv << ",gene" << g;
    csv << "\n";
    Random rng(1);
    for (int i = 0; i < 960; ++i) {
      csv << io::format_double(rng.uniform());
      for (int g = 0; g < 12; ++g) csv << "," << io::format_double(rng.normal());
      csv << "\n";
    }
  }
  cli::IngestArgs a;
  a.input = dir / "cells.csv";
  a.out = temp_dir("ingest_out");
  const auto r = run([&](cli::Streams io) { return cli::cmd_ingest(a, io); });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto ds = io::read_dataset(a.out);
  EXPECT_EQ(ds.N(), 960);
  EXPECT_EQ(ds.D(), 12);
  EXPECT_EQ(ds.meta.require_double("s"), 0.03);
  EXPECT_TRUE(r.err.empty());
}

TEST(CliIngest, RescalesAndRejectsBadInput) {
  const auto dir = temp_dir("ingest_bad");
  fs::create_directories(dir);
  std::ofstream(dir / "hours.csv") << "t,a,b\n2,1,1\n12,2,2\n7,3,3\n";
  cli::IngestArgs a;
  a.input = dir / "hours.csv";
  a.time_col = "t";
  a.out = temp_dir("ingest_bad_out");
  auto r = run([&](cli::Streams io) { return cli::cmd_ingest(a, io); });
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.err.find("rescaled"), std::string::npos);
  const auto ds = io::read_dataset(a.out);
  EXPECT_DOUBLE_EQ(ds.x_tilde[0], 0.0);
  EXPECT_DOUBLE_EQ(ds.x_tilde[1], 1.0);
  EXPECT_DOUBLE_EQ(ds.x_tilde[2], 0.5);

  std::ofstream(dir / "dup.csv") << "t,a,a\n0.1,1,1\n0.2,2,2\n";
  a.input = dir / "dup.csv";
  r = run([&](cli::Streams io) { return cli::cmd_ingest(a, io); });
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("duplicate column"), std::string::npos);

  std::ofstream(dir / "nan.csv") << "t,a,b\n0.1,1,NaN\n0.2,,2\n";
  a.input = dir / "nan.csv";
  r = run([&](cli::Streams io) { return cli::cmd_ingest(a, io); });
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("row 1, column 'b'"), std::string::npos);
  EXPECT_NE(r.err.find("row 2, column 'a'"), std::string::npos);
}

TEST(CliReport, DrawsEqualToTruthGiveZeroBias) {
  const auto data = temp_dir("rep_data");
  ASSERT_EQ(simulate(data, "gp-se", 6, 2).code, 0);
  const auto ds = io::read_dataset(data);
  // Hand-built fit directory whose every draw equals the truth.
  const auto fitdir = temp_dir("rep_fit");
  fs::create_directories(fitdir);
  const std::vector<std::string> names = {"x[1]", "x[2]", "x[3]", "x[4]", "x[5]", "x[6]", "rho[1]", "rho[2]", "C[2,1]"};
  const auto truths = dataset_truths(ds, names);
  std::vector<ChainDraws> chains(1);
  chains[0].draws.resize(20, static_cast<Eigen::Index>(names.size()));
  chains[0].stats.resize(20);
  for (std::size_t k = 0; k < names.size(); ++k) chains[0].draws.col(static_cast<Eigen::Index>(k)).setConstant(*truths[k]);
  io::write_draws_ndjson(fitdir / "draws.ndjson", names, chains);
  io::Metadata meta;
  for (auto [k, v] : {std::pair{"data", fs::absolute(data).string()}, {"scenario", "gp-se"}, {"N", "6"}, {"D", "2"},
                      {"family", "se"}, {"variant", "hsgp"}, {"M", "7"}}) {
    meta.set(k, v);
  }
  io::write_metadata(fitdir / "fit.meta", meta);

  cli::ReportArgs a;
  a.fits = {fitdir, fitdir};
  a.case_study = true;
  a.out = temp_dir("rep_out");
  const auto r = run([&](cli::Streams io) { return cli::cmd_report(a, io); });
  ASSERT_EQ(r.code, 0) << r.err;
  const auto groups = io::read_csv(a.out / "report_groups.csv");
  const auto col = groups.require_column("mean_abs_bias");
  for (const auto& row : groups.rows) EXPECT_NEAR(io::parse_double(row[col]).value(), 0.0, 1e-12);
  const auto cs = io::read_csv(a.out / "case_study.csv");
  EXPECT_EQ(cs.header, (std::vector<std::string>{"cell", "x_tilde", "posterior_mean", "difference"}));
  EXPECT_EQ(cs.rows.size(), 6u);
  const auto cmp = io::read_csv(a.out / "comparison.csv");
  for (const auto& row : cmp.rows) EXPECT_EQ(io::parse_double(row[3]).value(), 0.0);
}

TEST(CliReport, MissingMetadataColumnIsNamed) {
  const auto fitdir = temp_dir("rep_bad");
  fs::create_directories(fitdir);
  std::vector<ChainDraws> chains(1);
  chains[0].draws = Eigen::MatrixXd::Zero(10, 1);
  chains[0].stats.resize(10);
  io::write_draws_ndjson(fitdir / "draws.ndjson", {"x[1]"}, chains);
  io::Metadata meta;
  meta.set("data", "/nonexistent");
  io::write_metadata(fitdir / "fit.meta", meta);
  cli::ReportArgs a;
  a.fits = {fitdir};
  a.out = temp_dir("rep_bad_out");
  const auto r = run([&](cli::Streams io) { return cli::cmd_report(a, io); });
  EXPECT_EQ(r.code, cli::kExitFailure);
  EXPECT_NE(r.err.find("'N'"), std::string::npos);
}
