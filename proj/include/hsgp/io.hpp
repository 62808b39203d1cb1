#pragma once

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "hsgp/errors.hpp"
#include "hsgp/sampler.hpp"
#include "hsgp/simgen.hpp"

namespace hsgp::io {

namespace fs = std::filesystem;

/// Shortest text that parses back to the same double; "NA" for NaN.
[[nodiscard]] inline std::string format_double(double v) {
  if (std::isnan(v)) return "NA";
  if (std::isinf(v)) return v > 0 ? "Inf" : "-Inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

[[nodiscard]] inline std::string format_optional(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string("NA");
}

[[nodiscard]] inline std::optional<double> parse_double(std::string_view text) {
  while (!text.empty() && (text.front() == ' ' || text.front() == '\t')) text.remove_prefix(1);
  while (!text.empty() && (text.back() == ' ' || text.back() == '\t' || text.back() == '\r')) text.remove_suffix(1);
  if (text.empty() || text == "NA" || text == "NaN" || text == "nan") return std::nullopt;
  if (text == "Inf" || text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-Inf" || text == "-inf") return -std::numeric_limits<double>::infinity();
  if (text.front() == '+') text.remove_prefix(1);
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size()) return std::nullopt;
  return v;
}

/// Rectangular table of strings with a header row.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  [[nodiscard]] std::optional<std::size_t> column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  }

  [[nodiscard]] std::size_t require_column(std::string_view name) const {
    auto c = column(name);
    if (!c) throw DataError("missing column '" + std::string(name) + "'");
    return *c;
  }
};

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (ch == '"') {
        quoted = false;
      } else {
        cur += ch;
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (ch != '\r') {
      cur += ch;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

inline std::string quote_if_needed(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch;
  }
  return out + "\"";
}

}  // namespace detail

[[nodiscard]] inline CsvTable read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw DataError(path.string() + " is empty");
  t.header = detail::split_csv_line(line);
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    auto fields = detail::split_csv_line(line);
    if (fields.size() != t.header.size()) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) +
                      " fields, found " + std::to_string(fields.size()));
    }
    t.rows.push_back(std::move(fields));
  }
  return t;
}

inline void write_csv(const fs::path& path, const CsvTable& table) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  auto emit = [&](const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
      if (i > 0) out << ',';
      out << detail::quote_if_needed(fields[i]);
    }
    out << '\n';
  };
  emit(table.header);
  for (const auto& r : table.rows) emit(r);
}

/// Ordered plain-text key=value records.
class Metadata {
 public:
  void set(const std::string& key, const std::string& value) {
    for (auto& [k, v] : entries_) {
      if (k == key) {
        v = value;
        return;
      }
    }
    entries_.emplace_back(key, value);
  }
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }
  void set(const std::string& key, std::uint64_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }

  [[nodiscard]] std::optional<std::string> get(std::string_view key) const {
    for (const auto& [k, v] : entries_) {
      if (k == key) return v;
    }
    return std::nullopt;
  }
  [[nodiscard]] std::string require(std::string_view key) const {
    auto v = get(key);
    if (!v) throw DataError("metadata key '" + std::string(key) + "' missing");
    return *v;
  }
  [[nodiscard]] std::optional<double> get_double(std::string_view key) const {
    auto v = get(key);
    return v ? parse_double(*v) : std::nullopt;
  }
  [[nodiscard]] double require_double(std::string_view key) const {
    auto v = get_double(require(key).empty() ? std::string_view{} : key);
    if (!v) throw DataError("metadata key '" + std::string(key) + "' is not numeric");
    return *v;
  }
  [[nodiscard]] const std::vector<std::pair<std::string, std::string>>& entries() const noexcept { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

inline void write_metadata(const fs::path& path, const Metadata& meta) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (const auto& [k, v] : meta.entries()) out << k << '=' << v << '\n';
}

[[nodiscard]] inline Metadata read_metadata(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  Metadata meta;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError(path.string() + ": malformed line '" + line + "'");
    meta.set(line.substr(0, eq), line.substr(eq + 1));
  }
  return meta;
}

/// Observed data in the internal format: outputs, noisy inputs and optional truth.
struct Dataset {
  Eigen::MatrixXd Y;
  Eigen::VectorXd x_tilde;
  std::optional<Eigen::VectorXd> x_true;
  Metadata meta;

  [[nodiscard]] int N() const { return static_cast<int>(Y.rows()); }
  [[nodiscard]] int D() const { return static_cast<int>(Y.cols()); }
};

inline constexpr std::string_view kDataFile = "data.csv";
inline constexpr std::string_view kMetaFile = "data.meta";
inline constexpr std::string_view kTruthFile = "truth.csv";

inline void write_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  CsvTable t;
  for (int d = 1; d <= ds.D(); ++d) t.header.push_back("y_" + std::to_string(d));
  t.header.emplace_back("x_tilde");
  if (ds.x_true) t.header.emplace_back("x_true");
  for (int i = 0; i < ds.N(); ++i) {
    std::vector<std::string> row;
    for (int d = 0; d < ds.D(); ++d) row.push_back(format_double(ds.Y(i, d)));
    row.push_back(format_double(ds.x_tilde[i]));
    if (ds.x_true) row.push_back(format_double((*ds.x_true)[i]));
    t.rows.push_back(std::move(row));
  }
  write_csv(dir / kDataFile, t);
  Metadata meta = ds.meta;
  meta.set("N", ds.N());
  meta.set("D", ds.D());
  write_metadata(dir / kMetaFile, meta);
}

/// Reads data.csv (+ data.meta when present) from a dataset directory.
[[nodiscard]] inline Dataset read_dataset(const fs::path& dir) {
  const CsvTable t = read_csv(dir / kDataFile);
  Dataset ds;
  std::vector<std::size_t> ycols;
  for (int d = 1;; ++d) {
    auto c = t.column("y_" + std::to_string(d));
    if (!c) break;
    ycols.push_back(*c);
  }
  if (ycols.empty()) throw DataError("dataset has no y_1 column");
  const auto xt = t.require_column("x_tilde");
  const auto xtrue = t.column("x_true");
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  ds.Y.resize(n, static_cast<Eigen::Index>(ycols.size()));
  ds.x_tilde.resize(n);
  if (xtrue) ds.x_true = Eigen::VectorXd(n);
  auto cell = [&](Eigen::Index i, std::size_t c) {
    auto v = parse_double(t.rows[static_cast<std::size_t>(i)][c]);
    if (!v || !std::isfinite(*v)) {
      throw DataError("non-numeric or missing value at row " + std::to_string(i + 1) + ", column '" + t.header[c] + "'");
    }
    return *v;
  };
  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < ycols.size(); ++d) ds.Y(i, static_cast<Eigen::Index>(d)) = cell(i, ycols[d]);
    ds.x_tilde[i] = cell(i, xt);
    if (xtrue) (*ds.x_true)[i] = cell(i, *xtrue);
  }
  if (fs::exists(dir / kMetaFile)) ds.meta = read_metadata(dir / kMetaFile);
  return ds;
}

/// Records scenario constants, seed and ground truth in the metadata.
[[nodiscard]] inline Dataset to_dataset(const SimulatedDataset& sim, const ScenarioSpec& spec) {
  Dataset ds;
  ds.Y = sim.Y;
  ds.x_tilde = sim.x_tilde;
  ds.x_true = sim.x_true;
  auto& m = ds.meta;
  m.set("format", "hsgp-dataset-1");
  m.set("scenario", std::string(to_string(spec.kind)));
  m.set("seed", spec.seed);
  m.set("s", spec.s);
  m.set("x_lower", spec.x_lower);
  m.set("x_upper", spec.x_upper);
  m.set("latent_draw", spec.latent == LatentDraw::UniformTruth ? "uniform-truth" : "uniform-measurement");
  m.set("prior.rho.mean", spec.rho.mean);
  m.set("prior.rho.sd", spec.rho.sd);
  m.set("prior.alpha.mean", spec.alpha.mean);
  m.set("prior.alpha.sd", spec.alpha.sd);
  m.set("prior.sigma.mean", spec.sigma.mean);
  m.set("prior.sigma.sd", spec.sigma.sd);
  if (spec.mu) {
    m.set("prior.mu.mean", spec.mu->mean);
    m.set("prior.mu.sd", spec.mu->sd);
  }
  m.set("prior.eta", spec.eta);
  const auto D = sim.rho.size();
  for (Eigen::Index d = 0; d < D; ++d) {
    const auto idx = std::to_string(d + 1);
    m.set("truth.rho." + idx, sim.rho[d]);
    m.set("truth.alpha." + idx, sim.alpha[d]);
    m.set("truth.sigma." + idx, sim.sigma[d]);
    m.set("truth.mu." + idx, sim.mu[d]);
  }
  for (Eigen::Index i = 0; i < D; ++i) {
    for (Eigen::Index j = 0; j < D; ++j) m.set("truth.C." + std::to_string(i + 1) + "." + std::to_string(j + 1), sim.C(i, j));
  }
  return ds;
}

/// data.csv, data.meta and truth.csv (latent and mixed noiseless functions).
inline void write_simulated(const fs::path& dir, const SimulatedDataset& sim, const ScenarioSpec& spec) {
  write_dataset(dir, to_dataset(sim, spec));
  CsvTable t;
  const auto D = sim.f_true.cols();
  for (Eigen::Index d = 1; d <= D; ++d) t.header.push_back("f_latent_" + std::to_string(d));
  for (Eigen::Index d = 1; d <= D; ++d) t.header.push_back("f_true_" + std::to_string(d));
  for (Eigen::Index i = 0; i < sim.f_true.rows(); ++i) {
    std::vector<std::string> row;
    for (Eigen::Index d = 0; d < D; ++d) row.push_back(format_double(sim.f_latent(i, d)));
    for (Eigen::Index d = 0; d < D; ++d) row.push_back(format_double(sim.f_true(i, d)));
    t.rows.push_back(std::move(row));
  }
  write_csv(dir / kTruthFile, t);
}

[[nodiscard]] inline SimulatedDataset read_simulated(const fs::path& dir) {
  const Dataset ds = read_dataset(dir);
  if (!ds.x_true) throw DataError("dataset has no x_true column");
  SimulatedDataset sim;
  sim.Y = ds.Y;
  sim.x_tilde = ds.x_tilde;
  sim.x_true = *ds.x_true;
  const int D = ds.D();
  sim.rho.resize(D);
  sim.alpha.resize(D);
  sim.sigma.resize(D);
  sim.mu.resize(D);
  sim.C.resize(D, D);
  for (int d = 0; d < D; ++d) {
    const auto idx = std::to_string(d + 1);
    sim.rho[d] = ds.meta.require_double("truth.rho." + idx);
    sim.alpha[d] = ds.meta.require_double("truth.alpha." + idx);
    sim.sigma[d] = ds.meta.require_double("truth.sigma." + idx);
    sim.mu[d] = ds.meta.require_double("truth.mu." + idx);
  }
  for (int i = 0; i < D; ++i) {
    for (int j = 0; j < D; ++j) sim.C(i, j) = ds.meta.require_double("truth.C." + std::to_string(i + 1) + "." + std::to_string(j + 1));
  }
  const CsvTable t = read_csv(dir / kTruthFile);
  sim.f_latent.resize(ds.N(), D);
  sim.f_true.resize(ds.N(), D);
  for (int d = 0; d < D; ++d) {
    const auto cl = t.require_column("f_latent_" + std::to_string(d + 1));
    const auto ct = t.require_column("f_true_" + std::to_string(d + 1));
    for (int i = 0; i < ds.N(); ++i) {
      sim.f_latent(i, d) = parse_double(t.rows[static_cast<std::size_t>(i)][cl]).value();
      sim.f_true(i, d) = parse_double(t.rows[static_cast<std::size_t>(i)][ct]).value();
    }
  }
  return sim;
}

/// Per-draw sampler columns written before the parameters.
inline constexpr std::array<std::string_view, 6> kDrawStatColumns = {"lp__", "accept_stat__", "stepsize__",
                                                                     "treedepth__", "n_leapfrog__", "divergent__"};

/// One JSON object per retained draw: chain, draw index, sampler statistics, then named values.
inline void write_draws_ndjson(const fs::path& path, const std::vector<std::string>& names,
                               const std::vector<ChainDraws>& chains) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  for (std::size_t c = 0; c < chains.size(); ++c) {
    const auto& ch = chains[c];
    for (Eigen::Index i = 0; i < ch.draws.rows(); ++i) {
      const auto& st = ch.stats[static_cast<std::size_t>(i)];
      nlohmann::ordered_json j;
      j["chain"] = c + 1;
      j["draw"] = i + 1;
      j["lp__"] = st.lp;
      j["accept_stat__"] = st.accept_stat;
      j["stepsize__"] = st.step_size;
      j["treedepth__"] = st.tree_depth;
      j["n_leapfrog__"] = st.n_leapfrog;
      j["divergent__"] = st.divergent ? 1 : 0;
      for (std::size_t k = 0; k < names.size(); ++k) j[names[k]] = ch.draws(i, static_cast<Eigen::Index>(k));
      out << j.dump() << '\n';
    }
  }
}

/// Draws read back from NDJSON, grouped by chain.
struct DrawFile {
  std::vector<std::string> names;
  std::vector<Eigen::MatrixXd> chains;
  std::vector<std::vector<DrawStats>> stats;
};

[[nodiscard]] inline DrawFile read_draws_ndjson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  DrawFile f;
  std::map<int, std::vector<std::vector<double>>> rows;
  std::map<int, std::vector<DrawStats>> stats;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto j = nlohmann::ordered_json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DataError(path.string() + ":" + std::to_string(line_no) + ": invalid JSON");
    std::vector<std::string> names;
    std::vector<double> values;
    DrawStats st;
    int chain = 0;
    for (const auto& [key, val] : j.items()) {
      if (key == "chain") chain = val.get<int>();
      else if (key == "draw") continue;
      else if (key == "lp__") st.lp = val.get<double>();
      else if (key == "accept_stat__") st.accept_stat = val.get<double>();
      else if (key == "stepsize__") st.step_size = val.get<double>();
      else if (key == "treedepth__") st.tree_depth = val.get<int>();
      else if (key == "n_leapfrog__") st.n_leapfrog = val.get<int>();
      else if (key == "divergent__") st.divergent = val.get<int>() != 0;
      else {
        names.push_back(key);
        values.push_back(val.is_null() ? std::numeric_limits<double>::quiet_NaN() : val.get<double>());
      }
    }
    if (f.names.empty()) f.names = names;
    else if (names != f.names) throw DataError(path.string() + ":" + std::to_string(line_no) + ": parameter columns differ");
    rows[chain].push_back(std::move(values));
    stats[chain].push_back(st);
  }
  for (auto& [chain, r] : rows) {
    Eigen::MatrixXd m(static_cast<Eigen::Index>(r.size()), static_cast<Eigen::Index>(f.names.size()));
    for (std::size_t i = 0; i < r.size(); ++i) {
      for (std::size_t k = 0; k < r[i].size(); ++k) m(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = r[i][k];
    }
    f.chains.push_back(std::move(m));
    f.stats.push_back(std::move(stats[chain]));
  }
  return f;
}

inline const std::vector<std::string>& summary_columns() {
  static const std::vector<std::string> cols = {"name", "mean", "sd", "q5", "q95", "rhat", "bulk_ess", "tail_ess", "bias", "rmse"};
  return cols;
}

}  // namespace hsgp::io
