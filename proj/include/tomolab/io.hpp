#pragma once

// File formats: homodyne datasets, results tables and run manifests.
//
// Dataset file:
//   # tomolab dataset
//   # eta=0.9
//   # n_max=10
//   # seed=42            (optional)
//   0.78539816339744828,-0.41421356237309515
//   ...
// one "theta,x" record per line, 17 significant digits.

#include <charconv>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <limits>
#include <locale>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "json.hpp"

#include "tomolab/bias.hpp"
#include "tomolab/errors.hpp"
#include "tomolab/homodyne.hpp"
#include "tomolab/mle.hpp"

namespace tomolab {

inline constexpr std::string_view kToolVersion = "0.1.0";

/// 17 significant digits, locale independent; round-trips every double.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (s.empty()) return std::nullopt;
  if (s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// ---------------------------------------------------------------------------
// Datasets

struct DatasetFile {
  std::vector<MeasurementRecord> records;
  double eta = kDefaultEfficiency;
  int n_max = 10;
  std::optional<std::uint64_t> seed;
};

inline Dataset to_dataset(const DatasetFile& f) { return Dataset(f.records, f.eta, Truncation(f.n_max)); }

inline void write_dataset(const DatasetFile& f, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  out << "# tomolab dataset\n";
  out << "# eta=" << format_double(f.eta) << '\n';
  out << "# n_max=" << f.n_max << '\n';
  if (f.seed) out << "# seed=" << *f.seed << '\n';
  for (const auto& r : f.records) out << format_double(r.theta) << ',' << format_double(r.x) << '\n';
  if (!out) throw Error("write to '" + path.string() + "' failed");
}

/// Reads a dataset file. When `expected_n_max` is given it must match the
/// header's truncation.
inline DatasetFile read_dataset(const std::filesystem::path& path, std::optional<int> expected_n_max = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  DatasetFile f;
  bool have_eta = false, have_nmax = false;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv(line);
    if (!sv.empty() && sv.back() == '\r') sv.remove_suffix(1);
    if (sv.find_first_not_of(" \t") == std::string_view::npos) continue;
    if (sv.front() == '#') {
      sv.remove_prefix(1);
      auto eq = sv.find('=');
      if (eq == std::string_view::npos) continue;
      auto key = sv.substr(0, eq);
      while (!key.empty() && key.front() == ' ') key.remove_prefix(1);
      auto value = sv.substr(eq + 1);
      if (key == "eta") {
        auto v = parse_double(value);
        if (!v) throw ParseError("bad eta header", lineno);
        f.eta = *v;
        have_eta = true;
      } else if (key == "n_max") {
        auto v = parse_double(value);
        if (!v || *v != static_cast<int>(*v)) throw ParseError("bad n_max header", lineno);
        f.n_max = static_cast<int>(*v);
        have_nmax = true;
      } else if (key == "seed") {
        std::uint64_t s = 0;
        auto res = std::from_chars(value.data(), value.data() + value.size(), s);
        if (res.ec != std::errc()) throw ParseError("bad seed header", lineno);
        f.seed = s;
      }
      continue;
    }
    auto comma = sv.find(',');
    if (comma == std::string_view::npos) throw ParseError("expected 'theta,x'", lineno);
    auto theta = parse_double(sv.substr(0, comma));
    auto x = parse_double(sv.substr(comma + 1));
    if (!theta || !x) throw ParseError("malformed number in '" + std::string(sv) + "'", lineno);
    MeasurementRecord rec{*theta, *x};
    if (!is_valid(rec)) throw ParseError("phase outside [0, pi) or non-finite quadrature", lineno);
    f.records.push_back(rec);
  }
  if (f.records.empty()) throw ParseError("no records");
  if (!have_eta || !have_nmax) throw ParseError("missing eta or n_max header");
  if (expected_n_max && *expected_n_max != f.n_max)
    throw ParseError("dataset truncation n_max=" + std::to_string(f.n_max) + " does not match requested " +
                     std::to_string(*expected_n_max));
  return f;
}

// ---------------------------------------------------------------------------
// Configs as JSON (manifests and sweep files share the keys)

inline nlohmann::ordered_json config_to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["family"] = std::string(to_string(c.family));
  j["purity"] = c.purity;
  j["n_measurements"] = c.n_measurements;
  j["strategy"] = strategy_name(c.strategy);
  j["m_phases"] = strategy_phase_count(c.strategy);
  j["n_max"] = c.trunc.n_max();
  j["eta"] = c.eta;
  j["n_reps"] = c.n_reps;
  j["master_seed"] = c.master_seed;
  j["threshold"] = c.estimator.threshold;
  j["max_iterations"] = c.estimator.max_iterations;
  if (c.estimator.rrr_iterations) j["rrr_iterations"] = *c.estimator.rrr_iterations;
  j["initial_radius"] = c.estimator.initial_radius;
  return j;
}

inline PhaseStrategy parse_strategy(std::string_view name, int m) {
  if (name == "random") return RandomPerShot{};
  if (name == "evenly-spaced" || name == "even") return EvenlySpaced{m};
  throw DomainError("unknown phase strategy '" + std::string(name) + "'");
}

/// Phase count used when "evenly-spaced" is requested without "m_phases".
inline constexpr int kDefaultEvenPhases = 6;

/// Applies the keys present in `j` on top of `base`.
inline ExperimentConfig config_from_json(const nlohmann::ordered_json& j, ExperimentConfig base = {}) {
  try {
    if (j.contains("family")) base.family = parse_state_family(j.at("family").get<std::string>());
    if (j.contains("purity")) base.purity = j.at("purity").get<double>();
    if (j.contains("n_measurements")) base.n_measurements = j.at("n_measurements").get<std::size_t>();
    if (j.contains("strategy") || j.contains("m_phases")) {
      std::string name = j.value("strategy", strategy_name(base.strategy));
      int m = j.value("m_phases", strategy_phase_count(base.strategy));
      if (m == 0 && !j.contains("m_phases")) m = kDefaultEvenPhases;
      base.strategy = parse_strategy(name, m);
    }
    if (j.contains("n_max")) base.trunc = Truncation(j.at("n_max").get<int>());
    if (j.contains("eta")) base.eta = j.at("eta").get<double>();
    if (j.contains("n_reps")) base.n_reps = j.at("n_reps").get<std::size_t>();
    if (j.contains("master_seed")) base.master_seed = j.at("master_seed").get<std::uint64_t>();
    if (j.contains("threshold")) base.estimator.threshold = j.at("threshold").get<double>();
    if (j.contains("max_iterations")) base.estimator.max_iterations = j.at("max_iterations").get<std::size_t>();
    if (j.contains("rrr_iterations")) base.estimator.rrr_iterations = j.at("rrr_iterations").get<std::size_t>();
    if (j.contains("initial_radius")) base.estimator.initial_radius = j.at("initial_radius").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad config value: ") + e.what());
  }
  return base;
}

/// Sweep file:
///   { "master_seed": 1, "defaults": {...}, "grid": {"purity": [...], ...}, "cells": [{...}] }
/// "grid" expands to the Cartesian product of its axes, the last listed
/// axis varying fastest; explicit "cells" follow the grid cells.
inline std::vector<ExperimentConfig> parse_sweep(const nlohmann::ordered_json& j, ExperimentConfig base = {}) {
  if (!j.is_object()) throw ParseError("sweep config must be a JSON object");
  if (j.contains("master_seed")) base.master_seed = j.at("master_seed").get<std::uint64_t>();
  if (j.contains("defaults")) base = config_from_json(j.at("defaults"), base);
  std::vector<ExperimentConfig> cells;
  if (j.contains("grid")) {
    std::vector<nlohmann::ordered_json> partial{nlohmann::ordered_json::object()};
    for (const auto& [key, values] : j.at("grid").items()) {
      if (!values.is_array() || values.empty()) throw ParseError("grid axis '" + key + "' must be a nonempty array");
      std::vector<nlohmann::ordered_json> next;
      for (const auto& p : partial)
        for (const auto& v : values) {
          auto q = p;
          q[key] = v;
          next.push_back(std::move(q));
        }
      partial = std::move(next);
    }
    for (const auto& p : partial) cells.push_back(config_from_json(p, base));
  }
  if (j.contains("cells"))
    for (const auto& c : j.at("cells")) cells.push_back(config_from_json(c, base));
  if (cells.empty()) throw ParseError("sweep config defines no cells");
  for (const auto& c : cells) validate(c);
  return cells;
}

inline std::vector<ExperimentConfig> read_sweep(const std::filesystem::path& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path.string() + "'");
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
  return parse_sweep(j, base);
}

// ---------------------------------------------------------------------------
// Manifest

struct CellDiagnostics {
  std::size_t cell_index = 0;
  std::uint64_t cell_seed = 0;
  std::vector<TrialResult> trials;
};

struct RunManifest {
  std::string tool_version{kToolVersion};
  std::string timestamp;
  std::uint64_t master_seed = 0;
  std::vector<ExperimentConfig> configs;
  std::vector<CellDiagnostics> cells;
};

/// UTC time in ISO 8601; honours SOURCE_DATE_EPOCH for reproducible output.
inline std::string current_timestamp() {
  std::time_t t = std::time(nullptr);
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH")) t = static_cast<std::time_t>(std::strtoll(env, nullptr, 10));
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline RunManifest make_manifest(const std::vector<ExperimentResult>& rows, std::uint64_t master_seed) {
  RunManifest m;
  m.timestamp = current_timestamp();
  m.master_seed = master_seed;
  for (const auto& r : rows) {
    m.configs.push_back(r.config);
    m.cells.push_back({r.cell_index, r.cell_seed, r.trials});
  }
  return m;
}

inline nlohmann::ordered_json manifest_to_json(const RunManifest& m) {
  nlohmann::ordered_json j;
  j["tool_version"] = m.tool_version;
  j["timestamp"] = m.timestamp;
  j["master_seed"] = m.master_seed;
  j["configs"] = nlohmann::ordered_json::array();
  for (const auto& c : m.configs) j["configs"].push_back(config_to_json(c));
  j["cells"] = nlohmann::ordered_json::array();
  for (const auto& cell : m.cells) {
    nlohmann::ordered_json cj;
    cj["cell_index"] = cell.cell_index;
    cj["cell_seed"] = cell.cell_seed;
    cj["trials"] = nlohmann::ordered_json::array();
    for (const auto& t : cell.trials) {
      nlohmann::ordered_json tj;
      tj["seed"] = t.seed;
      tj["purity"] = t.purity;
      tj["converged"] = t.converged;
      tj["stop_reason"] = to_string(t.reason);
      tj["final_bound"] = t.final_bound;
      tj["iterations_rrr"] = t.iterations_rrr;
      tj["iterations_rga"] = t.iterations_rga;
      tj["retreats"] = t.retreats;
      cj["trials"].push_back(std::move(tj));
    }
    j["cells"].push_back(std::move(cj));
  }
  return j;
}

inline StopReason parse_stop_reason(std::string_view s) {
  if (s == "converged") return StopReason::Converged;
  if (s == "stagnation") return StopReason::Stagnation;
  if (s == "iteration-cap") return StopReason::IterationCap;
  throw ParseError("unknown stop reason '" + std::string(s) + "'");
}

inline RunManifest manifest_from_json(const nlohmann::ordered_json& j) {
  RunManifest m;
  try {
    m.tool_version = j.at("tool_version").get<std::string>();
    m.timestamp = j.at("timestamp").get<std::string>();
    m.master_seed = j.at("master_seed").get<std::uint64_t>();
    for (const auto& c : j.at("configs")) m.configs.push_back(config_from_json(c));
    for (const auto& cj : j.at("cells")) {
      CellDiagnostics cell;
      cell.cell_index = cj.at("cell_index").get<std::size_t>();
      cell.cell_seed = cj.at("cell_seed").get<std::uint64_t>();
      for (const auto& tj : cj.at("trials")) {
        TrialResult t;
        t.seed = tj.at("seed").get<std::uint64_t>();
        t.purity = tj.at("purity").is_null() ? std::numeric_limits<double>::quiet_NaN() : tj.at("purity").get<double>();
        t.converged = tj.at("converged").get<bool>();
        t.reason = parse_stop_reason(tj.at("stop_reason").get<std::string>());
        t.final_bound = tj.at("final_bound").get<double>();
        t.iterations_rrr = tj.at("iterations_rrr").get<std::size_t>();
        t.iterations_rga = tj.at("iterations_rga").get<std::size_t>();
        t.retreats = tj.at("retreats").get<std::size_t>();
        cell.trials.push_back(t);
      }
      m.cells.push_back(std::move(cell));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad manifest: ") + e.what());
  }
  return m;
}

inline std::string serialize_manifest(const RunManifest& m) { return manifest_to_json(m).dump(2) + "\n"; }

inline RunManifest parse_manifest(std::string_view text) {
  try {
    return manifest_from_json(nlohmann::ordered_json::parse(text));
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("invalid JSON: ") + e.what());
  }
}

// ---------------------------------------------------------------------------
// Results table

inline constexpr std::string_view kResultsHeader =
    "family,true_purity,n_measurements,strategy,m_phases,n_max,eta,n_reps,mean_purity,bias,std_purity,sem,seed";

inline std::string results_row(const ExperimentResult& r) {
  const auto& c = r.config;
  const auto& e = r.estimate;
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os << to_string(c.family) << ',' << format_double(e.true_purity) << ',' << c.n_measurements << ','
     << strategy_name(c.strategy) << ',' << strategy_phase_count(c.strategy) << ',' << c.trunc.n_max() << ','
     << format_double(c.eta) << ',' << e.n_reps << ',' << format_double(e.mean_purity) << ','
     << format_double(e.bias) << ',' << format_double(e.std_purity) << ',' << format_double(e.sem) << ','
     << r.cell_seed;
  return os.str();
}

inline std::string results_table(const std::vector<ExperimentResult>& rows) {
  std::string out(kResultsHeader);
  out += '\n';
  for (const auto& r : rows) out += results_row(r) + '\n';
  return out;
}

inline std::filesystem::path manifest_path_for(const std::filesystem::path& results) {
  return std::filesystem::path(results.string() + ".manifest.json");
}

/// Writes the results table to `path` and the manifest next to it.
inline void write_results(const std::vector<ExperimentResult>& rows, const RunManifest& manifest,
                          const std::filesystem::path& path) {
  if (rows.empty()) throw DomainError("results table is empty");
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot open '" + path.string() + "' for writing");
    out << results_table(rows);
    if (!out) throw Error("write to '" + path.string() + "' failed");
  }
  std::ofstream out(manifest_path_for(path), std::ios::binary);
  if (!out) throw Error("cannot open manifest for '" + path.string() + "'");
  out << serialize_manifest(manifest);
  if (!out) throw Error("manifest write failed");
}

}  // namespace tomolab
