#pragma once

// Command-line front end.
//
//   tomolab [--seed N] [--eta E] [--nmax N] [--out PATH] [--threads T] <command> ...
//
//   state     photon distribution, purity and tail probability of a design
//   simulate  write a simulated homodyne dataset
//   estimate  reconstruct a state from a dataset file
//   bias      one bias experiment
//   sweep     a grid of bias experiments from a JSON config
//
// Exit status: 0 on success, 1 on domain or I/O errors, 2 on usage errors.

#include <cstdint>
#include <cstdlib>
#include <iostream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "tomolab/bias.hpp"
#include "tomolab/errors.hpp"
#include "tomolab/io.hpp"
#include "tomolab/mle.hpp"
#include "tomolab/state_design.hpp"

namespace tomolab {

namespace detail {

struct CliGlobals {
  std::optional<std::uint64_t> seed;
  double eta = kDefaultEfficiency;
  std::optional<int> nmax;
  std::string out;
  unsigned threads = 0;

  std::uint64_t resolved_seed() const {
    if (seed) return *seed;
    if (const char* env = std::getenv("TOMOLAB_SEED")) {
      char* end = nullptr;
      unsigned long long v = std::strtoull(env, &end, 10);
      if (end && *end == '\0' && end != env) return v;
      throw DomainError("TOMOLAB_SEED is not an unsigned integer");
    }
    return 0;
  }
};

struct CliExperiment {
  std::string family = "nearly-vacuum";
  double purity = 1.0;
  std::size_t n = 1000;
  std::string strategy = "random";
  int phases = 6;
  std::size_t reps = kDefaultRepetitions;
  double threshold = 0.2;

  void add_to(CLI::App* cmd, bool with_reps) {
    cmd->add_option("--family", family, "nearly-vacuum | highly-squeezed")->capture_default_str();
    cmd->add_option("--purity", purity, "target purity of the true state")->capture_default_str();
    cmd->add_option("--n", n, "number of homodyne measurements")->capture_default_str();
    cmd->add_option("--strategy", strategy, "random | evenly-spaced")->capture_default_str();
    cmd->add_option("--phases", phases, "number of evenly spaced phases")->capture_default_str();
    if (with_reps) {
      cmd->add_option("--reps", reps, "repetitions")->capture_default_str();
      cmd->add_option("--threshold", threshold, "stopping bound threshold")->capture_default_str();
    }
  }

  ExperimentConfig config(const CliGlobals& g) const {
    ExperimentConfig c;
    c.family = parse_state_family(family);
    c.purity = purity;
    c.n_measurements = n;
    c.strategy = parse_strategy(strategy, phases);
    c.eta = g.eta;
    c.trunc = Truncation(g.nmax.value_or(10));
    c.n_reps = reps;
    c.master_seed = g.resolved_seed();
    c.estimator.threshold = threshold;
    validate(c);
    return c;
  }
};

inline void emit(std::ostream& out, const std::string& key, double v) { out << key << ' ' << format_double(v) << '\n'; }

inline int run_state(const CliGlobals& g, const std::string& family, double purity, std::optional<int> tail_above,
                     std::ostream& out) {
  const StateFamily fam = parse_state_family(family);
  const int n_max = g.nmax.value_or(fam == StateFamily::NearlyVacuum ? 10 : 20);
  const int cutoff = tail_above.value_or(n_max);
  TrueState ts = make_true_state(fam, purity, Truncation(n_max));
  out << "family " << to_string(fam) << '\n';
  emit(out, "s", ts.design.s);
  emit(out, "t", ts.design.t);
  emit(out, "purity", ts.design.p);
  emit(out, "purity_truncated", purity_of(ts.rho));
  emit(out, "mean_photon_number", mean_photon_number(ts.rho));
  emit(out, "tail_above_" + std::to_string(cutoff), photon_tail_probability(ts.design, cutoff));
  emit(out, "lossy_tail_above_" + std::to_string(cutoff), lossy_photon_tail_probability(ts.design, cutoff));
  out << "photon_distribution n_max=" << n_max << '\n';
  for (Eigen::Index n = 0; n < ts.rho.dim(); ++n)
    out << n << ' ' << format_double(ts.rho.matrix()(n, n).real()) << '\n';
  return 0;
}

inline int run_simulate(const CliGlobals& g, const CliExperiment& e, std::ostream& out) {
  if (g.out.empty()) throw DomainError("simulate needs --out");
  ExperimentConfig c = e.config(g);
  TrialContext ctx = prepare_trial_context(c);
  const std::uint64_t seed = c.master_seed;
  RandomStream rng(derive_seed(derive_seed(seed, 0), 0));
  DatasetFile f{simulate_records(ctx.sampler, c.strategy, c.n_measurements, rng), c.eta, c.trunc.n_max(), seed};
  write_dataset(f, g.out);
  out << "wrote " << f.records.size() << " records to " << g.out << '\n';
  return 0;
}

inline int run_estimate(const CliGlobals& g, const std::string& in, double threshold, std::ostream& out) {
  DatasetFile f = read_dataset(in, g.nmax);
  EstimatorOptions opts;
  opts.threshold = threshold;
  EstimateReport rep = estimate_state(to_dataset(f), opts);
  out << "records " << f.records.size() << '\n';
  out << "n_max " << f.n_max << '\n';
  emit(out, "eta", f.eta);
  emit(out, "purity", purity_of(rep.rho_ml));
  emit(out, "loglik", rep.loglik);
  emit(out, "final_bound", rep.final_bound);
  out << "iterations_rrr " << rep.iterations_rrr << '\n';
  out << "iterations_rga " << rep.iterations_rga << '\n';
  out << "retreats " << rep.retreats << '\n';
  out << "converged " << (rep.converged ? "true" : "false") << '\n';
  out << "stop_reason " << to_string(rep.reason) << '\n';
  if (!rep.converged) throw Error("estimate did not converge (" + to_string(rep.reason) + ")");
  return 0;
}

inline int emit_results(const CliGlobals& g, const std::vector<ExperimentResult>& rows, std::uint64_t seed,
                        std::ostream& out) {
  if (g.out.empty()) {
    out << results_table(rows);
  } else {
    write_results(rows, make_manifest(rows, seed), g.out);
    out << results_table(rows);
    out << "wrote " << g.out << " and " << manifest_path_for(g.out).string() << '\n';
  }
  return 0;
}

}  // namespace detail

inline int cli_dispatch(int argc, const char* const* argv, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  CLI::App app{"tomolab: bias of maximum-likelihood homodyne tomography"};
  app.require_subcommand(1);
  app.fallthrough();

  detail::CliGlobals g;
  app.add_option("--seed", g.seed, "master seed (default: $TOMOLAB_SEED or 0)");
  app.add_option("--eta", g.eta, "detector efficiency")->capture_default_str();
  app.add_option("--nmax", g.nmax, "maximum photon number of the reconstruction space");
  app.add_option("--out", g.out, "output file");
  app.add_option("--threads", g.threads, "worker threads (0 = all cores)");

  std::string family = "nearly-vacuum";
  double purity = 1.0;
  std::optional<int> tail_above;
  auto* state = app.add_subcommand("state", "describe a state design");
  state->add_option("--family", family, "nearly-vacuum | highly-squeezed")->capture_default_str();
  state->add_option("--purity", purity, "target purity")->capture_default_str();
  state->add_option("--tail-above", tail_above, "photon cutoff for the tail probability (default n_max)");

  detail::CliExperiment sim_args;
  auto* simulate = app.add_subcommand("simulate", "write a simulated dataset");
  sim_args.add_to(simulate, false);

  std::string in;
  double threshold = 0.2;
  auto* estimate = app.add_subcommand("estimate", "reconstruct a state from a dataset file");
  estimate->add_option("--in", in, "dataset file")->required();
  estimate->add_option("--threshold", threshold, "stopping bound threshold")->capture_default_str();

  detail::CliExperiment bias_args;
  auto* bias = app.add_subcommand("bias", "run one bias experiment");
  bias_args.add_to(bias, true);

  std::string config;
  auto* sweep = app.add_subcommand("sweep", "run a grid of bias experiments");
  sweep->add_option("--config", config, "JSON sweep definition")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n' << app.help();
    return 2;
  }

  try {
    if (state->parsed()) return detail::run_state(g, family, purity, tail_above, out);
    if (simulate->parsed()) return detail::run_simulate(g, sim_args, out);
    if (estimate->parsed()) return detail::run_estimate(g, in, threshold, out);
    if (bias->parsed()) {
      ExperimentConfig c = bias_args.config(g);
      return detail::emit_results(g, {run_bias_experiment(c, 0, g.threads)}, c.master_seed, out);
    }
    if (sweep->parsed()) {
      ExperimentConfig base;
      base.eta = g.eta;
      base.master_seed = g.resolved_seed();
      if (g.nmax) base.trunc = Truncation(*g.nmax);
      auto cells = read_sweep(config, base);
      return detail::emit_results(g, run_sweep(cells, g.threads), base.master_seed, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  err << app.help();
  return 2;
}

inline int cli_dispatch(const std::vector<std::string>& args, std::ostream& out = std::cout,
                        std::ostream& err = std::cerr) {
  std::vector<const char*> argv;
  argv.reserve(args.size() + 1);
  argv.push_back("tomolab");
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli_dispatch(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace tomolab
