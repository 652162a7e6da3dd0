#pragma once

// Monte Carlo estimation of the purity bias of maximum-likelihood tomography:
// simulate homodyne data from a known state, reconstruct, repeat, and compare
// the mean reconstructed purity with the true purity.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "tomolab/errors.hpp"
#include "tomolab/fock.hpp"
#include "tomolab/homodyne.hpp"
#include "tomolab/mle.hpp"
#include "tomolab/rng.hpp"
#include "tomolab/state_design.hpp"

namespace tomolab {

inline constexpr std::size_t kDefaultRepetitions = 50;

struct ExperimentConfig {
  StateFamily family = StateFamily::NearlyVacuum;
  double purity = 1.0;
  std::size_t n_measurements = 1000;
  PhaseStrategy strategy = RandomPerShot{};
  double eta = kDefaultEfficiency;
  Truncation trunc{10};
  std::size_t n_reps = kDefaultRepetitions;
  std::uint64_t master_seed = 0;
  EstimatorOptions estimator{};
};

inline void validate(const ExperimentConfig& c) {
  if (!(c.purity > 0.0 && c.purity <= 1.0)) throw DomainError("purity must lie in (0, 1]");
  if (c.n_measurements < 1) throw DomainError("n_measurements must be >= 1");
  if (c.n_reps < 2) throw DomainError("n_reps must be >= 2");
  detail::check_efficiency(c.eta);
  if (auto e = std::get_if<EvenlySpaced>(&c.strategy)) {
    if (e->m < 1 || static_cast<std::size_t>(e->m) > c.n_measurements)
      throw DomainError("number of phases must lie in [1, n_measurements]");
  }
}

/// Per-configuration data shared read-only by every repetition.
struct TrialContext {
  TrueState truth;
  QuadratureSampler sampler;
};

inline TrialContext prepare_trial_context(const ExperimentConfig& c) {
  validate(c);
  TrueState truth = make_true_state(c.family, c.purity, c.trunc);
  QuadratureSampler sampler(truth.rho, c.eta);
  return {std::move(truth), std::move(sampler)};
}

/// Draws a phase schedule and one homodyne outcome per phase.
inline std::vector<MeasurementRecord> simulate_records(const QuadratureSampler& sampler,
                                                       const PhaseStrategy& strategy, std::size_t n,
                                                       RandomStream& rng) {
  PhaseSchedule schedule = phase_schedule(strategy, n, rng);
  std::vector<MeasurementRecord> out;
  out.reserve(n);
  std::optional<QuadraturePdf> pdf;
  for (double theta : schedule.phases) {
    if (!pdf || pdf->theta() != theta) pdf.emplace(sampler.pdf(theta));
    out.push_back({theta, sampler.sample(*pdf, rng)});
  }
  return out;
}

struct TrialResult {
  double purity = std::numeric_limits<double>::quiet_NaN();
  std::uint64_t seed = 0;
  bool converged = false;
  StopReason reason = StopReason::IterationCap;
  double final_bound = 0.0;
  std::size_t iterations_rrr = 0;
  std::size_t iterations_rga = 0;
  std::size_t retreats = 0;
};

inline TrialResult run_single_trial(const ExperimentConfig& c, const TrialContext& ctx, std::uint64_t rep_seed) {
  RandomStream rng(rep_seed);
  Dataset ds(simulate_records(ctx.sampler, c.strategy, c.n_measurements, rng), c.eta, c.trunc);
  EstimateReport rep = estimate_state(ds, c.estimator);
  TrialResult out;
  out.seed = rep_seed;
  out.converged = rep.converged;
  out.reason = rep.reason;
  out.final_bound = rep.final_bound;
  out.iterations_rrr = rep.iterations_rrr;
  out.iterations_rga = rep.iterations_rga;
  out.retreats = rep.retreats;
  if (rep.converged) out.purity = purity_of(rep.rho_ml);
  return out;
}

inline TrialResult run_single_trial(const ExperimentConfig& c, std::uint64_t rep_seed) {
  return run_single_trial(c, prepare_trial_context(c), rep_seed);
}

struct BiasEstimate {
  double true_purity = 0.0;
  double mean_purity = 0.0;
  double bias = 0.0;
  double std_purity = 0.0;
  double sem = 0.0;
  std::size_t n_reps = 0;
  std::vector<double> per_rep_purities;
};

/// Sample mean, sample standard deviation (divisor n - 1) and standard error.
/// Sums run over a sorted copy so the result does not depend on input order.
inline BiasEstimate aggregate(double true_purity, std::vector<double> purities) {
  if (purities.size() < 2) throw DomainError("need at least two repetitions");
  std::vector<double> sorted = purities;
  std::sort(sorted.begin(), sorted.end());
  const double n = static_cast<double>(sorted.size());
  double sum = 0.0;
  for (double v : sorted) sum += v;
  const double mean = sum / n;
  std::vector<double> sq;
  sq.reserve(sorted.size());
  for (double v : sorted) sq.push_back((v - mean) * (v - mean));
  std::sort(sq.begin(), sq.end());
  double ss = 0.0;
  for (double v : sq) ss += v;
  BiasEstimate e;
  e.true_purity = true_purity;
  e.mean_purity = mean;
  e.bias = mean - true_purity;
  e.std_purity = std::sqrt(ss / (n - 1.0));
  e.sem = e.std_purity / std::sqrt(n);
  e.n_reps = sorted.size();
  e.per_rep_purities = std::move(purities);
  return e;
}

struct ExperimentResult {
  ExperimentConfig config;
  std::size_t cell_index = 0;
  std::uint64_t cell_seed = 0;
  BiasEstimate estimate;
  std::vector<TrialResult> trials;

  /// (purity bias) / stdev(purity); infinite or NaN when the spread is zero.
  double bias_over_std() const { return estimate.bias / estimate.std_purity; }
};

namespace detail {

/// Runs f(i) for i in [0, n) on up to `threads` workers (0 = hardware).
template <class F>
void parallel_for(std::size_t n, unsigned threads, F&& f) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, n));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < n;) {
      try {
        f(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

/// n_reps independent trials. Repetition r of cell c uses the stream seeded
/// with derive_seed(derive_seed(master_seed, c), r). Any non-converged trial
/// aborts the experiment.
inline ExperimentResult run_bias_experiment(const ExperimentConfig& c, std::size_t cell_index = 0,
                                            unsigned threads = 0) {
  const TrialContext ctx = prepare_trial_context(c);
  ExperimentResult out{c, cell_index, derive_seed(c.master_seed, cell_index)};
  out.trials.resize(c.n_reps);
  detail::parallel_for(c.n_reps, threads, [&](std::size_t r) {
    out.trials[r] = run_single_trial(c, ctx, derive_seed(out.cell_seed, r));
  });
  std::vector<std::uint64_t> failed;
  for (const auto& t : out.trials)
    if (!t.converged) failed.push_back(t.seed);
  if (!failed.empty()) {
    std::ostringstream msg;
    msg << failed.size() << " of " << c.n_reps << " trials failed to converge (cell " << cell_index
        << "); seeds:";
    for (auto s : failed) msg << ' ' << s;
    throw ExperimentFailure(msg.str());
  }
  std::vector<double> purities;
  purities.reserve(c.n_reps);
  for (const auto& t : out.trials) purities.push_back(t.purity);
  out.estimate = aggregate(ctx.truth.design.p, std::move(purities));
  return out;
}

/// One experiment per grid cell, in order; cell i derives its seed from its
/// own master seed and i. Failures are reported with the cell index.
inline std::vector<ExperimentResult> run_sweep(const std::vector<ExperimentConfig>& grid, unsigned threads = 0) {
  if (grid.empty()) throw DomainError("sweep grid is empty");
  std::vector<ExperimentResult> rows;
  rows.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    try {
      rows.push_back(run_bias_experiment(grid[i], i, threads));
    } catch (const Error& e) {
      throw ExperimentFailure("sweep cell " + std::to_string(i) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace tomolab
