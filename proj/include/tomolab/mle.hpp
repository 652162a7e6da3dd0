#pragma once

// Maximum-likelihood reconstruction of a density matrix from homodyne data.
//
// The log-likelihood L(rho) = sum_i ln Tr(Pi_i rho) is maximized by a number
// of R rho R fixed-point iterations followed by regularized gradient ascent
// (RGA) on the parametrization
//
//   rho(A) = (S + A)(S + A)^dagger / Tr[(S + A)(S + A)^dagger],  S = sqrt(rho),
//
// with the trust-region constraint Tr(A A^dagger) <= u. Iteration stops when
// the certified bound lambda_max(R) - N on L(rho_ML) - L(rho) drops to the
// threshold.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tomolab/errors.hpp"
#include "tomolab/fock.hpp"
#include "tomolab/homodyne.hpp"
#include "tomolab/steihaug.hpp"

namespace tomolab {

inline constexpr double kProbabilityFloor = 1e-300;
inline constexpr double kRetreatWeight = 1e-6;

namespace detail {

/// Orthonormal real coordinates on Hermitian matrices: diagonal entries,
/// then sqrt(2) Re and sqrt(2) Im of each upper off-diagonal entry (row
/// major). For Hermitian A, B: Tr(A B) = hvec(A) . hvec(B).
inline RealVector hvec(const ComplexMatrix& h) {
  const Eigen::Index d = h.rows();
  RealVector v(d * d);
  for (Eigen::Index n = 0; n < d; ++n) v(n) = h(n, n).real();
  Eigen::Index j = d;
  for (Eigen::Index m = 0; m < d; ++m) {
    for (Eigen::Index n = m + 1; n < d; ++n) {
      v(j++) = std::numbers::sqrt2 * h(m, n).real();
      v(j++) = std::numbers::sqrt2 * h(m, n).imag();
    }
  }
  return v;
}

inline ComplexMatrix unhvec(const RealVector& v, Eigen::Index d) {
  ComplexMatrix h(d, d);
  for (Eigen::Index n = 0; n < d; ++n) h(n, n) = v(n);
  Eigen::Index j = d;
  constexpr double s = 1.0 / std::numbers::sqrt2;
  for (Eigen::Index m = 0; m < d; ++m) {
    for (Eigen::Index n = m + 1; n < d; ++n) {
      Complex z(s * v(j), s * v(j + 1));
      h(m, n) = z;
      h(n, m) = std::conj(z);
      j += 2;
    }
  }
  return h;
}

/// Real inner product Re Tr(X^dagger Y) on complex matrices.
inline double frobenius_inner(const ComplexMatrix& x, const ComplexMatrix& y) {
  return (x.conjugate().cwiseProduct(y)).sum().real();
}

}  // namespace detail

/// Homodyne records with their POVM elements cached as rows of a real design
/// matrix, so that probabilities for all records are one matrix-vector
/// product. Immutable after construction.
class Dataset {
 public:
  using DesignMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

  Dataset(std::vector<MeasurementRecord> records, double eta, const Truncation& trunc)
      : records_(std::move(records)), eta_(eta), trunc_(trunc) {
    if (records_.empty()) throw DomainError("dataset needs at least one record");
    detail::PovmCore core(eta, trunc);
    const Eigen::Index d = trunc.dim();
    design_.resize(static_cast<Eigen::Index>(records_.size()), d * d);
    RealVector c(d), s(d);
    for (std::size_t i = 0; i < records_.size(); ++i) {
      const auto& rec = records_[i];
      if (!is_valid(rec))
        throw DomainError("record " + std::to_string(i) + " has phase outside [0, pi) or non-finite x");
      RealMatrix m = core.core(rec.x);
      for (Eigen::Index k = 0; k < d; ++k) {
        c(k) = std::cos(rec.theta * static_cast<double>(k));
        s(k) = std::sin(rec.theta * static_cast<double>(k));
      }
      auto row = design_.row(static_cast<Eigen::Index>(i));
      for (Eigen::Index n = 0; n < d; ++n) row(n) = m(n, n);
      Eigen::Index j = d;
      // Pi_mn = M_mn exp(i theta (n - m))
      for (Eigen::Index a = 0; a < d; ++a) {
        for (Eigen::Index b = a + 1; b < d; ++b) {
          row(j++) = std::numbers::sqrt2 * m(a, b) * c(b - a);
          row(j++) = std::numbers::sqrt2 * m(a, b) * s(b - a);
        }
      }
    }
  }

  /// Dataset over arbitrary Hermitian PSD measurement operators.
  static Dataset from_povms(const std::vector<ComplexMatrix>& povms) {
    if (povms.empty()) throw DomainError("dataset needs at least one record");
    const Eigen::Index d = povms.front().rows();
    Dataset out(detail::truncation_for_dim(d));
    out.design_.resize(static_cast<Eigen::Index>(povms.size()), d * d);
    for (std::size_t i = 0; i < povms.size(); ++i) {
      if (povms[i].rows() != d || povms[i].cols() != d) throw DimensionMismatch("POVM dimensions differ");
      out.design_.row(static_cast<Eigen::Index>(i)) = detail::hvec(povms[i]).transpose();
    }
    return out;
  }

  std::size_t size() const noexcept { return static_cast<std::size_t>(design_.rows()); }
  const std::vector<MeasurementRecord>& records() const noexcept { return records_; }
  double eta() const noexcept { return eta_; }
  const Truncation& truncation() const noexcept { return trunc_; }
  Eigen::Index dim() const noexcept { return trunc_.dim(); }
  const DesignMatrix& design() const noexcept { return design_; }

  ComplexMatrix povm(std::size_t i) const {
    return detail::unhvec(design_.row(static_cast<Eigen::Index>(i)).transpose(), dim());
  }

  /// Tr(Pi_i h) for every record.
  RealVector traces(const ComplexMatrix& hermitian) const { return design_ * detail::hvec(hermitian); }

  /// sum_i w_i Pi_i.
  ComplexMatrix weighted_sum(const RealVector& w) const {
    return detail::unhvec(design_.transpose() * w, dim());
  }

 private:
  explicit Dataset(const Truncation& trunc) : eta_(1.0), trunc_(trunc) {}

  std::vector<MeasurementRecord> records_;
  double eta_;
  Truncation trunc_;
  DesignMatrix design_;
};

namespace detail {

inline void check_dims(const DensityMatrix& rho, const Dataset& ds) {
  if (rho.dim() != ds.dim())
    throw DimensionMismatch("state dimension " + std::to_string(rho.dim()) + " != dataset dimension " +
                            std::to_string(ds.dim()));
}

inline std::optional<std::size_t> first_floor_breach(const RealVector& probs) {
  for (Eigen::Index i = 0; i < probs.size(); ++i)
    if (!(probs(i) > kProbabilityFloor)) return static_cast<std::size_t>(i);
  return std::nullopt;
}

inline RealVector checked_probabilities(const DensityMatrix& rho, const Dataset& ds) {
  check_dims(rho, ds);
  RealVector p = ds.traces(rho.matrix());
  if (auto i = first_floor_breach(p)) throw LikelihoodFloorBreach(*i, p(static_cast<Eigen::Index>(*i)));
  return p;
}

inline double sum_log(const RealVector& probs) { return probs.array().log().sum(); }

inline ComplexMatrix r_from_probabilities(const RealVector& probs, const Dataset& ds) {
  return ds.weighted_sum(probs.cwiseInverse());
}

inline double bound_from_r(const ComplexMatrix& r, std::size_t n) {
  return max_eigenvalue(r) - static_cast<double>(n);
}

/// Positive square root of a density matrix.
inline ComplexMatrix sqrt_psd(const ComplexMatrix& rho) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian_part(rho));
  RealVector ev = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().adjoint();
}

/// (S + A)(S + A)^dagger normalized to unit trace.
inline ComplexMatrix rga_parametrize(const ComplexMatrix& s, const ComplexMatrix& a) {
  ComplexMatrix b = s + a;
  ComplexMatrix g = b * b.adjoint();
  g = hermitian_part(g);
  return g / g.trace().real();
}

}  // namespace detail

inline double log_likelihood(const DensityMatrix& rho, const Dataset& ds) {
  return detail::sum_log(detail::checked_probabilities(rho, ds));
}

/// R(rho) = sum_i Pi_i / Tr(Pi_i rho).
inline ComplexMatrix r_operator(const DensityMatrix& rho, const Dataset& ds) {
  return detail::r_from_probabilities(detail::checked_probabilities(rho, ds), ds);
}

/// lambda_max(R(rho)) - N: an upper bound on L(rho_ML) - L(rho).
inline double stopping_bound(const DensityMatrix& rho, const Dataset& ds) {
  return detail::bound_from_r(r_operator(rho, ds), ds.size());
}

// ---------------------------------------------------------------------------

enum class OptimizerPhase { RhoR, Rga };

struct OptimizerState {
  DensityMatrix rho;
  std::size_t k = 0;
  double u = 0.01;
  double loglik = 0.0;
  OptimizerPhase phase = OptimizerPhase::RhoR;
  /// Tr(Pi_i rho) for the current iterate.
  RealVector probs;
  std::size_t retreats = 0;
};

namespace detail {

/// Evaluates probabilities, blending toward the maximally mixed state while
/// any record sits at the probability floor.
inline OptimizerState make_state(ComplexMatrix rho, const Dataset& ds, OptimizerState base) {
  const Eigen::Index d = ds.dim();
  RealVector p = ds.traces(rho);
  while (first_floor_breach(p)) {
    rho = (1.0 - kRetreatWeight) * rho +
          (kRetreatWeight / static_cast<double>(d)) * ComplexMatrix::Identity(d, d);
    p = ds.traces(rho);
    ++base.retreats;
  }
  base.rho = DensityMatrix::unchecked(std::move(rho));
  base.loglik = sum_log(p);
  base.probs = std::move(p);
  return base;
}

/// Local quadratic model of A -> L(rho(A)) at A = 0:
///   m(A) = <G, A> + 1/2 <A, H A>,  <X, Y> = Re Tr(X^dagger Y)
/// with
///   G    = 2 (R S - N S)
///   H A  = 2 R A - 2 N A - 2 T(A) S + 2 N <2S, A> S,
///   T(A) = sum_i l_i(A) / p_i^2 Pi_i,  l_i(A) = Tr(Pi_i (A S + S A^dagger)).
/// The terms are the exact second-order expansion of
/// sum_i ln Tr(Pi_i (S+A)(S+A)^dagger) - N ln Tr((S+A)(S+A)^dagger).
class RgaModel {
 public:
  RgaModel(const ComplexMatrix& rho, const RealVector& probs, const ComplexMatrix& r, const Dataset& ds)
      : ds_(ds), s_(sqrt_psd(rho)), r_(r), inv_p2_(probs.array().square().inverse().matrix()),
        n_(static_cast<double>(ds.size())) {
    gradient_ = 2.0 * (r_ * s_ - n_ * s_);
  }

  const ComplexMatrix& sqrt_rho() const noexcept { return s_; }
  const ComplexMatrix& gradient() const noexcept { return gradient_; }

  ComplexMatrix hessian_times(const ComplexMatrix& a) const {
    ComplexMatrix as = a * s_;
    ComplexMatrix first_order = as + as.adjoint();  // A S + S A^dagger
    RealVector l = ds_.traces(first_order);
    ComplexMatrix t = ds_.weighted_sum(l.cwiseProduct(inv_p2_));
    double c = frobenius_inner(2.0 * s_, a);
    return 2.0 * (r_ * a) - 2.0 * n_ * a - 2.0 * (t * s_) + (2.0 * n_ * c) * s_;
  }

  double linear_term(const ComplexMatrix& a) const { return frobenius_inner(gradient_, a); }

  double value(const ComplexMatrix& a) const {
    return linear_term(a) + 0.5 * frobenius_inner(a, hessian_times(a));
  }

 private:
  const Dataset& ds_;
  ComplexMatrix s_;
  ComplexMatrix r_;
  RealVector inv_p2_;
  double n_;
  ComplexMatrix gradient_;
};

inline constexpr double kMinRadius = 1e-14;
inline constexpr double kMaxRadius = 4.0;

inline OptimizerState rrr_update(const OptimizerState& state, const ComplexMatrix& r, const Dataset& ds) {
  ComplexMatrix next = r * state.rho.matrix() * r;
  next = hermitian_part(next);
  next /= next.trace().real();
  OptimizerState out = make_state(std::move(next), ds, state);
  if (out.loglik < state.loglik) {
    // Plain R rho R is not monotone; discard the step and hand over to RGA.
    OptimizerState kept = state;
    kept.phase = OptimizerPhase::Rga;
    return kept;
  }
  ++out.k;
  return out;
}

inline OptimizerState rga_update(const OptimizerState& state, const ComplexMatrix& r, const Dataset& ds,
                                 const SteihaugOptions& cg = {}) {
  RgaModel model(state.rho.matrix(), state.probs, r, ds);
  auto inner = [](const ComplexMatrix& x, const ComplexMatrix& y) { return frobenius_inner(x, y); };
  // Steihaug minimizes -m(A).
  ComplexMatrix neg_grad = -model.gradient();
  auto neg_hess = [&](const ComplexMatrix& a) -> ComplexMatrix { return -model.hessian_times(a); };

  double u = state.u;
  for (;;) {
    if (u < kMinRadius) throw Stagnation(bound_from_r(r, ds.size()));
    auto sub = steihaug_cg(neg_grad, neg_hess, inner, std::sqrt(u), cg);
    const double predicted = -sub.model_value;
    if (predicted > 0.0) {
      OptimizerState next = make_state(rga_parametrize(model.sqrt_rho(), sub.step), ds, state);
      const double actual = next.loglik - state.loglik;
      if (actual > 0.0 && next.retreats == state.retreats) {
        next.phase = OptimizerPhase::Rga;
        next.k = state.k + 1;
        next.u = actual / predicted > 0.75 ? std::min(2.0 * u, kMaxRadius) : u;
        return next;
      }
    }
    u *= 0.25;
  }
}

}  // namespace detail

inline OptimizerState initial_state(const Dataset& ds, double initial_radius = 0.01) {
  OptimizerState base{DensityMatrix::maximally_mixed(ds.truncation()), 0, initial_radius};
  return detail::make_state(DensityMatrix::maximally_mixed(ds.truncation()).matrix(), ds, std::move(base));
}

/// rho -> R rho R / Tr(R rho R). If the likelihood would decrease the
/// returned state keeps rho and switches to the RGA phase.
inline OptimizerState rrr_step(const OptimizerState& state, const Dataset& ds) {
  detail::check_dims(state.rho, ds);
  return detail::rrr_update(state, detail::r_from_probabilities(state.probs, ds), ds);
}

/// One accepted RGA step; shrinks the trust radius until L strictly
/// increases. Throws Stagnation when the radius underflows.
inline OptimizerState rga_step(const OptimizerState& state, const Dataset& ds) {
  detail::check_dims(state.rho, ds);
  return detail::rga_update(state, detail::r_from_probabilities(state.probs, ds), ds);
}

// ---------------------------------------------------------------------------

enum class StopReason { Converged, IterationCap, Stagnation };

inline std::string to_string(StopReason r) {
  switch (r) {
    case StopReason::Converged: return "converged";
    case StopReason::IterationCap: return "iteration-cap";
    case StopReason::Stagnation: return "stagnation";
  }
  return "unknown";
}

struct EstimatorOptions {
  double threshold = 0.2;
  std::size_t max_iterations = 20000;
  /// R rho R iterations before switching to RGA; ceil((n_max+1)^2 / 4) if unset.
  std::optional<std::size_t> rrr_iterations;
  double initial_radius = 0.01;
  SteihaugOptions cg{};
  /// Called with every exposed iterate and its stopping bound.
  std::function<void(const OptimizerState&, double)> observer;
};

struct EstimateReport {
  DensityMatrix rho_ml;
  double final_bound = 0.0;
  double loglik = 0.0;
  std::size_t iterations_rrr = 0;
  std::size_t iterations_rga = 0;
  std::size_t retreats = 0;
  bool converged = false;
  StopReason reason = StopReason::IterationCap;
};

inline std::size_t default_rrr_iterations(const Truncation& trunc) {
  const std::size_t d = static_cast<std::size_t>(trunc.dim());
  return (d * d + 3) / 4;
}

inline EstimateReport estimate_state(const Dataset& ds, const EstimatorOptions& opts = {}) {
  if (!(opts.threshold >= 0.0)) throw DomainError("stopping threshold must be >= 0");
  const std::size_t n_rrr = opts.rrr_iterations.value_or(default_rrr_iterations(ds.truncation()));
  OptimizerState state = initial_state(ds, opts.initial_radius);
  EstimateReport rep{state.rho};
  for (;;) {
    ComplexMatrix r = detail::r_from_probabilities(state.probs, ds);
    const double bound = detail::bound_from_r(r, ds.size());
    if (opts.observer) opts.observer(state, bound);
    rep.final_bound = bound;
    if (bound <= opts.threshold) {
      rep.converged = true;
      rep.reason = StopReason::Converged;
      break;
    }
    if (state.k >= opts.max_iterations) {
      rep.reason = StopReason::IterationCap;
      break;
    }
    if (state.phase == OptimizerPhase::RhoR && rep.iterations_rrr < n_rrr) {
      OptimizerState next = detail::rrr_update(state, r, ds);
      if (next.phase == OptimizerPhase::RhoR) ++rep.iterations_rrr;
      state = std::move(next);
      continue;
    }
    state.phase = OptimizerPhase::Rga;
    try {
      state = detail::rga_update(state, r, ds, opts.cg);
      ++rep.iterations_rga;
    } catch (const Stagnation&) {
      rep.reason = StopReason::Stagnation;
      break;
    }
  }
  rep.rho_ml = state.rho;
  rep.loglik = state.loglik;
  rep.retreats = state.retreats;
  return rep;
}

}  // namespace tomolab
