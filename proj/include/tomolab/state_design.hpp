#pragma once

// Gaussian state families: lossy squeezed vacua parametrized by squeezing s
// and transmissivity t, with covariance
//   Sigma = t diag(1/(2s), s/2) + (1 - t) I/2
// and purity 1 / (2 sqrt(det Sigma)).

#include <cmath>
#include <string>
#include <string_view>
#include <utility>

#include <Eigen/Dense>

#include "tomolab/errors.hpp"
#include "tomolab/fock.hpp"

namespace tomolab {

enum class StateFamily { NearlyVacuum, HighlySqueezed };

inline std::string_view to_string(StateFamily f) {
  return f == StateFamily::NearlyVacuum ? "nearly-vacuum" : "highly-squeezed";
}

inline StateFamily parse_state_family(std::string_view s) {
  if (s == "nearly-vacuum") return StateFamily::NearlyVacuum;
  if (s == "highly-squeezed") return StateFamily::HighlySqueezed;
  throw DomainError("unknown state family '" + std::string(s) + "'");
}

/// Squeezing factor of the highly squeezed family: squeezed variance 1/8 is a
/// quarter of the vacuum variance 1/2.
inline constexpr double kHighlySqueezedS = 4.0;

/// Transmissivity of the nearly vacuum family (weakest squeezing for a purity).
inline constexpr double kNearlyVacuumT = 0.5;

namespace detail {

inline void check_st(double s, double t) {
  if (!(s >= 1.0)) throw DomainError("squeezing factor must be >= 1, got " + std::to_string(s));
  if (!(t > 0.0 && t <= 1.0))
    throw DomainError("transmissivity must lie in (0, 1], got " + std::to_string(t));
}

/// det Sigma in the expanded form (1/2 - 1/(4s) - s/4)(t^2 - t) + 1/4.
inline double covariance_determinant(double s, double t) {
  return (0.5 - 0.25 / s - 0.25 * s) * (t * t - t) + 0.25;
}

}  // namespace detail

inline Eigen::Matrix2d covariance_matrix(double s, double t) {
  detail::check_st(s, t);
  Eigen::Matrix2d sigma;
  sigma << t / (2.0 * s) + (1.0 - t) / 2.0, 0.0, 0.0, t * s / 2.0 + (1.0 - t) / 2.0;
  return sigma;
}

inline double purity_from_st(double s, double t) {
  detail::check_st(s, t);
  return 1.0 / (2.0 * std::sqrt(detail::covariance_determinant(s, t)));
}

/// Squeezing s >= 1 giving purity p at transmissivity t (larger root of the
/// quadratic s^2 - (2 + K) s + 1 = 0).
inline double solve_s_for_purity(double p, double t) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("purity must lie in (0, 1], got " + std::to_string(p));
  detail::check_st(1.0, t);
  double excess = 0.25 / (p * p) - 0.25;  // det Sigma - 1/4 >= 0
  double c = t - t * t;
  if (excess == 0.0) return 1.0;
  if (c <= 0.0)
    throw UnachievablePurity("purity " + std::to_string(p) + " is unreachable without loss (t = 1)");
  double k = 4.0 * excess / c;  // s + 1/s - 2
  return 1.0 + 0.5 * k + std::sqrt(k + 0.25 * k * k);
}

/// Transmissivity t in [1/2, 1] giving purity p at squeezing s.
inline double solve_t_for_purity(double p, double s) {
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("purity must lie in (0, 1], got " + std::to_string(p));
  detail::check_st(s, 1.0);
  double excess = 0.25 / (p * p) - 0.25;
  if (excess == 0.0) return 1.0;
  double a = 0.25 * s + 0.25 / s - 0.5;  // -(coefficient of t^2 - t), >= 0
  if (a <= 0.0)
    throw UnachievablePurity("purity " + std::to_string(p) + " is unreachable from the vacuum (s = 1)");
  double disc = 1.0 - 4.0 * excess / a;  // t^2 - t + excess/a = 0
  // At the minimum purity the root is double and sqrt would amplify rounding
  // in p to ~1e-8 in t; treat a discriminant within rounding of 0 as 0.
  if (std::abs(disc) < 1e-14) disc = 0.0;
  if (disc < 0.0)
    throw UnachievablePurity("purity " + std::to_string(p) + " is below the minimum " +
                             std::to_string(purity_from_st(s, 0.5)) + " reachable at s = " +
                             std::to_string(s));
  return 0.5 * (1.0 + std::sqrt(disc));
}

struct GaussianDesign {
  double s = 1.0;
  double t = 1.0;
  Eigen::Matrix2d sigma = Eigen::Matrix2d::Identity() / 2.0;
  double p = 1.0;

  static GaussianDesign from_st(double s, double t) {
    GaussianDesign d;
    d.s = s;
    d.t = t;
    d.sigma = covariance_matrix(s, t);
    d.p = purity_from_st(s, t);
    return d;
  }
};

inline GaussianDesign design_for(StateFamily family, double purity) {
  if (family == StateFamily::NearlyVacuum)
    return GaussianDesign::from_st(solve_s_for_purity(purity, kNearlyVacuumT), kNearlyVacuumT);
  return GaussianDesign::from_st(kHighlySqueezedS, solve_t_for_purity(purity, kHighlySqueezedS));
}

namespace detail {

/// Photon-number distribution of the lossy squeezed vacuum at cutoff n_work.
inline RealVector lossy_photon_distribution(const GaussianDesign& design, int n_work) {
  RealVector c = squeezed_vacuum_amplitudes(design.s, n_work);
  RealVector out = RealVector::Zero(n_work + 1);
  for (int m = 0; m <= n_work; ++m) {
    double pm = c(m) * c(m);
    if (pm == 0.0) continue;
    for (int n = 0; n <= m; ++n) out(n) += pm * std::exp(log_binomial_weight(m, m - n, design.t));
  }
  return out;
}

}  // namespace detail

/// Probability that the untruncated squeezed vacuum feeding the loss channel
/// holds more than n photons. This is the state that gets represented in the
/// truncated basis before loss is applied, so it bounds the truncation error.
inline double photon_tail_probability(const GaussianDesign& design, int n) {
  if (n < 0) throw DomainError("photon cutoff must be >= 0");
  int n_work = working_truncation(design.s, std::max(n, 1));
  RealVector c = detail::squeezed_vacuum_amplitudes(design.s, n_work);
  double tail = 0.0;
  for (int k = n_work; k > n; --k) tail += c(k) * c(k);
  return tail;
}

/// Same tail for the state after the lossy medium.
inline double lossy_photon_tail_probability(const GaussianDesign& design, int n) {
  if (n < 0) throw DomainError("photon cutoff must be >= 0");
  int n_work = working_truncation(design.s, std::max(n, 1));
  RealVector dist = detail::lossy_photon_distribution(design, n_work);
  double tail = 0.0;
  for (int k = n_work; k > n; --k) tail += dist(k);
  return tail;
}

struct TrueState {
  DensityMatrix rho;
  GaussianDesign design;
};

/// Builds the lossy squeezed vacuum of the family at the target purity.
///
/// The pure state and loss channel are evaluated at a working truncation,
/// then cut to `trunc` and renormalized. Throws if the cut discards more
/// than 1e-3 of the trace.
inline TrueState make_true_state(StateFamily family, double purity, const Truncation& trunc) {
  GaussianDesign design = design_for(family, purity);
  const int n_work = working_truncation(design.s, trunc.n_max());
  RealVector c = detail::squeezed_vacuum_amplitudes(design.s, n_work);
  c /= c.norm();
  ComplexMatrix pure = (c * c.transpose()).cast<Complex>();
  ComplexMatrix lossy = detail::apply_loss(pure, design.t);
  const auto d = trunc.dim();
  ComplexMatrix cut = lossy.topLeftCorner(d, d);
  double tr = cut.trace().real();
  if (1.0 - tr > 1e-3)
    throw DomainError("truncation n_max = " + std::to_string(trunc.n_max()) + " discards " +
                      std::to_string(1.0 - tr) + " of the state's trace");
  cut /= tr;
  return {DensityMatrix::from_matrix(detail::hermitian_part(cut)), design};
}

}  // namespace tomolab
