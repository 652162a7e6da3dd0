#pragma once

// Lossy homodyne detection in the truncated Fock basis.
//
// Quadrature convention: x = (a + a^dagger)/sqrt(2), vacuum variance 1/2.
// The POVM element for outcome x at local-oscillator phase theta with
// detector efficiency eta is
//   Pi(x|theta) = sum_k E_k(eta)^dagger U(theta)^dagger |x><x| U(theta) E_k(eta).
// Because U(theta) E_k = exp(-i theta k) E_k U(theta), this equals
// U(theta)^dagger M(x) U(theta) with the real symmetric
//   M(x) = sum_k E_k^T psi(x) psi(x)^T E_k,
// which is what the builders below evaluate.

#include <cmath>
#include <cstddef>
#include <numbers>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "tomolab/errors.hpp"
#include "tomolab/fock.hpp"
#include "tomolab/rng.hpp"

namespace tomolab {

inline constexpr double kDefaultEfficiency = 0.9;

struct MeasurementRecord {
  double theta = 0.0;
  double x = 0.0;

  friend bool operator==(const MeasurementRecord&, const MeasurementRecord&) = default;
};

inline bool is_valid(const MeasurementRecord& r) {
  return r.theta >= 0.0 && r.theta < std::numbers::pi && std::isfinite(r.x);
}

struct PovmElement {
  ComplexMatrix entries;
  double theta = 0.0;
  double x = 0.0;
  double eta = 1.0;
};

/// Hermite-function amplitudes psi_n(x) = <n|x>, n = 0..n_max.
inline RealVector quadrature_amplitudes(double x, const Truncation& trunc) {
  const auto d = trunc.dim();
  RealVector psi(d);
  psi(0) = std::exp(-0.5 * x * x) / std::sqrt(std::sqrt(std::numbers::pi));
  if (d > 1) psi(1) = std::sqrt(2.0) * x * psi(0);
  for (Eigen::Index n = 1; n + 1 < d; ++n) {
    double nn = static_cast<double>(n);
    psi(n + 1) = std::sqrt(2.0 / (nn + 1.0)) * x * psi(n) - std::sqrt(nn / (nn + 1.0)) * psi(n - 1);
  }
  return psi;
}

namespace detail {

inline void check_efficiency(double eta) {
  if (!(eta > 0.0 && eta <= 1.0))
    throw DomainError("detector efficiency must lie in (0, 1], got " + std::to_string(eta));
}

/// Caches Kraus amplitudes for one (eta, truncation) pair and builds the
/// phase-free POVM core M(x).
class PovmCore {
 public:
  PovmCore(double eta, const Truncation& trunc) : trunc_(trunc), eta_(eta) {
    check_efficiency(eta);
    const auto d = trunc.dim();
    w_.resize(d, d);
    for (int n = 0; n < d; ++n)
      for (int k = 0; k < d; ++k) w_(n, k) = kraus_amplitude(n, k, eta);
    // Lossless detection has only the k = 0 term.
    n_terms_ = eta >= 1.0 ? 1 : static_cast<int>(d);
  }

  const Truncation& truncation() const noexcept { return trunc_; }
  double eta() const noexcept { return eta_; }

  RealMatrix core(double x) const {
    const auto d = trunc_.dim();
    RealVector psi = quadrature_amplitudes(x, trunc_);
    RealMatrix m = RealMatrix::Zero(d, d);
    RealVector v(d);
    for (int k = 0; k < n_terms_; ++k) {
      v.setZero();
      for (int n = k; n < d; ++n) v(n) = w_(n, k) * psi(n - k);
      m.selfadjointView<Eigen::Lower>().rankUpdate(v);
    }
    m.triangularView<Eigen::StrictlyUpper>() = m.transpose();
    return m;
  }

  ComplexMatrix element(double x, double theta) const {
    ComplexVector f = phase_factors(theta, trunc_.dim());
    ComplexMatrix out = core(x).cast<Complex>();
    // (U^dagger M U)_{mn} = conj(f_m) M_mn f_n
    return f.conjugate().asDiagonal() * out * f.asDiagonal();
  }

 private:
  Truncation trunc_;
  double eta_;
  RealMatrix w_;
  int n_terms_ = 1;
};

}  // namespace detail

inline PovmElement povm_element(double x, double theta, double eta, const Truncation& trunc) {
  detail::PovmCore core(eta, trunc);
  return {core.element(x, theta), theta, x, eta};
}

/// Outcome density x -> Tr(rho Pi(x|theta)) at a fixed phase.
class QuadraturePdf {
 public:
  QuadraturePdf(const DensityMatrix& rho, double theta, double eta)
      : QuadraturePdf(detail::apply_loss(rho.matrix(), checked(eta)), theta) {}

  double operator()(double x) const {
    RealVector psi = quadrature_amplitudes(x, trunc_);
    return psi.dot(sigma_ * psi);
  }

  double theta() const noexcept { return theta_; }

 private:
  friend class QuadratureSampler;

  static double checked(double eta) {
    detail::check_efficiency(eta);
    return eta;
  }

  // Takes rho after detector loss.
  QuadraturePdf(const ComplexMatrix& rho_eta, double theta)
      : trunc_(detail::truncation_for_dim(rho_eta.rows())), theta_(theta) {
    ComplexVector f = detail::phase_factors(theta, rho_eta.rows());
    // <x|U rho U^dagger|x> with real psi keeps only the real part.
    sigma_ = (f.asDiagonal() * rho_eta * f.conjugate().asDiagonal()).real();
  }

  Truncation trunc_;
  double theta_;
  RealMatrix sigma_;
};

inline QuadraturePdf quadrature_pdf(const DensityMatrix& rho, double theta, double eta) {
  return QuadraturePdf(rho, theta, eta);
}

/// Rejection sampler for homodyne outcomes of one state.
///
/// Proposals are uniform on [-L, L]. The envelope constant is 1.2 times the
/// largest density found on a 2001-point x grid, maximized over the phases
/// the sampler is built for.
class QuadratureSampler {
 public:
  static constexpr int kGridPoints = 2001;
  static constexpr double kEnvelopeMargin = 1.2;

  /// Envelope valid for every phase in [0, pi).
  QuadratureSampler(const DensityMatrix& rho, double eta)
      : rho_eta_(detail::apply_loss(rho.matrix(), QuadraturePdf::checked(eta))) {
    half_width_ = support_half_width(max_quadrature_variance(rho));
    const int n_phases = 4 * static_cast<int>(rho.dim()) + 4;
    std::vector<double> phases;
    for (int j = 0; j < n_phases; ++j) phases.push_back(j * std::numbers::pi / n_phases);
    envelope_ = kEnvelopeMargin * grid_max(phases);
  }

  /// Envelope fitted to a single phase.
  QuadratureSampler(const DensityMatrix& rho, double eta, double theta)
      : rho_eta_(detail::apply_loss(rho.matrix(), QuadraturePdf::checked(eta))) {
    half_width_ = support_half_width(max_quadrature_variance(rho));
    envelope_ = kEnvelopeMargin * grid_max({theta});
  }

  /// L = max(3.5 sqrt(2 v) + 1, 6.2 sqrt(v)); the second term keeps the
  /// Gaussian mass outside [-L, L] below 1e-9 for strongly anti-squeezed states.
  static double support_half_width(double v_max) {
    v_max = std::max(v_max, 0.5);
    return std::max(3.5 * std::sqrt(2.0 * v_max) + 1.0, 6.2 * std::sqrt(v_max));
  }

  double half_width() const noexcept { return half_width_; }
  double envelope() const noexcept { return envelope_; }

  QuadraturePdf pdf(double theta) const { return QuadraturePdf(rho_eta_, theta); }

  double sample(double theta, RandomStream& rng) const { return sample(pdf(theta), rng); }

  double sample(const QuadraturePdf& pdf, RandomStream& rng) const {
    for (;;) {
      double x = rng.uniform(-half_width_, half_width_);
      double px = pdf(x);
      if (px > envelope_)
        throw EnvelopeViolation("density " + std::to_string(px) + " at x = " + std::to_string(x) +
                                " exceeds envelope " + std::to_string(envelope_));
      if (rng.uniform() * envelope_ < px) return x;
    }
  }

 private:
  double grid_max(const std::vector<double>& phases) const {
    double best = 0.0;
    for (double theta : phases) {
      QuadraturePdf p(rho_eta_, theta);
      for (int i = 0; i < kGridPoints; ++i) {
        double x = -half_width_ + 2.0 * half_width_ * i / (kGridPoints - 1);
        best = std::max(best, p(x));
      }
    }
    return best;
  }

  ComplexMatrix rho_eta_;
  double half_width_ = 0.0;
  double envelope_ = 0.0;
};

inline double sample_quadrature(const DensityMatrix& rho, double theta, double eta, RandomStream& rng) {
  return QuadratureSampler(rho, eta, theta).sample(theta, rng);
}

// ---------------------------------------------------------------------------
// Phase schedules

struct RandomPerShot {
  friend bool operator==(const RandomPerShot&, const RandomPerShot&) = default;
};

struct EvenlySpaced {
  int m = 1;
  friend bool operator==(const EvenlySpaced&, const EvenlySpaced&) = default;
};

using PhaseStrategy = std::variant<RandomPerShot, EvenlySpaced>;

inline std::string strategy_name(const PhaseStrategy& s) {
  return std::holds_alternative<RandomPerShot>(s) ? "random" : "evenly-spaced";
}

/// Number of distinct phases; 0 for random phases.
inline int strategy_phase_count(const PhaseStrategy& s) {
  if (auto e = std::get_if<EvenlySpaced>(&s)) return e->m;
  return 0;
}

struct PhaseSchedule {
  PhaseStrategy strategy;
  std::vector<double> phases;
};

/// Phases for N measurements. Evenly spaced phases are theta_j = j pi / m,
/// each measured N/m times, the remainder going one each to the lowest j.
inline PhaseSchedule phase_schedule(const PhaseStrategy& strategy, std::size_t n, RandomStream& rng) {
  if (n < 1) throw DomainError("phase schedule needs at least one measurement");
  PhaseSchedule out{strategy, {}};
  out.phases.reserve(n);
  if (std::holds_alternative<RandomPerShot>(strategy)) {
    for (std::size_t i = 0; i < n; ++i) out.phases.push_back(rng.phase());
    return out;
  }
  const int m = std::get<EvenlySpaced>(strategy).m;
  if (m < 1) throw DomainError("number of phases must be >= 1");
  if (static_cast<std::size_t>(m) > n)
    throw DomainError("more phases (" + std::to_string(m) + ") than measurements (" +
                      std::to_string(n) + ")");
  const std::size_t base = n / m, extra = n % m;
  for (int j = 0; j < m; ++j) {
    std::size_t count = base + (static_cast<std::size_t>(j) < extra ? 1 : 0);
    out.phases.insert(out.phases.end(), count, j * std::numbers::pi / m);
  }
  return out;
}

}  // namespace tomolab
