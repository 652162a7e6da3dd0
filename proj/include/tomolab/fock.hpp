#pragma once

// Truncated photon-number-basis linear algebra: ladder operators, squeezed
// vacuum amplitudes, the beam-splitter loss channel, phase rotations and the
// purity functional.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tomolab/errors.hpp"

namespace tomolab {

using Complex = std::complex<double>;
using ComplexMatrix = Eigen::MatrixXcd;
using ComplexVector = Eigen::VectorXcd;
using RealMatrix = Eigen::MatrixXd;
using RealVector = Eigen::VectorXd;

/// Hilbert-space truncation at a maximum photon number.
class Truncation {
 public:
  explicit Truncation(int n_max) : n_max_(n_max) {
    if (n_max < 1) throw DomainError("truncation n_max must be >= 1, got " + std::to_string(n_max));
  }

  int n_max() const noexcept { return n_max_; }
  Eigen::Index dim() const noexcept { return n_max_ + 1; }

  friend bool operator==(const Truncation&, const Truncation&) = default;

 private:
  int n_max_;
};

namespace detail {

inline Truncation truncation_for_dim(Eigen::Index dim) { return Truncation(static_cast<int>(dim) - 1); }

inline double max_hermitian_defect(const ComplexMatrix& m) {
  return (m - m.adjoint()).cwiseAbs().maxCoeff();
}

inline ComplexMatrix hermitian_part(const ComplexMatrix& m) { return 0.5 * (m + m.adjoint()); }

inline double min_eigenvalue(const ComplexMatrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(0);
}

inline double max_eigenvalue(const ComplexMatrix& hermitian) {
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(hermitian, Eigen::EigenvaluesOnly);
  return es.eigenvalues()(es.eigenvalues().size() - 1);
}

/// log of binomial(n, k) * t^(n-k) * (1-t)^k; -inf for vanishing weights.
inline double log_binomial_weight(int n, int k, double t) {
  if (k < 0 || k > n) return -INFINITY;
  double lw = std::lgamma(n + 1.0) - std::lgamma(k + 1.0) - std::lgamma(n - k + 1.0);
  if (n - k > 0) lw += (n - k) * std::log(t);
  if (k > 0) {
    if (t >= 1.0) return -INFINITY;
    lw += k * std::log1p(-t);
  }
  return lw;
}

/// Square root of the binomial damping weight: entry (n-k, n) of the k-th
/// loss Kraus operator.
inline double kraus_amplitude(int n, int k, double t) {
  if (k == 0 && n == 0) return 1.0;
  double lw = log_binomial_weight(n, k, t);
  return std::isinf(lw) ? 0.0 : std::exp(0.5 * lw);
}

}  // namespace detail

/// Trace-one positive semidefinite matrix on a truncated Fock space.
class DensityMatrix {
 public:
  static constexpr double kHermitianTol = 1e-12;
  static constexpr double kTraceTol = 1e-10;
  static constexpr double kEigenTol = 1e-10;

  /// Validates the invariants and throws InvalidState on violation.
  static DensityMatrix from_matrix(ComplexMatrix m) {
    if (m.rows() != m.cols() || m.rows() < 2)
      throw InvalidState("density matrix must be square with dimension >= 2");
    if (!m.allFinite()) throw InvalidState("density matrix has non-finite entries");
    double herm = detail::max_hermitian_defect(m);
    if (herm > kHermitianTol)
      throw InvalidState("density matrix not Hermitian (defect " + std::to_string(herm) + ")");
    double tr = m.trace().real();
    if (std::abs(tr - 1.0) > kTraceTol)
      throw InvalidState("density matrix trace " + std::to_string(tr) + " differs from 1");
    double lmin = detail::min_eigenvalue(detail::hermitian_part(m));
    if (lmin < -kEigenTol)
      throw InvalidState("density matrix has negative eigenvalue " + std::to_string(lmin));
    return DensityMatrix(std::move(m));
  }

  /// Wraps a matrix whose invariants hold by construction. No checks.
  static DensityMatrix unchecked(ComplexMatrix m) { return DensityMatrix(std::move(m)); }

  static DensityMatrix maximally_mixed(const Truncation& trunc) {
    auto d = trunc.dim();
    return DensityMatrix(ComplexMatrix::Identity(d, d) / static_cast<double>(d));
  }

  static DensityMatrix fock(const Truncation& trunc, int n) {
    if (n < 0 || n > trunc.n_max()) throw DomainError("photon number outside truncation");
    ComplexMatrix m = ComplexMatrix::Zero(trunc.dim(), trunc.dim());
    m(n, n) = 1.0;
    return DensityMatrix(std::move(m));
  }

  /// |psi><psi| / <psi|psi>.
  static DensityMatrix pure(const ComplexVector& psi) {
    double nrm = psi.squaredNorm();
    if (!(nrm > 0.0)) throw InvalidState("cannot build a pure state from a zero vector");
    return DensityMatrix(psi * psi.adjoint() / nrm);
  }

  const ComplexMatrix& matrix() const noexcept { return m_; }
  Eigen::Index dim() const noexcept { return m_.rows(); }
  Truncation truncation() const { return detail::truncation_for_dim(m_.rows()); }

 private:
  explicit DensityMatrix(ComplexMatrix m) : m_(std::move(m)) {}
  ComplexMatrix m_;
};

/// Photon-number amplitudes of a (possibly truncated) pure state.
class FockVector {
 public:
  explicit FockVector(ComplexVector amplitudes) : a_(std::move(amplitudes)) {
    if (a_.squaredNorm() > 1.0 + 1e-12) throw InvalidState("Fock vector norm exceeds 1");
  }

  const ComplexVector& amplitudes() const noexcept { return a_; }
  Eigen::Index dim() const noexcept { return a_.size(); }
  double squared_norm() const { return a_.squaredNorm(); }

  /// Renormalized projector onto this vector.
  DensityMatrix density_matrix() const { return DensityMatrix::pure(a_); }

 private:
  ComplexVector a_;
};

/// Kraus representation of a channel together with its loss parameter.
struct KrausSet {
  std::vector<ComplexMatrix> operators;
  double parameter = 1.0;

  Eigen::Index dim() const { return operators.empty() ? 0 : operators.front().rows(); }
};

// ---------------------------------------------------------------------------

inline ComplexMatrix annihilation_operator(const Truncation& trunc) {
  auto d = trunc.dim();
  ComplexMatrix a = ComplexMatrix::Zero(d, d);
  for (Eigen::Index n = 1; n < d; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

/// Squeezing parameter r = ln(s)/2 for squeezing factor s.
inline double squeezing_parameter(double s) { return 0.5 * std::log(s); }

namespace detail {

/// Real amplitudes c_0..c_{n_max} of the x-squeezed vacuum, odd entries zero.
inline RealVector squeezed_vacuum_amplitudes(double s, int n_max) {
  if (!(s >= 1.0)) throw DomainError("squeezing factor must be >= 1, got " + std::to_string(s));
  RealVector c = RealVector::Zero(n_max + 1);
  double r = squeezing_parameter(s);
  double th = std::tanh(r);
  c(0) = 1.0 / std::sqrt(std::cosh(r));
  for (int m = 0; 2 * m + 2 <= n_max; ++m) {
    double ratio = std::sqrt((2.0 * m + 1.0) * (2.0 * m + 2.0)) / (2.0 * (m + 1.0));
    c(2 * m + 2) = c(2 * m) * (-th) * ratio;
  }
  return c;
}

}  // namespace detail

/// Squeezed vacuum with x-quadrature variance 1/(2s), truncated at n_max.
inline FockVector squeezed_vacuum_state(double s, const Truncation& trunc) {
  RealVector c = detail::squeezed_vacuum_amplitudes(s, trunc.n_max());
  return FockVector(c.cast<Complex>());
}

/// Smallest photon cutoff whose squeezed-vacuum tail is below 1e-10 and which
/// is at least 4 * (n_max + 1).
inline int working_truncation(double s, int n_max) {
  constexpr double kTail = 1e-10;
  int n = std::max(4 * (n_max + 1), 2);
  for (;; n += 16) {
    RealVector c = detail::squeezed_vacuum_amplitudes(s, n);
    if (1.0 - c.squaredNorm() < kTail) return n;
    if (n > 100000) throw DomainError("squeezing too strong for a finite working truncation");
  }
}

/// Beam-splitter loss channel with transmissivity t: operators E_k,
/// k = 0..n_max, with (E_k)_{n-k,n} = sqrt(C(n,k) t^(n-k) (1-t)^k).
inline KrausSet loss_channel_kraus(double t, const Truncation& trunc) {
  if (!(t > 0.0 && t <= 1.0))
    throw DomainError("transmissivity must lie in (0, 1], got " + std::to_string(t));
  auto d = trunc.dim();
  KrausSet set;
  set.parameter = t;
  set.operators.reserve(d);
  for (int k = 0; k < d; ++k) {
    ComplexMatrix e = ComplexMatrix::Zero(d, d);
    for (int n = k; n < d; ++n) e(n - k, n) = detail::kraus_amplitude(n, k, t);
    set.operators.push_back(std::move(e));
  }
  return set;
}

/// rho -> sum_k E_k rho E_k^dagger, symmetrized and validated.
inline DensityMatrix apply_kraus_channel(const KrausSet& kraus, const DensityMatrix& rho) {
  if (kraus.operators.empty()) throw DimensionMismatch("empty Kraus set");
  if (kraus.dim() != rho.dim())
    throw DimensionMismatch("Kraus dimension " + std::to_string(kraus.dim()) +
                            " != state dimension " + std::to_string(rho.dim()));
  ComplexMatrix out = ComplexMatrix::Zero(rho.dim(), rho.dim());
  for (const auto& e : kraus.operators) out.noalias() += e * rho.matrix() * e.adjoint();
  return DensityMatrix::from_matrix(detail::hermitian_part(out));
}

namespace detail {

/// Loss channel applied entrywise:
///   out(m, n) = sum_k w_k(m+k) w_k(n+k) rho(m+k, n+k)
/// with w_k(j) the Kraus amplitude. Same map as apply_kraus_channel with
/// loss_channel_kraus, in O(d^3) instead of O(d^4).
inline ComplexMatrix apply_loss(const ComplexMatrix& rho, double t) {
  const int d = static_cast<int>(rho.rows());
  RealMatrix w(d, d);  // w(j, k) = amplitude of E_k at column j
  for (int j = 0; j < d; ++j)
    for (int k = 0; k < d; ++k) w(j, k) = kraus_amplitude(j, k, t);
  ComplexMatrix out = ComplexMatrix::Zero(d, d);
  for (int m = 0; m < d; ++m) {
    for (int n = 0; n < d; ++n) {
      Complex acc = 0.0;
      for (int k = 0; m + k < d && n + k < d; ++k) acc += w(m + k, k) * w(n + k, k) * rho(m + k, n + k);
      out(m, n) = acc;
    }
  }
  return hermitian_part(out);
}

/// Phase factors exp(i theta n), n = 0..dim-1.
inline ComplexVector phase_factors(double theta, Eigen::Index dim) {
  theta = std::remainder(theta, 2.0 * std::numbers::pi);
  ComplexVector f(dim);
  for (Eigen::Index n = 0; n < dim; ++n) f(n) = std::polar(1.0, theta * static_cast<double>(n));
  return f;
}

}  // namespace detail

/// Phase evolution U(theta) = diag(exp(i theta n)).
inline ComplexMatrix phase_rotation(double theta, const Truncation& trunc) {
  return detail::phase_factors(theta, trunc.dim()).asDiagonal();
}

/// Tr(rho^2), clipped into [0, 1] when within 1e-10 of the boundary.
inline double purity_of(const DensityMatrix& rho) {
  double p = rho.matrix().squaredNorm();  // sum |rho_mn|^2 = Tr(rho rho^dagger)
  if (p > 1.0 && p <= 1.0 + 1e-10) p = 1.0;
  if (p < 0.0 && p >= -1e-10) p = 0.0;
  return p;
}

/// Trace distance ||a - b||_1 / 2.
inline double trace_distance(const DensityMatrix& a, const DensityMatrix& b) {
  if (a.dim() != b.dim()) throw DimensionMismatch("trace distance of different dimensions");
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(detail::hermitian_part(a.matrix() - b.matrix()),
                                                  Eigen::EigenvaluesOnly);
  return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

/// Mean photon number Tr(rho a^dagger a).
inline double mean_photon_number(const DensityMatrix& rho) {
  double s = 0.0;
  for (Eigen::Index n = 0; n < rho.dim(); ++n) s += static_cast<double>(n) * rho.matrix()(n, n).real();
  return s;
}

/// Largest eigenvalue of the quadrature covariance matrix of rho (vacuum 1/2).
inline double max_quadrature_variance(const DensityMatrix& rho) {
  const ComplexMatrix& m = rho.matrix();
  const Eigen::Index d = m.rows();
  Complex ma = 0.0, ma2 = 0.0;
  double nbar = 0.0;
  for (Eigen::Index n = 0; n < d; ++n) {
    nbar += static_cast<double>(n) * m(n, n).real();
    if (n >= 1) ma += std::sqrt(static_cast<double>(n)) * m(n, n - 1);
    if (n >= 2) ma2 += std::sqrt(static_cast<double>(n) * (n - 1)) * m(n, n - 2);
  }
  // <a> = Tr(rho a) = sum_n sqrt(n) rho(n, n-1); similarly <a^2>.
  double centered_n = nbar - std::norm(ma);
  double centered_a2 = std::abs(ma2 - ma * ma);
  return centered_n + 0.5 + centered_a2;
}

}  // namespace tomolab
