#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's own numerics beyond plain types.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <numbers>
#include <vector>

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace oracle {

using Complex = std::complex<double>;
using CMatrix = Eigen::MatrixXcd;
using CVector = Eigen::VectorXcd;

inline CMatrix annihilation(int dim) {
  CMatrix a = CMatrix::Zero(dim, dim);
  for (int n = 1; n < dim; ++n) a(n - 1, n) = std::sqrt(static_cast<double>(n));
  return a;
}

/// exp(r/2 (a^2 - a^dagger^2)) |0> at a large cutoff, cut to `keep` entries.
/// With r = ln(s)/2 this squeezes the x quadrature to variance 1/(2s).
inline CVector squeezed_vacuum_expm(double s, int keep, int cutoff = 200) {
  const double r = 0.5 * std::log(s);
  CMatrix a = annihilation(cutoff);
  CMatrix a2 = a * a;
  CMatrix gen = 0.5 * r * (a2 - a2.adjoint());
  CMatrix u = gen.exp();
  return u.col(0).head(keep);
}

/// Loss by a beam splitter of transmissivity t mixing the mode with vacuum,
/// followed by a partial trace over the ancilla.
inline CMatrix beam_splitter_loss(const CMatrix& rho, double t) {
  const int d = static_cast<int>(rho.rows());
  CMatrix a = annihilation(d);
  CMatrix id = CMatrix::Identity(d, d);
  // Two-mode operators on H_a (x) H_b, index = na * d + nb.
  auto kron = [d](const CMatrix& x, const CMatrix& y) {
    CMatrix out(d * d, d * d);
    for (int i = 0; i < d; ++i)
      for (int j = 0; j < d; ++j) out.block(i * d, j * d, d, d) = x(i, j) * y;
    return out;
  };
  CMatrix A = kron(a, id);
  CMatrix B = kron(id, a);
  const double phi = std::acos(std::sqrt(t));
  CMatrix gen = phi * (A.adjoint() * B - A * B.adjoint());
  CMatrix u = gen.exp();
  CMatrix vac = CMatrix::Zero(d, d);
  vac(0, 0) = 1.0;
  CMatrix big = u * kron(rho, vac) * u.adjoint();
  CMatrix out = CMatrix::Zero(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      for (int k = 0; k < d; ++k) out(i, j) += big(i * d + k, j * d + k);
  return out;
}

/// Hermite-function value by explicit physicists' Hermite polynomial.
inline double hermite_function(int n, double x) {
  double h0 = 1.0, h1 = 2.0 * x;
  double h = n == 0 ? h0 : h1;
  for (int k = 1; k < n; ++k) {
    h = 2.0 * x * h1 - 2.0 * k * h0;
    h0 = h1;
    h1 = h;
  }
  double log_norm = -0.25 * std::log(std::numbers::pi) - 0.5 * (n * std::log(2.0) + std::lgamma(n + 1.0));
  return h * std::exp(log_norm - 0.5 * x * x);
}

/// Adaptive Gauss-Kronrod integral over [a, b].
inline double integrate(const std::function<double(double)>& f, double a, double b, double tol = 1e-13) {
  double err = 0.0;
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, a, b, 15, tol, &err);
}

inline double normal_cdf(double x, double variance) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

/// Two-sided Kolmogorov-Smirnov sup distance between the empirical CDF of
/// `samples` and `cdf`.
inline double ks_distance(std::vector<double> samples, const std::function<double(double)>& cdf) {
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    double f = cdf(samples[i]);
    d = std::max({d, f - i / n, (i + 1) / n - f});
  }
  return d;
}

/// Asymptotic Kolmogorov critical value: reject when D > c / sqrt(n).
inline double ks_critical(double alpha, std::size_t n) {
  return std::sqrt(-0.5 * std::log(alpha / 2.0)) / std::sqrt(static_cast<double>(n));
}

inline double chi_square_p_value(double statistic, double dof) {
  return boost::math::cdf(boost::math::complement(boost::math::chi_squared(dof), statistic));
}

/// Qubit density matrix from a Bloch vector.
inline CMatrix bloch_state(double x, double y, double z) {
  CMatrix m(2, 2);
  m << Complex(1 + z, 0), Complex(x, -y), Complex(x, y), Complex(1 - z, 0);
  return 0.5 * m;
}

/// Maximizes a concave function of the Bloch vector over the unit ball by a
/// coarse grid followed by shrinking pattern search.
inline double maximize_over_bloch_ball(const std::function<double(const CMatrix&)>& f, int grid = 41) {
  auto value = [&](double x, double y, double z) {
    double r2 = x * x + y * y + z * z;
    if (r2 > 1.0) {
      double r = std::sqrt(r2);
      x /= r, y /= r, z /= r;
    }
    return f(bloch_state(x, y, z));
  };
  double best = -INFINITY, bx = 0, by = 0, bz = 0;
  for (int i = 0; i < grid; ++i)
    for (int j = 0; j < grid; ++j)
      for (int k = 0; k < grid; ++k) {
        double x = -1 + 2.0 * i / (grid - 1), y = -1 + 2.0 * j / (grid - 1), z = -1 + 2.0 * k / (grid - 1);
        if (x * x + y * y + z * z > 1.0) continue;
        double v = f(bloch_state(x, y, z));
        if (v > best) best = v, bx = x, by = y, bz = z;
      }
  double step = 2.0 / (grid - 1);
  while (step > 1e-10) {
    bool moved = false;
    for (int dx = -1; dx <= 1; ++dx)
      for (int dy = -1; dy <= 1; ++dy)
        for (int dz = -1; dz <= 1; ++dz) {
          if (!dx && !dy && !dz) continue;
          double x = bx + dx * step, y = by + dy * step, z = bz + dz * step;
          double r2 = x * x + y * y + z * z;
          if (r2 > 1.0) {
            double r = std::sqrt(r2);
            x /= r, y /= r, z /= r;
          }
          double v = value(x, y, z);
          if (v > best) best = v, bx = x, by = y, bz = z, moved = true;
        }
    if (!moved) step *= 0.5;
  }
  return best;
}

}  // namespace oracle
