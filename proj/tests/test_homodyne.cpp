#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "tomolab/homodyne.hpp"
#include "tomolab/state_design.hpp"

using namespace tomolab;
using std::numbers::pi;

namespace {

DensityMatrix pure_squeezed(double s, int n_max) {
  return squeezed_vacuum_state(s, Truncation(n_max)).density_matrix();
}

std::vector<double> draw(const QuadratureSampler& sampler, double theta, std::size_t n, std::uint64_t seed) {
  RandomStream rng(seed);
  QuadraturePdf pdf = sampler.pdf(theta);
  std::vector<double> xs(n);
  for (auto& x : xs) x = sampler.sample(pdf, rng);
  return xs;
}

double sample_variance(const std::vector<double>& xs) {
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= xs.size();
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return ss / (xs.size() - 1);
}

/// Standard error of the sample variance of a zero-mean Gaussian.
double variance_se(double variance, std::size_t n) { return variance * std::sqrt(2.0 / (n - 1)); }

}  // namespace

TEST(QuadratureAmplitudes, GroundStateValues) {
  RealVector psi = quadrature_amplitudes(0.0, Truncation(5));
  EXPECT_NEAR(psi(0), std::pow(pi, -0.25), 1e-15);
  EXPECT_NEAR(psi(0), 0.751126, 1e-6);
  EXPECT_EQ(psi(1), 0.0);
}

TEST(QuadratureAmplitudes, MatchExplicitHermiteFunctions) {
  for (double x : {-3.3, -0.7, 0.0, 0.4, 2.1, 5.0}) {
    RealVector psi = quadrature_amplitudes(x, Truncation(20));
    for (int n = 0; n <= 20; ++n) EXPECT_NEAR(psi(n), oracle::hermite_function(n, x), 1e-12) << n << " " << x;
  }
}

TEST(QuadratureAmplitudes, Orthonormal) {
  Truncation tr(20);
  for (int m = 0; m <= 20; ++m)
    for (int n = m; n <= 20; ++n) {
      double v = oracle::integrate(
          [&](double x) {
            RealVector psi = quadrature_amplitudes(x, tr);
            return psi(m) * psi(n);
          },
          -12.0, 12.0);
      EXPECT_NEAR(v, m == n ? 1.0 : 0.0, 1e-8) << m << "," << n;
    }
}

TEST(Povm, HermitianPositive) {
  Truncation tr(8);
  for (double eta : {0.5, 0.9, 1.0})
    for (double x : {-2.0, 0.3, 1.5})
      for (double th : {0.0, 0.8, 2.9}) {
        ComplexMatrix p = povm_element(x, th, eta, tr).entries;
        EXPECT_LT(detail::max_hermitian_defect(p), 1e-12);
        EXPECT_GE(detail::min_eigenvalue(p), -1e-12);
      }
}

TEST(Povm, LosslessIsRankOneProjectorDirection) {
  Truncation tr(10);
  ComplexMatrix p = povm_element(0.7, 1.1, 1.0, tr).entries;
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(p);
  auto ev = es.eigenvalues();
  EXPECT_LE(std::abs(ev(ev.size() - 2)), 1e-12 * ev(ev.size() - 1));
  // U^dagger |x><x| U with U = diag(exp(i theta n))
  RealVector psi = quadrature_amplitudes(0.7, tr);
  ComplexVector v = phase_rotation(1.1, tr).adjoint() * psi.cast<Complex>();
  EXPECT_LT((p - v * v.adjoint()).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Povm, MatchesKrausSum) {
  Truncation tr(6);
  const double eta = 0.8, x = 0.4, th = 0.9;
  RealVector psi = quadrature_amplitudes(x, tr);
  ComplexVector v = phase_rotation(th, tr).adjoint() * psi.cast<Complex>();
  ComplexMatrix proj = v * v.adjoint();
  ComplexMatrix ref = ComplexMatrix::Zero(7, 7);
  for (const auto& e : loss_channel_kraus(eta, tr).operators) ref += e.adjoint() * proj * e;
  EXPECT_LT((povm_element(x, th, eta, tr).entries - ref).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Povm, CompletenessOverQuadrature) {
  Truncation tr(10);
  detail::PovmCore core(0.9, tr);
  ASSERT_LT((core.element(0.3, 0.7) - povm_element(0.3, 0.7, 0.9, tr).entries).cwiseAbs().maxCoeff(), 1e-15);
  for (double th : {0.0, pi / 4, pi / 2}) {
    double worst = 0.0;
    for (int m = 0; m <= 10; ++m)
      for (int n = m; n <= 10; ++n) {
        double re = oracle::integrate([&](double x) { return core.element(x, th)(m, n).real(); },
                                      -12, 12, 1e-10);
        double im = oracle::integrate([&](double x) { return core.element(x, th)(m, n).imag(); },
                                      -12, 12, 1e-10);
        worst = std::max(worst, std::abs(Complex(re, im) - (m == n ? 1.0 : 0.0)));
      }
    EXPECT_LE(worst, 1e-6) << "theta=" << th;
  }
}

TEST(Povm, HalfCircleSymmetry) {
  Truncation tr(10);
  for (double eta : {0.9, 1.0})
    for (double x : {-1.3, 0.2, 2.2})
      for (double th : {0.0, 0.4, 2.0}) {
        ComplexMatrix a = povm_element(x, th + pi, eta, tr).entries;
        ComplexMatrix b = povm_element(-x, th, eta, tr).entries;
        EXPECT_LT((a - b).cwiseAbs().maxCoeff(), 1e-10);
      }
}

TEST(Povm, ProbabilitiesNonNegative) {
  Truncation tr(6);
  RandomStream rng(4);
  for (int i = 0; i < 50; ++i) {
    ComplexVector v(7);
    for (auto& c : v) c = Complex(rng.uniform(-1, 1), rng.uniform(-1, 1));
    DensityMatrix rho = DensityMatrix::pure(v);
    ComplexMatrix p = povm_element(rng.uniform(-4, 4), rng.phase(), 0.9, tr).entries;
    EXPECT_GE((rho.matrix() * p).trace().real(), -1e-15);
  }
}

TEST(QuadraturePdf, VacuumIsGaussianWithHalfVariance) {
  DensityMatrix vac = DensityMatrix::fock(Truncation(10), 0);
  for (double th : {0.0, 1.0, 2.5}) {
    QuadraturePdf pdf = quadrature_pdf(vac, th, 0.9);
    EXPECT_NEAR(pdf(0.0), 1.0 / std::sqrt(pi), 1e-15);
    EXPECT_NEAR(pdf(0.0), 0.564190, 1e-6);
    for (double x : {-2.0, 0.5, 1.7}) EXPECT_NEAR(pdf(x), std::exp(-x * x) / std::sqrt(pi), 1e-15);
  }
}

TEST(QuadraturePdf, EqualsTraceAgainstPovm) {
  TrueState ts = make_true_state(StateFamily::HighlySqueezed, 0.9, Truncation(20));
  for (double x : {-1.0, 0.0, 0.6})
    for (double th : {0.0, 1.2}) {
      double direct = (ts.rho.matrix() * povm_element(x, th, 0.9, Truncation(20)).entries).trace().real();
      EXPECT_NEAR(quadrature_pdf(ts.rho, th, 0.9)(x), direct, 1e-14);
    }
}

TEST(QuadraturePdf, SqueezedVariancesFollowCovariancePropagation) {
  DensityMatrix rho = pure_squeezed(4.0, 60);
  auto variance = [&](double th, double eta) {
    QuadraturePdf pdf = quadrature_pdf(rho, th, eta);
    return oracle::integrate([&](double x) { return x * x * pdf(x); }, -12, 12, 1e-12);
  };
  EXPECT_NEAR(variance(0.0, 1.0), 1.0 / 8, 1e-8);
  EXPECT_NEAR(variance(0.0, 0.9), 0.9 / 8 + 0.1 / 2, 1e-8);
  EXPECT_NEAR(variance(pi / 2, 1.0), 2.0, 1e-6);
}

TEST(QuadraturePdf, NormalizedForExperimentStates) {
  struct Case { StateFamily f; int n_max; };
  for (Case c : {Case{StateFamily::NearlyVacuum, 10}, Case{StateFamily::NearlyVacuum, 20},
                 Case{StateFamily::HighlySqueezed, 20}}) {
    for (double p : {0.9, 0.95, 1.0}) {
      TrueState ts = make_true_state(c.f, p, Truncation(c.n_max));
      for (double th : {0.0, pi / 3, pi / 2}) {
        QuadraturePdf pdf = quadrature_pdf(ts.rho, th, 0.9);
        EXPECT_NEAR(oracle::integrate([&](double x) { return pdf(x); }, -12, 12, 1e-12), 1.0, 1e-6);
      }
    }
  }
}

TEST(Sampler, SupportLosesNegligibleMass) {
  for (double p : {0.8, 0.9, 1.0}) {
    TrueState ts = make_true_state(StateFamily::HighlySqueezed, p, Truncation(20));
    QuadratureSampler sampler(ts.rho, 0.9);
    const double L = sampler.half_width();
    for (double th : {0.0, pi / 2}) {
      QuadraturePdf pdf = sampler.pdf(th);
      double outside = 2.0 * oracle::integrate([&](double x) { return pdf(x); }, L, L + 20.0, 1e-16);
      EXPECT_LT(outside, 1e-9) << "p=" << p << " theta=" << th;
    }
  }
}

TEST(Sampler, VacuumPassesKolmogorovSmirnov) {
  DensityMatrix vac = DensityMatrix::fock(Truncation(10), 0);
  QuadratureSampler sampler(vac, 0.9);
  const std::size_t n = 100000;
  auto xs = draw(sampler, 0.7, n, 2024);
  double d = oracle::ks_distance(xs, [](double x) { return oracle::normal_cdf(x, 0.5); });
  EXPECT_LT(d, oracle::ks_critical(1e-3, n));
}

TEST(Sampler, AntiSqueezedVariance) {
  const std::size_t n = 100000;
  QuadratureSampler sampler(pure_squeezed(4.0, 60), 1.0, pi / 2);
  double v = sample_variance(draw(sampler, pi / 2, n, 7));
  EXPECT_LT(std::abs(v - 2.0), 3 * variance_se(2.0, n));
}

TEST(Sampler, LossySqueezedVariance) {
  const std::size_t n = 100000;
  QuadratureSampler sampler(pure_squeezed(4.0, 60), 0.9, 0.0);
  double v = sample_variance(draw(sampler, 0.0, n, 8));
  EXPECT_LT(std::abs(v - 0.1625), 3 * variance_se(0.1625, n));
}

TEST(Sampler, DecilesMatchDensity) {
  TrueState ts = make_true_state(StateFamily::HighlySqueezed, 0.9, Truncation(20));
  QuadratureSampler sampler(ts.rho, 0.9);
  const double th = 1.0;
  QuadraturePdf pdf = sampler.pdf(th);
  const double L = sampler.half_width();
  // Decile edges of the density by bisection on its integral.
  auto cdf = [&](double x) { return oracle::integrate([&](double y) { return pdf(y); }, -L, x, 1e-12); };
  std::vector<double> edges;
  for (int k = 1; k < 10; ++k) {
    double lo = -L, hi = L;
    for (int it = 0; it < 60; ++it) {
      double mid = 0.5 * (lo + hi);
      (cdf(mid) < k / 10.0 ? lo : hi) = mid;
    }
    edges.push_back(0.5 * (lo + hi));
  }
  const std::size_t n = 100000;
  auto xs = draw(sampler, th, n, 99);
  std::vector<double> counts(10, 0.0);
  for (double x : xs) counts[std::upper_bound(edges.begin(), edges.end(), x) - edges.begin()] += 1;
  double chi2 = 0.0, expected = n / 10.0;
  for (double c : counts) chi2 += (c - expected) * (c - expected) / expected;
  EXPECT_GT(oracle::chi_square_p_value(chi2, 9), 1e-3);
}

TEST(Sampler, DeterministicForFixedSeed) {
  TrueState ts = make_true_state(StateFamily::NearlyVacuum, 0.95, Truncation(10));
  QuadratureSampler sampler(ts.rho, 0.9);
  EXPECT_EQ(draw(sampler, 0.3, 500, 5), draw(sampler, 0.3, 500, 5));
  RandomStream a(17), b(17);
  EXPECT_EQ(sample_quadrature(ts.rho, 0.3, 0.9, a), sample_quadrature(ts.rho, 0.3, 0.9, b));
}

TEST(PhaseSchedule, EvenlySpacedSmall) {
  RandomStream rng(1);
  auto s = phase_schedule(EvenlySpaced{2}, 4, rng);
  EXPECT_EQ(s.phases, (std::vector<double>{0.0, 0.0, pi / 2, pi / 2}));
}

TEST(PhaseSchedule, EvenlySpacedRemainder) {
  RandomStream rng(1);
  auto s = phase_schedule(EvenlySpaced{6}, 8000, rng);
  std::map<double, int> counts;
  for (double th : s.phases) ++counts[th];
  ASSERT_EQ(counts.size(), 6u);
  int total = 0, j = 0;
  for (auto [th, c] : counts) {
    EXPECT_DOUBLE_EQ(th, j * pi / 6);
    EXPECT_TRUE(c == 1333 || c == 1334);
    EXPECT_EQ(c, j < 2 ? 1334 : 1333);
    total += c;
    ++j;
  }
  EXPECT_EQ(total, 8000);
}

TEST(PhaseSchedule, RandomIsUniformOnHalfCircle) {
  RandomStream rng(77);
  const std::size_t n = 100000;
  auto s = phase_schedule(RandomPerShot{}, n, rng);
  for (double th : s.phases) {
    ASSERT_GE(th, 0.0);
    ASSERT_LT(th, pi);
  }
  double d = oracle::ks_distance(s.phases, [](double x) { return std::clamp(x / pi, 0.0, 1.0); });
  EXPECT_LT(d, oracle::ks_critical(1e-3, n));
}

TEST(PhaseSchedule, RejectsBadArguments) {
  RandomStream rng(1);
  EXPECT_THROW(phase_schedule(EvenlySpaced{5}, 4, rng), DomainError);
  EXPECT_THROW(phase_schedule(RandomPerShot{}, 0, rng), DomainError);
}

TEST(MeasurementRecord, Validity) {
  EXPECT_TRUE(is_valid({0.0, 1.0}));
  EXPECT_FALSE(is_valid({pi, 1.0}));
  EXPECT_FALSE(is_valid({-0.1, 1.0}));
  EXPECT_FALSE(is_valid({0.5, INFINITY}));
}
