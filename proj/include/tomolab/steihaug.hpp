#pragma once

// Steihaug-Toint truncated conjugate gradient for the trust-region subproblem
//
//   minimize  q(p) = <g, p> + 1/2 <p, H p>   subject to  ||p|| <= radius
//
// over any real inner-product space. The caller supplies the gradient, a
// Hessian-vector product and the inner product; vectors only need +, -,
// scalar * and value semantics.

#include <algorithm>
#include <cmath>

namespace tomolab {

enum class SteihaugExit {
  ZeroGradient,      // ||g|| already below tolerance
  Converged,         // residual reduced below tolerance inside the region
  NegativeCurvature, // direction of non-positive curvature, step to boundary
  Boundary,          // CG iterate left the region, step truncated to boundary
  MaxIterations,
};

struct SteihaugOptions {
  /// Stop when ||r|| <= relative_tolerance * ||g||.
  double relative_tolerance = 1e-2;
  int max_iterations = 50;
};

template <class Vec>
struct SteihaugResult {
  Vec step;
  /// q(step); negative when the model decreases.
  double model_value = 0.0;
  int iterations = 0;
  SteihaugExit exit = SteihaugExit::ZeroGradient;
};

namespace detail {

/// Largest tau >= 0 with ||p + tau d|| = radius, given ||p|| <= radius.
inline double boundary_step(double pp, double pd, double dd, double radius) {
  double disc = pd * pd + dd * (radius * radius - pp);
  disc = std::max(disc, 0.0);
  return (-pd + std::sqrt(disc)) / dd;
}

}  // namespace detail

template <class Vec, class HessianOp, class Inner>
SteihaugResult<Vec> steihaug_cg(const Vec& g, HessianOp&& hess, Inner&& inner, double radius,
                                const SteihaugOptions& opts = {}) {
  SteihaugResult<Vec> out{g * 0.0, 0.0, 0, SteihaugExit::ZeroGradient};
  const double g_norm = std::sqrt(inner(g, g));
  if (!(g_norm > 0.0)) return out;
  const double tol = opts.relative_tolerance * g_norm;

  Vec p = g * 0.0;
  Vec r = g;
  Vec d = g * -1.0;
  double rr = g_norm * g_norm;
  auto finish = [&](Vec step, SteihaugExit exit, int it) {
    Vec hs = hess(step);
    out.model_value = inner(g, step) + 0.5 * inner(step, hs);
    out.step = std::move(step);
    out.exit = exit;
    out.iterations = it;
    return out;
  };

  for (int it = 0; it < opts.max_iterations; ++it) {
    Vec hd = hess(d);
    const double dhd = inner(d, hd);
    const double pp = inner(p, p), pd = inner(p, d), dd = inner(d, d);
    if (dhd <= 0.0) {
      double tau = detail::boundary_step(pp, pd, dd, radius);
      return finish(p + d * tau, SteihaugExit::NegativeCurvature, it + 1);
    }
    const double alpha = rr / dhd;
    Vec p_next = p + d * alpha;
    if (inner(p_next, p_next) >= radius * radius) {
      double tau = detail::boundary_step(pp, pd, dd, radius);
      return finish(p + d * tau, SteihaugExit::Boundary, it + 1);
    }
    Vec r_next = r + hd * alpha;
    const double rr_next = inner(r_next, r_next);
    if (std::sqrt(rr_next) <= tol) return finish(std::move(p_next), SteihaugExit::Converged, it + 1);
    const double beta = rr_next / rr;
    d = r_next * -1.0 + d * beta;
    p = std::move(p_next);
    r = std::move(r_next);
    rr = rr_next;
  }
  return finish(std::move(p), SteihaugExit::MaxIterations, opts.max_iterations);
}

}  // namespace tomolab
