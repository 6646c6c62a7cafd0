#pragma once

#include <cmath>
#include <functional>

#include "mscale/common.hpp"

namespace mscale {

namespace detail {

inline double simpson_panel(double a, double fa, double b, double fb, double fm) {
  return (b - a) / 6.0 * (fa + 4.0 * fm + fb);
}

template <class F>
double adaptive_simpson_rec(const F& f, double a, double fa, double b, double fb, double m, double fm,
                            double whole, double tol, int depth) {
  const double lm = 0.5 * (a + m);
  const double rm = 0.5 * (m + b);
  const double flm = f(lm);
  const double frm = f(rm);
  if (!std::isfinite(flm) || !std::isfinite(frm)) return kInf;
  const double left = simpson_panel(a, fa, m, fm, flm);
  const double right = simpson_panel(m, fm, b, fb, frm);
  if (depth <= 0 || std::abs(left + right - whole) <= 15.0 * tol) {
    return left + right + (left + right - whole) / 15.0;
  }
  const double l = adaptive_simpson_rec(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1);
  if (l == kInf) return kInf;
  const double r = adaptive_simpson_rec(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1);
  if (r == kInf) return kInf;
  return l + r;
}

}  // namespace detail

// Adaptive Simpson quadrature, absolute tolerance per panel. Returns +inf if
// the integrand is infinite anywhere it is sampled.
template <class F>
double integrate(const F& f, double a, double b, double abs_tol = 1e-10, int max_depth = 48) {
  if (!(b > a)) return 0.0;
  const double fa = f(a);
  const double fb = f(b);
  const double m = 0.5 * (a + b);
  const double fm = f(m);
  if (!std::isfinite(fa) || !std::isfinite(fb) || !std::isfinite(fm)) return kInf;
  const double whole = detail::simpson_panel(a, fa, b, fb, fm);
  return detail::adaptive_simpson_rec(f, a, fa, b, fb, m, fm, whole, abs_tol, max_depth);
}

// Finds x in [lo_hint, +inf) with g(x) = target for strictly increasing g,
// expanding the bracket then bisecting with a secant acceleration step.
template <class G>
double solve_increasing(const G& g, double target, double abs_tol) {
  double lo = 0.0, hi = 1.0;
  double glo = g(lo);
  if (glo > target + abs_tol) throw InvalidInput("root-find: target below range");
  double ghi = g(hi);
  int guard = 0;
  while (ghi < target && guard++ < 200) {
    lo = hi;
    glo = ghi;
    hi *= 2.0;
    ghi = g(hi);
    // saturating integrand: doubling the window no longer moves the value
    // (threshold sits far above quadrature noise, far below genuine growth)
    if (ghi - glo < 1e-9 * (1.0 + std::abs(ghi)))
      throw InvalidInput("root-find: target beyond reachable range");
  }
  if (ghi < target) throw InvalidInput("root-find: target beyond reachable range");
  for (int it = 0; it < 200; ++it) {
    double mid;
    // secant proposal, fall back to bisection when degenerate
    if (ghi > glo) {
      mid = lo + (target - glo) / (ghi - glo) * (hi - lo);
      if (!(mid > lo && mid < hi)) mid = 0.5 * (lo + hi);
    } else {
      mid = 0.5 * (lo + hi);
    }
    const double gm = g(mid);
    if (std::abs(gm - target) <= abs_tol) return mid;
    if (gm < target) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
      ghi = gm;
    }
    if (hi - lo < 1e-15 * (1.0 + hi)) break;
  }
  return 0.5 * (lo + hi);
}

}  // namespace mscale
