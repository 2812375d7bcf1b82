#pragma once

#include <cmath>
#include <limits>
#include <utility>

namespace optexec {

struct ScalarMinResult {
  double x = 0.0;
  double f = 0.0;
  int evals = 0;
  bool converged = false;
};

/// Derivative-free local minimization on [lo, hi] combining golden-section
/// steps with parabolic interpolation (Brent's localmin), started from an
/// interior point x_init. Stops when the bracket shrinks below tol around the
/// current best point, or after max_evals function evaluations (returning the
/// best iterate with converged = false).
template <class F>
ScalarMinResult brent_minimize(F&& f, double lo, double hi, double x_init, double tol,
                               int max_evals) {
  constexpr double golden = 0.3819660112501051;
  const double sqrt_eps = std::sqrt(std::numeric_limits<double>::epsilon());

  double a = lo, b = hi;
  double x = std::min(std::max(x_init, a), b);
  double w = x, v = x;
  double fx = f(x);
  double fw = fx, fv = fx;
  int evals = 1;
  double d = 0.0, e = 0.0;

  while (true) {
    const double m = 0.5 * (a + b);
    const double tol1 = sqrt_eps * std::abs(x) + tol;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - m) <= tol2 - 0.5 * (b - a))
      return {x, fx, evals, true};
    if (evals >= max_evals) return {x, fx, evals, false};

    double step;
    bool golden_step = true;
    if (std::abs(e) > tol1) {
      // Fit a parabola through (x, fx), (w, fw), (v, fv).
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        double u_try = x + d;
        if (u_try - a < tol2 || b - u_try < tol2) d = (x < m) ? tol1 : -tol1;
        golden_step = false;
      }
    }
    if (golden_step) {
      e = (x < m) ? b - x : a - x;
      d = golden * e;
    }
    step = (std::abs(d) >= tol1) ? d : (d > 0.0 ? tol1 : -tol1);
    const double u = x + step;
    const double fu = f(u);
    ++evals;

    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
}

}  // namespace optexec
