#pragma once

#include <functional>
#include <string>
#include <vector>

#include "optexec/model.hpp"

namespace optexec {

/// Finite knot/weight discretization of the one-step N(0, sigma^2) shock, so
/// conditional expectations in the backward recursion become weighted sums.
/// Knots are strictly increasing, weights positive and summing to one, and the
/// first two moments match (0, sigma^2). Immutable once built.
struct Quantizer {
  std::vector<double> knots;
  std::vector<double> weights;
  double sigma = 0.0;

  int n_knots() const { return static_cast<int>(knots.size()); }
};

/// Gauss-Hermite quadrature rescaled to N(0, sigma^2), computed by the
/// Golub-Welsch eigen decomposition of the Jacobi matrix. An N'-knot rule
/// integrates polynomials up to degree 2N'-1 exactly. sigma = 0 degenerates to
/// the single knot 0 with weight 1.
Quantizer build_quantizer(double sigma, int n_knots);

/// Load an externally tabulated unit-variance grid (two whitespace-separated
/// columns: knot weight; '#' starts a comment) and rescale it to sigma. After
/// normalizing the weights, the grid is affinely corrected to exact zero mean
/// and variance sigma^2 so the moment invariants hold to machine precision.
Quantizer load_quantizer(const std::string& path, double sigma);

/// sum_j w_j f(e_j). Throws NumericalError if f is non-finite at a knot.
double quantized_expectation(const Quantizer& q,
                             const std::function<double(double)>& f);

}  // namespace optexec
