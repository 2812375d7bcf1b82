#pragma once

#include <span>
#include <vector>

#include "optexec/model.hpp"

namespace optexec {

/// Per-step quadratic value coefficients for the unconstrained linear case
/// (alpha = 1, single kernel): V(n, x, d) = a_n x^2 + b_n x d + c_n d^2 + e_n
/// with e_n = sigma^2 * sum_{j>n} c_j. Arrays are stored 0-based; the 1-based
/// accessors match the period indexing n = 1..N. The a/b/c tables do not
/// depend on sigma; only e does.
struct CoeffTable {
  int n_steps = 0;
  double kappa = 0.0, eta = 0.0, nu = 0.0, sigma = 0.0;
  std::vector<double> a, b, c;
  std::vector<double> e;      // e[n-1] = sigma^2 * sum_{j>n} c_j
  std::vector<double> delta;  // delta[n-1] = 2 eta + 4 nu + 4 a_n - 4 eta b_n + 4 eta^2 c_n

  double a_at(int n) const { return a[n - 1]; }
  double b_at(int n) const { return b[n - 1]; }
  double c_at(int n) const { return c[n - 1]; }
  double e_at(int n) const { return e[n - 1]; }
  double delta_at(int n) const { return delta[n - 1]; }
};

/// Backward recursion from the terminal row (a_N, b_N, c_N) = (eta/2, 1-kappa, 0).
/// Requires alpha = 1 and single-kernel mode. Throws NumericalError if any
/// denominator delta_n (n = N..2) falls below 1e-12 * (eta + nu); positivity is
/// guaranteed analytically, so a breach signals degenerate inputs.
CoeffTable backward_coeffs(const ModelParams& p);

/// Quadratic value at period n for state (x, d), including the sigma^2 tail.
double unconstrained_value(const CoeffTable& ct, int n, double x, double d);

/// Linear feedback trade at period n; may be negative. At n = N returns x.
double unconstrained_feedback(const CoeffTable& ct, int n, double x, double d);

/// Deterministic (sigma = 0) explicit solution. The nine coefficient vectors
/// express trades and states as affine functions of (u_1, d0, x0); b_hat and
/// c_hat determine the first trade u_1 = b_hat d0 + c_hat x0.
struct DeterministicSolution {
  std::vector<double> u;       // trades, length N
  std::vector<double> x_path;  // X_0..X_N, length N+1, x_path[N] = 0
  std::vector<double> d_path;  // D_0..D_{N-1}, length N
  std::vector<double> aa, bb, cc;     // trade rows
  std::vector<double> aax, bbx, ccx;  // inventory rows
  std::vector<double> aad, bbd, ccd;  // deviation rows
  double a_tilde = 0.0, b_tilde = 0.0, c_tilde = 0.0;
  double b_hat = 0.0, c_hat = 0.0;
  double cost = 0.0;  // realized deterministic cost of the schedule
};

/// Builds the full explicit solution by forward recursion (O(N^2) work).
/// Requires alpha = 1, sigma = 0, single kernel. Throws NumericalError if the
/// scalar denominator of (b_hat, c_hat) vanishes within tolerance.
DeterministicSolution deterministic_solution(const ModelParams& p);

/// Closed-form schedule for nu = 0: u_1 = u_N-ish U-shape with flat
/// intermediate trades kappa*u_1 + b_tilde*d0. Must agree with
/// deterministic_solution.
std::vector<double> cor4_strategy(const ModelParams& p);

/// Deterministic realized cost of an arbitrary (possibly signed) trade vector
/// under alpha = 1, sigma = 0 dynamics. Independent of the recursion above;
/// used to score schedules.
double deterministic_cost(const ModelParams& p, std::span<const double> trades);

/// Linear feedback clamped to buys-only: max(u, 0) first, then min(.., x).
double lf_clamp(double u_unconstrained, double x);

/// LF comparator policy: the unconstrained feedback evaluated on the observed
/// total deviation of the (possibly misspecified) world, clamped to [0, x].
/// `world` supplies the kernel weights used to observe d; `ct` may be built
/// with a different effective kappa.
PolicyFn make_lf_policy(const CoeffTable& ct, const ModelParams& world);

/// Model-independent schedule: x0/N each period, remainder at the end.
PolicyFn make_vwap_policy(const ModelParams& p);

/// Forward-simulates the unconstrained feedback (trades may be negative) under
/// linear dynamics with the given shock row. This is the stochastic benchmark
/// path; the admissible simulator in model.hpp cannot represent sells.
SimResult simulate_unconstrained_linear(const CoeffTable& ct, const ModelParams& p,
                                        std::span<const double> eps);

}  // namespace optexec
