#include "optexec/closed_form.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <string>

namespace optexec {

namespace {

void require_linear_single(const ModelParams& p, const char* who) {
  if (p.alpha != 1.0)
    throw ValidationError(std::string(who) + ": requires alpha = 1");
  if (!p.single_kernel())
    throw ValidationError(std::string(who) + ": requires single-kernel mode");
}

double dot(const std::vector<double>& u, const std::vector<double>& v) {
  return std::inner_product(u.begin(), u.end(), v.begin(), 0.0);
}

}  // namespace

CoeffTable backward_coeffs(const ModelParams& p) {
  require_linear_single(p, "backward_coeffs");
  p.validate();
  const int N = p.n_steps;
  const double kappa = p.kappa[0], eta = p.eta, nu = p.nu;

  CoeffTable ct;
  ct.n_steps = N;
  ct.kappa = kappa;
  ct.eta = eta;
  ct.nu = nu;
  ct.sigma = p.sigma;
  ct.a.assign(N, 0.0);
  ct.b.assign(N, 0.0);
  ct.c.assign(N, 0.0);
  ct.e.assign(N, 0.0);
  ct.delta.assign(N, 0.0);

  ct.a[N - 1] = 0.5 * eta;
  ct.b[N - 1] = 1.0 - kappa;
  ct.c[N - 1] = 0.0;

  auto delta_of = [&](double a, double b, double c) {
    return 2.0 * eta + 4.0 * nu + 4.0 * a - 4.0 * eta * b + 4.0 * eta * eta * c;
  };
  const double delta_tol = 1e-12 * (eta + nu);

  ct.delta[N - 1] = delta_of(ct.a[N - 1], ct.b[N - 1], ct.c[N - 1]);
  for (int n = N - 1; n >= 1; --n) {
    const double an1 = ct.a[n], bn1 = ct.b[n], cn1 = ct.c[n];
    const double den = ct.delta[n];
    if (!(den > delta_tol)) {
      std::ostringstream os;
      os << "backward_coeffs: denominator " << den << " at n=" << (n + 1)
         << " below tolerance " << delta_tol << " (degenerate parameters)";
      throw NumericalError(os.str());
    }
    const double num1 = 2.0 * nu + 2.0 * an1 - eta * bn1;
    const double num2 = 1.0 - bn1 + 2.0 * eta * cn1;
    const double omk = 1.0 - kappa;
    ct.a[n - 1] = nu + an1 - num1 * num1 / den;
    ct.b[n - 1] = omk * bn1 + 2.0 * omk * num1 * num2 / den;
    ct.c[n - 1] = omk * omk * (cn1 - num2 * num2 / den);
    ct.delta[n - 1] = delta_of(ct.a[n - 1], ct.b[n - 1], ct.c[n - 1]);
  }

  // e_n = sigma^2 * sum_{j>n} c_j, accumulated as a suffix sum.
  double tail = 0.0;
  const double s2 = p.sigma * p.sigma;
  for (int n = N; n >= 1; --n) {
    ct.e[n - 1] = s2 * tail;
    tail += ct.c[n - 1];
  }
  return ct;
}

double unconstrained_value(const CoeffTable& ct, int n, double x, double d) {
  return ct.a_at(n) * x * x + ct.b_at(n) * x * d + ct.c_at(n) * d * d + ct.e_at(n);
}

double unconstrained_feedback(const CoeffTable& ct, int n, double x, double d) {
  if (n == ct.n_steps) return x;
  const double an1 = ct.a_at(n + 1), bn1 = ct.b_at(n + 1), cn1 = ct.c_at(n + 1);
  const double num1 = 2.0 * ct.nu + 2.0 * an1 - ct.eta * bn1;
  const double num2 = 1.0 - bn1 + 2.0 * ct.eta * cn1;
  const double den = ct.eta + 2.0 * ct.nu + 2.0 * an1 - 2.0 * ct.eta * bn1 +
                     2.0 * ct.eta * ct.eta * cn1;
  return (num1 * x - num2 * (1.0 - ct.kappa) * d) / den;
}

DeterministicSolution deterministic_solution(const ModelParams& p) {
  require_linear_single(p, "deterministic_solution");
  if (p.sigma != 0.0)
    throw ValidationError("deterministic_solution: requires sigma = 0");
  p.validate();
  const int N = p.n_steps;
  const double kappa = p.kappa[0], eta = p.eta, nu = p.nu;
  const double omk = 1.0 - kappa;

  DeterministicSolution s;
  s.aa.assign(N, 0.0);
  s.bb.assign(N, 0.0);
  s.cc.assign(N, 0.0);
  s.aax.assign(N, 0.0);
  s.bbx.assign(N, 0.0);
  s.ccx.assign(N, 0.0);
  s.aad.assign(N, 0.0);
  s.bbd.assign(N, 0.0);
  s.ccd.assign(N, 0.0);

  if (N == 1) {
    // Forced liquidation; the coefficient machinery is vacuous.
    s.b_hat = 0.0;
    s.c_hat = 1.0;
    s.aa[0] = 1.0;
    s.ccx[0] = 1.0;
    s.bbd[0] = 1.0;
    s.u = {p.x0};
    s.x_path = {p.x0, 0.0};
    s.d_path = {p.d0};
    s.cost = deterministic_cost(p, s.u);
    return s;
  }

  const double q = 2.0 * kappa * eta - kappa * kappa * eta - 2.0 * kappa * nu + 2.0 * nu;
  s.a_tilde = kappa * (2.0 * kappa * eta - kappa * kappa * eta + 2.0 * nu) / q;
  s.b_tilde = kappa * kappa * (2.0 - 3.0 * kappa + kappa * kappa) / q;
  s.c_tilde = -2.0 * kappa * nu / q;

  // Trade rows: u_i = aa_i u_1 + bb_i d0 + cc_i x0.
  s.aa[0] = 1.0;
  if (N >= 3) {
    s.aa[1] = s.a_tilde;
    s.bb[1] = s.b_tilde;
    s.cc[1] = s.c_tilde;
  }
  for (int i = 3; i <= N - 1; ++i) {
    double sa = 0.0, sb = 0.0, sc = 0.0;
    for (int j = 1; j <= i - 2; ++j) {
      const double w = s.b_tilde * eta * std::pow(omk, i - 2 - j) - s.c_tilde;
      sa += w * s.aa[j - 1];
      sb += w * s.bb[j - 1];
      sc += w * s.cc[j - 1];
    }
    s.aa[i - 1] = s.a_tilde * s.aa[i - 2] + sa;
    s.bb[i - 1] = s.a_tilde * s.bb[i - 2] + s.b_tilde * std::pow(omk, i - 2) + sb;
    s.cc[i - 1] = s.a_tilde * s.cc[i - 2] + s.c_tilde + sc;
  }
  // Terminal rows come from the constraint u_N = X_{N-1}.
  double sum_a = 0.0, sum_b = 0.0, sum_c = 0.0;
  for (int j = 1; j <= N - 1; ++j) {
    sum_a += s.aa[j - 1];
    sum_b += s.bb[j - 1];
    sum_c += s.cc[j - 1];
  }
  s.aa[N - 1] = -sum_a;
  s.bb[N - 1] = -sum_b;
  s.cc[N - 1] = 1.0 - sum_c;

  // Inventory rows: X_i = aax_{i+1} u_1 + bbx_{i+1} d0 + ccx_{i+1} x0.
  s.aax[0] = 0.0;
  s.bbx[0] = 0.0;
  s.ccx[0] = 1.0;
  {
    double pa = 0.0, pb = 0.0, pc = 0.0;
    for (int i = 1; i <= N - 1; ++i) {
      pa += s.aa[i - 1];
      pb += s.bb[i - 1];
      pc += s.cc[i - 1];
      s.aax[i] = -pa;
      s.bbx[i] = -pb;
      s.ccx[i] = 1.0 - pc;
    }
  }

  // Deviation rows: D_i = aad_{i+1} u_1 + bbd_{i+1} d0 + ccd_{i+1} x0.
  s.aad[0] = 0.0;
  s.bbd[0] = 1.0;
  s.ccd[0] = 0.0;
  for (int i = 1; i <= N - 1; ++i) {
    double da = 0.0, db = 0.0, dc = 0.0;
    for (int j = 1; j <= i; ++j) {
      const double g = eta * std::pow(omk, i - j);
      da += g * s.aa[j - 1];
      db += g * s.bb[j - 1];
      dc += g * s.cc[j - 1];
    }
    s.aad[i] = da;
    s.bbd[i] = std::pow(omk, i) + db;
    s.ccd[i] = dc;
  }

  // First-trade coefficients from the quadratic in u_1.
  const double den = eta * dot(s.aa, s.aa) + 2.0 * omk * dot(s.aad, s.aa) +
                     2.0 * nu * dot(s.aax, s.aax);
  double den_scale = eta * dot(s.aa, s.aa) + 2.0 * nu * dot(s.aax, s.aax);
  for (int i = 0; i < N; ++i) den_scale += 2.0 * std::abs(omk * s.aad[i] * s.aa[i]);
  if (!(std::abs(den) > 1e-14 * den_scale))
    throw NumericalError("deterministic_solution: first-trade denominator vanishes");

  double num_b = 0.0, num_c = 0.0;
  for (int i = 0; i < N; ++i) {
    num_b += s.aa[i] * (eta * s.bb[i] + omk * s.bbd[i]);
    num_c += s.aa[i] * (eta * s.cc[i] + omk * s.ccd[i]);
  }
  num_b += omk * dot(s.aad, s.bb) + 2.0 * nu * dot(s.aax, s.bbx);
  num_c += omk * dot(s.aad, s.cc) + 2.0 * nu * dot(s.aax, s.ccx);
  s.b_hat = -num_b / den;
  s.c_hat = -num_c / den;

  // Assemble trades and the controlled state paths.
  s.u.assign(N, 0.0);
  s.u[0] = s.b_hat * p.d0 + s.c_hat * p.x0;
  double spent = s.u[0];
  for (int i = 2; i <= N - 1; ++i) {
    s.u[i - 1] = s.aa[i - 1] * s.u[0] + s.bb[i - 1] * p.d0 + s.cc[i - 1] * p.x0;
    spent += s.u[i - 1];
  }
  s.u[N - 1] = p.x0 - spent;

  s.x_path.assign(N + 1, 0.0);
  s.x_path[0] = p.x0;
  for (int n = 1; n <= N - 1; ++n) s.x_path[n] = s.x_path[n - 1] - s.u[n - 1];
  s.x_path[N] = 0.0;  // terminal constraint, not a rounded subtraction
  s.d_path.assign(N, 0.0);
  for (int n = 0; n <= N - 1; ++n)
    s.d_path[n] = s.aad[n] * s.u[0] + s.bbd[n] * p.d0 + s.ccd[n] * p.x0;

  s.cost = deterministic_cost(p, s.u);
  return s;
}

std::vector<double> cor4_strategy(const ModelParams& p) {
  require_linear_single(p, "cor4_strategy");
  if (p.nu != 0.0) throw ValidationError("cor4_strategy: requires nu = 0");
  if (p.sigma != 0.0) throw ValidationError("cor4_strategy: requires sigma = 0");
  const int N = p.n_steps;
  const double kappa = p.kappa[0], eta = p.eta;
  if (N == 1) return {p.x0};

  const double b_tilde = kappa * (1.0 - kappa) / eta;
  const double c_hat = 1.0 / (2.0 + (N - 2) * kappa);
  const double b_hat =
      -(eta * b_tilde * (N - 2) * (1.0 + kappa * (N - 1)) + kappa * (1.0 - kappa)) /
      (kappa * eta * (N - 1) * (2.0 + (N - 2) * kappa));

  std::vector<double> u(N, 0.0);
  u[0] = b_hat * p.d0 + c_hat * p.x0;
  for (int n = 2; n <= N - 1; ++n) u[n - 1] = kappa * u[0] + b_tilde * p.d0;
  u[N - 1] = p.x0 - (1.0 + (N - 2) * kappa) * u[0] - (N - 2) * b_tilde * p.d0;
  return u;
}

double deterministic_cost(const ModelParams& p, std::span<const double> trades) {
  require_linear_single(p, "deterministic_cost");
  if (static_cast<int>(trades.size()) != p.n_steps)
    throw ValidationError("deterministic_cost: trade vector length mismatch");
  const double kappa = p.kappa[0], eta = p.eta, nu = p.nu;
  double x = p.x0, d = p.d0, cost = 0.0;
  for (int n = 1; n <= p.n_steps; ++n) {
    const double u = trades[n - 1];
    const double rem = x - u;
    cost += (1.0 - kappa) * d * u + 0.5 * eta * u * u + nu * rem * rem;
    d = (1.0 - kappa) * d + eta * u;
    x = rem;
  }
  return cost;
}

double lf_clamp(double u_unconstrained, double x) {
  return std::min(std::max(u_unconstrained, 0.0), x);
}

PolicyFn make_lf_policy(const CoeffTable& ct, const ModelParams& world) {
  if (ct.n_steps != world.n_steps)
    throw ValidationError("make_lf_policy: coefficient table horizon mismatch");
  return [ct, world](int n, const MarketState& s) {
    const double d = s.total_deviation(world);
    return lf_clamp(unconstrained_feedback(ct, n, s.x, d), s.x);
  };
}

PolicyFn make_vwap_policy(const ModelParams& p) {
  const double slice = p.x0 / p.n_steps;
  const int N = p.n_steps;
  return [slice, N](int n, const MarketState& s) {
    return (n < N) ? std::min(slice, s.x) : s.x;
  };
}

SimResult simulate_unconstrained_linear(const CoeffTable& ct, const ModelParams& p,
                                        std::span<const double> eps) {
  require_linear_single(p, "simulate_unconstrained_linear");
  if (static_cast<int>(eps.size()) != p.n_steps)
    throw ValidationError("simulate_unconstrained_linear: noise row length mismatch");
  if (ct.n_steps != p.n_steps)
    throw ValidationError("simulate_unconstrained_linear: coefficient table horizon mismatch");
  const double kappa = p.kappa[0], eta = p.eta, nu = p.nu;
  SimResult r;
  r.trades.resize(p.n_steps);
  double x = p.x0, d = p.d0;
  for (int n = 1; n <= p.n_steps; ++n) {
    const double u = unconstrained_feedback(ct, n, x, d);
    const double rem = x - u;
    r.cost += (1.0 - kappa) * d * u + 0.5 * eta * u * u + nu * rem * rem;
    d = (1.0 - kappa) * d + eta * u + eps[n - 1];
    x = rem;
    r.trades[n - 1] = u;
  }
  if (!std::isfinite(r.cost))
    throw NumericalError("simulate_unconstrained_linear: non-finite cost");
  return r;
}

}  // namespace optexec
