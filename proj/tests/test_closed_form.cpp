#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/Dense>
#include <cmath>
#include <random>

#include "optexec/closed_form.hpp"
#include "optexec/model.hpp"

using namespace optexec;

namespace {

ModelParams linear(double kappa, double eta, double nu, double sigma, int n, double x0,
                   double d0) {
  ModelParams p;
  p.kappa = {kappa};
  p.zeta = {1.0};
  p.eta = eta;
  p.alpha = 1.0;
  p.nu = nu;
  p.sigma = sigma;
  p.n_steps = n;
  p.x0 = x0;
  p.d0 = d0;
  return p;
}

// Cost of an unconstrained linear-case schedule evaluated directly from the
// dynamics; written independently of the library so it can serve as an oracle.
double oracle_cost(const ModelParams& p, const std::vector<double>& u) {
  const double kappa = p.kappa[0];
  double d = p.d0, x = p.x0, cost = 0.0;
  for (int n = 0; n < p.n_steps; ++n) {
    const double rem = x - u[n];
    cost += (1.0 - kappa) * d * u[n] + 0.5 * p.eta * u[n] * u[n] + p.nu * rem * rem;
    d = (1.0 - kappa) * d + p.eta * u[n];
    x = rem;
  }
  return cost;
}

// Exact quadratic-program solve over (u_1..u_{N-1}) with u_N eliminated by the
// budget constraint. Finite differences of a quadratic are exact, so the
// Hessian/gradient assembly needs no tolerance tuning.
double oracle_optimal_cost(const ModelParams& p) {
  const int k = p.n_steps - 1;
  auto cost_free = [&](const Eigen::VectorXd& v) {
    std::vector<double> u(p.n_steps);
    double spent = 0.0;
    for (int i = 0; i < k; ++i) {
      u[i] = v(i);
      spent += v(i);
    }
    u[p.n_steps - 1] = p.x0 - spent;
    return oracle_cost(p, u);
  };
  const double h = std::max(1.0, 1e-2 * p.x0);
  Eigen::VectorXd g(k);
  Eigen::MatrixXd H(k, k);
  Eigen::VectorXd e = Eigen::VectorXd::Zero(k);
  const double c0 = cost_free(e);
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd ei = Eigen::VectorXd::Zero(k);
    ei(i) = h;
    g(i) = (cost_free(ei) - cost_free(-ei)) / (2.0 * h);
    H(i, i) = (cost_free(ei) - 2.0 * c0 + cost_free(-ei)) / (h * h);
    for (int j = i + 1; j < k; ++j) {
      Eigen::VectorXd ej = Eigen::VectorXd::Zero(k);
      ej(j) = h;
      const double hij = (cost_free(ei + ej) - cost_free(ei - ej) - cost_free(-ei + ej) +
                          cost_free(-ei - ej)) /
                         (4.0 * h * h);
      H(i, j) = hij;
      H(j, i) = hij;
    }
  }
  const Eigen::VectorXd v_star = H.ldlt().solve(-g);
  return cost_free(v_star);
}

}  // namespace

TEST_CASE("terminal row and one hand-derived recursion step") {
  ModelParams p = linear(0.5, 1.0, 0.0, 0.0, 6, 1e5, 0.0);
  CoeffTable ct = backward_coeffs(p);
  const int N = p.n_steps;
  CHECK(ct.a_at(N) == 0.5);
  CHECK(ct.b_at(N) == 0.5);
  CHECK(ct.c_at(N) == 0.0);
  CHECK(ct.delta_at(N) == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(ct.a_at(N - 1) == doctest::Approx(0.375).epsilon(1e-14));
  CHECK(ct.b_at(N - 1) == doctest::Approx(0.375).epsilon(1e-14));
  CHECK(ct.c_at(N - 1) == doctest::Approx(-0.03125).epsilon(1e-14));
}

TEST_CASE("denominator positivity identities") {
  std::mt19937_64 eng(5);
  std::uniform_real_distribution<double> uk(0.05, 1.0), ue(1e-4, 1e-2), un(0.0, 1e-3);
  for (int rep = 0; rep < 50; ++rep) {
    const double kappa = uk(eng), eta = ue(eng), nu = un(eng);
    ModelParams p = linear(kappa, eta, nu, 0.0, 12, 1e5, 0.0);
    CoeffTable ct = backward_coeffs(p);
    const int N = p.n_steps;
    // Terminal identity delta_N = 4 eta kappa + 4 nu.
    CHECK(ct.delta_at(N) ==
          doctest::Approx(4.0 * eta * kappa + 4.0 * nu).epsilon(1e-12));
    // One-step-down identity from the same proof.
    const double expected =
        (32.0 * eta * kappa * nu + 16.0 * nu * nu +
         4.0 * eta * eta * kappa * kappa * (4.0 - kappa * kappa)) /
        (4.0 * eta * kappa + 4.0 * nu);
    CHECK(ct.delta_at(N - 1) == doctest::Approx(expected).epsilon(1e-10));
    for (int n = 2; n <= N; ++n) CHECK(ct.delta_at(n) > 0.0);
    // c_n strictly negative below the horizon when kappa < 1.
    if (kappa < 1.0)
      for (int n = 1; n <= N - 1; ++n) CHECK(ct.c_at(n) < 0.0);
  }
}

TEST_CASE("coefficients do not depend on sigma, only the tail constant does") {
  ModelParams p0 = linear(0.6, 2e-3, 5e-5, 0.0, 10, 1e5, 0.0);
  ModelParams p5 = p0;
  p5.sigma = 5.0;
  CoeffTable c0 = backward_coeffs(p0), c5 = backward_coeffs(p5);
  for (int n = 1; n <= 10; ++n) {
    CHECK(c0.a_at(n) == c5.a_at(n));
    CHECK(c0.b_at(n) == c5.b_at(n));
    CHECK(c0.c_at(n) == c5.c_at(n));
  }
  CHECK(c0.e_at(1) == 0.0);
  CHECK(c5.e_at(1) < 0.0);  // round-trip profitability of the noise
}

TEST_CASE("value function corner cases") {
  ModelParams p = linear(0.7, 1e-3, 0.0, 0.0, 10, 1e5, 0.0);
  CoeffTable ct = backward_coeffs(p);
  SUBCASE("zero state, zero noise has zero value") {
    CHECK(unconstrained_value(ct, 1, 0.0, 0.0) == 0.0);
  }
  SUBCASE("terminal value matches the liquidation formula") {
    const double x = 3e4, d = 17.0;
    CHECK(unconstrained_value(ct, 10, x, d) ==
          doctest::Approx((1.0 - 0.7) * d * x + 0.5 * 1e-3 * x * x).epsilon(1e-14));
  }
  SUBCASE("sigma > 0 makes the empty state strictly profitable") {
    ModelParams q = p;
    q.sigma = 1.0;
    CoeffTable cq = backward_coeffs(q);
    CHECK(unconstrained_value(cq, 1, 0.0, 0.0) < 0.0);
  }
}

TEST_CASE("feedback corner cases") {
  ModelParams p = linear(0.7, 1e-3, 1e-4, 0.0, 10, 1e5, 0.0);
  CoeffTable ct = backward_coeffs(p);
  CHECK(unconstrained_feedback(ct, 10, 7e3, 55.0) == 7e3);
  for (int n = 1; n <= 10; ++n) CHECK(unconstrained_feedback(ct, n, 0.0, 0.0) == 0.0);
}

TEST_CASE("deterministic solution: U-shape and eta-independence at nu=0") {
  SUBCASE("kappa=0.8 hand values") {
    ModelParams p = linear(0.8, 1.0 / 500, 0.0, 0.0, 10, 1e5, 0.0);
    DeterministicSolution s = deterministic_solution(p);
    CHECK(s.u[0] == doctest::Approx(1e5 / 8.4).epsilon(1e-12));
    CHECK(s.u[9] == doctest::Approx(1e5 / 8.4).epsilon(1e-10));
    for (int n = 2; n <= 9; ++n)
      CHECK(s.u[n - 1] == doctest::Approx(0.8 * 1e5 / 8.4).epsilon(1e-10));
  }
  SUBCASE("kappa=1 gives the flat VWAP schedule") {
    ModelParams p = linear(1.0, 1.0 / 500, 0.0, 0.0, 10, 1e5, 0.0);
    DeterministicSolution s = deterministic_solution(p);
    for (double u : s.u) CHECK(u == doctest::Approx(1e4).epsilon(1e-12));
  }
  SUBCASE("c_hat = 1/(2+(N-2)kappa), independent of eta") {
    ModelParams p1 = linear(0.6, 1.0 / 500, 0.0, 0.0, 10, 1e5, 0.0);
    ModelParams p2 = linear(0.6, 1.0 / 5000, 0.0, 0.0, 10, 1e5, 0.0);
    DeterministicSolution s1 = deterministic_solution(p1);
    DeterministicSolution s2 = deterministic_solution(p2);
    const double expected = 1.0 / (2.0 + 8.0 * 0.6);
    CHECK(s1.c_hat == doctest::Approx(expected).epsilon(1e-12));
    CHECK(s2.c_hat == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("coefficient-vector boundary rows") {
    ModelParams p = linear(0.55, 1e-3, 3e-5, 0.0, 8, 1e5, 4.0);
    DeterministicSolution s = deterministic_solution(p);
    CHECK(s.aa[0] == 1.0);
    CHECK(s.bb[0] == 0.0);
    CHECK(s.cc[0] == 0.0);
    double sum_a = 0.0, sum_c = 0.0;
    for (int j = 0; j < 7; ++j) {
      sum_a += s.aa[j];
      sum_c += s.cc[j];
    }
    CHECK(s.aa[7] == doctest::Approx(-sum_a).epsilon(1e-12));
    CHECK(s.cc[7] == doctest::Approx(1.0 - sum_c).epsilon(1e-12));
    double total = 0.0;
    for (double u : s.u) total += u;
    CHECK(total == doctest::Approx(p.x0).epsilon(1e-14));
    CHECK(s.x_path[8] == 0.0);
  }
}

TEST_CASE("flat-trade shortcut agrees with the full machinery") {
  std::mt19937_64 eng(11);
  std::uniform_real_distribution<double> uk(0.1, 1.0), ue(2e-4, 5e-3), ud(-5.0, 20.0);
  SUBCASE("hand values for kappa=0.4") {
    ModelParams p = linear(0.4, 1e-3, 0.0, 0.0, 10, 1e5, 0.0);
    std::vector<double> u = cor4_strategy(p);
    CHECK(u[0] == doctest::Approx(1e5 / 5.2).epsilon(1e-12));
    CHECK(u[9] == doctest::Approx(1e5 / 5.2).epsilon(1e-10));
    for (int n = 2; n <= 9; ++n)
      CHECK(u[n - 1] == doctest::Approx(0.4 * 1e5 / 5.2).epsilon(1e-12));
  }
  SUBCASE("N=2 splits the order in half regardless of kappa") {
    for (double kappa : {0.2, 0.7, 1.0}) {
      ModelParams p = linear(kappa, 1e-3, 0.0, 0.0, 2, 1e5, 0.0);
      std::vector<double> u = cor4_strategy(p);
      CHECK(u[0] == doctest::Approx(5e4).epsilon(1e-12));
      CHECK(u[1] == doctest::Approx(5e4).epsilon(1e-12));
    }
  }
  SUBCASE("matches deterministic_solution including d0 shifts") {
    for (int rep = 0; rep < 25; ++rep) {
      ModelParams p = linear(uk(eng), ue(eng), 0.0, 0.0, 10, 1e5, ud(eng));
      std::vector<double> u_cor = cor4_strategy(p);
      DeterministicSolution s = deterministic_solution(p);
      for (int n = 0; n < 10; ++n)
        CHECK(u_cor[n] == doctest::Approx(s.u[n]).epsilon(1e-9));
    }
  }
  SUBCASE("flat deviation while the schedule runs") {
    ModelParams p = linear(0.5, 1e-3, 0.0, 0.0, 10, 1e5, 6.0);
    DeterministicSolution s = deterministic_solution(p);
    for (int n = 1; n <= 9; ++n)
      CHECK(s.d_path[n] ==
            doctest::Approx(p.eta * s.u[0] + (1.0 - 0.5) * p.d0).epsilon(1e-9));
  }
}

TEST_CASE("forward-simulated feedback reproduces the explicit solution") {
  std::mt19937_64 eng(23);
  std::uniform_real_distribution<double> uk(0.1, 1.0), ue(2e-4, 5e-3), un(0.0, 2e-4),
      ud(-10.0, 30.0);
  std::vector<double> zero_noise(10, 0.0);
  for (int rep = 0; rep < 25; ++rep) {
    ModelParams p = linear(uk(eng), ue(eng), un(eng), 0.0, 10, 1e5, ud(eng));
    CoeffTable ct = backward_coeffs(p);
    SimResult sim = simulate_unconstrained_linear(ct, p, zero_noise);
    DeterministicSolution s = deterministic_solution(p);
    for (int n = 0; n < 10; ++n)
      CHECK(sim.trades[n] == doctest::Approx(s.u[n]).epsilon(1e-9));
    CHECK(sim.cost == doctest::Approx(s.cost).epsilon(1e-9));
  }
}

TEST_CASE("brute-force oracle: N=4 quadratic program") {
  for (double nu : {0.0, 5e-5}) {
    for (double kappa : {0.4, 0.8}) {
      for (double d0 : {0.0, 10.0}) {
        ModelParams p = linear(kappa, 1e-3, nu, 0.0, 4, 1e5, d0);
        DeterministicSolution s = deterministic_solution(p);
        const double prop_cost = oracle_cost(p, s.u);
        const double best = oracle_optimal_cost(p);
        CHECK(prop_cost ==
              doctest::Approx(best).epsilon(1e-6));
        CHECK(prop_cost >= best - 1e-6 * std::abs(best));
      }
    }
  }
}

TEST_CASE("stochastic trades are Gaussian around the deterministic schedule") {
  // sigma = 2, 1e4 paths, the two boxplot configurations.
  struct Cfg {
    double kappa, eta, nu;
  };
  for (const Cfg& c : {Cfg{0.8, 1.0 / 500, 0.0}, Cfg{0.4, 1.0 / 1000, 5e-5}}) {
    ModelParams p = linear(c.kappa, c.eta, c.nu, 2.0, 10, 1e5, 0.0);
    CoeffTable ct = backward_coeffs(p);
    ModelParams pdet = p;
    pdet.sigma = 0.0;
    DeterministicSolution det = deterministic_solution(pdet);

    const int m_paths = 10000;
    NoisePath noise(m_paths, p.n_steps, p.sigma, 2024);
    std::vector<std::vector<double>> samples(p.n_steps);
    for (auto& s : samples) s.reserve(m_paths);
    for (int m = 0; m < m_paths; ++m) {
      SimResult r = simulate_unconstrained_linear(ct, p, noise.row(m));
      for (int n = 0; n < p.n_steps; ++n) samples[n].push_back(r.trades[n]);
    }
    for (int n = 0; n < p.n_steps; ++n) {
      double mean = 0.0;
      for (double u : samples[n]) mean += u;
      mean /= m_paths;
      double var = 0.0, skew = 0.0, kurt = 0.0;
      for (double u : samples[n]) var += (u - mean) * (u - mean);
      var /= (m_paths - 1);
      const double sd = std::sqrt(var);
      const double se = sd / std::sqrt(static_cast<double>(m_paths));
      CHECK(std::abs(mean - det.u[n]) <= 3.0 * se + 1e-9 * std::abs(det.u[n]));
      // Step 1 is deterministic; its sample moments are rounding noise.
      if (sd > 1e-6 * std::abs(mean)) {
        for (double u : samples[n]) {
          const double z = (u - mean) / sd;
          skew += z * z * z;
          kurt += z * z * z * z;
        }
        skew /= m_paths;
        kurt = kurt / m_paths - 3.0;
        CHECK(std::abs(skew) <= 5.0 * std::sqrt(6.0 / m_paths));
        CHECK(std::abs(kurt) <= 5.0 * std::sqrt(24.0 / m_paths));
      }
    }
  }
}

TEST_CASE("LF clamp order and VWAP policy") {
  CHECK(lf_clamp(-5000.0, 3000.0) == 0.0);
  CHECK(lf_clamp(5e4, 3e4) == 3e4);
  CHECK(lf_clamp(2e4, 3e4) == 2e4);

  ModelParams p = linear(0.5, 1e-3, 0.0, 0.0, 10, 1e5, 0.0);
  PolicyFn vwap = make_vwap_policy(p);
  std::vector<double> eps(10, 0.0);
  SimResult r = simulate_path(p, vwap, eps);
  for (double u : r.trades) CHECK(u == doctest::Approx(1e4));

  ModelParams p1 = linear(0.5, 1e-3, 0.0, 0.0, 1, 1e5, 0.0);
  PolicyFn vwap1 = make_vwap_policy(p1);
  std::vector<double> eps1(1, 0.0);
  CHECK(simulate_path(p1, vwap1, eps1).trades[0] == 1e5);
}

TEST_CASE("LF policy is admissible and near the unconstrained path") {
  ModelParams p = linear(0.8, 1.0 / 500, 5e-5, 1.0, 10, 1e5, 0.0);
  CoeffTable ct = backward_coeffs(p);
  PolicyFn lf = make_lf_policy(ct, p);
  NoisePath noise(200, p.n_steps, p.sigma, 7);
  for (int m = 0; m < 200; ++m) {
    SimResult r = simulate_path(p, lf, noise.row(m));
    double total = 0.0;
    for (double u : r.trades) {
      CHECK(u >= 0.0);
      total += u;
    }
    CHECK(total == doctest::Approx(p.x0).epsilon(1e-12));
  }
}

TEST_CASE("degenerate parameters trip the denominator guard") {
  // kappa -> 0 and nu = 0 sends delta_N = 4 eta kappa to zero.
  ModelParams p = linear(1e-14, 1e-3, 0.0, 0.0, 5, 1e5, 0.0);
  CHECK_THROWS_AS(backward_coeffs(p), NumericalError);
}
