#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "optexec/model.hpp"

using namespace optexec;

namespace {

ModelParams single(double kappa, double eta, double alpha, double nu, double sigma, int n,
                   double x0, double d0) {
  ModelParams p;
  p.kappa = {kappa};
  p.zeta = {1.0};
  p.eta = eta;
  p.alpha = alpha;
  p.nu = nu;
  p.sigma = sigma;
  p.n_steps = n;
  p.x0 = x0;
  p.d0 = d0;
  return p;
}

}  // namespace

TEST_CASE("parameter validation catches every violated bound") {
  ModelParams p = single(0.5, 1e-3, 1.0, 0.0, 0.0, 10, 1e5, 0.0);
  CHECK_NOTHROW(p.validate());

  p.kappa = {1.5};
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.kappa = {0.5};
  p.eta = 0.0;
  CHECK_THROWS_AS(p.validate(), ValidationError);
  p.eta = 1e-3;
  p.zeta = {0.6};  // no longer sums to 1
  CHECK_THROWS_AS(p.validate(), ValidationError);

  ModelParams multi = p;
  multi.kappa = {0.4, 0.8};
  multi.zeta = {0.3, 0.7};
  CHECK_NOTHROW(multi.validate());
  multi.zeta = {0.3, 0.6};
  CHECK_THROWS_AS(multi.validate(), ValidationError);
}

TEST_CASE("step_state hand examples") {
  ModelParams p = single(0.5, 1e-3, 1.0, 0.0, 0.0, 10, 1e5, 0.0);
  MarketState s = initial_state(p);

  SUBCASE("zero action, zero noise") {
    MarketState t = step_state(s, 0.0, 0.0, p);
    CHECK(t.x == 1e5);
    CHECK(t.d_components[0] == 0.0);
    CHECK(t.step == 1);
  }
  SUBCASE("single trade pushes the deviation by eta*u") {
    MarketState t = step_state(s, 1e4, 0.0, p);
    CHECK(t.x == doctest::Approx(9e4));
    CHECK(t.d_components[0] == doctest::Approx(10.0));
  }
  SUBCASE("componentwise decay in two-kernel mode") {
    ModelParams mp = p;
    mp.kappa = {0.4, 0.8};
    mp.zeta = {0.5, 0.5};
    MarketState ms;
    ms.x = 5e4;
    ms.d_components = {10.0, 20.0};
    ms.step = 0;
    MarketState t = step_state(ms, 0.0, 0.0, mp);
    CHECK(t.d_components[0] == doctest::Approx(6.0));
    CHECK(t.d_components[1] == doctest::Approx(4.0));
  }
  SUBCASE("rejects sells, overshoots, and stepping past the horizon") {
    CHECK_THROWS_AS(step_state(s, -1.0, 0.0, p), ValidationError);
    CHECK_THROWS_AS(step_state(s, 1e5 + 1.0, 0.0, p), ValidationError);
    MarketState done = s;
    done.step = p.n_steps;
    CHECK_THROWS_AS(step_state(done, 0.0, 0.0, p), ValidationError);
  }
}

TEST_CASE("stage_cost hand examples") {
  SUBCASE("zero trade, zero urgency") {
    ModelParams p = single(0.5, 0.02, 1.0, 0.0, 0.0, 10, 100.0, 0.0);
    MarketState s = initial_state(p);
    CHECK(stage_cost(s, 0.0, p) == 0.0);
  }
  SUBCASE("pure instantaneous impact") {
    ModelParams p = single(0.5, 0.02, 1.0, 0.0, 0.0, 10, 100.0, 0.0);
    MarketState s = initial_state(p);
    CHECK(stage_cost(s, 100.0, p) == doctest::Approx(100.0));
  }
  SUBCASE("deviation and urgency terms") {
    ModelParams p = single(0.5, 0.0, 1.0, 0.01, 0.0, 10, 100.0, 10.0);
    p.eta = 1e-300;  // eta must be positive; pick a negligible value
    MarketState s = initial_state(p);
    CHECK(stage_cost(s, 50.0, p) == doctest::Approx(275.0));
  }
  SUBCASE("rejects trades outside [0, x]") {
    ModelParams p = single(0.5, 0.02, 1.0, 0.0, 0.0, 10, 100.0, 0.0);
    MarketState s = initial_state(p);
    CHECK_THROWS_AS(stage_cost(s, -1.0, p), ValidationError);
    CHECK_THROWS_AS(stage_cost(s, 101.0, p), ValidationError);
  }
}

TEST_CASE("terminal_value hand examples") {
  ModelParams p = single(0.5, 0.02, 1.0, 0.0, 0.0, 10, 100.0, 0.0);
  MarketState s = initial_state(p);
  SUBCASE("zero remainder") {
    s.x = 0.0;
    s.d_components[0] = 123.0;
    CHECK(terminal_value(s, p) == 0.0);
  }
  SUBCASE("pure impact") {
    CHECK(terminal_value(s, p) == doctest::Approx(100.0));
  }
  SUBCASE("full resilience kills the deviation term") {
    ModelParams q = single(1.0, 0.02, 1.0, 0.0, 0.0, 10, 100.0, 50.0);
    MarketState t = initial_state(q);
    CHECK(terminal_value(t, q) == doctest::Approx(100.0));
  }
}

TEST_CASE("simulate_path forces the terminal liquidation") {
  SUBCASE("N=1 ignores the policy and liquidates everything") {
    ModelParams p = single(0.5, 1e-3, 1.0, 0.0, 0.0, 1, 1e5, 2.0);
    const double eps[] = {0.0};
    auto policy = [](int, const MarketState&) { return 0.0; };
    SimResult r = simulate_path(p, policy, eps);
    CHECK(r.trades[0] == 1e5);
    const double expected = (1.0 - 0.5) * 2.0 * 1e5 + 0.5 * 1e-3 * 1e10;
    CHECK(r.cost == doctest::Approx(expected));
  }
  SUBCASE("VWAP trades x0/N every period") {
    ModelParams p = single(0.5, 1e-3, 1.0, 0.0, 0.0, 10, 1e5, 0.0);
    std::vector<double> eps(10, 0.0);
    auto vwap = [&p](int, const MarketState&) { return p.x0 / p.n_steps; };
    SimResult r = simulate_path(p, vwap, eps);
    for (double u : r.trades) CHECK(u == doctest::Approx(1e4));
  }
  SUBCASE("policy violations propagate") {
    ModelParams p = single(0.5, 1e-3, 1.0, 0.0, 0.0, 5, 1e5, 0.0);
    std::vector<double> eps(5, 0.0);
    auto bad = [](int, const MarketState& s) { return s.x + 1.0; };
    CHECK_THROWS_AS(simulate_path(p, bad, eps), NumericalError);
  }
}

TEST_CASE("budget identity holds for random feedback policies") {
  std::mt19937_64 eng(42);
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  for (int rep = 0; rep < 20; ++rep) {
    ModelParams p = single(0.3 + 0.6 * frac(eng), 1e-3, 0.9 + 0.2 * frac(eng),
                           1e-4 * frac(eng), 1.0, 12, 1e5, 0.0);
    NoisePath noise(1, p.n_steps, p.sigma, eng());
    std::vector<double> fr(p.n_steps);
    for (auto& f : fr) f = 0.05 + 0.4 * frac(eng);
    auto policy = [&fr](int n, const MarketState& s) { return fr[n - 1] * s.x; };
    SimResult r = simulate_path(p, policy, noise.row(0));
    double total = 0.0;
    for (double u : r.trades) total += u;
    CHECK(std::abs(total - p.x0) <= 1e-9 * p.x0);
  }
}

TEST_CASE("kernel reduction: zeta=(1,0) is bit-identical to single-kernel") {
  ModelParams a = single(0.37, 1e-3, 1.0, 5e-5, 1.5, 10, 1e5, 3.0);
  ModelParams b = a;
  b.kappa = {0.37, 0.9};
  b.zeta = {1.0, 0.0};

  NoisePath noise(4, a.n_steps, a.sigma, 99);
  auto policy = [](int, const MarketState& s) { return 0.2 * s.x; };
  for (int m = 0; m < 4; ++m) {
    SimResult ra = simulate_path(a, policy, noise.row(m));
    SimResult rb = simulate_path(b, policy, noise.row(m));
    CHECK(ra.cost == rb.cost);
    for (int n = 0; n < a.n_steps; ++n) CHECK(ra.trades[n] == rb.trades[n]);
  }
}

TEST_CASE("deviation representation matches the decay-kernel sum") {
  // sigma = 0: D_n == G_{n,0} d0 + sum_j G_{n,j} eta u_j^alpha with
  // G_{n,j} = sum_m zeta_m (1-kappa_m)^(n-j).
  ModelParams p = single(0.45, 2e-3, 0.8, 0.0, 0.0, 8, 1e5, 7.0);
  p.kappa = {0.45, 0.9};
  p.zeta = {0.6, 0.4};

  std::mt19937_64 eng(7);
  std::uniform_real_distribution<double> frac(0.0, 0.3);
  std::vector<double> trades;
  MarketState s = initial_state(p);
  std::vector<double> total_dev;
  for (int n = 1; n <= p.n_steps; ++n) {
    const double u = (n < p.n_steps) ? frac(eng) * s.x : s.x;
    s = step_state(s, u, 0.0, p);
    trades.push_back(u);
    total_dev.push_back(s.total_deviation(p));
  }
  for (int n = 1; n <= p.n_steps; ++n) {
    double g0 = 0.0;
    for (int m = 0; m < p.n_kernels(); ++m)
      g0 += p.zeta[m] * std::pow(1.0 - p.kappa[m], n);
    double expected = g0 * p.d0;
    for (int j = 1; j <= n; ++j) {
      double g = 0.0;
      for (int m = 0; m < p.n_kernels(); ++m)
        g += p.zeta[m] * std::pow(1.0 - p.kappa[m], n - j);
      expected += g * p.eta * std::pow(trades[j - 1], p.alpha);
    }
    CHECK(total_dev[n - 1] == doctest::Approx(expected).epsilon(1e-10));
  }
}

TEST_CASE("costs are nonnegative for nonnegative deviations") {
  ModelParams p = single(0.5, 1e-3, 1.1, 1e-4, 0.0, 10, 1e5, 5.0);
  MarketState s = initial_state(p);
  s.d_components[0] = 12.0;
  for (double u : {0.0, 1.0, 5e4, 1e5}) {
    CHECK(stage_cost(s, u, p) >= 0.0);
  }
  CHECK(terminal_value(s, p) >= 0.0);
}

TEST_CASE("noise path is zero for sigma=0 and reusable across policies") {
  NoisePath zeros(3, 5, 0.0, 1);
  for (int m = 0; m < 3; ++m)
    for (double e : zeros.row(m)) CHECK(e == 0.0);

  NoisePath a(2, 5, 1.0, 123), b(2, 5, 1.0, 123);
  for (int m = 0; m < 2; ++m)
    for (int n = 0; n < 5; ++n) CHECK(a.row(m)[n] == b.row(m)[n]);
}

TEST_CASE("rescale_params keeps business time fixed") {
  SUBCASE("identity at the same horizon") {
    ModelParams p = single(0.4, 1e-3, 1.0, 1e-4, 1.0, 10, 1e5, 0.0);
    ModelParams q = rescale_params(p, 10);
    CHECK(q.kappa[0] == p.kappa[0]);
    CHECK(q.sigma == p.sigma);
    CHECK(q.nu == p.nu);
  }
  SUBCASE("N=10 to N'=30 matches the stated rescaled values") {
    ModelParams p = single(0.4, 1e-3, 1.0, 1e-4, 1.0, 10, 1e5, 0.0);
    ModelParams q = rescale_params(p, 30);
    CHECK(q.kappa[0] == doctest::Approx(0.4 / 3.0).epsilon(1e-15));
    CHECK(q.sigma == doctest::Approx(1.0 / std::sqrt(3.0)).epsilon(1e-15));
    CHECK(q.nu == doctest::Approx(1e-4 / 3.0).epsilon(1e-15));
    CHECK(q.eta == p.eta);
    CHECK(q.n_steps == 30);
  }
  SUBCASE("kappa leaving (0,1] is an error") {
    ModelParams p = single(0.9, 1e-3, 1.0, 0.0, 0.0, 10, 1e5, 0.0);
    CHECK_THROWS_AS(rescale_params(p, 3), ValidationError);
  }
}
