#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "optexec/adp.hpp"
#include "optexec/closed_form.hpp"

using namespace optexec;

namespace {

ModelParams linear_template() {
  ModelParams p;
  p.kappa = {0.5};
  p.zeta = {1.0};
  p.eta = 2e-3;
  p.alpha = 1.0;
  p.nu = 1e-4;
  p.sigma = 1.0;
  p.n_steps = 10;
  p.x0 = 1e5;
  p.d0 = 0.0;
  return p;
}

TrainingDomain xd_domain(double d_hi, int m) {
  TrainingDomain dom;
  dom.coords = {{Coord::x, 0.0, 1e5}, {Coord::d, 0.0, d_hi}};
  dom.m_points = m;
  return dom;
}

class ZeroValue : public NextValue {
 public:
  void eval(const Eigen::MatrixXd& pts, Eigen::VectorXd& out) const override {
    out = Eigen::VectorXd::Zero(pts.rows());
  }
};

// Exact quadratic continuation value of the linear case.
class QuadValue : public NextValue {
 public:
  QuadValue(CoeffTable ct, int n, const TrainingDomain& dom)
      : ct_(std::move(ct)), n_(n), ix_(dom.index_of(Coord::x)), id_(dom.index_of(Coord::d)) {}
  void eval(const Eigen::MatrixXd& pts, Eigen::VectorXd& out) const override {
    out.resize(pts.rows());
    for (int i = 0; i < pts.rows(); ++i)
      out(i) = unconstrained_value(ct_, n_, pts(i, ix_), pts(i, id_));
  }

 private:
  CoeffTable ct_;
  int n_;
  int ix_, id_;
};

}  // namespace

TEST_CASE("design sampling is reproducible, fresh per step, and inside the box") {
  TrainingDomain dom;
  dom.coords = {{Coord::x, 0.0, 1e5}, {Coord::d, 0.0, 100.0}, {Coord::kappa, 0.38, 0.82}};
  dom.m_points = 64;

  Eigen::MatrixXd a = sample_design(dom, 3, 42);
  Eigen::MatrixXd b = sample_design(dom, 3, 42);
  CHECK(a == b);

  Eigen::MatrixXd c = sample_design(dom, 4, 42);
  CHECK(a != c);

  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) {
      CHECK(a(i, j) >= dom.coords[j].lo);
      CHECK(a(i, j) <= dom.coords[j].hi);
    }

  dom.fresh_per_step = false;
  Eigen::MatrixXd d = sample_design(dom, 3, 42);
  Eigen::MatrixXd e = sample_design(dom, 7, 42);
  CHECK(d == e);
}

TEST_CASE("domain validation catches structural problems") {
  ModelParams p = linear_template();
  TrainingDomain dom = xd_domain(100.0, 64);
  CHECK_NOTHROW(dom.validate(p));

  TrainingDomain no_x;
  no_x.coords = {{Coord::d, 0.0, 10.0}};
  CHECK_THROWS_AS(no_x.validate(p), ValidationError);

  TrainingDomain bad_kappa = dom;
  bad_kappa.coords.push_back({Coord::kappa, 0.0, 1.2});
  CHECK_THROWS_AS(bad_kappa.validate(p), ValidationError);

  TrainingDomain wrong_state = dom;
  ModelParams two = p;
  two.kappa = {0.4, 0.8};
  two.zeta = {0.5, 0.5};
  CHECK_THROWS_AS(wrong_state.validate(two), ValidationError);
}

TEST_CASE("effective parameter extraction overrides template slots") {
  ModelParams p = linear_template();
  TrainingDomain dom;
  dom.coords = {{Coord::x, 0.0, 1e5},
                {Coord::d, 0.0, 100.0},
                {Coord::kappa, 0.38, 0.82},
                {Coord::eta, 1e-4, 1e-3}};
  Eigen::VectorXd y(4);
  y << 4e4, 12.5, 0.61, 5e-4;
  EffectiveParams e = effective_params(y, dom, p);
  CHECK(e.x == 4e4);
  CHECK(e.d[0] == 12.5);
  CHECK(e.kappa[0] == 0.61);
  CHECK(e.eta == 5e-4);
  CHECK(e.alpha == p.alpha);
  CHECK(e.nu == p.nu);
  CHECK(e.refreshed_deviation() == doctest::Approx((1.0 - 0.61) * 12.5));
}

TEST_CASE("stage optimization closed-form checks") {
  ModelParams p = linear_template();
  TrainingDomain dom = xd_domain(100.0, 16);
  Quantizer q = build_quantizer(1.0, 21);
  ZeroValue zero;

  SUBCASE("empty feasible interval at x = 0") {
    Eigen::VectorXd y(2);
    y << 0.0, 55.0;
    StageResult r = stage_optimize(y, dom, p, zero, q);
    CHECK(r.u == 0.0);
    CHECK(r.value == 0.0);
  }
  SUBCASE("pure quadratic tradeoff has the textbook optimum") {
    // min (eta/2) u^2 + nu (x-u)^2 at u = 2 nu x / (eta + 2 nu).
    Eigen::VectorXd y(2);
    y << 1e5, 0.0;
    StageResult r = stage_optimize(y, dom, p, zero, q);
    const double expected = 2.0 * p.nu * 1e5 / (p.eta + 2.0 * p.nu);
    CHECK(r.u == doctest::Approx(expected).epsilon(1e-6));
    CHECK(r.converged);
  }
  SUBCASE("zero urgency and nonnegative deviation buys nothing") {
    ModelParams p0 = p;
    p0.nu = 0.0;
    Eigen::VectorXd y(2);
    y << 8e4, 30.0;
    StageResult r = stage_optimize(y, dom, p0, zero, q);
    CHECK(r.u <= 1e-2);
  }
}

TEST_CASE("one-step exactness against the linear-case feedback") {
  ModelParams p = linear_template();
  p.kappa = {0.7};
  CoeffTable ct = backward_coeffs(p);
  TrainingDomain dom = xd_domain(300.0, 16);
  Quantizer q = build_quantizer(p.sigma, 50);

  for (int n : {9, 5, 2}) {
    QuadValue v_next(ct, n + 1, dom);
    for (double x : {7e4, 3e4}) {
      for (double d : {0.0, 40.0}) {
        Eigen::VectorXd y(2);
        y << x, d;
        // Widen the interval so the unconstrained optimum is interior.
        StageResult r =
            stage_optimize(y, dom, p, v_next, q, std::make_pair(-1e5, 1e5));
        const double u_exact = unconstrained_feedback(ct, n, x, d);
        CHECK(r.u == doctest::Approx(u_exact).epsilon(1e-6));
        CHECK(r.value ==
              doctest::Approx(unconstrained_value(ct, n, x, d)).epsilon(1e-8));
      }
    }
  }
}

TEST_CASE("two-kernel template with zeta=(1,0) collapses to the single kernel") {
  ModelParams single = linear_template();
  single.alpha = 0.9;
  ModelParams twin = single;
  twin.kappa = {single.kappa[0], 0.9};
  twin.zeta = {1.0, 0.0};

  TrainingDomain dom1 = xd_domain(100.0, 8);
  TrainingDomain dom2;
  dom2.coords = {{Coord::x, 0.0, 1e5}, {Coord::d1, 0.0, 100.0}, {Coord::d2, 0.0, 100.0}};
  dom2.m_points = 8;

  Quantizer q = build_quantizer(single.sigma, 30);
  ExactTerminalValue t1(dom1, single), t2(dom2, twin);

  for (double x : {9e4, 2e4, 0.0}) {
    for (double d : {0.0, 33.0}) {
      Eigen::VectorXd y1(2), y2(3);
      y1 << x, d;
      y2 << x, d, d;
      StageResult r1 = stage_optimize(y1, dom1, single, t1, q);
      StageResult r2 = stage_optimize(y2, dom2, twin, t2, q);
      CHECK(r1.value == doctest::Approx(r2.value).epsilon(1e-12));
      CHECK(r1.u == doctest::Approx(r2.u).epsilon(1e-12));
    }
  }
}

TEST_CASE("small backward solve produces usable artifacts") {
  ModelParams p = linear_template();
  p.n_steps = 4;
  TrainingDomain dom = xd_domain(250.0, 128);
  SolverSettings st;
  st.epochs = 60;
  st.design_seed = 5;
  st.init_seed = 6;
  st.n_threads = 1;
  Quantizer q = build_quantizer(p.sigma, 10);

  SolverArtifacts art = backward_solve(p, dom, st, q);
  REQUIRE(static_cast<int>(art.value.size()) == 3);
  REQUIRE(static_cast<int>(art.policy.size()) == 3);
  CHECK(art.diagnostics.size() == 3);

  SUBCASE("policy outputs stay inside (0, x] and liquidate at the horizon") {
    PolicyFn nn = make_nn_policy(art, p);
    MarketState s = initial_state(p);
    CHECK(nn(4, s) == s.x);
    const double u1 = nn(1, s);
    CHECK(u1 > 0.0);
    CHECK(u1 < s.x);
    MarketState empty = s;
    empty.x = 0.0;
    CHECK(nn(1, empty) == 0.0);
  }

  SUBCASE("monotone budget along simulated paths") {
    PolicyFn nn = make_nn_policy(art, p);
    NoisePath noise(50, p.n_steps, p.sigma, 12);
    for (int m = 0; m < 50; ++m) {
      SimResult r = simulate_path(p, nn, noise.row(m));
      double x = p.x0, total = 0.0;
      for (double u : r.trades) {
        CHECK(u >= 0.0);
        CHECK(u <= x + 1e-9);
        x -= u;
        total += u;
      }
      CHECK(total == doctest::Approx(p.x0).epsilon(1e-12));
      CHECK(std::abs(x) <= 1e-9 * p.x0);
    }
  }

  SUBCASE("retraining is deterministic") {
    SolverArtifacts again = backward_solve(p, dom, st, q);
    Eigen::VectorXd y(2);
    y << 5e4, 20.0;
    for (int n = 0; n < 3; ++n) {
      CHECK(art.value[n].predict(y) == again.value[n].predict(y));
      CHECK(art.policy[n].predict(y) == again.policy[n].predict(y));
    }
  }

  SUBCASE("artifacts survive a save/load round trip") {
    const std::string dir = "adp_roundtrip_test";
    art.save(dir);
    SolverArtifacts loaded = SolverArtifacts::load(dir);
    Eigen::VectorXd y(2);
    y << 5e4, 20.0;
    for (int n = 0; n < 3; ++n) {
      CHECK(art.value[n].predict(y) == loaded.value[n].predict(y));
      CHECK(art.policy[n].predict(y) == loaded.policy[n].predict(y));
    }
    CHECK(loaded.params.n_steps == p.n_steps);
    CHECK(loaded.domain.dim() == 2);
    CHECK(loaded.quantizer.n_knots() == 10);

    // Full evaluation round trip: reloaded artifacts reproduce the in-process
    // policy costs bit for bit on the same noise.
    NoisePath noise(32, p.n_steps, p.sigma, 77);
    PolicyFn in_process = make_nn_policy(art, p);
    PolicyFn reloaded = make_nn_policy(loaded, p);
    for (int m = 0; m < 32; ++m) {
      CHECK(simulate_path(p, in_process, noise.row(m)).cost ==
            simulate_path(p, reloaded, noise.row(m)).cost);
    }
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("warm start and extra passes run and stay usable") {
  ModelParams p = linear_template();
  p.n_steps = 3;
  TrainingDomain dom = xd_domain(250.0, 96);
  SolverSettings st;
  st.epochs = 40;
  st.design_seed = 15;
  st.init_seed = 16;
  st.warm_start = true;
  st.passes = 2;
  st.n_threads = 1;
  Quantizer q = build_quantizer(p.sigma, 8);
  SolverArtifacts art = backward_solve(p, dom, st, q);
  CHECK(art.diagnostics.size() == 4);  // two passes over two steps
  PolicyFn nn = make_nn_policy(art, p);
  MarketState s = initial_state(p);
  const double u = nn(1, s);
  CHECK(u > 0.0);
  CHECK(u < s.x);
}
