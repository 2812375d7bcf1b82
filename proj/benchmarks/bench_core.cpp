#include <benchmark/benchmark.h>

#include "optexec/adp.hpp"
#include "optexec/closed_form.hpp"
#include "optexec/evaluation.hpp"
#include "optexec/quantizer.hpp"

using namespace optexec;

namespace {

ModelParams bench_params(int n_steps) {
  ModelParams p;
  p.kappa = {0.5};
  p.zeta = {1.0};
  p.eta = 1e-3;
  p.alpha = 1.0;
  p.nu = 5e-5;
  p.sigma = 1.0;
  p.n_steps = n_steps;
  p.x0 = 1e5;
  p.d0 = 0.0;
  return p;
}

void BM_BackwardCoeffs(benchmark::State& state) {
  ModelParams p = bench_params(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(backward_coeffs(p));
}
BENCHMARK(BM_BackwardCoeffs)->Arg(10)->Arg(50);

void BM_DeterministicSolution(benchmark::State& state) {
  ModelParams p = bench_params(static_cast<int>(state.range(0)));
  p.sigma = 0.0;
  for (auto _ : state) benchmark::DoNotOptimize(deterministic_solution(p));
}
BENCHMARK(BM_DeterministicSolution)->Arg(10)->Arg(50);

void BM_BuildQuantizer(benchmark::State& state) {
  for (auto _ : state)
    benchmark::DoNotOptimize(build_quantizer(1.0, static_cast<int>(state.range(0))));
}
BENCHMARK(BM_BuildQuantizer)->Arg(10)->Arg(50);

void BM_SurrogateBatchPredict(benchmark::State& state) {
  MlpSpec spec{4, 3, 16, OutputHead::value};
  ScalingSpec sc;
  sc.in_lo = Eigen::VectorXd::Zero(4);
  sc.in_hi = Eigen::VectorXd::Ones(4);
  TrainConfig cfg;
  cfg.epochs = 2;
  cfg.seed = 1;
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(256, 4).cwiseAbs();
  Eigen::VectorXd t = X.col(0);
  FittedSurrogate s = fit_surrogate(spec, sc, cfg, X, t);
  Eigen::MatrixXd pts = X.topRows(50);
  Eigen::VectorXd out;
  for (auto _ : state) {
    s.predict_batch(pts, out);
    benchmark::DoNotOptimize(out);
  }
}
BENCHMARK(BM_SurrogateBatchPredict);

void BM_AdamEpoch(benchmark::State& state) {
  MlpSpec spec{4, 3, 16, OutputHead::value};
  ScalingSpec sc;
  sc.in_lo = Eigen::VectorXd::Zero(4);
  sc.in_hi = Eigen::VectorXd::Ones(4);
  Eigen::MatrixXd X = Eigen::MatrixXd::Random(2000, 4).cwiseAbs();
  Eigen::VectorXd t = X.col(0) + X.col(1);
  TrainConfig cfg;
  cfg.epochs = 1;
  cfg.seed = 1;
  for (auto _ : state) benchmark::DoNotOptimize(fit_surrogate(spec, sc, cfg, X, t));
}
BENCHMARK(BM_AdamEpoch);

void BM_StageOptimize(benchmark::State& state) {
  ModelParams p = bench_params(10);
  TrainingDomain dom;
  dom.coords = {{Coord::x, 0.0, 1e5},
                {Coord::d, 0.0, 100.0},
                {Coord::kappa, 0.38, 0.82},
                {Coord::eta, 2e-4, 2e-3}};
  dom.m_points = 1;
  Quantizer q = build_quantizer(p.sigma, 50);
  ExactTerminalValue terminal(dom, p);
  Eigen::VectorXd y(4);
  y << 6e4, 25.0, 0.5, 1e-3;
  for (auto _ : state) benchmark::DoNotOptimize(stage_optimize(y, dom, p, terminal, q));
}
BENCHMARK(BM_StageOptimize);

void BM_SimulatePath(benchmark::State& state) {
  ModelParams p = bench_params(10);
  CoeffTable ct = backward_coeffs(p);
  PolicyFn lf = make_lf_policy(ct, p);
  NoisePath noise(1, p.n_steps, p.sigma, 7);
  for (auto _ : state) benchmark::DoNotOptimize(simulate_path(p, lf, noise.row(0)));
}
BENCHMARK(BM_SimulatePath);

}  // namespace

BENCHMARK_MAIN();
