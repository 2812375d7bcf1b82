#pragma once

#include <Eigen/Core>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "optexec/mlp.hpp"
#include "optexec/model.hpp"
#include "optexec/quantizer.hpp"

namespace optexec {

/// Coordinates a design point can carry: the stochastic state (x and either d
/// or the pair d1/d2) plus any model parameters learned jointly.
enum class Coord { x, d, d1, d2, kappa, eta, alpha, nu, zeta };

const char* coord_name(Coord c);
Coord coord_from_name(const std::string& name);

struct CoordRange {
  Coord coord;
  double lo = 0.0;
  double hi = 0.0;
};

/// Hyper-rectangular training domain. Coordinate order defines the layout of
/// design points and surrogate inputs.
struct TrainingDomain {
  std::vector<CoordRange> coords;
  int m_points = 2000;
  bool fresh_per_step = true;

  int dim() const { return static_cast<int>(coords.size()); }
  int index_of(Coord c) const;

  /// Structural checks against the parameter template (state coordinates
  /// present, ranges inside the admissible parameter set). Throws
  /// ValidationError listing all violations.
  void validate(const ModelParams& tmpl) const;
};

/// Design point resolved against the template: coordinates present in the
/// domain override the template values.
struct EffectiveParams {
  double x = 0.0;
  double d[2] = {0.0, 0.0};
  double kappa[2] = {0.0, 0.0};
  double zeta[2] = {1.0, 0.0};
  int n_comp = 1;
  double eta = 0.0, alpha = 1.0, nu = 0.0;

  double refreshed_deviation() const {
    double acc = 0.0;
    for (int m = 0; m < n_comp; ++m) acc += zeta[m] * (1.0 - kappa[m]) * d[m];
    return acc;
  }
};

EffectiveParams effective_params(const Eigen::VectorXd& y, const TrainingDomain& dom,
                                 const ModelParams& tmpl);

/// M x dim matrix of i.i.d. uniform draws per coordinate, deterministic per
/// (seed, step). With fresh_per_step unset the step index is ignored and every
/// step reuses the same design.
Eigen::MatrixXd sample_design(const TrainingDomain& dom, int step, std::uint64_t seed);

/// Next-step value evaluator used inside the Bellman minimization. Rows of
/// `pts` are full design-layout points at step n+1.
class NextValue {
 public:
  virtual ~NextValue() = default;
  virtual void eval(const Eigen::MatrixXd& pts, Eigen::VectorXd& out) const = 0;
};

/// Exact terminal condition; never approximated.
class ExactTerminalValue : public NextValue {
 public:
  ExactTerminalValue(TrainingDomain dom, ModelParams tmpl);
  void eval(const Eigen::MatrixXd& pts, Eigen::VectorXd& out) const override;

 private:
  TrainingDomain dom_;
  ModelParams tmpl_;
};

class SurrogateNextValue : public NextValue {
 public:
  explicit SurrogateNextValue(const FittedSurrogate& s) : s_(&s) {}
  void eval(const Eigen::MatrixXd& pts, Eigen::VectorXd& out) const override {
    s_->predict_batch(pts, out);
  }

 private:
  const FittedSurrogate* s_;
};

struct StageResult {
  double value = 0.0;
  double u = 0.0;
  int evals = 0;
  bool converged = true;
};

/// Pointwise stage problem at design point y: minimize over u in [0, x] the
/// stage cost plus the quantized expectation of v_next at the transitioned
/// points. Derivative-free Brent runs from the three starts {0+, x/2, x-} with
/// a 200-evaluation cap; the returned trade is never worse than the best of
/// {0, x/2, x}. `bounds` widens the search interval (linear-case diagnostics
/// only).
StageResult stage_optimize(const Eigen::VectorXd& y, const TrainingDomain& dom,
                           const ModelParams& tmpl, const NextValue& v_next,
                           const Quantizer& q,
                           std::optional<std::pair<double, double>> bounds = std::nullopt);

struct SolverSettings {
  int hidden_layers = 3;
  int hidden_width = 16;
  int epochs = 1000;
  int batch_size = 64;
  double learning_rate = 1e-3;
  std::uint64_t design_seed = 1;
  std::uint64_t init_seed = 2;
  bool warm_start = false;   // initialize step-n weights from step n+1
  int passes = 1;            // additional backward sweeps reusing fitted nets
  bool reuse_designs = false;  // retraining passes reuse the pass-1 designs
  int n_threads = 0;           // 0 = hardware concurrency
};

struct StepDiagnostics {
  int pass = 0;
  int step = 0;
  double seconds = 0.0;
  double value_loss = 0.0;
  double policy_loss = 0.0;
  int nonconverged = 0;
};

/// Fitted per-step surrogate pairs. The terminal value is always evaluated
/// exactly and the terminal policy is the forced liquidation of the remainder,
/// so both vectors have N-1 entries (index n-1 for period n).
struct SolverArtifacts {
  ModelParams params;
  TrainingDomain domain;
  Quantizer quantizer;
  SolverSettings settings;
  std::vector<FittedSurrogate> value;
  std::vector<FittedSurrogate> policy;
  std::vector<StepDiagnostics> diagnostics;

  void save(const std::string& dir) const;
  static SolverArtifacts load(const std::string& dir);
};

using LogFn = std::function<void(const std::string&)>;

/// Backward induction over n = N-1..1: sample a design, solve the stage
/// problem pointwise against the frozen next-step surrogate (exact terminal at
/// n = N-1), then fit the value surrogate on stage values and the policy
/// surrogate on trade fractions u/x (0.5 where x = 0).
SolverArtifacts backward_solve(const ModelParams& tmpl, const TrainingDomain& dom,
                               const SolverSettings& settings, const Quantizer& q,
                               const LogFn& log = nullptr);

/// Feedback policy from trained artifacts, evaluated at the given market
/// configuration: predicted fraction times current inventory for n < N, full
/// remaining inventory at n = N.
PolicyFn make_nn_policy(const SolverArtifacts& art, const ModelParams& eval_params);

/// Assemble a design-layout point from a state and a market configuration.
Eigen::VectorXd assemble_point(const TrainingDomain& dom, const ModelParams& eval_params,
                               double x, std::span<const double> d_components);

}  // namespace optexec
