#pragma once

#include <Eigen/Core>
#include <atomic>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "optexec/model.hpp"

namespace optexec {

enum class OutputHead { value, policy };

/// Feed-forward architecture: input_dim -> hidden_width x hidden_layers -> 1,
/// ELU on hidden layers, identity (value) or sigmoid (policy fraction) output.
struct MlpSpec {
  int input_dim = 2;
  int hidden_layers = 3;
  int hidden_width = 16;
  OutputHead head = OutputHead::value;
};

/// Affine maps taking the training hyper-rectangle onto the unit hypercube and
/// value targets onto [0,1]. For value surrogates the output range is the
/// min-max of the training batch; policy surrogates keep [0,1].
struct ScalingSpec {
  Eigen::VectorXd in_lo, in_hi;
  double out_lo = 0.0, out_hi = 1.0;
};

struct TrainConfig {
  int epochs = 1000;
  int batch_size = 64;
  double learning_rate = 1e-3;  // Adam defaults
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;
};

/// Plain fully connected network; weights live in W[k] (rows = out, cols = in)
/// and b[k]. Weight init is truncated normal (mean zero, std 1/sqrt(fan_in),
/// cut at two std), biases zero.
class Mlp {
 public:
  Mlp() = default;
  Mlp(const MlpSpec& spec, std::uint64_t init_seed);

  const MlpSpec& spec() const { return spec_; }
  int n_layers() const { return static_cast<int>(W_.size()); }

  /// Forward pass on pre-scaled inputs (rows = samples). Output column vector
  /// is the raw head output (sigmoid already applied for policy nets).
  Eigen::VectorXd forward(const Eigen::MatrixXd& X) const;

  std::vector<Eigen::MatrixXd>& weights() { return W_; }
  std::vector<Eigen::VectorXd>& biases() { return b_; }
  const std::vector<Eigen::MatrixXd>& weights() const { return W_; }
  const std::vector<Eigen::VectorXd>& biases() const { return b_; }

 private:
  MlpSpec spec_;
  std::vector<Eigen::MatrixXd> W_;
  std::vector<Eigen::VectorXd> b_;
};

/// MSE loss over the batch plus its gradient with respect to all weights and
/// biases (backpropagation). Exposed so the analytic gradients can be checked
/// against finite differences.
double mse_loss_and_gradient(const Mlp& net, const Eigen::MatrixXd& X,
                             const Eigen::VectorXd& targets,
                             std::vector<Eigen::MatrixXd>& grad_W,
                             std::vector<Eigen::VectorXd>& grad_b);

struct FitDiagnostics {
  std::vector<double> epoch_loss;
};

/// A trained surrogate frozen for concurrent prediction. Inputs are scaled to
/// the unit hypercube internally; value outputs are mapped back to the target
/// range. Predictions at points outside the training rectangle are still
/// returned but flagged, and a shared extrapolation counter is incremented.
class FittedSurrogate {
 public:
  FittedSurrogate() = default;
  FittedSurrogate(Mlp net, ScalingSpec scaling, FitDiagnostics diag);

  struct Prediction {
    double value = 0.0;
    bool extrapolated = false;
  };

  double predict(const Eigen::VectorXd& y) const;
  Prediction predict_ex(const Eigen::VectorXd& y) const;

  /// Batch prediction for the Bellman inner loop; `out` is resized to rows(Y).
  void predict_batch(const Eigen::MatrixXd& Y, Eigen::VectorXd& out) const;

  bool in_domain(const Eigen::VectorXd& y) const;
  std::uint64_t extrapolation_count() const { return counter_->load(); }

  const MlpSpec& spec() const { return net_.spec(); }
  const ScalingSpec& scaling() const { return scaling_; }
  const FitDiagnostics& diagnostics() const { return diag_; }
  const Mlp& net() const { return net_; }

  std::string to_json_string() const;
  static FittedSurrogate from_json_string(const std::string& text);
  void save(const std::string& path) const;
  static FittedSurrogate load(const std::string& path);

 private:
  Mlp net_;
  ScalingSpec scaling_;
  FitDiagnostics diag_;
  std::shared_ptr<std::atomic<std::uint64_t>> counter_ =
      std::make_shared<std::atomic<std::uint64_t>>(0);
};

/// Train a surrogate on (inputs, targets) with mini-batch Adam on the MSE
/// loss. Inputs are rows of `inputs` inside (or marginally outside) the
/// scaling rectangle. Value targets may be any finite reals; policy targets
/// must lie in [0,1] and are clipped away from the sigmoid saturation ends.
/// Deterministic for a fixed (spec, scaling, cfg, data) tuple.
FittedSurrogate fit_surrogate(const MlpSpec& spec, const ScalingSpec& scaling,
                              const TrainConfig& cfg, const Eigen::MatrixXd& inputs,
                              const Eigen::VectorXd& targets,
                              const Mlp* warm_start = nullptr);

}  // namespace optexec
