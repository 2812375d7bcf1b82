#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace optexec {

/// Bad inputs (parameters, configs, domain bounds). CLI maps this to exit code 2.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Numerical breakdown (degenerate denominators, non-finite results). Exit code 3.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Market and model parameters for a buying program of x0 shares over n_steps
/// periods. The transient impact kernel is a convex combination of exponentials
/// with rates kappa[m] and weights zeta[m]; single-kernel mode is kappa={k},
/// zeta={1}. Units follow the running convention x0 ~ 1e5 shares, eta ~ 1e-3,
/// nu ~ 1e-4, sigma ~ 1.
struct ModelParams {
  std::vector<double> kappa{0.5};  // resilience rates, each in (0,1]
  std::vector<double> zeta{1.0};   // kernel weights, in [0,1], sum to 1
  double eta = 1e-3;               // inverse market depth, > 0
  double alpha = 1.0;              // impact exponent, > 0
  double nu = 0.0;                 // urgency penalty on remaining inventory, >= 0
  double sigma = 0.0;              // deviation shock std, >= 0
  int n_steps = 10;                // horizon N >= 1
  double x0 = 1e5;                 // initial shares to buy, > 0
  double d0 = 0.0;                 // initial deviation

  int n_kernels() const { return static_cast<int>(kappa.size()); }
  bool single_kernel() const { return kappa.size() == 1; }

  /// Throws ValidationError listing every violated bound.
  void validate() const;
};

/// Change the horizon while keeping business time fixed: kappa and nu scale by
/// N/N', sigma by sqrt(N/N'); eta is time-unit free and stays put.
/// Throws ValidationError if a rescaled kappa leaves (0,1].
ModelParams rescale_params(const ModelParams& p, int n_new);

/// State after `step` executed periods: remaining shares x and one deviation
/// component per kernel. The observable deviation is sum_m zeta_m * D^m.
struct MarketState {
  double x = 0.0;
  std::vector<double> d_components;
  int step = 0;

  double total_deviation(const ModelParams& p) const;
  /// sum_m zeta_m * (1 - kappa_m) * D^m, the refreshed pre-trade deviation.
  double refreshed_deviation(const ModelParams& p) const;
};

MarketState initial_state(const ModelParams& p);

/// One transition: x' = x - u, D^m' = (1-kappa_m) D^m + eta u^alpha + eps.
/// Buy-only, so the impact term needs no sign branch.
/// Rejects u outside [0, x] and stepping past the horizon.
MarketState step_state(const MarketState& s, double u, double eps, const ModelParams& p);

/// Per-period cost: refreshed_deviation * u + (eta/2) u^(alpha+1) + nu (x-u)^2.
double stage_cost(const MarketState& s, double u, const ModelParams& p);

/// Cost of the forced terminal liquidation u = x (no urgency term remains).
double terminal_value(const MarketState& s, const ModelParams& p);

/// Pre-generated shock matrix, one row per path, so that several policies can
/// be evaluated against the identical noise (common random numbers). Immutable
/// after construction.
class NoisePath {
 public:
  NoisePath(int m_paths, int n_steps, double sigma, std::uint64_t seed);

  int m_paths() const { return m_paths_; }
  int n_steps() const { return n_steps_; }
  std::uint64_t seed() const { return seed_; }
  std::span<const double> row(int path) const {
    return {eps_.data() + static_cast<std::size_t>(path) * n_steps_,
            static_cast<std::size_t>(n_steps_)};
  }

 private:
  int m_paths_;
  int n_steps_;
  std::uint64_t seed_;
  std::vector<double> eps_;
};

/// Feedback policy: trade size for period `step` (1-based) given the state
/// observed after step-1 periods. Must return values in [0, x].
using PolicyFn = std::function<double(int step, const MarketState&)>;

struct SimResult {
  std::vector<double> trades;
  double cost = 0.0;
};

/// Run one path: the policy chooses u_1..u_{N-1}, the final period forcibly
/// liquidates the remainder, so trades always sum to x0. Throws on policy
/// outputs outside [0, x] and on non-finite costs.
SimResult simulate_path(const ModelParams& p, const PolicyFn& policy,
                        std::span<const double> eps);

}  // namespace optexec
