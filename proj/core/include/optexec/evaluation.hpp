#pragma once

#include <string>
#include <utility>
#include <vector>

#include "optexec/adp.hpp"
#include "optexec/closed_form.hpp"
#include "optexec/model.hpp"

namespace optexec {

struct NamedPolicy {
  std::string name;
  PolicyFn policy;
};

/// Per-policy results of a common-random-numbers comparison. The relative
/// difference convention is (mean_baseline - mean_candidate) / mean_baseline
/// * 100, so positive numbers mean the candidate achieved lower cost.
struct PolicyEval {
  std::string name;
  std::vector<double> path_costs;
  double mean_cost = 0.0;
  double se_cost = 0.0;
  std::vector<double> step_mean, step_se;  // per-step trade statistics
  double rel_diff_pct_vs_baseline = 0.0;
  double frac_better = 0.0;  // paths strictly cheaper than the baseline
  double frac_worse = 0.0;
  double frac_tied = 0.0;
};

struct EvalReport {
  int m_paths = 0;
  std::uint64_t noise_seed = 0;
  std::string baseline;
  std::vector<PolicyEval> policies;
};

/// Simulate every policy on one shared NoisePath and compare realized costs.
/// The first named policy is the baseline. Deterministic for fixed inputs
/// regardless of the thread count.
EvalReport compare_policies(const ModelParams& p, const std::vector<NamedPolicy>& policies,
                            int m_paths, std::uint64_t noise_seed, int n_threads = 0);

struct ProfileReport {
  std::vector<double> step_mean, step_se, q25, q50, q75;
  int m_paths = 0;
};

/// Per-step trade distribution of one policy across simulated paths.
ProfileReport strategy_profile(const ModelParams& p, const PolicyFn& policy, int m_paths,
                               std::uint64_t noise_seed, int n_threads = 0);

/// Same statistics for the unconstrained linear benchmark, whose trades may go
/// negative and therefore cannot run through the admissible simulator.
ProfileReport unconstrained_profile(const CoeffTable& ct, const ModelParams& p, int m_paths,
                                    std::uint64_t noise_seed, int n_threads = 0);

struct SurfaceReport {
  std::vector<double> kappas, etas;
  std::vector<double> trade;          // row-major [kappa][eta]
  std::vector<unsigned char> outside; // 1 where (kappa, eta) left the training box
  int step = 0;
  double x = 0.0, d = 0.0;
};

/// Policy trade u_n(x, d, kappa, eta) over a (kappa, eta) grid at a fixed
/// state; out-of-domain cells are evaluated anyway and flagged.
SurfaceReport sensitivity_surface(const SolverArtifacts& art, const ModelParams& eval_base,
                                  int step, double x, double d,
                                  const std::vector<double>& kappas,
                                  const std::vector<double>& etas);

// CSV writers; all floating values use 10 significant digits.
void write_profile_csv(const std::string& path, const ProfileReport& profile);
void write_comparison_csv(const std::string& path, const EvalReport& report);
void write_surface_csv(const std::string& path, const SurfaceReport& surface);
void write_path_costs_csv(const std::string& path, const EvalReport& report);

}  // namespace optexec
