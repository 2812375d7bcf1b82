#include "optexec/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "optexec/parallel.hpp"

namespace optexec {

namespace {

double mean_of(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double se_of(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return 0.0;
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return std::sqrt(s / (static_cast<double>(v.size()) - 1.0)) /
         std::sqrt(static_cast<double>(v.size()));
}

// Linear-interpolation quantile on a sorted copy.
double quantile(std::vector<double> v, double q) {
  std::sort(v.begin(), v.end());
  const double pos = q * (static_cast<double>(v.size()) - 1.0);
  const std::size_t i = static_cast<std::size_t>(pos);
  if (i + 1 >= v.size()) return v.back();
  const double frac = pos - static_cast<double>(i);
  return v[i] + frac * (v[i + 1] - v[i]);
}

ProfileReport profile_from_trades(const std::vector<std::vector<double>>& trades, int n_steps) {
  ProfileReport r;
  r.m_paths = static_cast<int>(trades.size());
  r.step_mean.resize(n_steps);
  r.step_se.resize(n_steps);
  r.q25.resize(n_steps);
  r.q50.resize(n_steps);
  r.q75.resize(n_steps);
  std::vector<double> col(trades.size());
  for (int n = 0; n < n_steps; ++n) {
    for (std::size_t m = 0; m < trades.size(); ++m) col[m] = trades[m][n];
    r.step_mean[n] = mean_of(col);
    r.step_se[n] = se_of(col, r.step_mean[n]);
    r.q25[n] = quantile(col, 0.25);
    r.q50[n] = quantile(col, 0.50);
    r.q75[n] = quantile(col, 0.75);
  }
  return r;
}

FILE* open_csv(const std::string& path) {
  FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw ValidationError("cannot open CSV output " + path);
  return f;
}

}  // namespace

EvalReport compare_policies(const ModelParams& p, const std::vector<NamedPolicy>& policies,
                            int m_paths, std::uint64_t noise_seed, int n_threads) {
  if (policies.empty()) throw ValidationError("compare_policies: no policies given");
  if (m_paths < 1) throw ValidationError("compare_policies: m_paths must be >= 1");
  p.validate();

  const NoisePath noise(m_paths, p.n_steps, p.sigma, noise_seed);
  EvalReport report;
  report.m_paths = m_paths;
  report.noise_seed = noise_seed;
  report.baseline = policies.front().name;

  std::vector<std::vector<std::vector<double>>> trades(policies.size());
  for (std::size_t k = 0; k < policies.size(); ++k) {
    PolicyEval pe;
    pe.name = policies[k].name;
    pe.path_costs.resize(m_paths);
    trades[k].assign(m_paths, {});
    auto* costs = &pe.path_costs;
    auto* tr = &trades[k];
    const PolicyFn& pol = policies[k].policy;
    parallel_for(m_paths, n_threads, [&, costs, tr](int m) {
      SimResult res = simulate_path(p, pol, noise.row(m));
      (*costs)[m] = res.cost;
      (*tr)[m] = std::move(res.trades);
    });
    pe.mean_cost = mean_of(pe.path_costs);
    pe.se_cost = se_of(pe.path_costs, pe.mean_cost);
    const ProfileReport prof = profile_from_trades(trades[k], p.n_steps);
    pe.step_mean = prof.step_mean;
    pe.step_se = prof.step_se;
    report.policies.push_back(std::move(pe));
  }

  const PolicyEval& base = report.policies.front();
  for (auto& pe : report.policies) {
    pe.rel_diff_pct_vs_baseline =
        (base.mean_cost - pe.mean_cost) / base.mean_cost * 100.0;
    int better = 0, worse = 0, tied = 0;
    for (int m = 0; m < m_paths; ++m) {
      if (pe.path_costs[m] < base.path_costs[m]) ++better;
      else if (pe.path_costs[m] > base.path_costs[m]) ++worse;
      else ++tied;
    }
    pe.frac_better = static_cast<double>(better) / m_paths;
    pe.frac_worse = static_cast<double>(worse) / m_paths;
    pe.frac_tied = static_cast<double>(tied) / m_paths;
  }
  return report;
}

ProfileReport strategy_profile(const ModelParams& p, const PolicyFn& policy, int m_paths,
                               std::uint64_t noise_seed, int n_threads) {
  if (m_paths < 1) throw ValidationError("strategy_profile: m_paths must be >= 1");
  const NoisePath noise(m_paths, p.n_steps, p.sigma, noise_seed);
  std::vector<std::vector<double>> trades(m_paths);
  parallel_for(m_paths, n_threads, [&](int m) {
    trades[m] = simulate_path(p, policy, noise.row(m)).trades;
  });
  return profile_from_trades(trades, p.n_steps);
}

ProfileReport unconstrained_profile(const CoeffTable& ct, const ModelParams& p, int m_paths,
                                    std::uint64_t noise_seed, int n_threads) {
  if (m_paths < 1) throw ValidationError("unconstrained_profile: m_paths must be >= 1");
  const NoisePath noise(m_paths, p.n_steps, p.sigma, noise_seed);
  std::vector<std::vector<double>> trades(m_paths);
  parallel_for(m_paths, n_threads, [&](int m) {
    trades[m] = simulate_unconstrained_linear(ct, p, noise.row(m)).trades;
  });
  return profile_from_trades(trades, p.n_steps);
}

SurfaceReport sensitivity_surface(const SolverArtifacts& art, const ModelParams& eval_base,
                                  int step, double x, double d,
                                  const std::vector<double>& kappas,
                                  const std::vector<double>& etas) {
  if (step < 1 || step >= art.params.n_steps)
    throw ValidationError("sensitivity_surface: step must be in [1, N-1]");
  if (kappas.empty() || etas.empty())
    throw ValidationError("sensitivity_surface: empty grid");
  SurfaceReport r;
  r.kappas = kappas;
  r.etas = etas;
  r.step = step;
  r.x = x;
  r.d = d;
  r.trade.resize(kappas.size() * etas.size());
  r.outside.resize(kappas.size() * etas.size());
  const double d_comps[1] = {d};
  for (std::size_t i = 0; i < kappas.size(); ++i) {
    for (std::size_t j = 0; j < etas.size(); ++j) {
      ModelParams eval = eval_base;
      eval.kappa = {kappas[i]};
      eval.zeta = {1.0};
      eval.eta = etas[j];
      const Eigen::VectorXd y =
          assemble_point(art.domain, eval, x, std::span<const double>(d_comps, 1));
      const auto pred = art.policy[step - 1].predict_ex(y);
      r.trade[i * etas.size() + j] = pred.value * x;
      r.outside[i * etas.size() + j] = pred.extrapolated ? 1 : 0;
    }
  }
  return r;
}

void write_profile_csv(const std::string& path, const ProfileReport& profile) {
  FILE* f = open_csv(path);
  std::fprintf(f, "step,mean_trade,se,q25,q50,q75\n");
  for (std::size_t n = 0; n < profile.step_mean.size(); ++n)
    std::fprintf(f, "%zu,%.10g,%.10g,%.10g,%.10g,%.10g\n", n + 1, profile.step_mean[n],
                 profile.step_se[n], profile.q25[n], profile.q50[n], profile.q75[n]);
  std::fclose(f);
}

void write_comparison_csv(const std::string& path, const EvalReport& report) {
  FILE* f = open_csv(path);
  std::fprintf(f, "policy,mean_cost,se,rel_diff_pct_vs_baseline,frac_paths_better\n");
  for (const auto& pe : report.policies)
    std::fprintf(f, "%s,%.10g,%.10g,%.10g,%.10g\n", pe.name.c_str(), pe.mean_cost,
                 pe.se_cost, pe.rel_diff_pct_vs_baseline, pe.frac_better);
  std::fclose(f);
}

void write_surface_csv(const std::string& path, const SurfaceReport& surface) {
  FILE* f = open_csv(path);
  std::fprintf(f, "kappa,eta,trade,outside_domain\n");
  for (std::size_t i = 0; i < surface.kappas.size(); ++i)
    for (std::size_t j = 0; j < surface.etas.size(); ++j)
      std::fprintf(f, "%.10g,%.10g,%.10g,%d\n", surface.kappas[i], surface.etas[j],
                   surface.trade[i * surface.etas.size() + j],
                   static_cast<int>(surface.outside[i * surface.etas.size() + j]));
  std::fclose(f);
}

void write_path_costs_csv(const std::string& path, const EvalReport& report) {
  FILE* f = open_csv(path);
  std::fprintf(f, "path");
  for (const auto& pe : report.policies) std::fprintf(f, ",%s", pe.name.c_str());
  std::fprintf(f, "\n");
  for (int m = 0; m < report.m_paths; ++m) {
    std::fprintf(f, "%d", m);
    for (const auto& pe : report.policies) std::fprintf(f, ",%.10g", pe.path_costs[m]);
    std::fprintf(f, "\n");
  }
  std::fclose(f);
}

}  // namespace optexec
