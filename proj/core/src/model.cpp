#include "optexec/model.hpp"

#include <cmath>
#include <random>
#include <sstream>

namespace optexec {

namespace {

void append(std::vector<std::string>& errs, const std::string& msg) { errs.push_back(msg); }

std::string join(const std::vector<std::string>& errs) {
  std::ostringstream os;
  for (std::size_t i = 0; i < errs.size(); ++i) {
    if (i) os << "; ";
    os << errs[i];
  }
  return os.str();
}

}  // namespace

void ModelParams::validate() const {
  std::vector<std::string> errs;
  if (kappa.empty()) append(errs, "kappa list is empty");
  if (zeta.size() != kappa.size())
    append(errs, "zeta list size does not match kappa list size");
  double zeta_sum = 0.0;
  for (std::size_t m = 0; m < zeta.size(); ++m) {
    zeta_sum += zeta[m];
    if (!(zeta[m] >= 0.0 && zeta[m] <= 1.0))
      append(errs, "zeta[" + std::to_string(m) + "]=" + std::to_string(zeta[m]) +
                       " outside [0,1]");
  }
  if (!zeta.empty() && std::abs(zeta_sum - 1.0) > 1e-12)
    append(errs, "zeta weights sum to " + std::to_string(zeta_sum) + ", expected 1");
  for (std::size_t m = 0; m < kappa.size(); ++m) {
    if (!(kappa[m] > 0.0 && kappa[m] <= 1.0))
      append(errs, "kappa[" + std::to_string(m) + "]=" + std::to_string(kappa[m]) +
                       " outside (0,1]");
  }
  if (!(eta > 0.0)) append(errs, "eta must be > 0");
  if (!(alpha > 0.0)) append(errs, "alpha must be > 0");
  if (!(nu >= 0.0)) append(errs, "nu must be >= 0");
  if (!(sigma >= 0.0)) append(errs, "sigma must be >= 0");
  if (n_steps < 1) append(errs, "n_steps must be >= 1");
  if (!(x0 > 0.0)) append(errs, "x0 must be > 0");
  if (!std::isfinite(d0)) append(errs, "d0 must be finite");
  if (!errs.empty()) throw ValidationError("invalid model parameters: " + join(errs));
}

ModelParams rescale_params(const ModelParams& p, int n_new) {
  if (n_new < 1) throw ValidationError("rescale_params: n_new must be >= 1");
  const double ratio = static_cast<double>(p.n_steps) / static_cast<double>(n_new);
  ModelParams q = p;
  for (std::size_t m = 0; m < q.kappa.size(); ++m) {
    q.kappa[m] = p.kappa[m] * ratio;
    if (!(q.kappa[m] > 0.0 && q.kappa[m] <= 1.0))
      throw ValidationError("rescale_params: kappa[" + std::to_string(m) + "] becomes " +
                            std::to_string(q.kappa[m]) + ", outside (0,1]");
  }
  q.sigma = p.sigma * std::sqrt(ratio);
  q.nu = p.nu * ratio;
  q.n_steps = n_new;
  return q;
}

double MarketState::total_deviation(const ModelParams& p) const {
  double d = 0.0;
  for (std::size_t m = 0; m < d_components.size(); ++m) d += p.zeta[m] * d_components[m];
  return d;
}

double MarketState::refreshed_deviation(const ModelParams& p) const {
  double d = 0.0;
  for (std::size_t m = 0; m < d_components.size(); ++m)
    d += p.zeta[m] * (1.0 - p.kappa[m]) * d_components[m];
  return d;
}

MarketState initial_state(const ModelParams& p) {
  MarketState s;
  s.x = p.x0;
  s.d_components.assign(p.kappa.size(), p.d0);
  s.step = 0;
  return s;
}

MarketState step_state(const MarketState& s, double u, double eps, const ModelParams& p) {
  if (!(u >= 0.0) || u > s.x)
    throw ValidationError("step_state: trade " + std::to_string(u) +
                          " outside [0, x=" + std::to_string(s.x) + "]");
  if (s.step >= p.n_steps)
    throw ValidationError("step_state: already at the horizon");
  MarketState out;
  out.x = s.x - u;
  out.step = s.step + 1;
  const double impact = p.eta * std::pow(u, p.alpha);
  out.d_components.resize(s.d_components.size());
  for (std::size_t m = 0; m < s.d_components.size(); ++m)
    out.d_components[m] = (1.0 - p.kappa[m]) * s.d_components[m] + impact + eps;
  return out;
}

double stage_cost(const MarketState& s, double u, const ModelParams& p) {
  if (!(u >= 0.0) || u > s.x)
    throw ValidationError("stage_cost: trade " + std::to_string(u) +
                          " outside [0, x=" + std::to_string(s.x) + "]");
  const double rem = s.x - u;
  return s.refreshed_deviation(p) * u + 0.5 * p.eta * std::pow(u, p.alpha + 1.0) +
         p.nu * rem * rem;
}

double terminal_value(const MarketState& s, const ModelParams& p) {
  return s.refreshed_deviation(p) * s.x + 0.5 * p.eta * std::pow(s.x, p.alpha + 1.0);
}

NoisePath::NoisePath(int m_paths, int n_steps, double sigma, std::uint64_t seed)
    : m_paths_(m_paths), n_steps_(n_steps), seed_(seed) {
  if (m_paths < 1 || n_steps < 1)
    throw ValidationError("NoisePath: m_paths and n_steps must be >= 1");
  if (!(sigma >= 0.0)) throw ValidationError("NoisePath: sigma must be >= 0");
  eps_.assign(static_cast<std::size_t>(m_paths) * n_steps, 0.0);
  if (sigma > 0.0) {
    std::mt19937_64 eng(seed);
    std::normal_distribution<double> dist(0.0, sigma);
    for (auto& e : eps_) e = dist(eng);
  }
}

SimResult simulate_path(const ModelParams& p, const PolicyFn& policy,
                        std::span<const double> eps) {
  if (static_cast<int>(eps.size()) != p.n_steps)
    throw ValidationError("simulate_path: noise row length does not match n_steps");
  MarketState s = initial_state(p);
  SimResult r;
  r.trades.resize(p.n_steps);
  for (int n = 1; n <= p.n_steps; ++n) {
    const double u = (n < p.n_steps) ? policy(n, s) : s.x;
    if (!(u >= 0.0) || u > s.x)
      throw NumericalError("simulate_path: policy returned trade " + std::to_string(u) +
                           " outside [0, x=" + std::to_string(s.x) + "] at step " +
                           std::to_string(n));
    r.cost += stage_cost(s, u, p);
    s = step_state(s, u, eps[n - 1], p);
    r.trades[n - 1] = u;
  }
  if (!std::isfinite(r.cost)) throw NumericalError("simulate_path: non-finite cost");
  return r;
}

}  // namespace optexec
