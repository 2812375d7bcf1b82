#include "optexec/adp.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "optexec/brent.hpp"
#include "optexec/parallel.hpp"

namespace optexec {

namespace {

constexpr int kStageEvalCap = 200;  // objective evaluations per stage optimization

const std::pair<Coord, const char*> kCoordNames[] = {
    {Coord::x, "x"},       {Coord::d, "d"},     {Coord::d1, "d1"},
    {Coord::d2, "d2"},     {Coord::kappa, "kappa"}, {Coord::eta, "eta"},
    {Coord::alpha, "alpha"}, {Coord::nu, "nu"},  {Coord::zeta, "zeta"},
};

}  // namespace

const char* coord_name(Coord c) {
  for (const auto& [coord, name] : kCoordNames)
    if (coord == c) return name;
  return "?";
}

Coord coord_from_name(const std::string& name) {
  for (const auto& [coord, cname] : kCoordNames)
    if (name == cname) return coord;
  throw ValidationError("unknown training coordinate '" + name + "'");
}

int TrainingDomain::index_of(Coord c) const {
  for (int i = 0; i < dim(); ++i)
    if (coords[i].coord == c) return i;
  return -1;
}

void TrainingDomain::validate(const ModelParams& tmpl) const {
  std::vector<std::string> errs;
  if (m_points < 1) errs.push_back("m_points must be >= 1");
  for (const auto& cr : coords) {
    if (!(cr.hi > cr.lo))
      errs.push_back(std::string(coord_name(cr.coord)) + ": bounds require hi > lo");
  }
  for (int i = 0; i < dim(); ++i)
    for (int j = i + 1; j < dim(); ++j)
      if (coords[i].coord == coords[j].coord)
        errs.push_back(std::string(coord_name(coords[i].coord)) + ": duplicate coordinate");

  const bool has_d = index_of(Coord::d) >= 0;
  const bool has_d1 = index_of(Coord::d1) >= 0, has_d2 = index_of(Coord::d2) >= 0;
  if (index_of(Coord::x) < 0) errs.push_back("domain must include the x coordinate");
  if (!(has_d || (has_d1 && has_d2)))
    errs.push_back("domain must include d or the pair (d1, d2)");
  if (has_d && (has_d1 || has_d2))
    errs.push_back("d cannot be combined with d1/d2");
  if (has_d1 != has_d2) errs.push_back("d1 and d2 must be included together");
  if (has_d && tmpl.n_kernels() != 1)
    errs.push_back("d coordinate requires a single-kernel template");
  if (has_d1 && tmpl.n_kernels() != 2)
    errs.push_back("d1/d2 coordinates require a two-kernel template");
  if (index_of(Coord::zeta) >= 0 && tmpl.n_kernels() != 2)
    errs.push_back("zeta coordinate requires a two-kernel template");
  if (index_of(Coord::kappa) >= 0 && tmpl.n_kernels() != 1)
    errs.push_back("kappa coordinate requires a single-kernel template");

  for (const auto& cr : coords) {
    switch (cr.coord) {
      case Coord::x:
        if (cr.lo < 0.0 || cr.hi > tmpl.x0)
          errs.push_back("x range must lie inside [0, x0]");
        break;
      case Coord::kappa:
        if (cr.lo <= 0.0 || cr.hi > 1.0)
          errs.push_back("kappa range must lie inside (0, 1]");
        break;
      case Coord::eta:
        if (cr.lo <= 0.0) errs.push_back("eta range must be positive");
        break;
      case Coord::alpha:
        if (cr.lo <= 0.0) errs.push_back("alpha range must be positive");
        break;
      case Coord::nu:
        if (cr.lo < 0.0) errs.push_back("nu range must be nonnegative");
        break;
      case Coord::zeta:
        if (cr.lo < 0.0 || cr.hi > 1.0) errs.push_back("zeta range must lie inside [0, 1]");
        break;
      default:
        break;
    }
  }
  if (!errs.empty()) {
    std::ostringstream os;
    os << "invalid training domain: ";
    for (std::size_t i = 0; i < errs.size(); ++i) os << (i ? "; " : "") << errs[i];
    throw ValidationError(os.str());
  }
}

EffectiveParams effective_params(const Eigen::VectorXd& y, const TrainingDomain& dom,
                                 const ModelParams& tmpl) {
  EffectiveParams e;
  e.n_comp = tmpl.n_kernels();
  for (int m = 0; m < e.n_comp; ++m) {
    e.kappa[m] = tmpl.kappa[m];
    e.zeta[m] = tmpl.zeta[m];
    e.d[m] = tmpl.d0;
  }
  e.eta = tmpl.eta;
  e.alpha = tmpl.alpha;
  e.nu = tmpl.nu;
  for (int i = 0; i < dom.dim(); ++i) {
    const double v = y(i);
    switch (dom.coords[i].coord) {
      case Coord::x: e.x = v; break;
      case Coord::d: e.d[0] = v; break;
      case Coord::d1: e.d[0] = v; break;
      case Coord::d2: e.d[1] = v; break;
      case Coord::kappa: e.kappa[0] = v; break;
      case Coord::eta: e.eta = v; break;
      case Coord::alpha: e.alpha = v; break;
      case Coord::nu: e.nu = v; break;
      case Coord::zeta:
        e.zeta[0] = v;
        e.zeta[1] = 1.0 - v;
        break;
    }
  }
  return e;
}

Eigen::MatrixXd sample_design(const TrainingDomain& dom, int step, std::uint64_t seed) {
  const int effective_step = dom.fresh_per_step ? step : 0;
  std::seed_seq seq{static_cast<std::uint32_t>(seed & 0xffffffffu),
                    static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(effective_step)};
  std::mt19937_64 eng(seq);
  Eigen::MatrixXd pts(dom.m_points, dom.dim());
  std::vector<std::uniform_real_distribution<double>> dists;
  dists.reserve(dom.dim());
  for (const auto& cr : dom.coords) dists.emplace_back(cr.lo, cr.hi);
  for (int m = 0; m < dom.m_points; ++m)
    for (int j = 0; j < dom.dim(); ++j) pts(m, j) = dists[j](eng);
  return pts;
}

ExactTerminalValue::ExactTerminalValue(TrainingDomain dom, ModelParams tmpl)
    : dom_(std::move(dom)), tmpl_(std::move(tmpl)) {}

void ExactTerminalValue::eval(const Eigen::MatrixXd& pts, Eigen::VectorXd& out) const {
  out.resize(pts.rows());
  for (int i = 0; i < pts.rows(); ++i) {
    const EffectiveParams e = effective_params(pts.row(i).transpose(), dom_, tmpl_);
    out(i) = e.refreshed_deviation() * e.x +
             0.5 * e.eta * std::pow(e.x, e.alpha + 1.0);
  }
}

namespace {

// Bellman objective at one design point: pre-builds the knot matrix once and
// patches only the coordinates a trade changes.
class BellmanObjective {
 public:
  BellmanObjective(const Eigen::VectorXd& y, const TrainingDomain& dom,
                   const ModelParams& tmpl, const NextValue& v_next, const Quantizer& q)
      : dom_(dom), v_next_(v_next), q_(q), eff_(effective_params(y, dom, tmpl)) {
    idx_x_ = dom.index_of(Coord::x);
    idx_d_[0] = dom.index_of(dom.index_of(Coord::d) >= 0 ? Coord::d : Coord::d1);
    idx_d_[1] = dom.index_of(Coord::d2);
    n_d_ = (idx_d_[1] >= 0) ? 2 : 1;
    pts_ = y.transpose().replicate(q.n_knots(), 1);
    knots_ = Eigen::Map<const Eigen::VectorXd>(q.knots.data(), q.n_knots());
    weights_ = Eigen::Map<const Eigen::VectorXd>(q.weights.data(), q.n_knots());
  }

  const EffectiveParams& eff() const { return eff_; }

  double operator()(double u) {
    const double rem = eff_.x - u;
    const double stage = eff_.refreshed_deviation() * u +
                         0.5 * eff_.eta * std::pow(u, eff_.alpha + 1.0) +
                         eff_.nu * rem * rem;
    const double impact = eff_.eta * std::pow(u, eff_.alpha);
    pts_.col(idx_x_).setConstant(rem);
    for (int m = 0; m < n_d_; ++m) {
      const double base = (1.0 - eff_.kappa[m]) * eff_.d[m] + impact;
      pts_.col(idx_d_[m]) = knots_.array() + base;
    }
    v_next_.eval(pts_, vals_);
    return stage + weights_.dot(vals_);
  }

 private:
  const TrainingDomain& dom_;
  const NextValue& v_next_;
  const Quantizer& q_;
  EffectiveParams eff_;
  int idx_x_ = -1;
  int idx_d_[2] = {-1, -1};
  int n_d_ = 1;
  Eigen::MatrixXd pts_;
  Eigen::VectorXd knots_, weights_, vals_;
};

}  // namespace

StageResult stage_optimize(const Eigen::VectorXd& y, const TrainingDomain& dom,
                           const ModelParams& tmpl, const NextValue& v_next,
                           const Quantizer& q,
                           std::optional<std::pair<double, double>> bounds) {
  BellmanObjective f(y, dom, tmpl, v_next, q);
  const double x = f.eff().x;
  double lo = 0.0, hi = x;
  if (bounds) {
    lo = bounds->first;
    hi = bounds->second;
  }
  StageResult r;
  if (!(hi > lo)) {  // empty feasible interval (x = 0)
    r.u = lo;
    r.value = f(lo);
    r.evals = 1;
    return r;
  }

  const double tol = 1e-8 * std::max(1.0, std::abs(hi));
  const double f_lo = f(lo), f_hi = f(hi);
  r.evals = 2;
  r.u = lo;
  r.value = f_lo;
  if (f_hi < r.value) {
    r.u = hi;
    r.value = f_hi;
  }

  const double off = std::max(tol, 1e-6 * (hi - lo));
  const double starts[3] = {lo + off, 0.5 * (lo + hi), hi - off};
  const int budget = (kStageEvalCap - r.evals) / 3;
  for (double s : starts) {
    const ScalarMinResult m = brent_minimize(f, lo, hi, s, tol, budget);
    r.evals += m.evals;
    if (!m.converged) r.converged = false;
    if (m.f < r.value) {
      r.value = m.f;
      r.u = m.x;
    }
  }
  if (!std::isfinite(r.value))
    throw NumericalError("stage_optimize: non-finite stage value");
  return r;
}

namespace {

ScalingSpec domain_scaling(const TrainingDomain& dom) {
  ScalingSpec sc;
  sc.in_lo.resize(dom.dim());
  sc.in_hi.resize(dom.dim());
  for (int i = 0; i < dom.dim(); ++i) {
    sc.in_lo(i) = dom.coords[i].lo;
    sc.in_hi(i) = dom.coords[i].hi;
  }
  return sc;
}

std::uint64_t mix_seed(std::uint64_t base, int pass, int step, int which) {
  std::uint64_t h = base;
  h ^= 0x9e3779b97f4a7c15ull + (static_cast<std::uint64_t>(pass) << 32) +
       (static_cast<std::uint64_t>(step) << 8) + static_cast<std::uint64_t>(which);
  h ^= h >> 33;
  h *= 0xff51afd7ed558ccdull;
  h ^= h >> 33;
  return h;
}

}  // namespace

SolverArtifacts backward_solve(const ModelParams& tmpl, const TrainingDomain& dom,
                               const SolverSettings& settings, const Quantizer& q,
                               const LogFn& log) {
  tmpl.validate();
  dom.validate(tmpl);
  if (tmpl.n_steps < 2)
    throw ValidationError("backward_solve: nothing to train for N < 2");
  if (settings.passes < 1) throw ValidationError("backward_solve: passes must be >= 1");

  const int N = tmpl.n_steps;
  const int ell = dom.dim();
  const int idx_x = dom.index_of(Coord::x);
  const ScalingSpec scaling = domain_scaling(dom);

  SolverArtifacts art;
  art.params = tmpl;
  art.domain = dom;
  art.quantizer = q;
  art.settings = settings;
  art.value.resize(N - 1);
  art.policy.resize(N - 1);

  MlpSpec vspec{ell, settings.hidden_layers, settings.hidden_width, OutputHead::value};
  MlpSpec pspec{ell, settings.hidden_layers, settings.hidden_width, OutputHead::policy};

  const ExactTerminalValue terminal(dom, tmpl);

  for (int pass = 1; pass <= settings.passes; ++pass) {
    for (int n = N - 1; n >= 1; --n) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::uint64_t design_seed =
          settings.reuse_designs ? mix_seed(settings.design_seed, 1, 0, 0)
                                 : mix_seed(settings.design_seed, pass, 0, 0);
      const Eigen::MatrixXd design = sample_design(dom, n, design_seed);
      const int M = dom.m_points;

      std::optional<SurrogateNextValue> next_surrogate;
      const NextValue* v_next = &terminal;
      if (n < N - 1) {
        next_surrogate.emplace(art.value[n]);
        v_next = &*next_surrogate;
      }

      Eigen::VectorXd v_targets(M), u_fracs(M);
      std::vector<int> nonconv(M, 0);
      parallel_for(M, settings.n_threads, [&](int m) {
        const Eigen::VectorXd y = design.row(m).transpose();
        const StageResult r = stage_optimize(y, dom, tmpl, *v_next, q);
        v_targets(m) = r.value;
        const double x = y(idx_x);
        u_fracs(m) = (x > 0.0) ? r.u / x : 0.5;
        nonconv[m] = r.converged ? 0 : 1;
      });

      TrainConfig tc;
      tc.epochs = settings.epochs;
      tc.batch_size = settings.batch_size;
      tc.learning_rate = settings.learning_rate;

      const bool have_previous_fit = pass > 1;  // reload this step's nets when retraining
      const Mlp* warm_v = nullptr;
      const Mlp* warm_p = nullptr;
      if (have_previous_fit) {
        warm_v = &art.value[n - 1].net();
        warm_p = &art.policy[n - 1].net();
      } else if (settings.warm_start && n < N - 1) {
        warm_v = &art.value[n].net();
        warm_p = &art.policy[n].net();
      }

      tc.seed = mix_seed(settings.init_seed, pass, n, 0);
      FittedSurrogate vs = fit_surrogate(vspec, scaling, tc, design, v_targets, warm_v);
      tc.seed = mix_seed(settings.init_seed, pass, n, 1);
      FittedSurrogate ps = fit_surrogate(pspec, scaling, tc, design, u_fracs, warm_p);

      StepDiagnostics d;
      d.pass = pass;
      d.step = n;
      d.value_loss = vs.diagnostics().epoch_loss.back();
      d.policy_loss = ps.diagnostics().epoch_loss.back();
      for (int m = 0; m < M; ++m) d.nonconverged += nonconv[m];
      d.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      art.diagnostics.push_back(d);

      art.value[n - 1] = std::move(vs);
      art.policy[n - 1] = std::move(ps);

      if (log) {
        std::ostringstream os;
        os << "pass " << pass << " step " << n << ": " << d.seconds << " s, value loss "
           << d.value_loss << ", policy loss " << d.policy_loss << ", nonconverged "
           << d.nonconverged;
        log(os.str());
      }
    }
  }
  return art;
}

Eigen::VectorXd assemble_point(const TrainingDomain& dom, const ModelParams& eval_params,
                               double x, std::span<const double> d_components) {
  Eigen::VectorXd y(dom.dim());
  for (int i = 0; i < dom.dim(); ++i) {
    switch (dom.coords[i].coord) {
      case Coord::x: y(i) = x; break;
      case Coord::d: y(i) = d_components[0]; break;
      case Coord::d1: y(i) = d_components[0]; break;
      case Coord::d2: y(i) = d_components[1]; break;
      case Coord::kappa: y(i) = eval_params.kappa[0]; break;
      case Coord::eta: y(i) = eval_params.eta; break;
      case Coord::alpha: y(i) = eval_params.alpha; break;
      case Coord::nu: y(i) = eval_params.nu; break;
      case Coord::zeta: y(i) = eval_params.zeta[0]; break;
    }
  }
  return y;
}

PolicyFn make_nn_policy(const SolverArtifacts& art, const ModelParams& eval_params) {
  if (static_cast<int>(art.policy.size()) != art.params.n_steps - 1)
    throw ValidationError("make_nn_policy: artifacts are incomplete");
  if (eval_params.n_kernels() != art.params.n_kernels())
    throw ValidationError("make_nn_policy: kernel count mismatch with artifacts");
  const TrainingDomain dom = art.domain;
  const ModelParams eval = eval_params;
  const int N = art.params.n_steps;
  const std::vector<FittedSurrogate> pols = art.policy;  // detach from artifact lifetime
  return [dom, eval, N, pols](int n, const MarketState& s) {
    if (n >= N) return s.x;
    if (s.x <= 0.0) return 0.0;
    const Eigen::VectorXd y = assemble_point(dom, eval, s.x, s.d_components);
    const double frac = pols[n - 1].predict(y);
    return frac * s.x;
  };
}

// --- serialization -----------------------------------------------------------

namespace {

nlohmann::json params_to_json(const ModelParams& p) {
  return {{"kappa", p.kappa}, {"zeta", p.zeta},   {"eta", p.eta},
          {"alpha", p.alpha}, {"nu", p.nu},       {"sigma", p.sigma},
          {"n_steps", p.n_steps}, {"x0", p.x0},   {"d0", p.d0}};
}

ModelParams params_from_json(const nlohmann::json& j) {
  ModelParams p;
  p.kappa = j.at("kappa").get<std::vector<double>>();
  p.zeta = j.at("zeta").get<std::vector<double>>();
  p.eta = j.at("eta").get<double>();
  p.alpha = j.at("alpha").get<double>();
  p.nu = j.at("nu").get<double>();
  p.sigma = j.at("sigma").get<double>();
  p.n_steps = j.at("n_steps").get<int>();
  p.x0 = j.at("x0").get<double>();
  p.d0 = j.at("d0").get<double>();
  return p;
}

}  // namespace

void SolverArtifacts::save(const std::string& dir) const {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  nlohmann::json manifest;
  manifest["format_version"] = 1;
  manifest["params"] = params_to_json(params);
  nlohmann::json coords = nlohmann::json::array();
  for (const auto& cr : domain.coords)
    coords.push_back({{"coord", coord_name(cr.coord)}, {"lo", cr.lo}, {"hi", cr.hi}});
  manifest["domain"] = {{"coords", coords},
                        {"m_points", domain.m_points},
                        {"fresh_per_step", domain.fresh_per_step}};
  manifest["quantizer"] = {{"sigma", quantizer.sigma},
                           {"knots", quantizer.knots},
                           {"weights", quantizer.weights}};
  manifest["settings"] = {{"hidden_layers", settings.hidden_layers},
                          {"hidden_width", settings.hidden_width},
                          {"epochs", settings.epochs},
                          {"batch_size", settings.batch_size},
                          {"learning_rate", settings.learning_rate},
                          {"design_seed", settings.design_seed},
                          {"init_seed", settings.init_seed},
                          {"warm_start", settings.warm_start},
                          {"passes", settings.passes},
                          {"reuse_designs", settings.reuse_designs}};
  nlohmann::json diag = nlohmann::json::array();
  for (const auto& d : diagnostics)
    diag.push_back({{"pass", d.pass},
                    {"step", d.step},
                    {"seconds", d.seconds},
                    {"value_loss", d.value_loss},
                    {"policy_loss", d.policy_loss},
                    {"nonconverged", d.nonconverged}});
  manifest["diagnostics"] = std::move(diag);

  std::ofstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw ValidationError("SolverArtifacts::save: cannot write manifest in " + dir);
  mf << manifest.dump(2);

  char name[32];
  for (std::size_t i = 0; i < value.size(); ++i) {
    std::snprintf(name, sizeof(name), "value_%02zu.json", i + 1);
    value[i].save((fs::path(dir) / name).string());
    std::snprintf(name, sizeof(name), "policy_%02zu.json", i + 1);
    policy[i].save((fs::path(dir) / name).string());
  }
}

SolverArtifacts SolverArtifacts::load(const std::string& dir) {
  namespace fs = std::filesystem;
  std::ifstream mf(fs::path(dir) / "manifest.json");
  if (!mf) throw ValidationError("SolverArtifacts::load: missing manifest.json in " + dir);
  nlohmann::json manifest = nlohmann::json::parse(mf);
  if (manifest.at("format_version").get<int>() != 1)
    throw ValidationError("SolverArtifacts::load: unsupported format version");

  SolverArtifacts art;
  art.params = params_from_json(manifest.at("params"));
  for (const auto& c : manifest.at("domain").at("coords"))
    art.domain.coords.push_back(
        {coord_from_name(c.at("coord").get<std::string>()), c.at("lo").get<double>(),
         c.at("hi").get<double>()});
  art.domain.m_points = manifest.at("domain").at("m_points").get<int>();
  art.domain.fresh_per_step = manifest.at("domain").at("fresh_per_step").get<bool>();
  art.quantizer.sigma = manifest.at("quantizer").at("sigma").get<double>();
  art.quantizer.knots = manifest.at("quantizer").at("knots").get<std::vector<double>>();
  art.quantizer.weights = manifest.at("quantizer").at("weights").get<std::vector<double>>();
  const auto& s = manifest.at("settings");
  art.settings.hidden_layers = s.at("hidden_layers").get<int>();
  art.settings.hidden_width = s.at("hidden_width").get<int>();
  art.settings.epochs = s.at("epochs").get<int>();
  art.settings.batch_size = s.at("batch_size").get<int>();
  art.settings.learning_rate = s.at("learning_rate").get<double>();
  art.settings.design_seed = s.at("design_seed").get<std::uint64_t>();
  art.settings.init_seed = s.at("init_seed").get<std::uint64_t>();
  art.settings.warm_start = s.at("warm_start").get<bool>();
  art.settings.passes = s.at("passes").get<int>();
  art.settings.reuse_designs = s.at("reuse_designs").get<bool>();
  for (const auto& d : manifest.at("diagnostics")) {
    StepDiagnostics sd;
    sd.pass = d.at("pass").get<int>();
    sd.step = d.at("step").get<int>();
    sd.seconds = d.at("seconds").get<double>();
    sd.value_loss = d.at("value_loss").get<double>();
    sd.policy_loss = d.at("policy_loss").get<double>();
    sd.nonconverged = d.at("nonconverged").get<int>();
    art.diagnostics.push_back(sd);
  }

  const int n_sur = art.params.n_steps - 1;
  char name[32];
  for (int i = 0; i < n_sur; ++i) {
    std::snprintf(name, sizeof(name), "value_%02d.json", i + 1);
    if (!fs::exists(fs::path(dir) / name))
      throw ValidationError(std::string("SolverArtifacts::load: missing ") + name);
    art.value.push_back(FittedSurrogate::load((fs::path(dir) / name).string()));
    std::snprintf(name, sizeof(name), "policy_%02d.json", i + 1);
    if (!fs::exists(fs::path(dir) / name))
      throw ValidationError(std::string("SolverArtifacts::load: missing ") + name);
    art.policy.push_back(FittedSurrogate::load((fs::path(dir) / name).string()));
  }
  return art;
}

}  // namespace optexec
