#include "optexec/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace optexec {

namespace {

using nlohmann::json;

json params_to_json(const ModelParams& p) {
  return {{"kappa", p.kappa}, {"zeta", p.zeta},   {"eta", p.eta},
          {"alpha", p.alpha}, {"nu", p.nu},       {"sigma", p.sigma},
          {"n_steps", p.n_steps}, {"x0", p.x0},   {"d0", p.d0}};
}

ModelParams params_from_json(const json& j) {
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

void set_opt(json& j, const char* key, const std::optional<double>& v) {
  if (v) j[key] = *v;
}

std::optional<double> get_opt(const json& j, const char* key) {
  if (j.contains(key)) return j.at(key).get<double>();
  return std::nullopt;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("config: cannot open " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return from_json_string(text);
}

ExperimentConfig ExperimentConfig::from_json_string(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: JSON parse error: ") + e.what());
  }
  try {
    ExperimentConfig cfg;
    cfg.name = j.value("name", "");
    cfg.model = params_from_json(j.at("model"));
    cfg.output_dir = j.value("output_dir", "out");
    if (j.contains("training")) {
      const json& t = j.at("training");
      TrainingBlock tb;
      for (const auto& c : t.at("coordinates"))
        tb.domain.coords.push_back({coord_from_name(c.at("coord").get<std::string>()),
                                    c.at("lo").get<double>(), c.at("hi").get<double>()});
      tb.domain.m_points = t.at("m_points").get<int>();
      tb.domain.fresh_per_step = t.value("fresh_per_step", true);
      tb.solver.hidden_layers = t.value("hidden_layers", 3);
      tb.solver.hidden_width = t.value("hidden_width", 16);
      tb.solver.epochs = t.at("epochs").get<int>();
      tb.solver.batch_size = t.value("batch_size", 64);
      tb.solver.learning_rate = t.value("learning_rate", 1e-3);
      tb.solver.design_seed = t.at("design_seed").get<std::uint64_t>();
      tb.solver.init_seed = t.at("init_seed").get<std::uint64_t>();
      tb.solver.warm_start = t.value("warm_start", false);
      tb.solver.passes = t.value("passes", 1);
      tb.solver.reuse_designs = t.value("reuse_designs", false);
      tb.quantizer_knots = t.value("quantizer_knots", 50);
      tb.quantizer_grid_file = t.value("quantizer_grid_file", std::string());
      cfg.training = std::move(tb);
    }
    if (j.contains("evaluation")) {
      const json& e = j.at("evaluation");
      EvalBlock eb;
      eb.m_paths = e.value("m_paths", 10000);
      eb.noise_seed = e.at("noise_seed").get<std::uint64_t>();
      eb.baseline = e.value("baseline", "lf");
      if (e.contains("policies")) eb.policies = e.at("policies").get<std::vector<std::string>>();
      eb.artifacts_dir = e.value("artifacts_dir", std::string());
      if (e.contains("tests")) {
        for (const auto& t : e.at("tests")) {
          TestConfig tc;
          tc.label = t.value("label", "");
          tc.kappa = get_opt(t, "kappa");
          tc.eta = get_opt(t, "eta");
          tc.alpha = get_opt(t, "alpha");
          tc.nu = get_opt(t, "nu");
          tc.zeta = get_opt(t, "zeta");
          tc.sigma = get_opt(t, "sigma");
          tc.d0 = get_opt(t, "d0");
          tc.lf_kappa = get_opt(t, "lf_kappa");
          eb.tests.push_back(std::move(tc));
        }
      }
      cfg.evaluation = std::move(eb);
    }
    return cfg;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
}

std::string ExperimentConfig::to_json_string() const {
  json j;
  j["name"] = name;
  j["model"] = params_to_json(model);
  j["output_dir"] = output_dir;
  if (training) {
    json coords = json::array();
    for (const auto& c : training->domain.coords)
      coords.push_back({{"coord", coord_name(c.coord)}, {"lo", c.lo}, {"hi", c.hi}});
    j["training"] = {{"coordinates", coords},
                     {"m_points", training->domain.m_points},
                     {"fresh_per_step", training->domain.fresh_per_step},
                     {"hidden_layers", training->solver.hidden_layers},
                     {"hidden_width", training->solver.hidden_width},
                     {"epochs", training->solver.epochs},
                     {"batch_size", training->solver.batch_size},
                     {"learning_rate", training->solver.learning_rate},
                     {"design_seed", training->solver.design_seed},
                     {"init_seed", training->solver.init_seed},
                     {"warm_start", training->solver.warm_start},
                     {"passes", training->solver.passes},
                     {"reuse_designs", training->solver.reuse_designs},
                     {"quantizer_knots", training->quantizer_knots},
                     {"quantizer_grid_file", training->quantizer_grid_file}};
  }
  if (evaluation) {
    json tests = json::array();
    for (const auto& t : evaluation->tests) {
      json tj;
      tj["label"] = t.label;
      set_opt(tj, "kappa", t.kappa);
      set_opt(tj, "eta", t.eta);
      set_opt(tj, "alpha", t.alpha);
      set_opt(tj, "nu", t.nu);
      set_opt(tj, "zeta", t.zeta);
      set_opt(tj, "sigma", t.sigma);
      set_opt(tj, "d0", t.d0);
      set_opt(tj, "lf_kappa", t.lf_kappa);
      tests.push_back(std::move(tj));
    }
    j["evaluation"] = {{"m_paths", evaluation->m_paths},
                       {"noise_seed", evaluation->noise_seed},
                       {"baseline", evaluation->baseline},
                       {"policies", evaluation->policies},
                       {"tests", tests},
                       {"artifacts_dir", evaluation->artifacts_dir}};
  }
  return j.dump(2);
}

ModelParams resolve_test(const ExperimentConfig& cfg, const TestConfig& test) {
  ModelParams p = cfg.model;
  if (test.kappa) {
    if (!p.single_kernel())
      throw ValidationError("test '" + test.label +
                            "': kappa override requires a single-kernel model");
    p.kappa[0] = *test.kappa;
  }
  if (test.zeta) {
    if (p.n_kernels() != 2)
      throw ValidationError("test '" + test.label +
                            "': zeta override requires a two-kernel model");
    p.zeta = {*test.zeta, 1.0 - *test.zeta};
  }
  if (test.eta) p.eta = *test.eta;
  if (test.alpha) p.alpha = *test.alpha;
  if (test.nu) p.nu = *test.nu;
  if (test.sigma) p.sigma = *test.sigma;
  if (test.d0) p.d0 = *test.d0;
  return p;
}

double resolve_lf_kappa(const ExperimentConfig& cfg, const TestConfig& test) {
  if (test.lf_kappa) return *test.lf_kappa;
  const ModelParams p = resolve_test(cfg, test);
  if (!p.single_kernel())
    throw ValidationError("test '" + test.label +
                          "': lf_kappa must be given for multi-kernel models");
  return p.kappa[0];
}

std::vector<std::string> ExperimentConfig::violations() const {
  std::vector<std::string> errs;
  try {
    model.validate();
  } catch (const ValidationError& e) {
    errs.push_back(e.what());
  }
  if (training) {
    try {
      training->domain.validate(model);
    } catch (const ValidationError& e) {
      errs.push_back(e.what());
    }
    if (training->solver.epochs < 1) errs.push_back("training: epochs must be >= 1");
    if (training->domain.m_points < training->solver.batch_size)
      errs.push_back("training: m_points must be >= batch_size");
    if (training->quantizer_knots < 1)
      errs.push_back("training: quantizer_knots must be >= 1");
  }
  if (evaluation) {
    if (evaluation->m_paths < 1) errs.push_back("evaluation: m_paths must be >= 1");
    // An empty policy list is legal: exact-solution recipes carry tests only.
    if (!evaluation->policies.empty()) {
      bool has_baseline = false;
      for (const auto& pol : evaluation->policies)
        if (pol == evaluation->baseline) has_baseline = true;
      if (!has_baseline)
        errs.push_back("evaluation: baseline '" + evaluation->baseline +
                       "' is not among the listed policies");
    }
    bool wants_nn = false;
    for (const auto& pol : evaluation->policies)
      if (pol == "nn") wants_nn = true;
    if (wants_nn && !training && evaluation->artifacts_dir.empty())
      errs.push_back("evaluation: the nn policy needs a training block or artifacts_dir");

    // Hard containment: every test cell must lie inside the training domain.
    if (training) {
      for (const auto& test : evaluation->tests) {
        ModelParams p;
        try {
          p = resolve_test(*this, test);
        } catch (const ValidationError& e) {
          errs.push_back(e.what());
          continue;
        }
        for (const auto& cr : training->domain.coords) {
          double v = 0.0;
          bool check = true;
          switch (cr.coord) {
            case Coord::x: v = p.x0; break;
            case Coord::d: v = p.d0; break;
            case Coord::d1: v = p.d0; break;
            case Coord::d2: v = p.d0; break;
            case Coord::kappa: v = p.kappa[0]; break;
            case Coord::eta: v = p.eta; break;
            case Coord::alpha: v = p.alpha; break;
            case Coord::nu: v = p.nu; break;
            case Coord::zeta: v = p.zeta[0]; break;
            default: check = false; break;
          }
          if (check && (v < cr.lo || v > cr.hi)) {
            std::ostringstream os;
            os << "test '" << test.label << "': " << coord_name(cr.coord) << "=" << v
               << " outside the training range [" << cr.lo << ", " << cr.hi << "]";
            errs.push_back(os.str());
          }
        }
      }
    }
  }
  return errs;
}

// --- canned reproduction recipes ---------------------------------------------

namespace {

TrainingDomain domain_of(std::initializer_list<CoordRange> coords, int m_points) {
  TrainingDomain d;
  d.coords = coords;
  d.m_points = m_points;
  return d;
}

std::string fmt(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

ExperimentConfig base_config(const std::string& name) {
  ExperimentConfig cfg;
  cfg.name = name;
  cfg.output_dir = "out/" + name;
  return cfg;
}

}  // namespace

ExperimentConfig reproduce_config(const std::string& name) {
  if (name == "fig1") {
    // Deterministic benchmark schedules across (kappa, eta) with a positive
    // urgency penalty.
    ExperimentConfig cfg = base_config(name);
    cfg.model = ModelParams{{0.5}, {1.0}, 1e-3, 1.0, 5e-5, 0.0, 10, 1e5, 0.0};
    EvalBlock eb;
    eb.noise_seed = 303;
    eb.policies = {};
    for (double kappa : {0.4, 0.8})
      for (double eta : {1.0 / 500, 1.0 / 1000, 1.0 / 2500}) {
        TestConfig t;
        t.label = "kappa=" + fmt(kappa) + "_eta=" + fmt(eta);
        t.kappa = kappa;
        t.eta = eta;
        eb.tests.push_back(t);
      }
    cfg.evaluation = eb;
    return cfg;
  }
  if (name == "fig2") {
    // Distribution of the stochastic benchmark trades vs the deterministic
    // schedule, sigma = 2, 1e4 paths.
    ExperimentConfig cfg = base_config(name);
    cfg.model = ModelParams{{0.8}, {1.0}, 1.0 / 500, 1.0, 0.0, 2.0, 10, 1e5, 0.0};
    EvalBlock eb;
    eb.m_paths = 10000;
    eb.noise_seed = 303;
    eb.policies = {};
    TestConfig a;
    a.label = "kappa=0.8_eta=1over500_nu=0";
    a.kappa = 0.8;
    a.eta = 1.0 / 500;
    a.nu = 0.0;
    TestConfig b;
    b.label = "kappa=0.4_eta=1over1000_nu=5e-05";
    b.kappa = 0.4;
    b.eta = 1.0 / 1000;
    b.nu = 5e-5;
    eb.tests = {a, b};
    cfg.evaluation = eb;
    return cfg;
  }
  if (name == "fig6") {
    // Linear-impact 4D solver compared against the (near-optimal) linear
    // feedback on common noise; per-path cost differences feed the histogram.
    ExperimentConfig cfg = base_config(name);
    cfg.model = ModelParams{{0.4}, {1.0}, 1.0 / 1000, 1.0, 5e-5, 1.0, 10, 1e5, 0.0};
    TrainingBlock tb;
    tb.domain = domain_of({{Coord::x, 0.0, 1e5},
                           {Coord::d, 0.0, 100.0},
                           {Coord::kappa, 0.38, 0.82},
                           {Coord::eta, 1.0 / 5000, 1.0 / 900}},
                          4000);
    tb.solver.epochs = 2000;
    tb.solver.design_seed = 101;
    tb.solver.init_seed = 202;
    cfg.training = tb;
    EvalBlock eb;
    eb.m_paths = 10000;
    eb.noise_seed = 303;
    eb.policies = {"lf", "nn"};
    TestConfig t;
    t.label = "kappa=0.4_eta=1over1000";
    eb.tests = {t};
    cfg.evaluation = eb;
    return cfg;
  }
  if (name == "table1" || name == "fig3" || name == "fig4") {
    // 5D solver in (x, d, kappa, eta, alpha), nu = 1e-4, sigma = 1.
    ExperimentConfig cfg = base_config(name);
    cfg.model = ModelParams{{0.4}, {1.0}, 1.0 / 500, 1.0, 1e-4, 1.0, 10, 1e5, 0.0};
    TrainingBlock tb;
    tb.domain = domain_of({{Coord::x, 0.0, 1e5},
                           {Coord::d, 0.0, 140.0},
                           {Coord::kappa, 0.38, 0.82},
                           {Coord::eta, 1.0 / 3300, 1.0 / 450},
                           {Coord::alpha, 0.88, 1.12}},
                          8000);
    tb.solver.epochs = 2500;
    tb.solver.design_seed = 101;
    tb.solver.init_seed = 202;
    cfg.training = tb;
    EvalBlock eb;
    eb.m_paths = 10000;
    eb.noise_seed = 303;
    eb.policies = {"lf", "nn"};
    if (name == "table1") {
      for (double alpha : {0.9, 1.0, 1.1})
        for (double kappa : {0.4, 0.8})
          for (double eta : {1.0 / 3000, 1.0 / 500}) {
            TestConfig t;
            t.label = "alpha=" + fmt(alpha) + "_kappa=" + fmt(kappa) + "_eta=" + fmt(eta);
            t.alpha = alpha;
            t.kappa = kappa;
            t.eta = eta;
            eb.tests.push_back(t);
          }
    } else {
      for (double alpha : {0.9, 1.1})
        for (double kappa : {0.4, 0.8}) {
          TestConfig t;
          t.label = "alpha=" + fmt(alpha) + "_kappa=" + fmt(kappa);
          t.alpha = alpha;
          t.kappa = kappa;
          eb.tests.push_back(t);
        }
    }
    cfg.evaluation = eb;
    return cfg;
  }
  if (name == "table2") {
    // Linear-case accuracy study; the CLI expands the (M, E, dimension) rows.
    ExperimentConfig cfg = base_config(name);
    cfg.model = ModelParams{{0.4}, {1.0}, 1e-4, 1.0, 1e-4, 1.0, 10, 1e5, 0.0};
    TrainingBlock tb;
    tb.domain = domain_of({{Coord::x, 0.0, 1e5},
                           {Coord::d, 0.0, 15.0},
                           {Coord::kappa, 0.38, 0.82},
                           {Coord::eta, 5e-5, 2e-4}},
                          2000);
    tb.solver.epochs = 2000;
    tb.solver.design_seed = 101;
    tb.solver.init_seed = 202;
    cfg.training = tb;
    EvalBlock eb;
    eb.m_paths = 10000;
    eb.noise_seed = 303;
    eb.policies = {"lf", "nn"};
    for (double kappa : {0.4, 0.8}) {
      TestConfig t;
      t.label = "kappa=" + fmt(kappa);
      t.kappa = kappa;
      eb.tests.push_back(t);
    }
    cfg.evaluation = eb;
    return cfg;
  }
  if (name == "table3" || name == "fig5") {
    // Square-root impact, 5D solver in (x, d, kappa, eta, nu), sigma = 0.1.
    ExperimentConfig cfg = base_config(name);
    cfg.model = ModelParams{{0.4}, {1.0}, 1.0 / 200, 0.5, 0.0, 0.1, 10, 1e5, 0.0};
    TrainingBlock tb;
    tb.domain = domain_of({{Coord::x, 0.0, 1e5},
                           {Coord::d, 0.0, 1.0},
                           {Coord::kappa, 0.35, 0.85},
                           {Coord::eta, 1.0 / 1000, 1.0 / 100},
                           {Coord::nu, 0.0, 1e-5}},
                          8000);
    tb.solver.epochs = 1500;
    tb.solver.design_seed = 101;
    tb.solver.init_seed = 202;
    cfg.training = tb;
    EvalBlock eb;
    eb.m_paths = 10000;
    eb.noise_seed = 303;
    eb.policies = {"lf", "nn"};
    for (double nu : {1e-6, 0.0})
      for (double eta : {1.0 / 900, 1.0 / 200}) {
        TestConfig t;
        const double kappa = (nu > 0.0) ? 0.8 : 0.4;
        t.label = "nu=" + fmt(nu) + "_kappa=" + fmt(kappa) + "_eta=" + fmt(eta);
        t.kappa = kappa;
        t.eta = eta;
        t.nu = nu;
        eb.tests.push_back(t);
      }
    cfg.evaluation = eb;
    return cfg;
  }
  if (name == "fig7") {
    // N = 30 rescaling of the fig3 configuration (alpha = 1.1 panel).
    ExperimentConfig cfg = base_config(name);
    ModelParams base{{0.4}, {1.0}, 1.0 / 500, 1.0, 1e-4, 1.0, 10, 1e5, 0.0};
    cfg.model = rescale_params(base, 30);
    TrainingBlock tb;
    // Slow resilience lets the deviation build up over 30 periods.
    tb.domain = domain_of({{Coord::x, 0.0, 1e5},
                           {Coord::d, 0.0, 300.0},
                           {Coord::kappa, 0.38 / 3.0, 0.82 / 3.0},
                           {Coord::eta, 1.0 / 3300, 1.0 / 450},
                           {Coord::alpha, 0.88, 1.12}},
                          2000);
    tb.solver.epochs = 1000;
    tb.solver.design_seed = 101;
    tb.solver.init_seed = 202;
    cfg.training = tb;
    EvalBlock eb;
    eb.m_paths = 10000;
    eb.noise_seed = 303;
    eb.policies = {"lf", "nn"};
    for (double kappa : {0.4 / 3.0, 0.8 / 3.0}) {
      TestConfig t;
      t.label = "alpha=1.1_kappa=" + fmt(kappa);
      t.alpha = 1.1;
      t.kappa = kappa;
      eb.tests.push_back(t);
    }
    cfg.evaluation = eb;
    return cfg;
  }
  if (name == "fig8") {
    // Bi-exponential decay kernel, 4D solver in (x, d1, d2, zeta), alpha = 0.9.
    ExperimentConfig cfg = base_config(name);
    cfg.model = ModelParams{{0.4, 0.8}, {0.5, 0.5}, 1.0 / 500, 0.9, 1e-4, 1.0, 10, 1e5, 0.0};
    TrainingBlock tb;
    tb.domain = domain_of({{Coord::x, 0.0, 1e5},
                           {Coord::d1, 0.0, 120.0},
                           {Coord::d2, 0.0, 120.0},
                           {Coord::zeta, 0.25, 0.75}},
                          4000);
    tb.solver.epochs = 1500;
    tb.solver.design_seed = 101;
    tb.solver.init_seed = 202;
    cfg.training = tb;
    EvalBlock eb;
    eb.m_paths = 10000;
    eb.noise_seed = 303;
    eb.policies = {"lf", "nn"};
    for (double zeta : {0.3, 0.5, 0.7}) {
      const double mix = zeta * 0.4 + (1.0 - zeta) * 0.8;
      for (double lf_kappa : {0.4, mix, 0.8}) {
        TestConfig t;
        t.label = "zeta=" + fmt(zeta) + "_lfkappa=" + fmt(lf_kappa);
        t.zeta = zeta;
        t.lf_kappa = lf_kappa;
        eb.tests.push_back(t);
      }
    }
    cfg.evaluation = eb;
    return cfg;
  }
  throw ValidationError("unknown reproduce target '" + name +
                        "' (expected table1|table2|table3|fig1..fig8)");
}

}  // namespace optexec
