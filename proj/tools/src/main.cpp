// Command-line front end: exact closed-form solves, surrogate training,
// Monte-Carlo evaluation, and canned reproductions of the study tables and
// figures. Exit codes: 0 success, 2 config validation failure, 3 numerical
// failure.

#include <CLI11.hpp>

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "optexec/closed_form.hpp"
#include "optexec/config.hpp"
#include "optexec/evaluation.hpp"

namespace fs = std::filesystem;
using namespace optexec;

namespace {

struct GlobalOpts {
  std::string config_path;
  std::string out_override;
  std::optional<std::uint64_t> seed;
  int threads = 0;
};

void apply_overrides(ExperimentConfig& cfg, const GlobalOpts& g) {
  if (!g.out_override.empty()) cfg.output_dir = g.out_override;
  if (g.seed) {
    if (cfg.training) {
      cfg.training->solver.design_seed = *g.seed;
      cfg.training->solver.init_seed = *g.seed + 1;
    }
    if (cfg.evaluation) cfg.evaluation->noise_seed = *g.seed + 2;
  }
  if (cfg.training) cfg.training->solver.n_threads = g.threads;
}

void require_valid(const ExperimentConfig& cfg) {
  const auto errs = cfg.violations();
  if (!errs.empty()) {
    std::cerr << "config validation failed:\n";
    for (const auto& e : errs) std::cerr << "  - " << e << "\n";
    throw ValidationError("invalid configuration (" + std::to_string(errs.size()) +
                          " violation(s))");
  }
}

void echo_config(const ExperimentConfig& cfg) {
  fs::create_directories(cfg.output_dir);
  std::ofstream out(fs::path(cfg.output_dir) / "resolved_config.json");
  out << cfg.to_json_string() << "\n";
}

FILE* open_csv(const fs::path& path) {
  FILE* f = std::fopen(path.string().c_str(), "w");
  if (!f) throw ValidationError("cannot open output file " + path.string());
  return f;
}

std::string artifacts_dir(const ExperimentConfig& cfg) {
  if (cfg.evaluation && !cfg.evaluation->artifacts_dir.empty())
    return cfg.evaluation->artifacts_dir;
  return (fs::path(cfg.output_dir) / "artifacts").string();
}

Quantizer quantizer_from_config(const ExperimentConfig& cfg) {
  const auto& tb = *cfg.training;
  if (!tb.quantizer_grid_file.empty())
    return load_quantizer(tb.quantizer_grid_file, cfg.model.sigma);
  return build_quantizer(cfg.model.sigma, tb.quantizer_knots);
}

SolverArtifacts train_from_config(const ExperimentConfig& cfg) {
  if (!cfg.training) throw ValidationError("this command needs a training block");
  const Quantizer q = quantizer_from_config(cfg);
  const auto t0 = std::chrono::steady_clock::now();
  SolverArtifacts art = backward_solve(cfg.model, cfg.training->domain,
                                       cfg.training->solver, q, [](const std::string& m) {
                                         std::cout << "[train] " << m << "\n" << std::flush;
                                       });
  const double secs =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::cout << "[train] total " << secs << " s\n";

  FILE* f = open_csv(fs::path(cfg.output_dir) / "train_log.csv");
  std::fprintf(f, "pass,step,seconds,value_loss,policy_loss,nonconverged\n");
  for (const auto& d : art.diagnostics)
    std::fprintf(f, "%d,%d,%.10g,%.10g,%.10g,%d\n", d.pass, d.step, d.seconds,
                 d.value_loss, d.policy_loss, d.nonconverged);
  std::fclose(f);
  return art;
}

std::vector<NamedPolicy> build_policies(const ExperimentConfig& cfg, const TestConfig& test,
                                        const ModelParams& world,
                                        const SolverArtifacts* art) {
  const auto& eb = *cfg.evaluation;
  std::vector<std::string> order{eb.baseline};
  for (const auto& name : eb.policies)
    if (name != eb.baseline) order.push_back(name);

  std::vector<NamedPolicy> out;
  for (const auto& name : order) {
    if (name == "lf") {
      ModelParams lf = world;
      lf.kappa = {resolve_lf_kappa(cfg, test)};
      lf.zeta = {1.0};
      lf.alpha = 1.0;
      out.push_back({name, make_lf_policy(backward_coeffs(lf), world)});
    } else if (name == "vwap") {
      out.push_back({name, make_vwap_policy(world)});
    } else if (name == "nn") {
      if (!art) throw ValidationError("nn policy requested but no artifacts available");
      out.push_back({name, make_nn_policy(*art, world)});
    } else {
      throw ValidationError("unknown policy '" + name + "' (expected lf|vwap|nn)");
    }
  }
  return out;
}

std::string sanitize(const std::string& label) {
  std::string s = label;
  for (char& c : s)
    if (c == '/' || c == ' ' || c == ',') c = '_';
  return s;
}

// --- subcommand bodies --------------------------------------------------------

int run_exact(ExperimentConfig cfg) {
  require_valid(cfg);
  echo_config(cfg);
  std::vector<TestConfig> tests;
  if (cfg.evaluation && !cfg.evaluation->tests.empty()) tests = cfg.evaluation->tests;
  else tests.push_back(TestConfig{});

  FILE* sched = open_csv(fs::path(cfg.output_dir) / "schedules.csv");
  std::fprintf(sched, "label,kappa,eta,nu,d0,step,trade\n");
  FILE* coef = open_csv(fs::path(cfg.output_dir) / "coeffs.csv");
  std::fprintf(coef, "label,n,a,b,c,e,delta\n");

  for (const auto& test : tests) {
    ModelParams p = resolve_test(cfg, test);
    p.sigma = 0.0;  // deterministic schedules
    p.validate();
    const CoeffTable ct = backward_coeffs(p);
    const DeterministicSolution sol = deterministic_solution(p);
    const std::string label = test.label.empty() ? "base" : test.label;
    for (int n = 1; n <= p.n_steps; ++n)
      std::fprintf(coef, "%s,%d,%.10g,%.10g,%.10g,%.10g,%.10g\n", label.c_str(), n,
                   ct.a_at(n), ct.b_at(n), ct.c_at(n), ct.e_at(n), ct.delta_at(n));
    for (int n = 1; n <= p.n_steps; ++n)
      std::fprintf(sched, "%s,%.10g,%.10g,%.10g,%.10g,%d,%.10g\n", label.c_str(),
                   p.kappa[0], p.eta, p.nu, p.d0, n, sol.u[n - 1]);
    std::cout << "[exact] " << label << ": u1 = " << sol.u[0] << ", cost = " << sol.cost
              << "\n";
  }
  std::fclose(sched);
  std::fclose(coef);
  return 0;
}

int run_train(ExperimentConfig cfg) {
  require_valid(cfg);
  if (!cfg.training) throw ValidationError("train: config has no training block");
  echo_config(cfg);
  SolverArtifacts art = train_from_config(cfg);
  const std::string dir = (fs::path(cfg.output_dir) / "artifacts").string();
  art.save(dir);
  std::cout << "[train] artifacts saved to " << dir << "\n";
  return 0;
}

// Shared by `evaluate` (artifacts from disk) and `compare` (artifacts optional,
// trained in process when a training block is present and nn is requested).
int run_evaluation_cmd(ExperimentConfig cfg, bool from_disk, int threads) {
  require_valid(cfg);
  if (!cfg.evaluation) throw ValidationError("evaluate: config has no evaluation block");
  if (cfg.evaluation->policies.empty())
    throw ValidationError("evaluate: the policy list is empty");
  echo_config(cfg);

  bool wants_nn = false;
  for (const auto& p : cfg.evaluation->policies) wants_nn |= (p == "nn");

  std::optional<SolverArtifacts> art;
  if (wants_nn) {
    if (from_disk) {
      art = SolverArtifacts::load(artifacts_dir(cfg));
    } else {
      art = train_from_config(cfg);
      art->save((fs::path(cfg.output_dir) / "artifacts").string());
    }
  }

  FILE* summary = open_csv(fs::path(cfg.output_dir) / "summary.csv");
  std::fprintf(summary, "label,policy,mean_cost,se,rel_diff_pct_vs_baseline\n");
  for (const auto& test : cfg.evaluation->tests) {
    const ModelParams world = resolve_test(cfg, test);
    world.validate();
    const auto policies = build_policies(cfg, test, world, art ? &*art : nullptr);
    EvalReport report = compare_policies(world, policies, cfg.evaluation->m_paths,
                                         cfg.evaluation->noise_seed, threads);
    const std::string label = sanitize(test.label.empty() ? "base" : test.label);
    write_comparison_csv((fs::path(cfg.output_dir) / ("comparison_" + label + ".csv")).string(),
                         report);
    write_path_costs_csv((fs::path(cfg.output_dir) / ("path_costs_" + label + ".csv")).string(),
                         report);
    for (const auto& pe : report.policies) {
      std::fprintf(summary, "%s,%s,%.10g,%.10g,%.10g\n", label.c_str(), pe.name.c_str(),
                   pe.mean_cost, pe.se_cost, pe.rel_diff_pct_vs_baseline);
      std::cout << "[evaluate] " << label << " " << pe.name << ": mean cost "
                << pe.mean_cost << " (" << pe.rel_diff_pct_vs_baseline
                << "% vs " << report.baseline << ")\n";
    }
  }
  std::fclose(summary);
  return 0;
}

int run_profiles(const ExperimentConfig& cfg, const SolverArtifacts* art, int threads) {
  for (const auto& test : cfg.evaluation->tests) {
    const ModelParams world = resolve_test(cfg, test);
    const auto policies = build_policies(cfg, test, world, art);
    const std::string label = sanitize(test.label.empty() ? "base" : test.label);
    for (const auto& np : policies) {
      ProfileReport prof = strategy_profile(world, np.policy, cfg.evaluation->m_paths,
                                            cfg.evaluation->noise_seed, threads);
      write_profile_csv(
          (fs::path(cfg.output_dir) / ("profile_" + np.name + "_" + label + ".csv")).string(),
          prof);
    }
  }
  return 0;
}

int run_reproduce(const std::string& name, const GlobalOpts& g) {
  ExperimentConfig cfg = reproduce_config(name);
  apply_overrides(cfg, g);

  if (name == "fig1") return run_exact(cfg);

  if (name == "fig2") {
    // Boxplot data: stochastic benchmark trade distribution vs the
    // deterministic schedule.
    require_valid(cfg);
    echo_config(cfg);
    for (const auto& test : cfg.evaluation->tests) {
      ModelParams world = resolve_test(cfg, test);
      const CoeffTable ct = backward_coeffs(world);
      ProfileReport prof = unconstrained_profile(ct, world, cfg.evaluation->m_paths,
                                                 cfg.evaluation->noise_seed, g.threads);
      const std::string label = sanitize(test.label);
      write_profile_csv((fs::path(cfg.output_dir) / ("profile_benchmark_" + label + ".csv"))
                            .string(),
                        prof);
      ModelParams det = world;
      det.sigma = 0.0;
      const DeterministicSolution sol = deterministic_solution(det);
      FILE* f = open_csv(fs::path(cfg.output_dir) / ("deterministic_" + label + ".csv"));
      std::fprintf(f, "step,trade\n");
      for (int n = 1; n <= det.n_steps; ++n)
        std::fprintf(f, "%d,%.10g\n", n, sol.u[n - 1]);
      std::fclose(f);
    }
    return 0;
  }

  if (name == "fig4") {
    require_valid(cfg);
    echo_config(cfg);
    SolverArtifacts art = train_from_config(cfg);
    art.save((fs::path(cfg.output_dir) / "artifacts").string());
    ModelParams eval = cfg.model;
    eval.alpha = 1.1;
    std::vector<double> kappas, etas;
    for (int i = 0; i < 9; ++i) kappas.push_back(0.4 + 0.05 * i);
    for (int i = 0; i < 9; ++i)
      etas.push_back(1.0 / 3000 + i * (1.0 / 500 - 1.0 / 3000) / 8.0);
    SurfaceReport surf = sensitivity_surface(art, eval, 3, 6e4, 20.0, kappas, etas);
    write_surface_csv((fs::path(cfg.output_dir) / "surface.csv").string(), surf);
    return 0;
  }

  if (name == "fig3" || name == "fig5") {
    require_valid(cfg);
    echo_config(cfg);
    SolverArtifacts art = train_from_config(cfg);
    art.save((fs::path(cfg.output_dir) / "artifacts").string());
    return run_profiles(cfg, &art, g.threads);
  }

  if (name == "fig6") {
    require_valid(cfg);
    echo_config(cfg);
    SolverArtifacts art = train_from_config(cfg);
    art.save((fs::path(cfg.output_dir) / "artifacts").string());
    const int rc = run_evaluation_cmd(cfg, true, g.threads);
    // One sample path, both strategies, for the pathwise comparison panel.
    const ModelParams world = resolve_test(cfg, cfg.evaluation->tests.front());
    NoisePath noise(1, world.n_steps, world.sigma, cfg.evaluation->noise_seed);
    const auto policies = build_policies(cfg, cfg.evaluation->tests.front(), world, &art);
    FILE* f = open_csv(fs::path(cfg.output_dir) / "sample_path_trades.csv");
    std::fprintf(f, "step");
    std::vector<SimResult> sims;
    for (const auto& np : policies) {
      std::fprintf(f, ",%s", np.name.c_str());
      sims.push_back(simulate_path(world, np.policy, noise.row(0)));
    }
    std::fprintf(f, "\n");
    for (int n = 0; n < world.n_steps; ++n) {
      std::fprintf(f, "%d", n + 1);
      for (const auto& s : sims) std::fprintf(f, ",%.10g", s.trades[n]);
      std::fprintf(f, "\n");
    }
    std::fclose(f);
    return rc;
  }

  if (name == "table2") {
    // The (M, E, dimension) accuracy/runtime sweep. 2D rows need one solver
    // per tested kappa because kappa leaves the input space.
    require_valid(cfg);
    echo_config(cfg);
    struct Row {
      const char* tag;
      int dims;  // 4, 3, or 2 leading coordinates of (x,d,kappa,eta)
      int m;
      int epochs;
    };
    const Row rows[] = {{"4D_M1000_E1000", 4, 1000, 1000}, {"4D_M2000_E1000", 4, 2000, 1000},
                        {"4D_M2000_E2000", 4, 2000, 2000}, {"4D_M4000_E2000", 4, 4000, 2000},
                        {"4D_M8000_E3000", 4, 8000, 3000}, {"3D_M2000_E2000", 3, 2000, 2000},
                        {"2D_M2000_E2000", 2, 2000, 2000}};
    FILE* f = open_csv(fs::path(cfg.output_dir) / "table2.csv");
    std::fprintf(f, "row,kappa,rel_diff_pct_nn_vs_lf,minutes\n");
    for (const Row& row : rows) {
      // dims >= 3 keeps kappa in the input space: one solver serves every
      // kappa test. The 2D row bakes kappa into the template, one solver each.
      std::vector<std::vector<TestConfig>> groups;
      if (row.dims >= 3) {
        groups.push_back(cfg.evaluation->tests);
      } else {
        for (const auto& test : cfg.evaluation->tests) groups.push_back({test});
      }
      for (const auto& group : groups) {
        ExperimentConfig run = cfg;
        run.training->domain.coords.resize(row.dims);
        run.training->domain.m_points = row.m;
        run.training->solver.epochs = row.epochs;
        run.output_dir = (fs::path(cfg.output_dir) / row.tag).string();
        if (row.dims < 3) run.model.kappa = resolve_test(cfg, group.front()).kappa;
        run.evaluation->tests = group;
        require_valid(run);
        const auto t0 = std::chrono::steady_clock::now();
        SolverArtifacts art = train_from_config(run);
        const double train_mins =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() /
            60.0;
        for (const auto& test : group) {
          const ModelParams world = resolve_test(cfg, test);
          const auto policies = build_policies(run, test, world, &art);
          EvalReport rep = compare_policies(world, policies, run.evaluation->m_paths,
                                            run.evaluation->noise_seed, g.threads);
          std::fprintf(f, "%s,%.10g,%.10g,%.10g\n", row.tag, world.kappa[0],
                       rep.policies[1].rel_diff_pct_vs_baseline, train_mins);
          std::fflush(f);
          std::cout << "[table2] " << row.tag << " kappa=" << world.kappa[0] << ": "
                    << rep.policies[1].rel_diff_pct_vs_baseline << "% (train " << train_mins
                    << " min)\n";
        }
      }
    }
    std::fclose(f);
    return 0;
  }

  // table1, table3, fig7, fig8: train once, then the full comparison grid.
  return run_evaluation_cmd(cfg, false, g.threads);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parametric optimal trade execution: closed-form benchmarks and "
               "neural-network dynamic-programming solvers"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOpts g;
  app.add_option("--config", g.config_path, "Experiment configuration (JSON)");
  app.add_option("--out", g.out_override, "Output directory override");
  app.add_option("--seed", g.seed, "Override design/init/noise seeds");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware)");

  auto* exact = app.add_subcommand("exact", "Closed-form coefficient tables and schedules");
  auto* train = app.add_subcommand("train", "Train the value/policy surrogates");
  auto* evaluate =
      app.add_subcommand("evaluate", "Evaluate policies from serialized artifacts");
  auto* compare =
      app.add_subcommand("compare", "Train if needed and compare the named policies");
  auto* reproduce = app.add_subcommand("reproduce", "Run a canned experiment recipe");
  std::string repro_name;
  reproduce->add_option("target", repro_name, "table1|table2|table3|fig1..fig8")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    auto load = [&]() {
      if (g.config_path.empty())
        throw ValidationError("this command needs --config <path>");
      ExperimentConfig cfg = ExperimentConfig::from_json_file(g.config_path);
      apply_overrides(cfg, g);
      return cfg;
    };
    if (exact->parsed()) return run_exact(load());
    if (train->parsed()) return run_train(load());
    if (evaluate->parsed()) return run_evaluation_cmd(load(), true, g.threads);
    if (compare->parsed()) return run_evaluation_cmd(load(), false, g.threads);
    if (reproduce->parsed()) return run_reproduce(repro_name, g);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
