#pragma once

#include <optional>
#include <string>
#include <vector>

#include "optexec/adp.hpp"
#include "optexec/model.hpp"

namespace optexec {

/// One evaluation cell: overrides applied to the model template. `lf_kappa`
/// selects the effective resilience the misspecified linear-feedback
/// comparator assumes (defaults to the resolved kappa).
struct TestConfig {
  std::string label;
  std::optional<double> kappa, eta, alpha, nu, zeta, sigma, d0;
  std::optional<double> lf_kappa;
};

struct TrainingBlock {
  TrainingDomain domain;
  SolverSettings solver;
  int quantizer_knots = 50;
  std::string quantizer_grid_file;  // optional external unit-variance table
};

struct EvalBlock {
  int m_paths = 10000;
  std::uint64_t noise_seed = 0;
  std::string baseline = "lf";
  std::vector<std::string> policies{"lf", "nn"};
  std::vector<TestConfig> tests;
  std::string artifacts_dir;  // where `evaluate` loads trained surrogates from
};

struct ExperimentConfig {
  std::string name;
  ModelParams model;
  std::optional<TrainingBlock> training;
  std::optional<EvalBlock> evaluation;
  std::string output_dir = "out";

  static ExperimentConfig from_json_file(const std::string& path);
  static ExperimentConfig from_json_string(const std::string& text);
  std::string to_json_string() const;

  /// All violated constraints (empty means valid): model parameter bounds,
  /// domain structure, and containment of every test configuration inside the
  /// training domain.
  std::vector<std::string> violations() const;
};

/// Model parameters for one test cell (template plus overrides).
ModelParams resolve_test(const ExperimentConfig& cfg, const TestConfig& test);

/// Effective kappa assumed by the LF comparator for this cell.
double resolve_lf_kappa(const ExperimentConfig& cfg, const TestConfig& test);

/// Canned experiment recipes: table1, table2, table3, fig1..fig8.
/// Throws ValidationError for unknown names.
ExperimentConfig reproduce_config(const std::string& name);

}  // namespace optexec
