#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scaffopt/material.hpp"

namespace scaffopt {

// One phase's material, given either as (E, nu) or as (mu, lambda);
// specifying both parameterizations is an error.
struct MaterialSpec {
  std::optional<double> young;
  std::optional<double> poisson;
  std::optional<double> mu;
  std::optional<double> lambda;

  IsotropicMaterial resolve(const std::string& key) const;
};

struct SweepSpec {
  std::string key;             // "eta", "p" or "phase0.E"
  std::vector<double> values;
};

struct ExperimentConfig {
  int dimension = 3;
  std::vector<int> schedule = {17, 33, 65};
  std::vector<std::string> loads;
  double beta = -0.25;
  double eta = 2.0;
  double delta = 1e-4;
  double p = 2.0;
  double q_max = 8.0;
  std::uint64_t seed = 1;
  std::string output_dir = "out";
  int tile = 3;
  std::optional<double> isosurface_level;
  std::string interpolation = "linear";
  MaterialSpec phase0;
  MaterialSpec phase1;
  // solver
  double cg_tol = 1e-8;
  int cg_max_iter_factor = 10;
  // optimizer
  int max_iterations = 500;
  double grad_tol = 1e-4;
  double armijo_c = 1e-4;
  double step_shrink = 0.5;
  double box = 1.25;
  int max_backtracks = 60;
  std::optional<SweepSpec> sweep;

  void validate() const;  // throws with the offending key named
};

std::vector<std::string> preset_names();
ExperimentConfig preset_config(const std::string& name);

// Parses the TOML-subset config. A "preset" key selects the baseline that the
// remaining keys override; unknown keys are rejected.
ExperimentConfig parse_config_text(const std::string& text);
ExperimentConfig parse_config_file(const std::string& path);

std::string serialize_config(const ExperimentConfig& cfg);
std::uint64_t config_hash(const ExperimentConfig& cfg);

// Expands a sweep config into (label, config) pairs with the swept key
// applied and output directories separated; a config without a sweep expands
// to itself with an empty label.
std::vector<std::pair<std::string, ExperimentConfig>> expand_sweep(const ExperimentConfig& cfg);

}  // namespace scaffopt
