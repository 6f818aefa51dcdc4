#pragma once

#include <array>
#include <iosfwd>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "scaffopt/config.hpp"

namespace scaffopt {

struct LevelSummary {
  int nodes = 0;
  double eps = 0.0;
  int accepted_iterations = 0;
  double initial_total = std::numeric_limits<double>::quiet_NaN();
  double final_total = std::numeric_limits<double>::quiet_NaN();
  double carried_total = std::numeric_limits<double>::quiet_NaN();
  double initial_total_prev_eps = std::numeric_limits<double>::quiet_NaN();
  std::string stop_reason;
  double wall_seconds = 0.0;
};

struct TableRow {
  int phase = 0;
  std::string load;
  std::string component;
  double value = 0.0;   // normalized, beta^{-2} C* A : A
  double volume = 0.0;  // volume fraction of the row's phase
};

struct OptimizeReport {
  std::vector<LevelSummary> levels;
  int final_nodes = 0;
  std::vector<double> final_field;
  double final_total = std::numeric_limits<double>::quiet_NaN();
  std::vector<TableRow> table;
  std::array<double, 2> volumes{};
  std::vector<std::string> files;
};

struct EvaluateReport {
  int nodes = 0;
  std::vector<TableRow> table;
  std::array<double, 2> volumes{};
  std::vector<std::string> files;
};

struct ExportOptions {
  int tile = 1;
  bool von_mises = false;
  std::optional<ExperimentConfig> config;  // required for von Mises
  std::string output_dir;                  // defaults to the field file's directory
};

struct GradCheckEntry {
  int dimension = 0;
  double p = 0.0;
  double eta = 0.0;
  double max_rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_rel_error = 0.0;
};

// Full continuation run for one (non-sweep) config, with checkpoints,
// iteration log, field and table exports written into cfg.output_dir.
OptimizeReport run_optimize(const ExperimentConfig& cfg, std::ostream* log = nullptr);

// Expands a sweep (if any) and optimizes every entry.
std::vector<std::pair<std::string, OptimizeReport>> run_optimize_all(
    const ExperimentConfig& cfg, std::ostream* log = nullptr);

// Effective table of a stored field under the config's materials.
EvaluateReport run_evaluate(const ExperimentConfig& cfg, const std::string& field_path,
                            std::ostream* log = nullptr);
EvaluateReport evaluate_field(const ExperimentConfig& cfg, int nodes,
                              const std::vector<double>& values);

std::vector<std::string> run_export(const std::string& field_path, const ExportOptions& options,
                                    std::ostream* log = nullptr);

// Central finite-difference check of the analytic objective gradient on the
// fixed verification grid: d in {2,3}, N=5, two loads, p in {2,8},
// eta in {0,2}, inner CG tolerance 1e-11, FD step 1e-5.
GradCheckReport run_gradcheck(const ExperimentConfig& cfg, std::ostream* log = nullptr);

// Reads a stored unit-cell field file: returns (N, canonical nodal values).
std::pair<int, std::vector<double>> load_field_file(const std::string& path,
                                                    int expected_dim = 0);

}  // namespace scaffopt
