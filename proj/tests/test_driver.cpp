#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "oracles.hpp"
#include "scaffopt/driver.hpp"
#include "scaffopt/vtk.hpp"

using namespace scaffopt;

namespace {

namespace fs = std::filesystem;

ExperimentConfig tiny_config(const std::string& out_name) {
  auto cfg = preset_config("2d-2compr");
  cfg.schedule = {5};
  cfg.max_iterations = 8;
  cfg.tile = 3;
  cfg.seed = 3;
  cfg.output_dir = (fs::temp_directory_path() / out_name).string();
  return cfg;
}

// minimal independent CSV reader for the round-trip check
std::vector<std::vector<std::string>> read_csv(const std::string& path) {
  std::ifstream in(path);
  REQUIRE(in.good());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream s(line);
    std::string cell;
    while (std::getline(s, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("optimize writes fields, tables, logs and checkpoints") {
  auto cfg = tiny_config("scaffopt_drv_a");
  fs::remove_all(cfg.output_dir);
  const OptimizeReport report = run_optimize(cfg);

  CHECK(report.final_nodes == 5);
  CHECK(report.levels.size() == 1);
  CHECK(report.levels[0].final_total <= report.levels[0].initial_total);
  CHECK(fs::exists(cfg.output_dir + "/field.vtk"));
  CHECK(fs::exists(cfg.output_dir + "/field_tiled.vtk"));
  CHECK(fs::exists(cfg.output_dir + "/table.csv"));
  CHECK(fs::exists(cfg.output_dir + "/log.csv"));
  CHECK(fs::exists(cfg.output_dir + "/checkpoint_N5.vtk"));
  CHECK(fs::exists(cfg.output_dir + "/checkpoint_N5.json"));

  // 2D canonical table: one row per load and phase
  CHECK(report.table.size() == 6);
  CHECK(report.volumes[0] + report.volumes[1] == doctest::Approx(1.0).epsilon(1e-12));

  // the tiled grid is (tile * cells)^2 points
  const StructuredGrid tiled = read_structured_points(cfg.output_dir + "/field_tiled.vtk");
  CHECK(tiled.dims[0] == 12);
  CHECK(tiled.dims[1] == 12);
  CHECK(tiled.dims[2] == 1);

  // stored field round-trips bitwise through the VTK layer
  auto [nodes, values] = load_field_file(cfg.output_dir + "/field.vtk", 2);
  CHECK(nodes == 5);
  CHECK(oracles::max_abs_diff(values, report.final_field) == 0.0);

  // CSV round-trip: the written table matches the reported values exactly
  const auto rows = read_csv(cfg.output_dir + "/table.csv");
  REQUIRE(rows.size() == report.table.size() + 1);
  CHECK(rows[0] == std::vector<std::string>{"phase", "load", "component", "value", "volume"});
  for (std::size_t i = 0; i < report.table.size(); ++i) {
    CHECK(std::stoi(rows[i + 1][0]) == report.table[i].phase);
    CHECK(rows[i + 1][1] == report.table[i].load);
    CHECK(rows[i + 1][2] == report.table[i].component);
    CHECK(std::stod(rows[i + 1][3]) == report.table[i].value);  // 17 digits, bitwise
    CHECK(std::stod(rows[i + 1][4]) == report.table[i].volume);
  }
  fs::remove_all(cfg.output_dir);
}

TEST_CASE("a second optimize run resumes from the checkpoint") {
  auto cfg = tiny_config("scaffopt_drv_b");
  fs::remove_all(cfg.output_dir);
  const OptimizeReport first = run_optimize(cfg);
  const OptimizeReport second = run_optimize(cfg);
  CHECK(second.levels[0].stop_reason == "resumed from checkpoint");
  CHECK(oracles::max_abs_diff(second.final_field, first.final_field) == 0.0);

  // a changed config invalidates the checkpoint
  auto changed = cfg;
  changed.eta = 3.0;
  const OptimizeReport third = run_optimize(changed);
  CHECK(third.levels[0].stop_reason != "resumed from checkpoint");
  fs::remove_all(cfg.output_dir);
}

TEST_CASE("evaluate matches the table produced by optimize") {
  auto cfg = tiny_config("scaffopt_drv_c");
  fs::remove_all(cfg.output_dir);
  const OptimizeReport report = run_optimize(cfg);
  const EvaluateReport eval = run_evaluate(cfg, cfg.output_dir + "/field.vtk");
  REQUIRE(eval.table.size() == report.table.size());
  for (std::size_t i = 0; i < eval.table.size(); ++i) {
    CHECK(eval.table[i].value ==
          doctest::Approx(report.table[i].value).epsilon(1e-9));
  }
  CHECK(eval.volumes[0] == doctest::Approx(report.volumes[0]).epsilon(1e-12));
  fs::remove_all(cfg.output_dir);
}

TEST_CASE("export tiles fields and emits von Mises companions") {
  auto cfg = tiny_config("scaffopt_drv_d");
  fs::remove_all(cfg.output_dir);
  run_optimize(cfg);

  ExportOptions options;
  options.tile = 2;
  options.von_mises = true;
  options.config = cfg;
  const auto files = run_export(cfg.output_dir + "/field.vtk", options);
  // tiled field plus one von Mises file per (phase, load)
  CHECK(files.size() == 1 + 2 * cfg.loads.size());
  for (const auto& f : files) CHECK(fs::exists(f));

  const StructuredGrid vm = read_structured_points(files[1]);
  CHECK(vm.dims[0] == 8);  // cells * tile
  CHECK(vm.origin[0] == doctest::Approx(0.5 * vm.spacing[0]));
  REQUIRE(vm.fields.size() == 2);
  CHECK(vm.fields[0].first == "von_mises");
  CHECK(vm.fields[1].first == "log10_von_mises");
  for (double value : vm.fields[0].second) CHECK(value >= 0.0);

  CHECK_THROWS_AS(run_export(cfg.output_dir + "/field.vtk",
                             ExportOptions{1, true, std::nullopt, ""}),
                  std::invalid_argument);
  // tiled exports do not span the unit cell and are rejected as inputs
  CHECK_THROWS(run_export(files[0], ExportOptions{}));
  fs::remove_all(cfg.output_dir);
}

TEST_CASE("optimize rejects sweep configs and run_optimize_all expands them") {
  auto cfg = preset_config("eta-sweep");
  cfg.schedule = {5};
  cfg.dimension = 2;
  cfg.loads = {"A11", "A12"};
  cfg.max_iterations = 2;
  cfg.sweep->values = {2.0, 4.0};
  cfg.output_dir = (fs::temp_directory_path() / "scaffopt_drv_e").string();
  fs::remove_all(cfg.output_dir);
  CHECK_THROWS_AS(run_optimize(cfg), std::invalid_argument);
  const auto runs = run_optimize_all(cfg);
  CHECK(runs.size() == 2);
  CHECK(runs[0].first == "eta=2");
  CHECK(fs::exists(cfg.output_dir + "/eta=2/field.vtk"));
  CHECK(fs::exists(cfg.output_dir + "/eta=4/field.vtk"));
  fs::remove_all(cfg.output_dir);
}
