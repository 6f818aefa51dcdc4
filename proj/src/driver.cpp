#include "scaffopt/driver.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>

#include <json.hpp>

#include "scaffopt/homogenize.hpp"
#include "scaffopt/optimizer.hpp"
#include "scaffopt/vtk.hpp"

namespace scaffopt {

namespace {

namespace fs = std::filesystem;

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

template <int D>
StructuredGrid make_point_grid(int nodes, const std::vector<double>& values, int tile,
                               const std::string& name) {
  const int cells = nodes - 1;
  const double h = 1.0 / cells;
  StructuredGrid grid;
  grid.dim = D;
  for (int ax = 0; ax < 3; ++ax) {
    grid.dims[ax] = ax < D ? cells * tile : 1;
    grid.spacing[ax] = ax < D ? h : 1.0;
    grid.origin[ax] = 0.0;
  }
  grid.fields.emplace_back(name, tile_periodic(values, D, cells, tile));
  return grid;
}

// cell data is exported on the cell-center grid (origin shifted by h/2)
template <int D>
StructuredGrid make_cell_grid(int nodes, const std::vector<double>& values, int tile,
                              const std::string& name) {
  StructuredGrid grid = make_point_grid<D>(nodes, values, tile, name);
  for (int ax = 0; ax < D; ++ax) grid.origin[ax] = 0.5 * grid.spacing[ax];
  return grid;
}

void write_table_csv(const std::string& path, const std::vector<TableRow>& rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "phase,load,component,value,volume\n";
  for (const auto& row : rows) {
    out << row.phase << "," << row.load << "," << row.component << "," << fmt(row.value)
        << "," << fmt(row.volume) << "\n";
  }
}

void write_log_csv(const std::string& path, const std::vector<RunRecord>& levels) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "level,iter,J,M,J0,J1,Leps,max_com,cg_iterations,step,grad_norm\n";
  for (const auto& record : levels) {
    for (const auto& it : record.iterations) {
      out << record.level_nodes << "," << it.iter << "," << fmt(it.total) << ","
          << fmt(it.smooth_max_value) << "," << fmt(it.phase_cost0) << ","
          << fmt(it.phase_cost1) << "," << fmt(it.perimeter) << "," << fmt(it.max_com) << ","
          << it.cg_iterations << "," << fmt(it.step) << "," << fmt(it.grad_norm) << "\n";
    }
  }
}

std::vector<TableRow> table_rows(const EffectiveTensor& table) {
  std::vector<TableRow> rows;
  for (int phase = 0; phase < 2; ++phase) {
    for (const auto& entry : table.rows[phase]) {
      rows.push_back({phase, entry.load, entry.component, entry.normalized,
                      table.volume[phase]});
    }
  }
  return rows;
}

template <int D>
ContinuationProblem<D> make_problem(const ExperimentConfig& cfg) {
  ContinuationProblem<D> problem{
      {cfg.phase0.resolve("phase0"), cfg.phase1.resolve("phase1")},
      {},
      CostParams{cfg.p, cfg.q_max, cfg.eta},
      InterpolationParams{cfg.delta, cfg.interpolation == "quadratic"
                                         ? Interpolation::kQuadratic
                                         : Interpolation::kLinear},
      SolveOptions{cfg.cg_tol, -1, cfg.cg_max_iter_factor}};
  std::vector<LoadCase<D>> loads;
  for (const auto& label : cfg.loads) loads.push_back(make_load<D>(label, cfg.beta));
  problem.loads = {loads, loads};
  return problem;
}

OptimizerConfig make_optimizer_config(const ExperimentConfig& cfg) {
  OptimizerConfig opt;
  opt.max_iterations = cfg.max_iterations;
  opt.grad_tol = cfg.grad_tol;
  opt.armijo_c = cfg.armijo_c;
  opt.step_shrink = cfg.step_shrink;
  opt.box_bound = cfg.box;
  opt.max_backtracks = cfg.max_backtracks;
  return opt;
}

std::string checkpoint_base(const ExperimentConfig& cfg, int nodes) {
  return cfg.output_dir + "/checkpoint_N" + std::to_string(nodes);
}

template <int D>
OptimizeReport run_optimize_impl(const ExperimentConfig& cfg, std::ostream* log) {
  fs::create_directories(cfg.output_dir);
  const auto problem = make_problem<D>(cfg);
  const auto opt = make_optimizer_config(cfg);
  const std::uint64_t hash = config_hash(cfg);

  ContinuationHooks hooks;
  hooks.try_resume = [&](int nodes, std::vector<double>& field) {
    const std::string base = checkpoint_base(cfg, nodes);
    if (!fs::exists(base + ".json") || !fs::exists(base + ".vtk")) return false;
    try {
      nlohmann::json meta;
      std::ifstream(base + ".json") >> meta;
      if (meta.value("config_hash", std::string()) != std::to_string(hash)) return false;
      if (meta.value("status", std::string()) != "done") return false;
      auto [n, values] = load_field_file(base + ".vtk", D);
      if (n != nodes) return false;
      field = std::move(values);
      if (log) *log << "[resume] level N=" << nodes << " loaded from checkpoint\n";
      return true;
    } catch (const std::exception&) {
      return false;
    }
  };
  hooks.on_level_complete = [&](int nodes, const RunRecord& record) {
    const std::string base = checkpoint_base(cfg, nodes);
    write_structured_points(base + ".vtk",
                            make_point_grid<D>(nodes, record.final_field, 1, "phase"));
    nlohmann::json meta;
    meta["config_hash"] = std::to_string(hash);
    meta["nodes"] = nodes;
    meta["status"] = "done";
    meta["final_total"] = record.final_total;
    meta["stop_reason"] = record.stop_reason;
    std::ofstream(base + ".json") << meta.dump(2) << "\n";
  };
  if (log) {
    hooks.on_iteration = [log](int nodes, const IterationLog& it) {
      *log << "N=" << nodes << " iter=" << it.iter << " J=" << it.total
           << " M=" << it.smooth_max_value << " J0=" << it.phase_cost0
           << " J1=" << it.phase_cost1 << " Leps=" << it.perimeter
           << " max_com=" << it.max_com << " cg=" << it.cg_iterations
           << " step=" << it.step << " gnorm=" << it.grad_norm << "\n";
    };
  }

  ContinuationResult<D> result =
      continuation_run<D>(problem, cfg.schedule, opt, cfg.seed, hooks);

  OptimizeReport report;
  for (const auto& record : result.levels) {
    LevelSummary level;
    level.nodes = record.level_nodes;
    level.eps = record.eps;
    level.accepted_iterations =
        record.iterations.empty() ? 0 : static_cast<int>(record.iterations.size()) - 1;
    level.initial_total =
        record.iterations.empty() ? record.final_total : record.iterations.front().total;
    level.final_total = record.final_total;
    level.carried_total = record.carried_total;
    level.initial_total_prev_eps = record.initial_total_prev_eps;
    level.stop_reason = record.stop_reason;
    level.wall_seconds = record.wall_seconds;
    report.levels.push_back(level);
  }
  report.final_nodes = cfg.schedule.back();
  report.final_field = result.field.values;
  report.final_total = result.levels.back().final_total;

  const EffectiveTensor table = effective_table<D>(
      result.field, problem.materials, problem.interpolation, cfg.beta, problem.solve);
  report.table = table_rows(table);
  report.volumes = table.volume;

  const std::string field_path = cfg.output_dir + "/field.vtk";
  write_structured_points(
      field_path, make_point_grid<D>(report.final_nodes, report.final_field, 1, "phase"));
  report.files.push_back(field_path);
  if (cfg.tile > 1) {
    const std::string tiled = cfg.output_dir + "/field_tiled.vtk";
    write_structured_points(
        tiled, make_point_grid<D>(report.final_nodes, report.final_field, cfg.tile, "phase"));
    report.files.push_back(tiled);
  }
  const std::string table_path = cfg.output_dir + "/table.csv";
  write_table_csv(table_path, report.table);
  report.files.push_back(table_path);
  const std::string log_path = cfg.output_dir + "/log.csv";
  write_log_csv(log_path, result.levels);
  report.files.push_back(log_path);

  if (log) {
    *log << "final J=" << report.final_total << " volumes=" << report.volumes[0] << "/"
         << report.volumes[1] << "\n";
    for (const auto& row : report.table) {
      *log << "phase " << row.phase << " " << row.component << " = " << row.value << "\n";
    }
  }
  return report;
}

template <int D>
EvaluateReport evaluate_field_impl(const ExperimentConfig& cfg, int nodes,
                                   const std::vector<double>& values) {
  auto mesh = build_mesh<D>(nodes);
  PhaseField<D> field(mesh, values);
  const std::array<IsotropicMaterial, 2> materials = {cfg.phase0.resolve("phase0"),
                                                      cfg.phase1.resolve("phase1")};
  const InterpolationParams ip{cfg.delta, cfg.interpolation == "quadratic"
                                              ? Interpolation::kQuadratic
                                              : Interpolation::kLinear};
  const SolveOptions solve{cfg.cg_tol, -1, cfg.cg_max_iter_factor};
  const EffectiveTensor table = effective_table<D>(field, materials, ip, cfg.beta, solve);
  EvaluateReport report;
  report.nodes = nodes;
  report.table = table_rows(table);
  report.volumes = table.volume;
  return report;
}

template <int D>
double gradcheck_case(const ExperimentConfig& cfg, double p, double eta) {
  const int nodes = 5;
  auto mesh = build_mesh<D>(nodes);
  const std::array<IsotropicMaterial, 2> materials = {cfg.phase0.resolve("phase0"),
                                                      cfg.phase1.resolve("phase1")};
  const InterpolationParams ip{cfg.delta, cfg.interpolation == "quadratic"
                                              ? Interpolation::kQuadratic
                                              : Interpolation::kLinear};
  std::vector<LoadCase<D>> loads = {make_load<D>(canonical_load_labels(D)[0], cfg.beta),
                                    make_load<D>(canonical_load_labels(D)[1], cfg.beta)};
  ObjectiveSettings settings{CostParams{p, cfg.q_max, eta}, ip, 2.0 * mesh->spacing(),
                             SolveOptions{1e-11, -1, 50}};
  ObjectiveEvaluator<D> evaluator(mesh, materials, {loads, loads}, settings);

  // keep |v| < 1 at the quadrature points so the factor stays differentiable
  std::mt19937_64 rng(cfg.seed + D);
  PhaseField<D> v(mesh);
  for (double& x : v.values) x = 0.9 * uniform_symmetric(rng);

  const std::vector<double> grad = evaluator.evaluate(v, true).gradient;
  double grad_inf = 0.0;
  for (double g : grad) grad_inf = std::max(grad_inf, std::abs(g));

  const double step = 1e-5;
  double worst = 0.0;
  for (std::size_t j = 0; j < v.values.size(); ++j) {
    PhaseField<D> probe = v;
    probe.values[j] = v.values[j] + step;
    const double plus = evaluator.evaluate(probe, false).total;
    probe.values[j] = v.values[j] - step;
    const double minus = evaluator.evaluate(probe, false).total;
    const double fd = (plus - minus) / (2.0 * step);
    worst = std::max(worst, std::abs(fd - grad[j]) / grad_inf);
  }
  return worst;
}

}  // namespace

std::pair<int, std::vector<double>> load_field_file(const std::string& path, int expected_dim) {
  StructuredGrid grid = read_structured_points(path);
  if (expected_dim != 0 && grid.dim != expected_dim) {
    throw std::runtime_error(path + ": field is " + std::to_string(grid.dim) +
                             "D, expected " + std::to_string(expected_dim) + "D");
  }
  const int cells = grid.dims[0];
  for (int ax = 0; ax < grid.dim; ++ax) {
    if (grid.dims[ax] != cells) {
      throw std::runtime_error(path + ": non-cubic field files are not supported");
    }
    if (std::abs(grid.spacing[ax] * cells - 1.0) > 1e-9) {
      throw std::runtime_error(path + ": grid does not span the unit cell (tiled file?)");
    }
  }
  const std::vector<double>* values = nullptr;
  for (const auto& [name, data] : grid.fields) {
    if (name == "phase") values = &data;
  }
  if (!values) values = &grid.fields.front().second;
  return {cells + 1, *values};
}

OptimizeReport run_optimize(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  if (cfg.sweep) {
    throw std::invalid_argument(
        "config defines a sweep; use run_optimize_all to run every entry");
  }
  return cfg.dimension == 2 ? run_optimize_impl<2>(cfg, log) : run_optimize_impl<3>(cfg, log);
}

std::vector<std::pair<std::string, OptimizeReport>> run_optimize_all(
    const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  std::vector<std::pair<std::string, OptimizeReport>> out;
  for (const auto& [label, entry] : expand_sweep(cfg)) {
    if (log && !label.empty()) *log << "=== sweep " << label << " ===\n";
    out.emplace_back(label, run_optimize(entry, log));
  }
  return out;
}

EvaluateReport evaluate_field(const ExperimentConfig& cfg, int nodes,
                              const std::vector<double>& values) {
  cfg.validate();
  return cfg.dimension == 2 ? evaluate_field_impl<2>(cfg, nodes, values)
                            : evaluate_field_impl<3>(cfg, nodes, values);
}

EvaluateReport run_evaluate(const ExperimentConfig& cfg, const std::string& field_path,
                            std::ostream* log) {
  cfg.validate();
  auto [nodes, values] = load_field_file(field_path, cfg.dimension);
  EvaluateReport report = evaluate_field(cfg, nodes, values);
  fs::create_directories(cfg.output_dir);
  const std::string table_path = cfg.output_dir + "/evaluate_table.csv";
  write_table_csv(table_path, report.table);
  report.files.push_back(table_path);
  if (log) {
    *log << "N=" << report.nodes << " volumes=" << report.volumes[0] << "/"
         << report.volumes[1] << "\n";
    for (const auto& row : report.table) {
      *log << "phase " << row.phase << " " << row.component << " = " << row.value << "\n";
    }
  }
  return report;
}

namespace {

template <int D>
std::vector<std::string> run_export_impl(const std::string& field_path, int nodes,
                                         const std::vector<double>& values,
                                         const ExportOptions& options, std::ostream* log) {
  const fs::path input(field_path);
  const fs::path out_dir =
      options.output_dir.empty() ? input.parent_path() : fs::path(options.output_dir);
  if (!out_dir.empty()) fs::create_directories(out_dir);
  const std::string stem = input.stem().string();

  std::vector<std::string> written;
  const std::string tiled_path =
      (out_dir / (stem + (options.tile > 1 ? "_tiled.vtk" : "_export.vtk"))).string();
  write_structured_points(tiled_path,
                          make_point_grid<D>(nodes, values, options.tile, "phase"));
  written.push_back(tiled_path);

  if (options.von_mises) {
    if (!options.config) {
      throw std::invalid_argument("--von-mises requires a config for materials and loads");
    }
    const ExperimentConfig& cfg = *options.config;
    auto mesh = build_mesh<D>(nodes);
    PhaseField<D> field(mesh, values);
    const std::array<IsotropicMaterial, 2> materials = {cfg.phase0.resolve("phase0"),
                                                        cfg.phase1.resolve("phase1")};
    const InterpolationParams ip{cfg.delta, cfg.interpolation == "quadratic"
                                                ? Interpolation::kQuadratic
                                                : Interpolation::kLinear};
    const SolveOptions solve{cfg.cg_tol, -1, cfg.cg_max_iter_factor};
    PeriodicStiffness<D> K(mesh);
    for (int phase = 0; phase < 2; ++phase) {
      K.assemble(field, materials[phase], phase, ip);
      for (const auto& label : cfg.loads) {
        const LoadCase<D> load = make_load<D>(label, cfg.beta);
        const CorrectorSolution sol = solve_corrector(K, load, solve);
        const std::vector<double> vm = K.von_mises(load.A, sol.displacement);
        StructuredGrid grid = make_cell_grid<D>(nodes, vm, options.tile, "von_mises");
        std::vector<double> log_vm(vm.size());
        for (std::size_t i = 0; i < vm.size(); ++i) {
          log_vm[i] = std::log10(std::max(vm[i], 1e-300));
        }
        grid.fields.emplace_back("log10_von_mises",
                                 tile_periodic(log_vm, D, nodes - 1, options.tile));
        const std::string vm_path =
            (out_dir / (stem + "_vm_phase" + std::to_string(phase) + "_" + label + ".vtk"))
                .string();
        write_structured_points(vm_path, grid);
        written.push_back(vm_path);
      }
    }
  }
  if (log) {
    for (const auto& f : written) *log << "wrote " << f << "\n";
  }
  return written;
}

}  // namespace

std::vector<std::string> run_export(const std::string& field_path, const ExportOptions& options,
                                    std::ostream* log) {
  if (options.tile < 1) throw std::invalid_argument("tile factor must be >= 1");
  const int dim = read_structured_points(field_path).dim;
  auto [nodes, values] = load_field_file(field_path, dim);
  return dim == 2 ? run_export_impl<2>(field_path, nodes, values, options, log)
                  : run_export_impl<3>(field_path, nodes, values, options, log);
}

GradCheckReport run_gradcheck(const ExperimentConfig& cfg, std::ostream* log) {
  cfg.validate();
  GradCheckReport report;
  for (int dim : {2, 3}) {
    for (double p : {2.0, 8.0}) {
      for (double eta : {0.0, 2.0}) {
        GradCheckEntry entry;
        entry.dimension = dim;
        entry.p = p;
        entry.eta = eta;
        entry.max_rel_error = dim == 2 ? gradcheck_case<2>(cfg, p, eta)
                                       : gradcheck_case<3>(cfg, p, eta);
        report.max_rel_error = std::max(report.max_rel_error, entry.max_rel_error);
        if (log) {
          *log << "d=" << dim << " N=5 p=" << p << " eta=" << eta
               << " max_rel_error=" << entry.max_rel_error << "\n";
        }
        report.entries.push_back(entry);
      }
    }
  }
  if (log) *log << "gradcheck max relative error: " << report.max_rel_error << "\n";
  return report;
}

}  // namespace scaffopt
