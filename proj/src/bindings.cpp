#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <iostream>
#include <optional>
#include <sstream>

#include "scaffopt/config.hpp"
#include "scaffopt/driver.hpp"
#include "scaffopt/homogenize.hpp"
#include "scaffopt/optimizer.hpp"
#include "scaffopt/vtk.hpp"

namespace py = pybind11;
using namespace scaffopt;

namespace {

using Array = py::array_t<double, py::array::c_style | py::array::forcecast>;

// canonical nodal grids are exchanged as (C,)*d arrays indexed [z,y,x];
// the C-order flat layout matches the mesh's x-fastest node numbering
std::pair<int, std::vector<double>> from_array(const Array& arr) {
  const int dim = static_cast<int>(arr.ndim());
  if (dim != 2 && dim != 3) throw std::invalid_argument("expected a 2D or 3D array");
  const int cells = static_cast<int>(arr.shape(0));
  for (int ax = 1; ax < dim; ++ax) {
    if (arr.shape(ax) != cells) throw std::invalid_argument("expected a cubic array");
  }
  std::vector<double> values(arr.data(), arr.data() + arr.size());
  return {dim, std::move(values)};
}

Array to_array(int dim, int cells, const std::vector<double>& values) {
  std::vector<py::ssize_t> shape(dim, cells);
  Array arr(shape);
  std::copy(values.begin(), values.end(), arr.mutable_data());
  return arr;
}

int cells_of(int dim, std::size_t count) {
  const int cells = dim == 2 ? static_cast<int>(std::lround(std::sqrt(double(count))))
                             : static_cast<int>(std::lround(std::cbrt(double(count))));
  return cells;
}

py::dict table_dict(const std::vector<TableRow>& rows, const std::array<double, 2>& volumes) {
  py::list table;
  for (const auto& row : rows) {
    py::dict d;
    d["phase"] = row.phase;
    d["load"] = row.load;
    d["component"] = row.component;
    d["value"] = row.value;
    d["volume"] = row.volume;
    table.append(d);
  }
  py::dict out;
  out["table"] = table;
  out["volumes"] = py::make_tuple(volumes[0], volumes[1]);
  return out;
}

template <int D>
py::tuple modica_mortola_py(const std::vector<double>& values, int cells, double eps) {
  auto mesh = build_mesh<D>(cells + 1);
  PhaseField<D> field(mesh, values);
  ModicaMortolaResult result = modica_mortola(field, eps);
  return py::make_tuple(result.energy, to_array(D, cells, result.gradient));
}

template <int D>
py::tuple volume_fractions_py(const std::vector<double>& values, int cells) {
  auto mesh = build_mesh<D>(cells + 1);
  PhaseField<D> field(mesh, values);
  const auto vol = volume_fractions(field);
  return py::make_tuple(vol[0], vol[1]);
}

template <int D>
Array prolongate_py(const std::vector<double>& values, int cells, int fine_nodes) {
  auto coarse = build_mesh<D>(cells + 1);
  auto fine = build_mesh<D>(fine_nodes);
  return to_array(D, fine_nodes - 1, prolongate(*coarse, values, *fine));
}

template <int D>
Array project_py(const std::vector<double>& values, int cells, double box) {
  auto mesh = build_mesh<D>(cells + 1);
  FeasibleProjector<D> projector(mesh, box);
  std::vector<double> v = values;
  projector.project(v);
  return to_array(D, cells, v);
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Two-phase periodic microstructure optimization";

  py::class_<ExperimentConfig>(m, "Config")
      .def(py::init<>())
      .def_readwrite("dimension", &ExperimentConfig::dimension)
      .def_readwrite("schedule", &ExperimentConfig::schedule)
      .def_readwrite("loads", &ExperimentConfig::loads)
      .def_readwrite("beta", &ExperimentConfig::beta)
      .def_readwrite("eta", &ExperimentConfig::eta)
      .def_readwrite("delta", &ExperimentConfig::delta)
      .def_readwrite("p", &ExperimentConfig::p)
      .def_readwrite("q_max", &ExperimentConfig::q_max)
      .def_readwrite("seed", &ExperimentConfig::seed)
      .def_readwrite("output_dir", &ExperimentConfig::output_dir)
      .def_readwrite("tile", &ExperimentConfig::tile)
      .def_readwrite("interpolation", &ExperimentConfig::interpolation)
      .def_readwrite("cg_tol", &ExperimentConfig::cg_tol)
      .def_readwrite("max_iterations", &ExperimentConfig::max_iterations)
      .def_readwrite("grad_tol", &ExperimentConfig::grad_tol)
      .def("set_young_poisson",
           [](ExperimentConfig& cfg, int phase, double young, double poisson) {
             MaterialSpec& spec = phase == 0 ? cfg.phase0 : cfg.phase1;
             spec = MaterialSpec{};
             spec.young = young;
             spec.poisson = poisson;
           },
           py::arg("phase"), py::arg("E"), py::arg("nu"))
      .def("set_lame",
           [](ExperimentConfig& cfg, int phase, double mu, double lambda) {
             MaterialSpec& spec = phase == 0 ? cfg.phase0 : cfg.phase1;
             spec = MaterialSpec{};
             spec.mu = mu;
             spec.lambda = lambda;
           },
           py::arg("phase"), py::arg("mu"), py::arg("lambda"))
      .def("validate", &ExperimentConfig::validate)
      .def("to_toml", [](const ExperimentConfig& cfg) { return serialize_config(cfg); })
      .def("__repr__", [](const ExperimentConfig& cfg) {
        std::ostringstream s;
        s << "Config(dimension=" << cfg.dimension << ", schedule=[";
        for (std::size_t i = 0; i < cfg.schedule.size(); ++i) {
          s << (i ? ", " : "") << cfg.schedule[i];
        }
        s << "], loads=" << cfg.loads.size() << ")";
        return s.str();
      });

  m.def("preset_names", &preset_names);
  m.def("preset", &preset_config, py::arg("name"));
  m.def("config_from_toml", &parse_config_text, py::arg("text"));
  m.def("config_from_file", &parse_config_file, py::arg("path"));
  m.def("config_hash", [](const ExperimentConfig& cfg) { return config_hash(cfg); });

  m.def(
      "optimize",
      [](const ExperimentConfig& cfg, bool verbose) {
        OptimizeReport report = run_optimize(cfg, verbose ? &std::cout : nullptr);
        py::dict out;
        py::list levels;
        for (const auto& level : report.levels) {
          py::dict d;
          d["nodes"] = level.nodes;
          d["eps"] = level.eps;
          d["iterations"] = level.accepted_iterations;
          d["initial_total"] = level.initial_total;
          d["final_total"] = level.final_total;
          d["stop_reason"] = level.stop_reason;
          d["wall_seconds"] = level.wall_seconds;
          levels.append(d);
        }
        out["levels"] = levels;
        out["final_total"] = report.final_total;
        out["nodes"] = report.final_nodes;
        out["field"] = to_array(cfg.dimension, report.final_nodes - 1, report.final_field);
        out["files"] = report.files;
        py::dict table = table_dict(report.table, report.volumes);
        out["table"] = table["table"];
        out["volumes"] = table["volumes"];
        return out;
      },
      py::arg("config"), py::arg("verbose") = false);

  m.def(
      "evaluate",
      [](const ExperimentConfig& cfg, const Array& arr) {
        auto [dim, values] = from_array(arr);
        if (dim != cfg.dimension) {
          throw std::invalid_argument("array dimension does not match the config");
        }
        const int cells = cells_of(dim, values.size());
        EvaluateReport report = evaluate_field(cfg, cells + 1, values);
        return table_dict(report.table, report.volumes);
      },
      py::arg("config"), py::arg("field"));

  m.def(
      "gradcheck",
      [](const ExperimentConfig& cfg, bool verbose) {
        GradCheckReport report = run_gradcheck(cfg, verbose ? &std::cout : nullptr);
        py::list entries;
        for (const auto& entry : report.entries) {
          py::dict d;
          d["dimension"] = entry.dimension;
          d["p"] = entry.p;
          d["eta"] = entry.eta;
          d["max_rel_error"] = entry.max_rel_error;
          entries.append(d);
        }
        py::dict out;
        out["entries"] = entries;
        out["max_rel_error"] = report.max_rel_error;
        return out;
      },
      py::arg("config"), py::arg("verbose") = false);

  m.def(
      "modica_mortola",
      [](const Array& arr, double eps) {
        auto [dim, values] = from_array(arr);
        const int cells = static_cast<int>(arr.shape(0));
        return dim == 2 ? modica_mortola_py<2>(values, cells, eps)
                        : modica_mortola_py<3>(values, cells, eps);
      },
      py::arg("field"), py::arg("eps"));

  m.def("volume_fractions", [](const Array& arr) {
    auto [dim, values] = from_array(arr);
    const int cells = static_cast<int>(arr.shape(0));
    return dim == 2 ? volume_fractions_py<2>(values, cells)
                    : volume_fractions_py<3>(values, cells);
  });

  m.def(
      "prolongate",
      [](const Array& arr, int fine_nodes) {
        auto [dim, values] = from_array(arr);
        const int cells = static_cast<int>(arr.shape(0));
        return dim == 2 ? prolongate_py<2>(values, cells, fine_nodes)
                        : prolongate_py<3>(values, cells, fine_nodes);
      },
      py::arg("field"), py::arg("fine_nodes"));

  m.def(
      "project",
      [](const Array& arr, double box) {
        auto [dim, values] = from_array(arr);
        const int cells = static_cast<int>(arr.shape(0));
        return dim == 2 ? project_py<2>(values, cells, box) : project_py<3>(values, cells, box);
      },
      py::arg("field"), py::arg("box") = 1.25);

  m.def(
      "save_field",
      [](const std::string& path, const Array& arr) {
        auto [dim, values] = from_array(arr);
        const int cells = static_cast<int>(arr.shape(0));
        StructuredGrid grid;
        grid.dim = dim;
        for (int ax = 0; ax < 3; ++ax) {
          grid.dims[ax] = ax < dim ? cells : 1;
          grid.spacing[ax] = ax < dim ? 1.0 / cells : 1.0;
        }
        grid.fields.emplace_back("phase", values);
        write_structured_points(path, grid);
      },
      py::arg("path"), py::arg("field"));

  m.def("load_field", [](const std::string& path) {
    const int dim = read_structured_points(path).dim;
    auto [nodes, values] = load_field_file(path, dim);
    return to_array(dim, nodes - 1, values);
  });

  m.def(
      "export_field",
      [](const std::string& path, int tile, bool von_mises,
         std::optional<ExperimentConfig> config, const std::string& out_dir) {
        ExportOptions options;
        options.tile = tile;
        options.von_mises = von_mises;
        options.config = std::move(config);
        options.output_dir = out_dir;
        return run_export(path, options);
      },
      py::arg("path"), py::arg("tile") = 1, py::arg("von_mises") = false,
      py::arg("config") = std::nullopt, py::arg("out_dir") = std::string());
}
