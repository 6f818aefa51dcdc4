#include "scaffopt/vtk.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace scaffopt {

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

void write_structured_points(const std::string& path, const StructuredGrid& grid) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << "# vtk DataFile Version 3.0\n";
  out << grid.title << "\n";
  out << "ASCII\n";
  out << "DATASET STRUCTURED_POINTS\n";
  out << "DIMENSIONS " << grid.dims[0] << " " << grid.dims[1] << " " << grid.dims[2] << "\n";
  out << "ORIGIN " << fmt(grid.origin[0]) << " " << fmt(grid.origin[1]) << " "
      << fmt(grid.origin[2]) << "\n";
  out << "SPACING " << fmt(grid.spacing[0]) << " " << fmt(grid.spacing[1]) << " "
      << fmt(grid.spacing[2]) << "\n";
  out << "POINT_DATA " << grid.point_count() << "\n";
  for (const auto& [name, values] : grid.fields) {
    if (values.size() != grid.point_count()) {
      throw std::invalid_argument("field '" + name + "' does not match the grid size");
    }
    out << "SCALARS " << name << " double 1\n";
    out << "LOOKUP_TABLE default\n";
    for (std::size_t i = 0; i < values.size(); ++i) {
      out << fmt(values[i]) << ((i % 6 == 5 || i + 1 == values.size()) ? "\n" : " ");
    }
  }
  if (!out) throw std::runtime_error("write to '" + path + "' failed");
}

StructuredGrid read_structured_points(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");

  auto expect_line = [&](const std::string& what) {
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": unexpected end of file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.rfind(what, 0) != 0) {
      throw std::runtime_error(path + ": expected '" + what + "', got '" + line + "'");
    }
    return line;
  };

  expect_line("# vtk DataFile");
  StructuredGrid grid;
  std::string line;
  std::getline(in, grid.title);
  expect_line("ASCII");
  expect_line("DATASET STRUCTURED_POINTS");

  {
    line = expect_line("DIMENSIONS");
    std::istringstream s(line.substr(10));
    s >> grid.dims[0] >> grid.dims[1] >> grid.dims[2];
    if (!s) throw std::runtime_error(path + ": malformed DIMENSIONS");
  }
  {
    line = expect_line("ORIGIN");
    std::istringstream s(line.substr(6));
    s >> grid.origin[0] >> grid.origin[1] >> grid.origin[2];
    if (!s) throw std::runtime_error(path + ": malformed ORIGIN");
  }
  {
    line = expect_line("SPACING");
    std::istringstream s(line.substr(7));
    s >> grid.spacing[0] >> grid.spacing[1] >> grid.spacing[2];
    if (!s) throw std::runtime_error(path + ": malformed SPACING");
  }
  grid.dim = grid.dims[2] == 1 ? 2 : 3;

  std::size_t n = 0;
  {
    line = expect_line("POINT_DATA");
    std::istringstream s(line.substr(10));
    s >> n;
    if (!s || n != grid.point_count()) {
      throw std::runtime_error(path + ": POINT_DATA count does not match DIMENSIONS");
    }
  }

  std::string token;
  while (in >> token) {
    if (token != "SCALARS") throw std::runtime_error(path + ": expected SCALARS, got " + token);
    std::string name, type;
    int comps = 0;
    in >> name >> type >> comps;
    if (!in || comps != 1) throw std::runtime_error(path + ": unsupported SCALARS header");
    in >> token;  // LOOKUP_TABLE
    std::string table;
    in >> table;
    std::vector<double> values(n);
    for (std::size_t i = 0; i < n; ++i) {
      if (!(in >> values[i])) throw std::runtime_error(path + ": truncated field '" + name + "'");
    }
    grid.fields.emplace_back(name, std::move(values));
  }
  if (grid.fields.empty()) throw std::runtime_error(path + ": no scalar fields found");
  return grid;
}

std::vector<double> tile_periodic(const std::vector<double>& values, int dim, int cells,
                                  int tile) {
  if (tile < 1) throw std::invalid_argument("tile factor must be >= 1");
  std::size_t expect = 1;
  for (int ax = 0; ax < dim; ++ax) expect *= static_cast<std::size_t>(cells);
  if (values.size() != expect) throw std::invalid_argument("field size does not match extent");
  if (tile == 1) return values;

  const int out_cells = cells * tile;
  std::size_t total = 1;
  for (int ax = 0; ax < dim; ++ax) total *= static_cast<std::size_t>(out_cells);
  std::vector<double> out(total);
  for (std::size_t idx = 0; idx < total; ++idx) {
    std::size_t rest = idx;
    std::size_t src = 0;
    std::size_t stride = 1;
    for (int ax = 0; ax < dim; ++ax) {
      const int coord = static_cast<int>(rest % out_cells);
      rest /= out_cells;
      src += stride * static_cast<std::size_t>(coord % cells);
      stride *= static_cast<std::size_t>(cells);
    }
    out[idx] = values[src];
  }
  return out;
}

}  // namespace scaffopt
