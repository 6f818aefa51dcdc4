#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

namespace scaffopt {

// Legacy ASCII VTK structured points with one SCALARS block per field.
// Values are written with 17 significant digits so re-reading is bit-exact.
struct StructuredGrid {
  int dim = 3;                  // 2 or 3; in 2D dims[2] == 1
  std::array<int, 3> dims = {1, 1, 1};
  std::array<double, 3> origin = {0.0, 0.0, 0.0};
  std::array<double, 3> spacing = {1.0, 1.0, 1.0};
  std::string title = "scaffopt field";
  std::vector<std::pair<std::string, std::vector<double>>> fields;

  std::size_t point_count() const {
    return static_cast<std::size_t>(dims[0]) * dims[1] * dims[2];
  }
};

void write_structured_points(const std::string& path, const StructuredGrid& grid);
StructuredGrid read_structured_points(const std::string& path);

// Periodic extension of canonical nodal (or per-cell) values onto a grid
// tiled `tile` times per axis. cells is the canonical extent per axis.
std::vector<double> tile_periodic(const std::vector<double>& values, int dim, int cells,
                                  int tile);

}  // namespace scaffopt
