#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "scaffopt/parallel.hpp"

namespace scaffopt {

constexpr int ipow(int base, int exp) {
  int r = 1;
  while (exp-- > 0) r *= base;
  return r;
}

// Multilinear shape functions on the reference element [0,1]^D. Corner a is
// addressed bitwise: bit ax of a selects the max face along axis ax.
// Gradients are with respect to the local coordinates.
template <int D>
void shape_eval(const std::array<double, D>& local,
                std::array<double, (1 << D)>& values,
                std::array<std::array<double, D>, (1 << D)>& gradients) {
  for (int a = 0; a < (1 << D); ++a) {
    double value = 1.0;
    for (int ax = 0; ax < D; ++ax) {
      value *= (a >> ax & 1) ? local[ax] : 1.0 - local[ax];
    }
    values[a] = value;
    for (int g = 0; g < D; ++g) {
      double deriv = (a >> g & 1) ? 1.0 : -1.0;
      for (int ax = 0; ax < D; ++ax) {
        if (ax == g) continue;
        deriv *= (a >> ax & 1) ? local[ax] : 1.0 - local[ax];
      }
      gradients[a][g] = deriv;
    }
  }
}

// Uniform cuboid mesh of the periodic unit cell [0,1]^D with N nodes per axis.
// Nodes on max faces are identified with their min-face partners, so the
// canonical grid has (N-1)^D nodes and (N-1)^D elements. Per element the
// quadrature is the tensor product Simpson rule: 3^D points at local
// coordinates {0, 1/2, 1} with axis weights h*(1/6, 4/6, 1/6).
// Immutable after construction; safe for concurrent reads.
template <int D>
class PeriodicMesh {
  static_assert(D == 2 || D == 3, "only 2D and 3D cells are supported");

 public:
  static constexpr int kCorners = 1 << D;
  static constexpr int kQuadPoints = ipow(3, D);

  explicit PeriodicMesh(int nodes_per_axis) : n_(nodes_per_axis) {
    if (n_ < 3) throw std::invalid_argument("mesh requires at least 3 nodes per axis");
    cells_ = n_ - 1;
    h_ = 1.0 / cells_;

    std::size_t count = 1;
    for (int ax = 0; ax < D; ++ax) count *= static_cast<std::size_t>(cells_);
    node_count_ = element_count_ = count;

    build_quadrature();
    build_connectivity();
    build_colors();
  }

  int nodes_per_axis() const { return n_; }
  int cells_per_axis() const { return cells_; }
  double spacing() const { return h_; }
  std::size_t node_count() const { return node_count_; }
  std::size_t element_count() const { return element_count_; }

  const std::int32_t* element_nodes(std::size_t e) const {
    return &connectivity_[e * kCorners];
  }

  std::array<int, D> node_multi_index(std::size_t node) const {
    std::array<int, D> idx{};
    for (int ax = 0; ax < D; ++ax) {
      idx[ax] = static_cast<int>(node % cells_);
      node /= cells_;
    }
    return idx;
  }

  std::size_t node_index(const std::array<int, D>& idx) const {
    std::size_t flat = 0;
    for (int ax = D - 1; ax >= 0; --ax) {
      int w = ((idx[ax] % cells_) + cells_) % cells_;
      flat = flat * cells_ + static_cast<std::size_t>(w);
    }
    return flat;
  }

  std::array<double, D> node_position(std::size_t node) const {
    auto idx = node_multi_index(node);
    std::array<double, D> x{};
    for (int ax = 0; ax < D; ++ax) x[ax] = idx[ax] * h_;
    return x;
  }

  std::array<double, D> element_origin(std::size_t e) const {
    return node_position(e);  // same flat layout for cells and nodes
  }

  double quad_weight(int q) const { return weights_[q]; }
  const std::array<double, D>& quad_local(int q) const { return quad_local_[q]; }
  const std::array<double, kCorners>& quad_values(int q) const { return values_[q]; }
  // physical gradients (reference gradients scaled by 1/h)
  const std::array<std::array<double, D>, kCorners>& quad_gradients(int q) const {
    return gradients_[q];
  }

  std::array<double, D> quad_position(std::size_t e, int q) const {
    auto x = element_origin(e);
    for (int ax = 0; ax < D; ++ax) x[ax] += quad_local_[q][ax] * h_;
    return x;
  }

  // Colored traversal: elements are grouped by last-axis layers such that no
  // two elements processed in parallel share a node. Scatter into nodal
  // arrays inside the body is race-free and the result is deterministic.
  template <class Body>
  void for_each_element_colored(const Body& body) const {
    const std::size_t stride = element_count_ / static_cast<std::size_t>(cells_);
    for (const auto& layers : color_layers_) {
      parallel_for(layers.size(), [&](std::size_t li) {
        const std::size_t base = static_cast<std::size_t>(layers[li]) * stride;
        for (std::size_t e = base; e < base + stride; ++e) body(e);
      });
    }
  }

 private:
  void build_quadrature() {
    static constexpr std::array<double, 3> coords = {0.0, 0.5, 1.0};
    static constexpr std::array<double, 3> w1 = {1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0};
    for (int q = 0; q < kQuadPoints; ++q) {
      int rest = q;
      double w = 1.0;
      std::array<double, D> local{};
      for (int ax = 0; ax < D; ++ax) {
        int c = rest % 3;
        rest /= 3;
        local[ax] = coords[c];
        w *= w1[c] * h_;
      }
      quad_local_[q] = local;
      weights_[q] = w;
      std::array<std::array<double, D>, kCorners> ref_grad{};
      shape_eval<D>(local, values_[q], ref_grad);
      for (int a = 0; a < kCorners; ++a) {
        for (int g = 0; g < D; ++g) gradients_[q][a][g] = ref_grad[a][g] / h_;
      }
    }
  }

  void build_connectivity() {
    connectivity_.resize(element_count_ * kCorners);
    parallel_for(element_count_, [&](std::size_t e) {
      auto origin = node_multi_index(e);
      for (int a = 0; a < kCorners; ++a) {
        std::array<int, D> idx = origin;
        for (int ax = 0; ax < D; ++ax) idx[ax] += (a >> ax & 1);
        connectivity_[e * kCorners + a] = static_cast<std::int32_t>(node_index(idx));
      }
    });
  }

  void build_colors() {
    std::vector<int> evens, odds, wrap;
    for (int l = 0; l < cells_; ++l) {
      // an odd layer count would put the wrapping layer in the same parity
      // class as layer 0, so it gets its own color
      if (cells_ % 2 == 1 && l == cells_ - 1) {
        wrap.push_back(l);
      } else {
        ((l % 2 == 0) ? evens : odds).push_back(l);
      }
    }
    color_layers_.clear();
    for (auto& c : {evens, odds, wrap}) {
      if (!c.empty()) color_layers_.push_back(c);
    }
  }

  int n_ = 0;
  int cells_ = 0;
  double h_ = 0.0;
  std::size_t node_count_ = 0;
  std::size_t element_count_ = 0;
  std::vector<std::int32_t> connectivity_;
  std::array<double, kQuadPoints> weights_{};
  std::array<std::array<double, D>, kQuadPoints> quad_local_{};
  std::array<std::array<double, kCorners>, kQuadPoints> values_{};
  std::array<std::array<std::array<double, D>, kCorners>, kQuadPoints> gradients_{};
  std::vector<std::vector<int>> color_layers_;
};

template <int D>
std::shared_ptr<const PeriodicMesh<D>> build_mesh(int nodes_per_axis) {
  return std::make_shared<const PeriodicMesh<D>>(nodes_per_axis);
}

// Multilinear interpolation of a coarse nodal field onto a finer grid. The
// refinement ratio (N_f-1)/(N_c-1) must be an integer, so fine elements nest
// in coarse elements and the interpolated function is reproduced exactly.
template <int D>
std::vector<double> prolongate(const PeriodicMesh<D>& coarse,
                               const std::vector<double>& values,
                               const PeriodicMesh<D>& fine) {
  if (values.size() != coarse.node_count()) {
    throw std::invalid_argument("prolongate: field does not match the coarse mesh");
  }
  const int cc = coarse.cells_per_axis();
  const int fc = fine.cells_per_axis();
  if (fc % cc != 0) {
    throw std::invalid_argument("prolongate: (N_f-1) must be a multiple of (N_c-1)");
  }
  const int ratio = fc / cc;

  std::vector<double> out(fine.node_count());
  parallel_for(fine.node_count(), [&](std::size_t node) {
    auto fidx = fine.node_multi_index(node);
    std::array<int, D> cell{};
    std::array<double, D> local{};
    for (int ax = 0; ax < D; ++ax) {
      cell[ax] = fidx[ax] / ratio;
      local[ax] = static_cast<double>(fidx[ax] % ratio) / ratio;
    }
    std::array<double, (1 << D)> vals{};
    std::array<std::array<double, D>, (1 << D)> grads{};
    shape_eval<D>(local, vals, grads);
    double v = 0.0;
    for (int a = 0; a < (1 << D); ++a) {
      std::array<int, D> idx = cell;
      for (int ax = 0; ax < D; ++ax) idx[ax] += (a >> ax & 1);
      v += vals[a] * values[coarse.node_index(idx)];
    }
    out[node] = v;
  });
  return out;
}

}  // namespace scaffopt
