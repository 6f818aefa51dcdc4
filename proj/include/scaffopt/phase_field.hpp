#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <utility>
#include <vector>

#include "scaffopt/mesh.hpp"
#include "scaffopt/parallel.hpp"

namespace scaffopt {

// Nodal scalar design field on the periodic cell; values live near [-1, 1].
template <int D>
struct PhaseField {
  std::shared_ptr<const PeriodicMesh<D>> mesh;
  std::vector<double> values;

  PhaseField() = default;
  explicit PhaseField(std::shared_ptr<const PeriodicMesh<D>> m, double fill = 0.0)
      : mesh(std::move(m)), values(mesh->node_count(), fill) {}
  PhaseField(std::shared_ptr<const PeriodicMesh<D>> m, std::vector<double> v)
      : mesh(std::move(m)), values(std::move(v)) {
    if (values.size() != mesh->node_count()) {
      throw std::invalid_argument("phase field size does not match mesh");
    }
  }
};

enum class Interpolation { kLinear, kQuadratic };

// Hard-soft material interpolation: the stiffness of phase m is scaled by
// chi_m(v) + delta (1 - chi_m(v)), which stays in [delta, 1].
struct InterpolationParams {
  double delta = 1e-4;
  Interpolation kind = Interpolation::kLinear;

  void validate() const {
    if (!(delta > 0.0 && delta < 1.0)) {
      throw std::invalid_argument("delta must lie in (0, 1)");
    }
  }
};

// Geometric phase indicator: linear partition of unity with clamping, so
// fraction(v,0) + fraction(v,1) = 1 for every v.
inline double fraction(double v, int phase) {
  const double w = std::clamp(phase == 0 ? 0.5 * (1.0 + v) : 0.5 * (1.0 - v), 0.0, 1.0);
  return w;
}

inline double stiffness_factor(double v, int phase, const InterpolationParams& p) {
  double chi = fraction(v, phase);
  if (p.kind == Interpolation::kQuadratic) chi *= chi;
  return p.delta + (1.0 - p.delta) * chi;
}

// d/dv of stiffness_factor; zero outside the open interval (-1, 1) where the
// clamp saturates.
inline double stiffness_factor_derivative(double v, int phase, const InterpolationParams& p) {
  if (!(v > -1.0 && v < 1.0)) return 0.0;
  const double sign = phase == 0 ? 0.5 : -0.5;
  if (p.kind == Interpolation::kQuadratic) {
    return (1.0 - p.delta) * 2.0 * fraction(v, phase) * sign;
  }
  return (1.0 - p.delta) * sign;
}

// double well with minima at +-1, calibrated so that int_{-1}^{1} sqrt(Psi) dv = 1
inline double double_well(double v) {
  const double t = v * v - 1.0;
  return 9.0 / 16.0 * t * t;
}

inline double double_well_derivative(double v) {
  return 9.0 / 4.0 * v * (v * v - 1.0);
}

struct ModicaMortolaResult {
  double energy = 0.0;
  std::vector<double> gradient;
};

// L_eps[v] = 1/2 int eps |grad v|^2 + Psi(v)/eps, by the element Simpson rule,
// with the exact derivative of the discrete energy w.r.t. the nodal values.
template <int D>
ModicaMortolaResult modica_mortola(const PhaseField<D>& field, double eps,
                                   bool want_gradient = true) {
  if (!(eps > 0.0)) throw std::invalid_argument("interface width eps must be positive");
  const PeriodicMesh<D>& mesh = *field.mesh;
  constexpr int kC = PeriodicMesh<D>::kCorners;
  constexpr int kQ = PeriodicMesh<D>::kQuadPoints;

  ModicaMortolaResult out;
  if (want_gradient) out.gradient.assign(mesh.node_count(), 0.0);
  std::vector<double> element_energy(mesh.element_count());

  mesh.for_each_element_colored([&](std::size_t e) {
    const std::int32_t* nodes = mesh.element_nodes(e);
    std::array<double, kC> local{};
    for (int a = 0; a < kC; ++a) local[a] = field.values[nodes[a]];

    double energy = 0.0;
    std::array<double, kC> grad{};
    for (int q = 0; q < kQ; ++q) {
      const auto& sv = mesh.quad_values(q);
      const auto& sg = mesh.quad_gradients(q);
      double v = 0.0;
      std::array<double, D> dv{};
      for (int a = 0; a < kC; ++a) {
        v += sv[a] * local[a];
        for (int ax = 0; ax < D; ++ax) dv[ax] += sg[a][ax] * local[a];
      }
      double grad2 = 0.0;
      for (int ax = 0; ax < D; ++ax) grad2 += dv[ax] * dv[ax];
      const double w = mesh.quad_weight(q);
      energy += 0.5 * w * (eps * grad2 + double_well(v) / eps);
      if (want_gradient) {
        const double dwell = 0.5 * w / eps * double_well_derivative(v);
        for (int a = 0; a < kC; ++a) {
          double dot = 0.0;
          for (int ax = 0; ax < D; ++ax) dot += sg[a][ax] * dv[ax];
          grad[a] += eps * w * dot + dwell * sv[a];
        }
      }
    }
    element_energy[e] = energy;
    if (want_gradient) {
      for (int a = 0; a < kC; ++a) out.gradient[nodes[a]] += grad[a];
    }
  });

  out.energy = chunked_reduce(element_energy.size(),
                              [&](std::size_t e) { return element_energy[e]; });
  return out;
}

}  // namespace scaffopt
