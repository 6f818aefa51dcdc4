#pragma once

#include <array>
#include <string>
#include <vector>

#include "scaffopt/elasticity.hpp"
#include "scaffopt/phase_field.hpp"

namespace scaffopt {

inline std::string component_name(const std::string& load_label) {
  // "Aij" -> "Cijij"
  const std::string ij = load_label.substr(1);
  return "C" + ij + ij;
}

struct EffectiveEntry {
  std::string load;       // e.g. "A11"
  std::string component;  // e.g. "C1111"
  double raw = 0.0;       // C* A : A
  double normalized = 0.0;  // beta^{-2} C* A : A
};

// Quadratic-form evaluations of the homogenized tensor for both phases, along
// with the phase volumes.
struct EffectiveTensor {
  double beta = 0.0;
  std::array<std::vector<EffectiveEntry>, 2> rows;
  std::array<double, 2> volume{};
};

// beta^{-2} * C* A : A. The cell-problem minimum carries no 1/2 while the
// corrector energy does, hence the factor 2.
template <int D>
double effective_component(const PhaseField<D>& v, const IsotropicMaterial& mat, int phase,
                           const InterpolationParams& params, const LoadCase<D>& load,
                           double beta, const SolveOptions& opts = {},
                           const std::vector<double>* warm_start = nullptr) {
  PeriodicStiffness<D> K(v.mesh);
  K.assemble(v, mat, phase, params);
  const CorrectorSolution sol = solve_corrector(K, load, opts, warm_start);
  return 2.0 * sol.energy / (beta * beta);
}

// Polarization C* A : B obtained from the quadratic form by expansion.
template <int D>
double effective_polarization(const PhaseField<D>& v, const IsotropicMaterial& mat, int phase,
                              const InterpolationParams& params, const LoadCase<D>& a,
                              const LoadCase<D>& b, const SolveOptions& opts = {}) {
  PeriodicStiffness<D> K(v.mesh);
  K.assemble(v, mat, phase, params);
  auto raw = [&](const SymMat<D>& A, const std::string& label) {
    LoadCase<D> load{A, label};
    return 2.0 * solve_corrector(K, load, opts).energy;
  };
  const double qa = raw(a.A, a.label);
  const double qb = raw(b.A, b.label);
  const double qab = raw(a.A + b.A, a.label + "+" + b.label);
  return 0.5 * (qab - qa - qb);
}

// Phase volumes int chi_m(v) dx by the element Simpson rule; they sum to 1.
template <int D>
std::array<double, 2> volume_fractions(const PhaseField<D>& v) {
  const PeriodicMesh<D>& mesh = *v.mesh;
  constexpr int kC = PeriodicMesh<D>::kCorners;
  constexpr int kQ = PeriodicMesh<D>::kQuadPoints;
  const double vol0 = chunked_reduce(mesh.element_count(), [&](std::size_t e) {
    const std::int32_t* nodes = mesh.element_nodes(e);
    double acc = 0.0;
    for (int q = 0; q < kQ; ++q) {
      const auto& sv = mesh.quad_values(q);
      double val = 0.0;
      for (int a = 0; a < kC; ++a) val += sv[a] * v.values[nodes[a]];
      acc += mesh.quad_weight(q) * fraction(val, 0);
    }
    return acc;
  });
  return {vol0, 1.0 - vol0};
}

// All canonical components for both phases, as reported in the tables.
template <int D>
EffectiveTensor effective_table(const PhaseField<D>& v,
                                const std::array<IsotropicMaterial, 2>& materials,
                                const InterpolationParams& params, double beta,
                                const SolveOptions& opts = {}) {
  EffectiveTensor table;
  table.beta = beta;
  const auto loads = canonical_loads<D>(beta);
  PeriodicStiffness<D> K(v.mesh);
  for (int phase = 0; phase < 2; ++phase) {
    K.assemble(v, materials[phase], phase, params);
    for (const auto& load : loads) {
      const CorrectorSolution sol = solve_corrector(K, load, opts);
      EffectiveEntry entry;
      entry.load = load.label;
      entry.component = component_name(load.label);
      entry.raw = 2.0 * sol.energy;
      entry.normalized = entry.raw / (beta * beta);
      table.rows[phase].push_back(entry);
    }
  }
  table.volume = volume_fractions(v);
  return table;
}

}  // namespace scaffopt
