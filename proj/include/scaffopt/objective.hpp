#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "scaffopt/elasticity.hpp"
#include "scaffopt/homogenize.hpp"
#include "scaffopt/phase_field.hpp"

namespace scaffopt {

struct CostParams {
  double p = 2.0;      // aggregation exponent of g
  double q_max = 8.0;  // smooth-max exponent across the two phases
  double eta = 2.0;    // perimeter weight

  void validate() const {
    if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
    if (!(q_max >= 1.0)) throw std::invalid_argument("q_max must be >= 1");
    if (!(eta >= 0.0)) throw std::invalid_argument("eta must be >= 0");
  }
};

struct AggregateCost {
  double value = 0.0;
  std::vector<double> d_energy;  // dJ/dE_l, all negative
};

// g(E_1..E_L) = (sum E_l^{-p})^{1/p}, monotone decreasing in each energy.
// Evaluated with the ratios E_min/E_l to stay stable for large p.
inline AggregateCost aggregate_cost(const std::vector<double>& energies, double p) {
  if (!(p >= 1.0)) throw std::invalid_argument("p must be >= 1");
  if (energies.empty()) throw std::invalid_argument("at least one load energy required");
  double emin = energies.front();
  for (double e : energies) {
    if (!(e > 0.0)) {
      throw std::domain_error("nonpositive load energy; the corrector solve is broken");
    }
    emin = std::min(emin, e);
  }
  double sum = 0.0;
  for (double e : energies) sum += std::pow(emin / e, p);
  AggregateCost out;
  out.value = std::pow(sum, 1.0 / p) / emin;
  out.d_energy.resize(energies.size());
  // dJ/dE_l = -J^{1-p} E_l^{-p-1} = -S^{(1-p)/p} t_l^{p+1} / emin^2, t_l = emin/E_l
  const double s_pow = std::pow(sum, (1.0 - p) / p);
  for (std::size_t l = 0; l < energies.size(); ++l) {
    const double t = emin / energies[l];
    out.d_energy[l] = -s_pow * std::pow(t, p + 1.0) / (emin * emin);
  }
  return out;
}

struct SmoothMax {
  double value = 0.0;
  double da = 0.0;
  double db = 0.0;
};

// q-norm surrogate for max(a, b): max <= M <= 2^{1/q} max, smooth with
// positive partials (a/M)^{q-1} and (b/M)^{q-1}.
inline SmoothMax smooth_max(double a, double b, double q_max) {
  if (!(a > 0.0 && b > 0.0)) {
    throw std::domain_error("smooth_max requires positive inputs");
  }
  if (!(q_max >= 1.0)) throw std::invalid_argument("q_max must be >= 1");
  const double m = std::max(a, b);
  const double ra = a / m, rb = b / m;
  SmoothMax out;
  out.value = m * std::pow(std::pow(ra, q_max) + std::pow(rb, q_max), 1.0 / q_max);
  out.da = std::pow(a / out.value, q_max - 1.0);
  out.db = std::pow(b / out.value, q_max - 1.0);
  return out;
}

// First moments c_i = int v(x) (x_i - 1/2) dx and their constant gradients
// m_i[j] = int phi_j (x_i - 1/2) dx, assembled with the Simpson rule. The
// wrap-around elements make the gradient differ from h^d (x_j - 1/2) on the
// max faces, so this is computed by assembly once per mesh.
template <int D>
std::array<std::vector<double>, D> moment_vectors(const PeriodicMesh<D>& mesh) {
  constexpr int kC = PeriodicMesh<D>::kCorners;
  constexpr int kQ = PeriodicMesh<D>::kQuadPoints;
  std::array<std::vector<double>, D> m;
  for (int i = 0; i < D; ++i) m[i].assign(mesh.node_count(), 0.0);
  mesh.for_each_element_colored([&](std::size_t e) {
    const std::int32_t* nodes = mesh.element_nodes(e);
    for (int q = 0; q < kQ; ++q) {
      const auto x = mesh.quad_position(e, q);
      const auto& sv = mesh.quad_values(q);
      const double w = mesh.quad_weight(q);
      for (int i = 0; i < D; ++i) {
        const double wx = w * (x[i] - 0.5);
        for (int a = 0; a < kC; ++a) m[i][nodes[a]] += wx * sv[a];
      }
    }
  });
  return m;
}

template <int D>
std::array<double, D> center_of_mass(
    const PhaseField<D>& field,
    const std::type_identity_t<std::array<std::vector<double>, D>>& moments) {
  std::array<double, D> c{};
  for (int i = 0; i < D; ++i) {
    c[i] = chunked_reduce(field.values.size(),
                          [&](std::size_t j) { return moments[i][j] * field.values[j]; });
  }
  return c;
}

template <int D>
std::array<double, D> center_of_mass(const PhaseField<D>& field) {
  return center_of_mass(field, moment_vectors(*field.mesh));
}

struct ObjectiveEvaluation {
  double total = 0.0;                       // J = M + eta * L_eps
  double smooth_max_value = 0.0;            // M
  std::array<double, 2> phase_cost{};       // J^0, J^1
  std::array<std::vector<double>, 2> energies;  // E^m_l
  double perimeter_energy = 0.0;            // L_eps
  std::vector<double> gradient;             // dJ/dv (empty if not requested)
  std::vector<double> com;                  // c_i(v), size D
  long cg_iterations = 0;                   // total across the 2L solves
};

struct ObjectiveSettings {
  CostParams cost;
  InterpolationParams interpolation;
  double eps = 0.0;  // interface width
  SolveOptions solve;
};

// Evaluates J^eta[v] = smooth-max over phases of the aggregated inverse load
// energies, plus the perimeter term, with the full analytic gradient. Owns
// one stiffness operator (re-assembled per phase) and warm-start correctors
// per (phase, load) pair.
template <int D>
class ObjectiveEvaluator {
 public:
  ObjectiveEvaluator(std::shared_ptr<const PeriodicMesh<D>> mesh,
                     std::array<IsotropicMaterial, 2> materials,
                     std::array<std::vector<LoadCase<D>>, 2> loads,
                     const ObjectiveSettings& settings)
      : mesh_(std::move(mesh)),
        materials_(materials),
        loads_(std::move(loads)),
        settings_(settings),
        stiffness_(mesh_),
        moments_(moment_vectors(*mesh_)) {
    settings_.cost.validate();
    settings_.interpolation.validate();
    if (!(settings_.eps > 0.0)) throw std::invalid_argument("eps must be positive");
    if (loads_[0].empty() || loads_[1].empty()) {
      throw std::invalid_argument("each phase needs at least one load case");
    }
    warm_[0].resize(loads_[0].size());
    warm_[1].resize(loads_[1].size());
  }

  const PeriodicMesh<D>& mesh() const { return *mesh_; }
  std::shared_ptr<const PeriodicMesh<D>> mesh_ptr() const { return mesh_; }
  const std::array<std::vector<double>, D>& moments() const { return moments_; }
  const ObjectiveSettings& settings() const { return settings_; }

  void reset_warm_starts() {
    for (auto& w : warm_) {
      for (auto& u : w) u.clear();
    }
  }

  ObjectiveEvaluation evaluate(const PhaseField<D>& v, bool want_gradient = true) {
    if (v.mesh.get() != mesh_.get()) {
      throw std::invalid_argument("field lives on a different mesh");
    }
    ObjectiveEvaluation out;
    out.com.assign(D, 0.0);
    if (want_gradient) out.gradient.assign(mesh_->node_count(), 0.0);

    std::array<AggregateCost, 2> agg;
    std::array<std::vector<std::vector<double>>, 2> dE;  // per phase, per load

    for (int phase = 0; phase < 2; ++phase) {
      stiffness_.assemble(v, materials_[phase], phase, settings_.interpolation);
      const std::size_t nl = loads_[phase].size();
      out.energies[phase].resize(nl);
      if (want_gradient) dE[phase].resize(nl);
      for (std::size_t l = 0; l < nl; ++l) {
        std::vector<double>* warm = warm_[phase][l].empty() ? nullptr : &warm_[phase][l];
        CorrectorSolution sol =
            solve_corrector(stiffness_, loads_[phase][l], settings_.solve, warm);
        out.cg_iterations += sol.iterations;
        out.energies[phase][l] = sol.energy;
        if (want_gradient) {
          dE[phase][l] =
              stiffness_.energy_field_gradient(loads_[phase][l].A, sol.displacement);
        }
        warm_[phase][l] = std::move(sol.displacement);
      }
      agg[phase] = aggregate_cost(out.energies[phase], settings_.cost.p);
      out.phase_cost[phase] = agg[phase].value;
    }

    const SmoothMax sm =
        smooth_max(out.phase_cost[0], out.phase_cost[1], settings_.cost.q_max);
    out.smooth_max_value = sm.value;

    ModicaMortolaResult mm = modica_mortola(v, settings_.eps, want_gradient);
    out.perimeter_energy = mm.energy;
    out.total = sm.value + settings_.cost.eta * mm.energy;
    if (!std::isfinite(out.total)) {
      throw std::runtime_error("objective evaluated to a non-finite value");
    }

    if (want_gradient) {
      const std::array<double, 2> dM = {sm.da, sm.db};
      // deterministic ordered accumulation: phases, then loads, then the
      // perimeter term
      for (int phase = 0; phase < 2; ++phase) {
        for (std::size_t l = 0; l < loads_[phase].size(); ++l) {
          const double chain = dM[phase] * agg[phase].d_energy[l];
          const std::vector<double>& g = dE[phase][l];
          parallel_for(out.gradient.size(),
                       [&](std::size_t j) { out.gradient[j] += chain * g[j]; });
        }
      }
      parallel_for(out.gradient.size(), [&](std::size_t j) {
        out.gradient[j] += settings_.cost.eta * mm.gradient[j];
      });
    }

    const auto com = center_of_mass(v, moments_);
    for (int i = 0; i < D; ++i) out.com[i] = com[i];
    return out;
  }

 private:
  std::shared_ptr<const PeriodicMesh<D>> mesh_;
  std::array<IsotropicMaterial, 2> materials_;
  std::array<std::vector<LoadCase<D>>, 2> loads_;
  ObjectiveSettings settings_;
  PeriodicStiffness<D> stiffness_;
  std::array<std::vector<double>, D> moments_;
  std::array<std::vector<std::vector<double>>, 2> warm_;
};

}  // namespace scaffopt
