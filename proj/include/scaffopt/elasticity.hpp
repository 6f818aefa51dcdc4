#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "scaffopt/material.hpp"
#include "scaffopt/mesh.hpp"
#include "scaffopt/parallel.hpp"
#include "scaffopt/phase_field.hpp"

namespace scaffopt {

// Macroscopic strain A_l of an affine load, including the beta scaling.
template <int D>
struct LoadCase {
  SymMat<D> A;
  std::string label;
};

inline const std::vector<std::string>& canonical_load_labels(int d) {
  static const std::vector<std::string> labels2 = {"A11", "A22", "A12"};
  static const std::vector<std::string> labels3 = {"A11", "A22", "A33",
                                                   "A12", "A13", "A23"};
  if (d == 2) return labels2;
  if (d == 3) return labels3;
  throw std::invalid_argument("dimension must be 2 or 3");
}

// Parses "Aij" into beta * (e_i^T e_j + e_j^T e_i) (or beta e_i^T e_i on the
// diagonal), with 1-based axis digits i <= j.
template <int D>
LoadCase<D> make_load(const std::string& label, double beta) {
  if (beta == 0.0) throw std::invalid_argument("load scaling beta must be nonzero");
  if (label.size() != 3 || label[0] != 'A') {
    throw std::invalid_argument("unknown load label '" + label + "'");
  }
  const int i = label[1] - '1';
  const int j = label[2] - '1';
  if (i < 0 || j < i || j >= D) {
    throw std::invalid_argument("load label '" + label + "' is not valid in " +
                                std::to_string(D) + "D");
  }
  LoadCase<D> load;
  load.label = label;
  if (i == j) {
    load.A(i, i) = beta;
  } else {
    load.A = SymMat<D>::outer_sym(i, j, beta);
  }
  return load;
}

template <int D>
std::vector<LoadCase<D>> canonical_loads(double beta) {
  std::vector<LoadCase<D>> loads;
  for (const auto& label : canonical_load_labels(D)) {
    loads.push_back(make_load<D>(label, beta));
  }
  return loads;
}

struct SolveOptions {
  double tol = 1e-8;         // relative preconditioned residual
  long max_iterations = -1;  // absolute cap; if < 0, max_iter_factor * #dofs
  int max_iter_factor = 10;
};

struct SolverError : std::runtime_error {
  SolverError(const std::string& what, double residual_, long iterations_)
      : std::runtime_error(what), residual(residual_), iterations(iterations_) {}
  double residual;
  long iterations;
};

struct CorrectorSolution {
  std::vector<double> displacement;  // D components per canonical node
  double energy = 0.0;               // 1/2 int factor * C(A+e[u]):(A+e[u])
  long iterations = 0;
  double residual = 0.0;
};

// Periodic stiffness operator for one phase: block CSR over canonical nodes,
// assembled with the Simpson rule and the stiffness factor evaluated at the
// quadrature points of the trilinear interpolant of v. The sparsity pattern
// and the per-quadrature-point gradient outer products depend only on the
// mesh and are built once; assemble() may be called repeatedly.
template <int D>
class PeriodicStiffness {
 public:
  static constexpr int kC = PeriodicMesh<D>::kCorners;
  static constexpr int kQ = PeriodicMesh<D>::kQuadPoints;
  static constexpr int kLoc = kC * D;  // element dof count

  explicit PeriodicStiffness(std::shared_ptr<const PeriodicMesh<D>> mesh)
      : mesh_(std::move(mesh)) {
    build_pattern();
    build_quad_outer();
  }

  const PeriodicMesh<D>& mesh() const { return *mesh_; }
  std::shared_ptr<const PeriodicMesh<D>> mesh_ptr() const { return mesh_; }
  std::size_t dof_count() const { return mesh_->node_count() * D; }

  void assemble(const PhaseField<D>& v, const IsotropicMaterial& mat, int phase,
                const InterpolationParams& params) {
    if (v.mesh.get() != mesh_.get()) {
      throw std::invalid_argument("phase field lives on a different mesh");
    }
    if (phase != 0 && phase != 1) throw std::invalid_argument("phase must be 0 or 1");
    params.validate();
    mat_ = mat;
    phase_ = phase;
    params_ = params;

    const std::size_t ne = mesh_->element_count();
    std::fill(vals_.begin(), vals_.end(), 0.0);
    coeff_.resize(ne * kQ);
    vq_.resize(ne * kQ);

    const double mu = mat.mu, lambda = mat.lambda;
    mesh_->for_each_element_colored([&](std::size_t e) {
      const std::int32_t* nodes = mesh_->element_nodes(e);
      std::array<double, kC> local{};
      for (int a = 0; a < kC; ++a) local[a] = v.values[nodes[a]];

      // factor at each quadrature point, weighted by the Simpson weight
      double* coeff = &coeff_[e * kQ];
      double* vq = &vq_[e * kQ];
      for (int q = 0; q < kQ; ++q) {
        const auto& sv = mesh_->quad_values(q);
        double val = 0.0;
        for (int a = 0; a < kC; ++a) val += sv[a] * local[a];
        vq[q] = val;
        coeff[q] = mesh_->quad_weight(q) * stiffness_factor(val, phase, params);
      }

      // M[(a,c),(b,d)] = sum_q coeff_q * dphi_a/dx_c * dphi_b/dx_d
      std::array<double, kLoc * kLoc> M{};
      for (int q = 0; q < kQ; ++q) {
        const double c = coeff[q];
        const double* outer = &quad_outer_[static_cast<std::size_t>(q) * kLoc * kLoc];
        for (int i = 0; i < kLoc * kLoc; ++i) M[i] += c * outer[i];
      }

      const std::int32_t* slots = &element_slots_[e * kC * kC];
      for (int a = 0; a < kC; ++a) {
        for (int b = 0; b < kC; ++b) {
          double* block = &vals_[static_cast<std::size_t>(slots[a * kC + b]) * D * D];
          for (int alpha = 0; alpha < D; ++alpha) {
            for (int beta = 0; beta < D; ++beta) {
              double gdot = 0.0;
              for (int g = 0; g < D; ++g) gdot += M[(a * D + g) * kLoc + b * D + g];
              const double swap = M[(a * D + beta) * kLoc + b * D + alpha];
              const double dil = M[(a * D + alpha) * kLoc + b * D + beta];
              double entry = lambda * dil + mu * swap;
              if (alpha == beta) entry += mu * gdot;
              block[alpha * D + beta] += entry;
            }
          }
        }
      }
    });

    diag_.assign(dof_count(), 0.0);
    parallel_for(mesh_->node_count(), [&](std::size_t node) {
      const std::int32_t slot = find_slot(node, static_cast<std::int32_t>(node));
      for (int alpha = 0; alpha < D; ++alpha) {
        diag_[node * D + alpha] = vals_[static_cast<std::size_t>(slot) * D * D + alpha * D + alpha];
      }
    });
    assembled_ = true;
  }

  bool assembled() const { return assembled_; }
  int phase() const { return phase_; }
  const IsotropicMaterial& material() const { return mat_; }
  const InterpolationParams& interpolation() const { return params_; }
  const std::vector<double>& diagonal() const { return diag_; }

  // y = K x
  void apply(const double* x, double* y) const {
    parallel_for(mesh_->node_count(), [&](std::size_t row) {
      std::array<double, D> acc{};
      for (std::int32_t s = row_ptr_[row]; s < row_ptr_[row + 1]; ++s) {
        const double* block = &vals_[static_cast<std::size_t>(s) * D * D];
        const double* xb = &x[static_cast<std::size_t>(col_[s]) * D];
        for (int alpha = 0; alpha < D; ++alpha) {
          double sum = 0.0;
          for (int beta = 0; beta < D; ++beta) sum += block[alpha * D + beta] * xb[beta];
          acc[alpha] += sum;
        }
      }
      for (int alpha = 0; alpha < D; ++alpha) y[row * D + alpha] = acc[alpha];
    });
  }

  // b_(j,alpha) = -int factor * (C A)_{alpha gamma} dphi_j/dx_gamma
  std::vector<double> rhs(const SymMat<D>& A) const {
    require_assembled();
    const SymMat<D> S = stress(mat_, A);
    std::vector<double> b(dof_count(), 0.0);
    mesh_->for_each_element_colored([&](std::size_t e) {
      const std::int32_t* nodes = mesh_->element_nodes(e);
      const double* coeff = &coeff_[e * kQ];
      std::array<double, kLoc> r{};
      for (int q = 0; q < kQ; ++q) {
        const auto& sg = mesh_->quad_gradients(q);
        for (int a = 0; a < kC; ++a) {
          for (int alpha = 0; alpha < D; ++alpha) {
            double dot = 0.0;
            for (int g = 0; g < D; ++g) dot += S(alpha, g) * sg[a][g];
            r[a * D + alpha] -= coeff[q] * dot;
          }
        }
      }
      for (int a = 0; a < kC; ++a) {
        for (int alpha = 0; alpha < D; ++alpha) {
          b[static_cast<std::size_t>(nodes[a]) * D + alpha] += r[a * D + alpha];
        }
      }
    });
    return b;
  }

  // E = 1/2 int factor * C(A + e[u]) : (A + e[u]) by the quadrature rule
  double energy(const SymMat<D>& A, const std::vector<double>& u) const {
    require_assembled();
    std::vector<double> per_element(mesh_->element_count());
    mesh_->for_each_element_colored([&](std::size_t e) {
      per_element[e] = element_energy(e, A, u, nullptr);
    });
    return chunked_reduce(per_element.size(),
                          [&](std::size_t e) { return per_element[e]; });
  }

  // dE/dv_j = 1/2 int factor'(v) phi_j C(A + e[u]) : (A + e[u])
  std::vector<double> energy_field_gradient(const SymMat<D>& A,
                                            const std::vector<double>& u) const {
    require_assembled();
    std::vector<double> grad(mesh_->node_count(), 0.0);
    mesh_->for_each_element_colored([&](std::size_t e) {
      std::array<double, kC> g{};
      element_energy(e, A, u, &g);
      const std::int32_t* nodes = mesh_->element_nodes(e);
      for (int a = 0; a < kC; ++a) grad[nodes[a]] += g[a];
    });
    return grad;
  }

  // von Mises stress of sigma = factor(v) C (A + e[u]) per element, averaged
  // over the Simpson points with the quadrature weights
  std::vector<double> von_mises(const SymMat<D>& A, const std::vector<double>& u) const {
    require_assembled();
    std::vector<double> vm(mesh_->element_count(), 0.0);
    const double cell_measure = std::pow(mesh_->spacing(), D);
    mesh_->for_each_element_colored([&](std::size_t e) {
      const std::int32_t* nodes = mesh_->element_nodes(e);
      const double* coeff = &coeff_[e * kQ];
      double acc = 0.0;
      for (int q = 0; q < kQ; ++q) {
        const auto& sg = mesh_->quad_gradients(q);
        SymMat<D> eps = A;
        for (int a = 0; a < kC; ++a) {
          for (int alpha = 0; alpha < D; ++alpha) {
            const double ua = u[static_cast<std::size_t>(nodes[a]) * D + alpha];
            for (int g = 0; g < D; ++g) {
              eps.a[alpha][g] += 0.5 * ua * sg[a][g];
              eps.a[g][alpha] += 0.5 * ua * sg[a][g];
            }
          }
        }
        const double w = mesh_->quad_weight(q);
        const double factor = coeff[q] / w;
        SymMat<D> sigma = stress(mat_, eps) * factor;
        const double mean = sigma.trace() / D;
        for (int i = 0; i < D; ++i) sigma.a[i][i] -= mean;
        acc += w * std::sqrt(1.5 * ddot(sigma, sigma));
      }
      vm[e] = acc / cell_measure;
    });
    return vm;
  }

 private:
  void require_assembled() const {
    if (!assembled_) throw std::logic_error("operator has not been assembled");
  }

  double element_energy(std::size_t e, const SymMat<D>& A, const std::vector<double>& u,
                        std::array<double, kC>* dv_scatter) const {
    const std::int32_t* nodes = mesh_->element_nodes(e);
    std::array<double, kLoc> ul{};
    for (int a = 0; a < kC; ++a) {
      for (int alpha = 0; alpha < D; ++alpha) {
        ul[a * D + alpha] = u[static_cast<std::size_t>(nodes[a]) * D + alpha];
      }
    }
    const double* coeff = &coeff_[e * kQ];
    const double* vq = &vq_[e * kQ];
    double energy = 0.0;
    for (int q = 0; q < kQ; ++q) {
      const auto& sg = mesh_->quad_gradients(q);
      SymMat<D> eps = A;
      for (int a = 0; a < kC; ++a) {
        for (int alpha = 0; alpha < D; ++alpha) {
          const double ua = ul[a * D + alpha];
          for (int g = 0; g < D; ++g) {
            eps.a[alpha][g] += 0.5 * ua * sg[a][g];
            eps.a[g][alpha] += 0.5 * ua * sg[a][g];
          }
        }
      }
      const double dens = energy_density(mat_, eps);
      energy += 0.5 * coeff[q] * dens;
      if (dv_scatter) {
        const double w = mesh_->quad_weight(q);
        const double dfac = stiffness_factor_derivative(vq[q], phase_, params_);
        const double scale = 0.5 * w * dfac * dens;
        const auto& sv = mesh_->quad_values(q);
        for (int a = 0; a < kC; ++a) (*dv_scatter)[a] += scale * sv[a];
      }
    }
    return energy;
  }

  void build_pattern() {
    const std::size_t nn = mesh_->node_count();
    std::vector<std::vector<std::int32_t>> rows(nn);
    parallel_for(nn, [&](std::size_t node) {
      auto idx = mesh_->node_multi_index(node);
      std::vector<std::int32_t>& cols = rows[node];
      cols.reserve(ipow(3, D));
      std::array<int, D> off{};
      const int total = ipow(3, D);
      for (int t = 0; t < total; ++t) {
        int rest = t;
        std::array<int, D> nb = idx;
        for (int ax = 0; ax < D; ++ax) {
          nb[ax] += rest % 3 - 1;
          rest /= 3;
        }
        cols.push_back(static_cast<std::int32_t>(mesh_->node_index(nb)));
      }
      (void)off;
      std::sort(cols.begin(), cols.end());
      cols.erase(std::unique(cols.begin(), cols.end()), cols.end());
    });

    row_ptr_.assign(nn + 1, 0);
    for (std::size_t i = 0; i < nn; ++i) {
      row_ptr_[i + 1] = row_ptr_[i] + static_cast<std::int32_t>(rows[i].size());
    }
    col_.resize(static_cast<std::size_t>(row_ptr_[nn]));
    parallel_for(nn, [&](std::size_t i) {
      std::copy(rows[i].begin(), rows[i].end(), col_.begin() + row_ptr_[i]);
    });
    vals_.assign(static_cast<std::size_t>(row_ptr_[nn]) * D * D, 0.0);

    const std::size_t ne = mesh_->element_count();
    element_slots_.resize(ne * kC * kC);
    parallel_for(ne, [&](std::size_t e) {
      const std::int32_t* nodes = mesh_->element_nodes(e);
      for (int a = 0; a < kC; ++a) {
        for (int b = 0; b < kC; ++b) {
          element_slots_[e * kC * kC + a * kC + b] = find_slot(nodes[a], nodes[b]);
        }
      }
    });
  }

  std::int32_t find_slot(std::size_t row, std::int32_t col) const {
    const auto begin = col_.begin() + row_ptr_[row];
    const auto end = col_.begin() + row_ptr_[row + 1];
    const auto it = std::lower_bound(begin, end, col);
    if (it == end || *it != col) throw std::logic_error("missing entry in sparsity pattern");
    return static_cast<std::int32_t>(it - col_.begin());
  }

  void build_quad_outer() {
    quad_outer_.assign(static_cast<std::size_t>(kQ) * kLoc * kLoc, 0.0);
    for (int q = 0; q < kQ; ++q) {
      const auto& sg = mesh_->quad_gradients(q);
      std::array<double, kLoc> gv{};
      for (int a = 0; a < kC; ++a) {
        for (int ax = 0; ax < D; ++ax) gv[a * D + ax] = sg[a][ax];
      }
      double* outer = &quad_outer_[static_cast<std::size_t>(q) * kLoc * kLoc];
      for (int i = 0; i < kLoc; ++i) {
        for (int j = 0; j < kLoc; ++j) outer[i * kLoc + j] = gv[i] * gv[j];
      }
    }
  }

  std::shared_ptr<const PeriodicMesh<D>> mesh_;
  std::vector<std::int32_t> row_ptr_;
  std::vector<std::int32_t> col_;
  std::vector<double> vals_;  // nnzb blocks of D*D
  std::vector<double> diag_;
  std::vector<std::int32_t> element_slots_;
  std::vector<double> quad_outer_;  // per q: (kC*D)^2 gradient products
  std::vector<double> coeff_;      // per (element, q): w_q * factor(v_q)
  std::vector<double> vq_;         // per (element, q): v at the quadrature point
  IsotropicMaterial mat_{1.0, 1.0};
  int phase_ = 0;
  InterpolationParams params_{};
  bool assembled_ = false;
};

template <int D>
PeriodicStiffness<D> assemble_operator(std::shared_ptr<const PeriodicMesh<D>> mesh,
                                       const PhaseField<D>& v, const IsotropicMaterial& mat,
                                       int phase, const InterpolationParams& params) {
  PeriodicStiffness<D> op(std::move(mesh));
  op.assemble(v, mat, phase, params);
  return op;
}

// Subtracts the per-component nodal mean, i.e. projects onto the complement
// of the rigid translations.
template <int D>
void remove_translation_mean(std::vector<double>& x) {
  const std::size_t n = x.size() / D;
  for (int alpha = 0; alpha < D; ++alpha) {
    const double mean =
        chunked_reduce(n, [&](std::size_t i) { return x[i * D + alpha]; }) /
        static_cast<double>(n);
    parallel_for(n, [&](std::size_t i) { x[i * D + alpha] -= mean; });
  }
}

// Jacobi-preconditioned CG on the canonical displacement dofs. The translation
// kernel is handled by projecting the mean out of the iterate, the residual
// and the preconditioned residual every iteration, which is equivalent to an
// explicit Lagrange multiplier for the average value conditions.
template <int D>
CorrectorSolution solve_corrector(
    const PeriodicStiffness<D>& K, const LoadCase<D>& load, const SolveOptions& opts = {},
    const std::vector<double>* warm_start = nullptr,
    const std::function<void(const std::vector<double>&)>& on_iterate = {}) {
  if (!(opts.tol > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
  const std::size_t n = K.dof_count();
  const long max_iter = opts.max_iterations > 0
                            ? opts.max_iterations
                            : static_cast<long>(opts.max_iter_factor) * static_cast<long>(n);

  const std::vector<double>& diag = K.diagonal();
  auto precond = [&](const std::vector<double>& r, std::vector<double>& z) {
    parallel_for(n, [&](std::size_t i) { z[i] = r[i] / diag[i]; });
    remove_translation_mean<D>(z);
  };
  auto dot = [&](const std::vector<double>& a, const std::vector<double>& b) {
    return chunked_reduce(n, [&](std::size_t i) { return a[i] * b[i]; });
  };

  CorrectorSolution sol;
  std::vector<double> b = K.rhs(load.A);
  remove_translation_mean<D>(b);

  std::vector<double> z(n);
  precond(b, z);
  const double rz_b = dot(b, z);
  if (!(rz_b > 0.0)) {  // zero load on the fluctuation space
    sol.displacement.assign(n, 0.0);
    sol.energy = K.energy(load.A, sol.displacement);
    return sol;
  }

  std::vector<double> x = warm_start && warm_start->size() == n
                              ? *warm_start
                              : std::vector<double>(n, 0.0);
  remove_translation_mean<D>(x);
  std::vector<double> r(n), Ap(n), p(n);
  K.apply(x.data(), Ap.data());
  parallel_for(n, [&](std::size_t i) { r[i] = b[i] - Ap[i]; });
  remove_translation_mean<D>(r);
  precond(r, z);
  p = z;
  double rz = dot(r, z);

  double rel = std::sqrt(std::max(rz, 0.0) / rz_b);
  long it = 0;
  while (rel > opts.tol && it < max_iter) {
    K.apply(p.data(), Ap.data());
    const double pAp = dot(p, Ap);
    if (!(pAp > 0.0)) break;  // numerical breakdown on the projected space
    const double alpha = rz / pAp;
    parallel_for(n, [&](std::size_t i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * Ap[i];
    });
    remove_translation_mean<D>(x);
    remove_translation_mean<D>(r);
    precond(r, z);
    const double rz_next = dot(r, z);
    const double beta = rz_next / rz;
    rz = rz_next;
    parallel_for(n, [&](std::size_t i) { p[i] = z[i] + beta * p[i]; });
    ++it;
    rel = std::sqrt(std::max(rz, 0.0) / rz_b);
    if (on_iterate) on_iterate(x);
  }
  if (rel > opts.tol) {
    throw SolverError("corrector solve for load " + load.label + " did not reach " +
                          std::to_string(opts.tol) + " within " + std::to_string(max_iter) +
                          " iterations (residual " + std::to_string(rel) + ")",
                      rel, it);
  }

  sol.displacement = std::move(x);
  sol.iterations = it;
  sol.residual = rel;
  sol.energy = K.energy(load.A, sol.displacement);
  return sol;
}

// Energy and its partial derivative w.r.t. the nodal phase field values. No
// adjoint term is needed: the corrector minimizes the energy, so the envelope
// theorem applies at the solution.
template <int D>
std::pair<double, std::vector<double>> energy_and_field_gradient(
    const PeriodicStiffness<D>& K, const LoadCase<D>& load, const CorrectorSolution& sol) {
  return {K.energy(load.A, sol.displacement),
          K.energy_field_gradient(load.A, sol.displacement)};
}

}  // namespace scaffopt
