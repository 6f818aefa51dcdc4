#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "scaffopt/objective.hpp"

namespace scaffopt {

struct OptimizerConfig {
  int max_iterations = 500;
  double grad_tol = 1e-4;    // stop when ||projected grad||_inf <= grad_tol * (1 + |J|)
  double armijo_c = 1e-4;
  double step_shrink = 0.5;
  double box_bound = 1.25;
  int max_backtracks = 60;

  void validate() const {
    if (max_iterations < 0) throw std::invalid_argument("max_iterations must be >= 0");
    if (!(grad_tol > 0.0)) throw std::invalid_argument("grad_tol must be positive");
    if (!(armijo_c > 0.0 && armijo_c < 1.0)) {
      throw std::invalid_argument("armijo_c must lie in (0, 1)");
    }
    if (!(step_shrink > 0.0 && step_shrink < 1.0)) {
      throw std::invalid_argument("step_shrink must lie in (0, 1)");
    }
    if (!(box_bound > 1.0)) throw std::invalid_argument("box bound must exceed 1");
  }
};

// Feasible set: box bounds plus the linear center-of-mass equalities. The
// CoM correction is a closed-form rank-d update along the precomputed moment
// vectors; clamp and correction alternate until both hold, which takes one
// pass unless the clamp was active near the faces.
template <int D>
class FeasibleProjector {
 public:
  FeasibleProjector(std::shared_ptr<const PeriodicMesh<D>> mesh, double box_bound)
      : mesh_(std::move(mesh)), box_(box_bound), moments_(moment_vectors(*mesh_)) {
    for (int i = 0; i < D; ++i) {
      for (int j = 0; j < D; ++j) {
        gram_[i][j] = chunked_reduce(mesh_->node_count(), [&](std::size_t n) {
          return moments_[i][n] * moments_[j][n];
        });
      }
    }
  }

  double box_bound() const { return box_; }
  const std::array<std::vector<double>, D>& moments() const { return moments_; }

  std::array<double, D> com(const std::vector<double>& v) const {
    std::array<double, D> c{};
    for (int i = 0; i < D; ++i) {
      c[i] = chunked_reduce(v.size(), [&](std::size_t n) { return moments_[i][n] * v[n]; });
    }
    return c;
  }

  void project(std::vector<double>& v) const {
    if (v.size() != mesh_->node_count()) {
      throw std::invalid_argument("field size does not match the projector's mesh");
    }
    for (int pass = 0; pass < 64; ++pass) {
      parallel_for(v.size(), [&](std::size_t n) { v[n] = std::clamp(v[n], -box_, box_); });
      const auto c = com(v);
      const auto alpha = solve_gram(c);
      parallel_for(v.size(), [&](std::size_t n) {
        double corr = 0.0;
        for (int i = 0; i < D; ++i) corr += alpha[i] * moments_[i][n];
        v[n] -= corr;
      });
      double violation = 0.0;
      for (double x : v) violation = std::max(violation, std::abs(x) - box_);
      if (violation <= 1e-14) return;
    }
  }

 private:
  std::array<double, D> solve_gram(std::array<double, D> rhs) const {
    std::array<std::array<double, D>, D> a = gram_;
    std::array<double, D> x = rhs;
    for (int k = 0; k < D; ++k) {  // Gaussian elimination with partial pivoting
      int piv = k;
      for (int i = k + 1; i < D; ++i) {
        if (std::abs(a[i][k]) > std::abs(a[piv][k])) piv = i;
      }
      std::swap(a[k], a[piv]);
      std::swap(x[k], x[piv]);
      for (int i = k + 1; i < D; ++i) {
        const double f = a[i][k] / a[k][k];
        for (int j = k; j < D; ++j) a[i][j] -= f * a[k][j];
        x[i] -= f * x[k];
      }
    }
    for (int k = D - 1; k >= 0; --k) {
      for (int j = k + 1; j < D; ++j) x[k] -= a[k][j] * x[j];
      x[k] /= a[k][k];
    }
    return x;
  }

  std::shared_ptr<const PeriodicMesh<D>> mesh_;
  double box_;
  std::array<std::vector<double>, D> moments_;
  std::array<std::array<double, D>, D> gram_{};
};

// One objective evaluation as seen by the optimizer; the diagnostic fields
// feed the iteration log and may be left at zero by synthetic objectives.
struct ObjectiveProbe {
  double value = 0.0;
  std::vector<double> gradient;
  double smooth_max_value = 0.0;
  double phase_cost0 = 0.0;
  double phase_cost1 = 0.0;
  double perimeter = 0.0;
  std::vector<double> com;
  long cg_iterations = 0;
};

using ObjectiveHandle =
    std::function<ObjectiveProbe(const std::vector<double>&, bool want_gradient)>;

struct IterationLog {
  int iter = 0;
  double total = 0.0;
  double smooth_max_value = 0.0;
  double phase_cost0 = 0.0;
  double phase_cost1 = 0.0;
  double perimeter = 0.0;
  double max_com = 0.0;
  double step = 0.0;
  double move_sq = 0.0;    // ||v_k - v_{k-1}||_2^2 of the accepted step
  double grad_norm = 0.0;  // ||projected gradient||_inf at the iterate
  long cg_iterations = 0;  // CG work since the previous accepted iterate
};

struct RunRecord {
  int level_nodes = 0;
  double eps = 0.0;
  std::vector<IterationLog> iterations;  // [0] is the initial point
  std::vector<double> final_field;
  double final_total = std::numeric_limits<double>::quiet_NaN();
  std::string stop_reason;
  double wall_seconds = 0.0;
  // continuation bookkeeping: J carried over from the coarser level and the
  // initial J on this level evaluated at the coarser level's eps
  double carried_total = std::numeric_limits<double>::quiet_NaN();
  double initial_total_prev_eps = std::numeric_limits<double>::quiet_NaN();
};

namespace detail {

inline double inf_norm(const std::vector<double>& v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

inline double max_abs(const std::vector<double>& v) { return inf_norm(v); }

}  // namespace detail

// Projected gradient descent with Armijo backtracking along the projection
// arc. Every accepted iterate is feasible and the accepted J sequence is
// strictly decreasing.
template <int D>
RunRecord minimize(const ObjectiveHandle& objective, const FeasibleProjector<D>& projector,
                   std::vector<double> v, const OptimizerConfig& cfg,
                   const std::function<void(const IterationLog&)>& on_iteration = {}) {
  cfg.validate();
  const auto t0 = std::chrono::steady_clock::now();
  RunRecord record;

  projector.project(v);
  ObjectiveProbe probe;
  try {
    probe = objective(v, true);
  } catch (const std::exception& err) {
    record.final_field = std::move(v);
    record.stop_reason = std::string("objective evaluation failed: ") + err.what();
    return record;
  }

  auto log_state = [&](int iter, double step, double move_sq, double grad_norm, long cg) {
    IterationLog entry;
    entry.iter = iter;
    entry.total = probe.value;
    entry.smooth_max_value = probe.smooth_max_value;
    entry.phase_cost0 = probe.phase_cost0;
    entry.phase_cost1 = probe.phase_cost1;
    entry.perimeter = probe.perimeter;
    entry.max_com = probe.com.empty() ? 0.0 : detail::max_abs(probe.com);
    entry.step = step;
    entry.move_sq = move_sq;
    entry.grad_norm = grad_norm;
    entry.cg_iterations = cg;
    record.iterations.push_back(entry);
    if (on_iteration) on_iteration(entry);
  };

  // projected gradient norm with reference step 1
  auto projected_grad_inf = [&]() {
    std::vector<double> ref(v.size());
    parallel_for(v.size(), [&](std::size_t i) { ref[i] = v[i] - probe.gradient[i]; });
    projector.project(ref);
    double m = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) m = std::max(m, std::abs(v[i] - ref[i]));
    return m;
  };

  double grad_norm = projected_grad_inf();
  log_state(0, 0.0, 0.0, grad_norm, probe.cg_iterations);

  double step_prev = -1.0;
  int iter = 1;
  for (; iter <= cfg.max_iterations; ++iter) {
    if (grad_norm <= cfg.grad_tol * (1.0 + std::abs(probe.value))) {
      record.stop_reason = "gradient tolerance reached";
      break;
    }
    const double g_inf = detail::inf_norm(probe.gradient);
    double step = 1.0 / g_inf;
    if (step_prev > 0.0) step = std::min(2.0 * step_prev, step);

    bool accepted = false;
    ObjectiveProbe trial_probe;
    std::vector<double> trial;
    double move2 = 0.0;
    long cg_spent = 0;
    for (int bt = 0; bt <= cfg.max_backtracks; ++bt) {
      trial = v;
      parallel_for(trial.size(),
                   [&](std::size_t i) { trial[i] -= step * probe.gradient[i]; });
      projector.project(trial);
      move2 = chunked_reduce(trial.size(), [&](std::size_t i) {
        const double d = trial[i] - v[i];
        return d * d;
      });
      if (move2 == 0.0) break;  // projection blocks every component
      try {
        trial_probe = objective(trial, true);
      } catch (const std::exception& err) {
        record.final_field = std::move(v);
        record.final_total = probe.value;
        record.stop_reason = std::string("objective evaluation failed: ") + err.what();
        record.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return record;
      }
      cg_spent += trial_probe.cg_iterations;
      if (trial_probe.value <= probe.value - cfg.armijo_c / step * move2) {
        accepted = true;
        break;
      }
      step *= cfg.step_shrink;
    }
    if (!accepted) {
      record.stop_reason = "line search step collapsed";
      break;
    }
    v = std::move(trial);
    probe = std::move(trial_probe);
    step_prev = step;
    grad_norm = projected_grad_inf();
    log_state(iter, step, move2, grad_norm, cg_spent);
  }
  if (record.stop_reason.empty()) record.stop_reason = "iteration limit reached";

  record.final_field = std::move(v);
  record.final_total = probe.value;
  record.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return record;
}

// Portable uniform draw in [-1, 1] from the raw 64-bit stream, so seeded runs
// do not depend on the standard library's distribution implementation.
inline double uniform_symmetric(std::mt19937_64& rng) {
  return 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0;
}

template <int D>
struct ContinuationProblem {
  std::array<IsotropicMaterial, 2> materials;
  std::array<std::vector<LoadCase<D>>, 2> loads;
  CostParams cost;
  InterpolationParams interpolation;
  SolveOptions solve;
};

struct ContinuationHooks {
  // return true when a finished field for this level was loaded
  std::function<bool(int level_nodes, std::vector<double>& field)> try_resume;
  std::function<void(int level_nodes, const RunRecord&)> on_level_complete;
  std::function<void(int level_nodes, const IterationLog&)> on_iteration;
};

template <int D>
struct ContinuationResult {
  std::vector<RunRecord> levels;
  PhaseField<D> field;
};

// Coarse-to-fine continuation: uniform random values in [-1, 1] seed the
// coarsest level, each optimum is prolongated to the next level, and the
// interface width is refreshed to eps = 2h for the new grid size.
template <int D>
ContinuationResult<D> continuation_run(const ContinuationProblem<D>& problem,
                                       const std::vector<int>& schedule,
                                       const OptimizerConfig& cfg, std::uint64_t seed,
                                       const ContinuationHooks& hooks = {}) {
  if (schedule.empty()) throw std::invalid_argument("empty continuation schedule");
  for (std::size_t i = 0; i + 1 < schedule.size(); ++i) {
    if (schedule[i + 1] <= schedule[i] || (schedule[i + 1] - 1) % (schedule[i] - 1) != 0) {
      throw std::invalid_argument(
          "continuation schedule must be strictly increasing with nested grids");
    }
  }

  ContinuationResult<D> result;
  std::shared_ptr<const PeriodicMesh<D>> mesh;
  std::vector<double> field;
  double carried_total = std::numeric_limits<double>::quiet_NaN();
  double prev_eps = 0.0;

  for (std::size_t level = 0; level < schedule.size(); ++level) {
    const int n = schedule[level];
    auto fine = build_mesh<D>(n);
    if (level == 0) {
      field.resize(fine->node_count());
      std::mt19937_64 rng(seed);
      for (double& x : field) x = uniform_symmetric(rng);
    } else {
      field = prolongate(*mesh, field, *fine);
    }
    mesh = std::move(fine);
    const double eps = 2.0 * mesh->spacing();

    ObjectiveEvaluator<D> evaluator(
        mesh, problem.materials, problem.loads,
        ObjectiveSettings{problem.cost, problem.interpolation, eps, problem.solve});
    auto handle = [&evaluator, mesh](const std::vector<double>& x,
                                     bool want_gradient) -> ObjectiveProbe {
      PhaseField<D> f(mesh, x);
      ObjectiveEvaluation eval = evaluator.evaluate(f, want_gradient);
      ObjectiveProbe probe;
      probe.value = eval.total;
      probe.gradient = std::move(eval.gradient);
      probe.smooth_max_value = eval.smooth_max_value;
      probe.phase_cost0 = eval.phase_cost[0];
      probe.phase_cost1 = eval.phase_cost[1];
      probe.perimeter = eval.perimeter_energy;
      probe.com = eval.com;
      probe.cg_iterations = eval.cg_iterations;
      return probe;
    };

    FeasibleProjector<D> projector(mesh, cfg.box_bound);

    std::vector<double> resumed;
    if (hooks.try_resume && hooks.try_resume(n, resumed) &&
        resumed.size() == mesh->node_count()) {
      RunRecord record;
      record.level_nodes = n;
      record.eps = eps;
      record.final_field = std::move(resumed);
      record.final_total = handle(record.final_field, false).value;
      record.stop_reason = "resumed from checkpoint";
      field = record.final_field;
      carried_total = record.final_total;
      prev_eps = eps;
      result.levels.push_back(std::move(record));
      continue;
    }

    double initial_prev_eps = std::numeric_limits<double>::quiet_NaN();
    if (level > 0) {
      // the eps-refresh discrepancy: same field and mesh, previous width
      ObjectiveEvaluator<D> prev_eval(
          mesh, problem.materials, problem.loads,
          ObjectiveSettings{problem.cost, problem.interpolation, prev_eps, problem.solve});
      PhaseField<D> f(mesh, field);
      initial_prev_eps = prev_eval.evaluate(f, false).total;
    }

    auto on_iter = [&](const IterationLog& entry) {
      if (hooks.on_iteration) hooks.on_iteration(n, entry);
    };
    RunRecord record = minimize(handle, projector, field, cfg, on_iter);
    record.level_nodes = n;
    record.eps = eps;
    record.carried_total = carried_total;
    record.initial_total_prev_eps = initial_prev_eps;

    field = record.final_field;
    carried_total = record.final_total;
    prev_eps = eps;
    if (hooks.on_level_complete) hooks.on_level_complete(n, record);
    result.levels.push_back(std::move(record));
  }

  result.field = PhaseField<D>(mesh, std::move(field));
  return result;
}

}  // namespace scaffopt
