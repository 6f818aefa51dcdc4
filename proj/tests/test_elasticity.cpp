#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "scaffopt/elasticity.hpp"

using namespace scaffopt;

namespace {

template <int D>
PhaseField<D> random_field(std::shared_ptr<const PeriodicMesh<D>> mesh, std::uint64_t seed,
                           double amplitude = 0.9) {
  std::mt19937_64 rng(seed);
  PhaseField<D> v(std::move(mesh));
  for (double& x : v.values) x = amplitude * (2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0);
  return v;
}

const IsotropicMaterial kMat(4.0, 4.0);  // E=10, nu=0.25
const InterpolationParams kParams{1e-4, Interpolation::kLinear};

}  // namespace

TEST_CASE("load construction and labels") {
  const auto load = make_load<3>("A23", -0.25);
  CHECK(load.A(1, 2) == -0.25);
  CHECK(load.A(2, 1) == -0.25);
  CHECK(load.A(0, 0) == 0.0);
  CHECK(ddot(load.A, load.A) == doctest::Approx(2 * 0.0625).epsilon(1e-15));

  CHECK(make_load<2>("A11", 1.0).A(0, 0) == 1.0);
  CHECK_THROWS_AS(make_load<2>("A23", 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_load<3>("A32", 1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_load<3>("A11", 0.0), std::invalid_argument);
  CHECK(canonical_loads<3>(-0.25).size() == 6);
  CHECK(canonical_loads<2>(-0.25).size() == 3);
}

TEST_CASE("uniform fields give factor-scaled operators and zero correctors") {
  auto mesh = build_mesh<3>(5);
  PhaseField<3> hard(mesh, 1.0), soft(mesh, -1.0);
  PeriodicStiffness<3> k_hard(mesh), k_soft(mesh);
  k_hard.assemble(hard, kMat, 0, kParams);
  k_soft.assemble(soft, kMat, 0, kParams);

  std::mt19937_64 rng(17);
  std::vector<double> x(k_hard.dof_count());
  for (double& xi : x) xi = 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0;
  std::vector<double> y_hard(x.size()), y_soft(x.size());
  k_hard.apply(x.data(), y_hard.data());
  k_soft.apply(x.data(), y_soft.data());
  double scale = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    scale = std::max(scale, std::abs(y_soft[i] - kParams.delta * y_hard[i]));
  }
  CHECK(scale < 1e-12 * oracles::max_abs(y_hard));

  // translations span the kernel
  std::vector<double> shift(x.size());
  for (std::size_t node = 0; node < mesh->node_count(); ++node) {
    shift[node * 3 + 0] = 0.7;
    shift[node * 3 + 1] = -0.2;
    shift[node * 3 + 2] = 1.3;
  }
  std::vector<double> out(x.size());
  k_hard.apply(shift.data(), out.data());
  CHECK(oracles::max_abs(out) < 1e-12 * oracles::max_abs(y_hard));

  // constant coefficients admit the zero corrector
  const auto load = make_load<3>("A11", -0.25);
  const auto sol = solve_corrector(k_hard, load);
  CHECK(oracles::max_abs(sol.displacement) < 1e-12);
  CHECK(sol.energy == doctest::Approx(0.5 * energy_density(kMat, load.A)).epsilon(1e-12));
}

TEST_CASE("uniform hydrostatic energy matches the closed form") {
  // A = beta * I, mu = lambda = 4, beta = -0.25:
  // E = 1/2 (2 mu 3 beta^2 + lambda 9 beta^2) = 1.875
  auto mesh = build_mesh<3>(5);
  PhaseField<3> v(mesh, 1.0);
  PeriodicStiffness<3> K(mesh);
  K.assemble(v, kMat, 0, kParams);
  LoadCase<3> load{SymMat<3>::identity() * -0.25, "AII"};
  const auto sol = solve_corrector(K, load);
  CHECK(sol.energy == doctest::Approx(1.875).epsilon(1e-12));
}

TEST_CASE("CG corrector matches a dense bordered-Lagrange solve") {
  SUBCASE("2D") {
    auto mesh = build_mesh<2>(5);
    const auto v = random_field<2>(mesh, 23);
    PeriodicStiffness<2> K(mesh);
    K.assemble(v, kMat, 0, kParams);
    const auto load = make_load<2>("A12", -0.25);
    const auto cg = solve_corrector(K, load, {1e-12, -1, 50});
    const auto dense = oracles::dense_corrector(K, load);
    const double dense_energy = K.energy(load.A, dense);
    CHECK(cg.energy == doctest::Approx(dense_energy).epsilon(1e-8));
    CHECK(oracles::max_abs_diff(cg.displacement, dense) < 1e-8);
  }
  SUBCASE("3D") {
    auto mesh = build_mesh<3>(5);
    const auto v = random_field<3>(mesh, 29);
    PeriodicStiffness<3> K(mesh);
    K.assemble(v, kMat, 0, kParams);
    const auto load = make_load<3>("A13", -0.25);
    const auto cg = solve_corrector(K, load, {1e-12, -1, 50});
    const auto dense = oracles::dense_corrector(K, load);
    CHECK(cg.energy == doctest::Approx(K.energy(load.A, dense)).epsilon(1e-8));
    CHECK(oracles::max_abs_diff(cg.displacement, dense) < 1e-8);
  }
}

TEST_CASE("two-layer laminate matches the closed-form rank-1 formula") {
  auto mesh = build_mesh<2>(33);
  PhaseField<2> v(mesh);
  for (std::size_t n = 0; n < mesh->node_count(); ++n) {
    v.values[n] = mesh->node_position(n)[1] < 0.5 ? 1.0 : -1.0;
  }
  PeriodicStiffness<2> K(mesh);
  K.assemble(v, kMat, 0, kParams);

  SymMat<2> stretch;
  stretch(0, 0) = 1.0;  // in-plane, parallel to the layers
  const auto sol = solve_corrector(K, LoadCase<2>{stretch, "A11"}, {1e-10, -1, 50});

  const double exact =
      oracles::laminate_energy<2>(kMat, 1.0, kMat, kParams.delta, 0.5, 1, stretch);
  const double voigt = 0.5 * (1.0 + kParams.delta) * 0.5 * energy_density(kMat, stretch);
  const double reuss_like = kParams.delta * 0.5 * energy_density(kMat, stretch);
  CHECK(sol.energy > reuss_like);
  CHECK(sol.energy < voigt);
  CHECK(sol.energy == doctest::Approx(exact).epsilon(0.02));
}

TEST_CASE("energy gradient w.r.t. the phase field matches finite differences") {
  auto mesh = build_mesh<2>(5);
  const auto v = random_field<2>(mesh, 31);
  const auto load = make_load<2>("A11", -0.25);
  const SolveOptions opts{1e-11, -1, 50};

  PeriodicStiffness<2> K(mesh);
  K.assemble(v, kMat, 0, kParams);
  const auto sol = solve_corrector(K, load, opts);
  const auto [energy, grad] = energy_and_field_gradient(K, load, sol);
  CHECK(energy == doctest::Approx(sol.energy).epsilon(1e-14));

  const auto fd = oracles::finite_difference_gradient(
      v.values,
      [&](const std::vector<double>& values) {
        PhaseField<2> probe(mesh, values);
        PeriodicStiffness<2> Kp(mesh);
        Kp.assemble(probe, kMat, 0, kParams);
        return solve_corrector(Kp, load, opts).energy;
      },
      1e-5);
  CHECK(oracles::max_abs_diff(grad, fd) / oracles::max_abs(grad) < 1e-4);
}

TEST_CASE("phase swap symmetry: E(phase 0, v) == E(phase 1, -v)") {
  auto mesh = build_mesh<3>(5);
  const auto v = random_field<3>(mesh, 37);
  PhaseField<3> neg(mesh);
  for (std::size_t n = 0; n < v.values.size(); ++n) neg.values[n] = -v.values[n];

  const auto load = make_load<3>("A23", -0.25);
  PeriodicStiffness<3> K0(mesh), K1(mesh);
  K0.assemble(v, kMat, 0, kParams);
  K1.assemble(neg, kMat, 1, kParams);
  const auto e0 = solve_corrector(K0, load, {1e-10, -1, 50});
  const auto e1 = solve_corrector(K1, load, {1e-10, -1, 50});
  CHECK(e0.energy == doctest::Approx(e1.energy).epsilon(1e-12));
}

TEST_CASE("energy optimality: any admissible field costs at least the corrector energy") {
  auto mesh = build_mesh<2>(5);
  const auto v = random_field<2>(mesh, 41);
  PeriodicStiffness<2> K(mesh);
  K.assemble(v, kMat, 0, kParams);
  const auto load = make_load<2>("A22", -0.25);
  const auto sol = solve_corrector(K, load, {1e-11, -1, 50});

  std::vector<double> zero(K.dof_count(), 0.0);
  CHECK(K.energy(load.A, zero) >= sol.energy - 1e-13);

  std::mt19937_64 rng(43);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> w(K.dof_count());
    for (double& x : w) x = 0.1 * (2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0);
    remove_translation_mean<2>(w);
    CHECK(K.energy(load.A, w) >= sol.energy - 1e-13);
  }
}

TEST_CASE("CG iterates decrease the elastic energy monotonically") {
  auto mesh = build_mesh<2>(7);
  const auto v = random_field<2>(mesh, 47);
  PeriodicStiffness<2> K(mesh);
  K.assemble(v, kMat, 0, kParams);
  const auto load = make_load<2>("A11", -0.25);

  double last = std::numeric_limits<double>::infinity();
  bool monotone = true;
  solve_corrector(K, load, {1e-9, -1, 50}, nullptr, [&](const std::vector<double>& x) {
    const double e = K.energy(load.A, x);
    if (e > last + 1e-12 * std::abs(last)) monotone = false;
    last = e;
  });
  CHECK(monotone);
}

TEST_CASE("coordinate relabeling permutes load energies") {
  auto mesh = build_mesh<3>(7);
  PhaseField<3> v(mesh);  // depends on x1 only, symmetric in x2 <-> x3
  for (std::size_t n = 0; n < mesh->node_count(); ++n) {
    v.values[n] = std::sin(2.0 * M_PI * mesh->node_position(n)[0]);
  }
  PeriodicStiffness<3> K(mesh);
  K.assemble(v, kMat, 0, kParams);
  const SolveOptions opts{1e-10, -1, 50};
  const double e22 = solve_corrector(K, make_load<3>("A22", -0.25), opts).energy;
  const double e33 = solve_corrector(K, make_load<3>("A33", -0.25), opts).energy;
  const double e12 = solve_corrector(K, make_load<3>("A12", -0.25), opts).energy;
  const double e13 = solve_corrector(K, make_load<3>("A13", -0.25), opts).energy;
  CHECK(e22 == doctest::Approx(e33).epsilon(1e-10));
  CHECK(e12 == doctest::Approx(e13).epsilon(1e-10));
}

TEST_CASE("achieved energy is invariant under whole-period shifts of v") {
  auto mesh = build_mesh<3>(5);
  const auto v = random_field<3>(mesh, 53);
  PhaseField<3> shifted(mesh);
  for (std::size_t n = 0; n < mesh->node_count(); ++n) {
    auto idx = mesh->node_multi_index(n);
    idx[0] += 2;
    idx[2] += 1;
    shifted.values[mesh->node_index(idx)] = v.values[n];
  }
  const auto load = make_load<3>("A12", -0.25);
  const SolveOptions opts{1e-11, -1, 50};
  PeriodicStiffness<3> K(mesh);
  K.assemble(v, kMat, 0, kParams);
  const double e = solve_corrector(K, load, opts).energy;
  K.assemble(shifted, kMat, 0, kParams);
  const double e_shift = solve_corrector(K, load, opts).energy;
  CHECK(e == doctest::Approx(e_shift).epsilon(1e-10));
}

TEST_CASE("von Mises stress of uniform states") {
  auto mesh = build_mesh<3>(3);
  PhaseField<3> v(mesh, 1.0);
  PeriodicStiffness<3> K(mesh);
  K.assemble(v, kMat, 0, kParams);
  std::vector<double> zero(K.dof_count(), 0.0);

  // hydrostatic stress has zero deviator
  const SymMat<3> hydro = SymMat<3>::identity() * 0.3;
  for (double vm : K.von_mises(hydro, zero)) CHECK(std::abs(vm) < 1e-13);

  // pure shear: vm = sqrt(3) |sigma_12|
  const SymMat<3> shear = SymMat<3>::outer_sym(0, 1, -0.25);
  const double s12 = 2.0 * kMat.mu * 0.25;
  for (double vm : K.von_mises(shear, zero)) {
    CHECK(vm == doctest::Approx(std::sqrt(3.0) * s12).epsilon(1e-12));
  }

  // uniaxial stress: vm = |sigma_11|
  SymMat<3> uni;
  uni(0, 0) = 1.0;
  const double b = -kMat.lambda / (2.0 * (kMat.mu + kMat.lambda));
  uni(1, 1) = uni(2, 2) = b;
  const double s11 = 2.0 * kMat.mu + kMat.lambda * (1.0 + 2.0 * b);
  for (double vm : K.von_mises(uni, zero)) {
    CHECK(vm == doctest::Approx(std::abs(s11)).epsilon(1e-12));
  }
}

TEST_CASE("solver reports non-convergence") {
  auto mesh = build_mesh<2>(9);
  const auto v = random_field<2>(mesh, 59);
  PeriodicStiffness<2> K(mesh);
  K.assemble(v, kMat, 0, kParams);
  const auto load = make_load<2>("A11", -0.25);
  CHECK_THROWS_AS(solve_corrector(K, load, {1e-12, 2, 10}), SolverError);
}
