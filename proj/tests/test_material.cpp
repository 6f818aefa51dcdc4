#include <doctest.h>

#include <random>

#include "scaffopt/material.hpp"

using namespace scaffopt;

TEST_CASE("Young/Poisson conversion") {
  // at nu = 1/4 the Lame parameters coincide
  const IsotropicMaterial mat = from_young_poisson(10.0, 0.25);
  CHECK(mat.mu == doctest::Approx(4.0).epsilon(1e-15));
  CHECK(mat.lambda == doctest::Approx(4.0).epsilon(1e-15));

  CHECK(from_young_poisson(2.6, 0.3).mu == doctest::Approx(1.0).epsilon(1e-14));

  CHECK(mat.young() == doctest::Approx(10.0).epsilon(1e-12));
  CHECK(mat.poisson() == doctest::Approx(0.25).epsilon(1e-12));

  CHECK_THROWS_AS(from_young_poisson(10.0, 0.6), std::invalid_argument);
  CHECK_THROWS_AS(from_young_poisson(10.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(from_young_poisson(-1.0, 0.3), std::invalid_argument);
  CHECK_THROWS_AS(IsotropicMaterial(1.0, 0.0), std::invalid_argument);
}

TEST_CASE("stress of simple strains") {
  const IsotropicMaterial mat(4.0, 4.0);

  const SymMat<3> eye = SymMat<3>::identity();
  const SymMat<3> s = stress(mat, eye);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      CHECK(s(i, j) == doctest::Approx(i == j ? 20.0 : 0.0).epsilon(1e-15));
    }
  }

  const SymMat<3> shear = SymMat<3>::outer_sym(0, 1, 1.0);
  const SymMat<3> t = stress(mat, shear);
  CHECK(t(0, 1) == doctest::Approx(2.0 * mat.mu).epsilon(1e-15));
  CHECK(t(1, 0) == doctest::Approx(2.0 * mat.mu).epsilon(1e-15));
  CHECK(t(0, 0) == 0.0);
  CHECK(t(2, 2) == 0.0);

  const SymMat<3> zero{};
  const SymMat<3> z = stress(mat, zero);
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) CHECK(z(i, j) == 0.0);
  }
}

TEST_CASE("energy density of simple strains") {
  const IsotropicMaterial mat(4.0, 4.0);
  CHECK(energy_density(mat, SymMat<3>::identity()) == doctest::Approx(60.0).epsilon(1e-15));

  // shear load A12 with beta = -0.25: A:A = 2 beta^2
  const SymMat<3> shear = SymMat<3>::outer_sym(0, 1, -0.25);
  CHECK(energy_density(mat, shear) == doctest::Approx(1.0).epsilon(1e-15));

  CHECK(energy_density(mat, SymMat<3>{}) == 0.0);
}

TEST_CASE("energy density is the quadratic form of the stress") {
  std::mt19937_64 rng(11);
  auto uniform = [&] { return 2.0 * ((rng() >> 11) * 0x1.0p-53) - 1.0; };
  const IsotropicMaterial mat(1.7, 0.9);
  for (int trial = 0; trial < 50; ++trial) {
    SymMat<3> eps;
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j <= i; ++j) {
        eps.a[i][j] = eps.a[j][i] = uniform();
      }
    }
    const double direct = energy_density(mat, eps);
    const double via_stress = ddot(stress(mat, eps), eps);
    CHECK(direct == doctest::Approx(via_stress).epsilon(1e-13));
    if (ddot(eps, eps) > 1e-12) CHECK(direct > 0.0);
  }
}
