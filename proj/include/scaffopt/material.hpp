#pragma once

#include <array>
#include <cmath>
#include <stdexcept>

namespace scaffopt {

template <int D>
using Vec = std::array<double, D>;

// Small dense d x d matrix used for strains, stresses and macroscopic loads.
// Kept symmetric by construction in all call sites.
template <int D>
struct SymMat {
  std::array<std::array<double, D>, D> a{};

  double& operator()(int i, int j) { return a[i][j]; }
  double operator()(int i, int j) const { return a[i][j]; }

  static SymMat identity() {
    SymMat m;
    for (int i = 0; i < D; ++i) m.a[i][i] = 1.0;
    return m;
  }

  static SymMat outer_sym(int i, int j, double value) {
    SymMat m;
    m.a[i][j] += value;
    m.a[j][i] += value;
    return m;
  }

  double trace() const {
    double t = 0.0;
    for (int i = 0; i < D; ++i) t += a[i][i];
    return t;
  }

  SymMat operator+(const SymMat& o) const {
    SymMat r;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) r.a[i][j] = a[i][j] + o.a[i][j];
    return r;
  }

  SymMat operator-(const SymMat& o) const {
    SymMat r;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) r.a[i][j] = a[i][j] - o.a[i][j];
    return r;
  }

  SymMat operator*(double s) const {
    SymMat r;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) r.a[i][j] = a[i][j] * s;
    return r;
  }
};

template <int D>
double ddot(const SymMat<D>& x, const SymMat<D>& y) {
  double s = 0.0;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) s += x.a[i][j] * y.a[i][j];
  return s;
}

// Isotropic linear elastic material, stored as the Lame pair. Young/Poisson
// are input conveniences; all kernels work on (mu, lambda).
struct IsotropicMaterial {
  double mu = 0.0;
  double lambda = 0.0;

  IsotropicMaterial(double mu_, double lambda_) : mu(mu_), lambda(lambda_) {
    if (!(mu > 0.0) || !(lambda > 0.0)) {
      throw std::invalid_argument("material requires mu > 0 and lambda > 0");
    }
  }

  // standard 3D relations; the inverse map below round-trips to ~1e-15
  double young() const { return mu * (3.0 * lambda + 2.0 * mu) / (lambda + mu); }
  double poisson() const { return lambda / (2.0 * (lambda + mu)); }
};

inline IsotropicMaterial from_young_poisson(double young, double nu) {
  if (!(young > 0.0)) throw std::invalid_argument("Young's modulus must be positive");
  if (!(nu > 0.0 && nu < 0.5)) {
    throw std::invalid_argument("Poisson ratio must lie in (0, 1/2)");
  }
  const double mu = young / (2.0 * (1.0 + nu));
  const double lambda = young * nu / ((1.0 + nu) * (1.0 - 2.0 * nu));
  return IsotropicMaterial(mu, lambda);
}

// sigma = 2 mu eps + lambda tr(eps) I
template <int D>
SymMat<D> stress(const IsotropicMaterial& mat, const SymMat<D>& eps) {
  SymMat<D> s;
  const double lt = mat.lambda * eps.trace();
  for (int i = 0; i < D; ++i) {
    for (int j = 0; j < D; ++j) s.a[i][j] = 2.0 * mat.mu * eps.a[i][j];
    s.a[i][i] += lt;
  }
  return s;
}

// C eps : eps = 2 mu eps:eps + lambda tr(eps)^2
template <int D>
double energy_density(const IsotropicMaterial& mat, const SymMat<D>& eps) {
  const double tr = eps.trace();
  return 2.0 * mat.mu * ddot(eps, eps) + mat.lambda * tr * tr;
}

}  // namespace scaffopt
