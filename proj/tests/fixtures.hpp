#pragma once

#include "cfs/scenario.hpp"

#include <utility>
#include <vector>

namespace cfs::fx {

// Six-point polygon orbit in C^12; every commutator derivative of ell vanishes on it.
inline Mat hexagon_embedding() {
  Rng rng(3);
  return random_unitary(12, rng);
}
inline Measure hexagon() { return polygon_orbit(6, 12, 1.0, 0.7, hexagon_embedding()); }
constexpr double hexagon_kappa = 0.2;

inline std::vector<Region> hexagon_regions() {
  return {region_from_indices(6, {0, 1, 2}), region_from_indices(6, {1, 2, 3}),
          region_from_indices(6, {0, 2, 4}), region_from_indices(6, {0, 1, 3})};
}
inline std::vector<std::pair<int, int>> hexagon_pairs() { return {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}}; }

// Every point moved by a relative amount eps and every weight scaled by 1 +- eps.
inline Measure perturbed(const Measure& rho, double eps, Rng& rng) {
  Measure out = rho;
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < rho.size(); ++i) {
    const Mat x = rho.points[static_cast<size_t>(i)].op();
    Mat h = random_hermitian(rho.space.dim_f, rng);
    h *= eps * x.norm() / h.norm();
    const Point p = project_rank(x + h, rho.space.n);
    out.points[static_cast<size_t>(i)] = make_point(p.frame(), p.spectrum(), rho.space.c);
    out.weights[static_cast<size_t>(i)] *= 1.0 + eps * u(rng);
  }
  return out;
}

// Sum over pairs of |D_{1,C} L|, the natural size of gamma for a commutator jet.
inline double commutator_scale(const Measure& rho, const Mat& A, double kappa) {
  double s = 0;
  for (int i = 0; i < rho.size(); ++i)
    for (int j = 0; j < rho.size(); ++j) {
      const Point& x = rho.points[static_cast<size_t>(i)];
      const Point& y = rho.points[static_cast<size_t>(j)];
      s += rho.weights[static_cast<size_t>(i)] * rho.weights[static_cast<size_t>(j)] *
           std::abs(directional_derivative_L(x, y, commutator_field(A, x), Mat(), kappa));
    }
  return s;
}

inline Chain chain(int layers, int sites = 1, std::uint64_t seed = 1) {
  ChainConfig c;
  c.layers = layers;
  c.sites = sites;
  c.seed = seed;
  return make_chain(c);
}

constexpr int block = 4;
constexpr double width = 0.25;
constexpr double dt = 0.05;

inline Foliation foliation(const DynSpace& sp) { return block_foliation(sp, block, width, dt); }

// Coefficient vector supported on slots [a, b].
inline Vec slot_coefficients(const SlotBasis& v, int a, int b, Rng& rng) {
  Vec f = Vec::Zero(v.basis.cols());
  const Mat r = random_gaussian(static_cast<int>(f.size()), 1, rng);
  for (Eigen::Index c = 0; c < f.size(); ++c) {
    const int s = v.slot[static_cast<size_t>(c)];
    if (s >= a && s <= b) f(c) = r(c, 0);
  }
  return f;
}

// (a + b)(m^2) = 0, so one h per momentum clears the upper shell.
inline MinkowskiModel solvable_model() {
  MinkowskiModel m;
  m.mass = 1.0;
  m.q.a.c = {0.5, 0.1};
  m.q.b.c = {-0.2, -0.7, 0.3};
  m.alpha.c = {0.4, -0.2};
  m.cprime = 0.7;
  return m;
}

inline double rel(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-300}); }

}  // namespace cfs::fx
