#pragma once

#include "cfs/core.hpp"

#include <array>
#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace cfs {

using Vec3 = Eigen::Vector3d;

// Dirac representation, signature (+,-,-,-).
struct DiracStructure {
  std::array<Mat, 4> gamma;
  double mass = 1.0;

  // k-slash for the contravariant momentum (k0, k): k0 g^0 - k.g
  Mat slash(double k0, const Vec3& k) const;
  double omega(const Vec3& k) const { return std::sqrt(k.squaredNorm() + mass * mass); }
  // max over mu,nu of ||{g^mu, g^nu} - 2 eta^{mu nu}||
  double clifford_residual() const;
};
DiracStructure dirac_structure(double mass);

// Orthonormal basis (4 x 2) of solutions of (k-slash - m) psi = 0 at k0 = sign * omega(k).
struct ShellSolution {
  Vec3 k;
  int sign = 1;
  Mat basis;
  double residual = 0;
};
ShellSolution shell_solution(const DiracStructure& d, const Vec3& k, int sign);

struct Polynomial {
  std::vector<double> c;  // c[0] + c[1] x + ...
  double operator()(double x) const;
};

// Q(k) = a(q^2) kslash/|k| + b(q^2) inside the lower mass cone.
struct QhatModel {
  Polynomial a, b;
  Mat evaluate(const DiracStructure& d, double k0, const Vec3& k) const;
};

struct StateStabilityReport {
  double min_a = 0;
  double value_at_shell = 0;
  double grid_min = 0;
  double argmin_q2 = 0;
  bool a_nonnegative = false;
  bool minimal_on_shell = false;
  bool passes() const { return a_nonnegative && minimal_on_shell; }
};
StateStabilityReport state_stability_check(const QhatModel& model, const std::vector<double>& masses,
                                           const std::vector<double>& q2_grid, double tol = 1e-12);

using QhatEvaluator = std::function<Mat(double omega, const Vec3& k)>;

// Solvable family: the model plus alpha(|k|^2) (kslash_- - m) and a kink
// cprime ((|w - w_k| + |w + w_k|)/2 - w_k) g^0, zero on both shells, with derivative jump cprime g^0.
struct MinkowskiModel {
  double mass = 1.0;
  QhatModel q;
  Polynomial alpha;
  double cprime = 0;
  QhatEvaluator evaluator(const DiracStructure& d) const;
};

struct MomentumGrid {
  std::vector<Vec3> k;
  std::vector<double> w;  // trapezoidal weights including (2 pi)^-3
};
MomentumGrid momentum_grid(int n, double kmax);

struct RhatPoint {
  Vec3 k;
  double h = 0;
  double upper_residual = 0;  // relative, after the correction
  double lower_residual = 0;
  double lower_annihilation = 0;  // ||(kslash_- - m) psi_-||, zero by the ansatz
};
struct RhatResult {
  std::vector<RhatPoint> points;
  double max_upper = 0, max_lower = 0;
  bool sufficient = false;
  Mat R(const DiracStructure& d, size_t i) const;
};
// Fits h per momentum so that Q-dyn annihilates the upper shell. Extra masses add their
// shells to the same least-squares problem; a single h cannot in general cancel them all.
RhatResult rhat_construct(const QhatEvaluator& qreg, const MomentumGrid& grid, const DiracStructure& d,
                          double tol = 1e-10, const std::vector<double>& extra_masses = {});

// Q-dyn(w, k) = Q-reg(w, k) + R(k).
QhatEvaluator qdyn_hat(const QhatEvaluator& qreg, const std::function<Mat(const Vec3&)>& rhat);

// (d+ + d-) Q at (w, k) from one-sided five-point stencils.
Mat derivative_jump(const QhatEvaluator& q, double omega, const Vec3& k, double step);

struct ShellData {
  std::vector<Vec> plus, minus;  // 4-spinors per grid point
};
ShellData random_shell_data(const DiracStructure& d, const MomentumGrid& grid, Rng& rng);

struct MomentumProduct {
  cplx value;
  double cprime = 0;                     // least-squares fit of the jump to cprime g^0
  std::vector<double> current_deviation; // per grid point, max over both shells, relative
  double max_deviation = 0;
  cplx dirac_current;                    // c * cprime * sum w psi^dag phi
};
MomentumProduct momentum_surface_product(const QhatEvaluator& q, const DiracStructure& d,
                                         const MomentumGrid& grid, const ShellData& psi,
                                         const ShellData& phi, double c = 1.0, double step = 1e-3);

// Light-cone subtraction hook: the subtracted kernel must vanish in the lower mass cone.
struct SingSupportReport {
  double max_inside = 0;
  int checked = 0;
  bool ok = false;
};
SingSupportReport qsing_support_check(const std::function<Mat(double, const Vec3&)>& qsing,
                                      const std::vector<std::array<double, 4>>& momenta, double tol = 1e-12);
QhatEvaluator subtract(const QhatEvaluator& q, const QhatEvaluator& qsing);

// Fourier integral of prod 1/(w - p_j) e^{-iwt} along Im w = c: residues versus quadrature.
cplx contour_residues(const std::vector<cplx>& poles, double c, double t);
cplx contour_quadrature(const std::vector<cplx>& poles, double c, double t, double cutoff = 2000,
                        double dx = 1e-2);

}  // namespace cfs
