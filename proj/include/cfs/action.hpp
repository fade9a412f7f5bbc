#pragma once

#include "cfs/core.hpp"

#include <optional>
#include <string>
#include <vector>

namespace cfs {

// Weighted finite point set; its support is the discrete spacetime.
struct Measure {
  SpaceSpec space;
  std::vector<Point> points;
  std::vector<double> weights;
  Mat hf;  // f x dim_hf orthonormal basis of the distinguished subspace

  int size() const { return static_cast<int>(points.size()); }
  int spin_dim() const { return 2 * space.n; }
  int wave_dim() const { return size() * spin_dim(); }
  void validate() const;
  void prune();
};

Mat default_hf(const SpaceSpec& s);
Measure make_measure(const SpaceSpec& s, std::vector<Point> pts, std::vector<double> w = {});
Measure conjugate(const Measure& rho, const Mat& U);
Measure random_measure(const SpaceSpec& s, int npoints, Rng& rng);

// Pairwise L_kappa matrix, fixed summation order.
RMat lagrangian_matrix(const Measure& rho, double kappa);

struct ActionReport {
  double action = 0;
  double volume = 0;
  double trace_integral = 0;
  double boundedness = 0;
  double s_param = 0;
};

ActionReport causal_action(const Measure& rho, double kappa);

double ell(const Measure& rho, const Point& x, double kappa, double s);
RVec ell_values(const Measure& rho, double kappa, double s);
double fit_s(const Measure& rho, double kappa);

// Scalar component a per point and a Hermitian f x f direction per point (empty = zero).
struct TestJet {
  RVec a;
  std::vector<Mat> v;
  std::string label;
};

enum class JetSpace { scalar_only, rotations, full };
std::vector<TestJet> default_test_jets(const Measure& rho, JetSpace space = JetSpace::full);

struct ELConfig {
  double fd_step = 1e-5;  // relative to the operator norm
  std::optional<double> s;  // fitted as the mean over the support when absent
};

struct ELResidual {
  RVec ell_values;
  double max_abs_ell_on_M = 0;
  double min_ell_offsupport = 0;
  RVec weak_residuals;
  double s_param = 0;
  double r_param = 0;
  double r_residual = 0;  // relative residual of the trace-multiplier fit
};

ELResidual el_residual(const Measure& rho, double kappa, const std::vector<TestJet>& jets,
                       const std::vector<Point>& probes, const ELConfig& cfg = {});

struct MinimizeConfig {
  int max_iter = 200;
  int patience = 20;
  double step = 0.05;
  double weight_step = 0.05;
  double tol = 1e-12;
  double fd_step = 1e-5;
};

struct TraceRow {
  int iter;
  double action, volume, boundedness, max_ell;
};

struct MinimizeResult {
  Measure measure;
  ActionReport report;
  bool converged = false;
  int iterations = 0;
  std::vector<TraceRow> trace;
};

MinimizeResult minimize(const Measure& rho0, double kappa, const MinimizeConfig& cfg = {});

// Orbit {U^k x0 U^-k} of a seed point with uniform weights; repeated points are merged.
Measure symmetric_critical_generator(int group_size, const SpaceSpec& s, const Point& seed,
                                     const Mat& U);

// Regular-polygon orbit on the equator of a 2-plane of C^f, rotated by `embed`.
// Each point's own pi-rotation preserves the orbit, so every commutator derivative of ell vanishes.
Measure polygon_orbit(int group_size, int dim_f, double c, double beta, const Mat& embed);

// Ambient Hermitian gradient of sum_j rho_j L_kappa(x, x_j) with respect to x.
Mat ell_gradient(const Measure& rho, const Point& x, double kappa);
// Tangent, trace-free part of an ambient gradient at x.
Mat tangent_tracefree(const Point& x, const Mat& g);

}  // namespace cfs
