#pragma once

#include "cfs/surface.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace cfs {

// Discrete spacetime for the dynamics: weights, spin metric and a time layer per point.
struct DynSpace {
  int spin = 2;
  RVec weights;
  std::vector<RVec> metric;  // diagonal of G_x, nonzero entries
  std::vector<int> layer;
  std::vector<int> site;     // optional spatial label, -1 when absent

  int size() const { return static_cast<int>(weights.size()); }
  int dim() const { return size() * spin; }
  void validate() const;
};

DynSpace dyn_space(const Measure& rho, const std::vector<int>& layer);

// Per-coordinate weights: rho g (Krein), rho |g| (L2), and the Euclidean sign.
RVec krein_weights(const DynSpace& sp);
RVec l2_weights(const DynSpace& sp);
RVec euclidean_signs(const DynSpace& sp);
RVec expand(const DynSpace& sp, const RVec& per_point);

// (Q psi)(x) = sum_y rho(y) Q(x,y) psi(y) as a dense matrix.
Mat apply_matrix(const DynSpace& sp, const BlockKernel& Q);
// Hermitian form psi^dag M phi = sum rho(x) rho(y) <psi(x) | Q(x,y) phi(y)>.
Mat pairing_matrix(const DynSpace& sp, const BlockKernel& Q);

struct DynKernel {
  BlockKernel Q;
  int range = 0;            // largest layer distance with a nonzero block
  double asymmetry = 0;     // ||M - M^dag|| / ||M||
};
DynKernel make_dyn_kernel(const DynSpace& sp, BlockKernel Q, double tol = 1e-12);

struct Foliation {
  RVec t;
  RMat eta;    // steps x points
  RMat theta;  // steps x points

  int steps() const { return static_cast<int>(t.size()); }
  RVec eta_at(int k) const { return eta.row(k).transpose(); }
  RVec theta_at(int k) const { return theta.row(k).transpose(); }
  void validate(double tol = 1e-12) const;
};

// eta_t(x) = logistic((t - tau_x)/width), set to exactly 0 or 1 once within clip of the ends.
Foliation logistic_foliation(const std::vector<double>& tau, const RVec& t, double width,
                             double clip = 1e-16);
// theta from second-order differences of the supplied profiles.
Foliation foliation_from_eta(const RVec& t, const RMat& eta);
RVec uniform_grid(double t0, double t1, int steps);

struct QdynBuild {
  DynKernel dyn;
  BlockKernel R;
  std::vector<double> strip_residual;  // ||chi_L (Q^reg - R) Psi|| / ||chi_L Q^reg Psi||
  double r_asymmetry = 0;
};
QdynBuild build_qdyn(const DynSpace& sp, const BlockKernel& Qreg, const std::vector<int>& strip,
                     const Mat& targets, double tol = 1e-10);

std::vector<double> dynamical_residual(const DynSpace& sp, const BlockKernel& Q, const Vec& psi,
                                       const std::vector<int>& strip);

// Hermitian matrix of the softened form at an arbitrary profile eta.
Mat softened_gram(const DynSpace& sp, const BlockKernel& Q, const RVec& eta);
cplx softened_product(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol, int k,
                      const Vec& psi, const Vec& phi);
// Compact-support rewriting over the strip [k0, k].
cplx softened_product_strip(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol, int k0,
                            int k, const Vec& psi, const Vec& phi);
cplx sharp_product(const DynSpace& sp, const BlockKernel& Q, const Region& omega, const Vec& psi,
                   const Vec& phi);

cplx krein_product(const DynSpace& sp, const Vec& psi, const Vec& phi);
cplx krein_strip(const DynSpace& sp, const Foliation& fol, int k0, int k1, const Vec& psi,
                 const Vec& phi);
cplx l2_strip(const DynSpace& sp, const Foliation& fol, int k0, int k1, const Vec& psi,
              const Vec& phi);
double layer_norm2(const DynSpace& sp, const Foliation& fol, int k, const Vec& psi);

struct EnergyIdentityReport {
  double deviation = 0;  // max over interior steps
  double scale = 0;
  std::vector<double> per_step;
};
EnergyIdentityReport energy_identity_check(const DynSpace& sp, const BlockKernel& Q,
                                           const Foliation& fol, const Vec& psi, const Vec& phi);

struct HyperbolicityReport {
  double C = 0;
  std::vector<double> c2_per_step;
  int worst_step = -1;
  double min_eigenvalue = 0;  // relative, most negative eigenvalue of the form
};
// Largest generalized eigenvalue of B against A per step; refuses on indefinite A.
HyperbolicityReport hyperbolicity_from_grams(const std::vector<Mat>& A, const std::vector<Mat>& B,
                                             double tol = 1e-10);
HyperbolicityReport hyperbolicity_constant(const DynSpace& sp, const BlockKernel& Q,
                                           const Foliation& fol, int k0, int k1, const Mat& basis,
                                           double tol = 1e-10);
double gamma_constant(double C, double t0, double tmax);

// Columns of basis lying in the test space C-bar at step k: supported where eta_k = 1 and
// with vanishing surface norm from step k on.
Mat test_space(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol, int k,
               const Mat& basis, double tol = 1e-12);
// Columns with vanishing initial surface norm and support where eta_k0 = 0.
Mat zero_initial_space(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol, int k0,
                       const Mat& basis, double tol = 1e-12);

struct WeakSolution {
  Vec psi;
  Vec V;
  int rank = 0;
  int test_dim = 0;
  double weak_residual = 0;  // max over test vectors, relative
  double gamma = 0;
  double norm_psi = 0, norm_w = 0;
  bool bound_ok = false;
};
WeakSolution solve_weak(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol, int k0,
                        int k1, const Vec& w, const Mat& tests, double C, double rank_tol = 1e-12);

struct EnergyEstimateReport {
  double initial_norm = 0;
  double ees1_lhs = 0, ees1_rhs = 0;
  double ees2_lhs = 0, ees2_rhs = 0;
  bool ok = false;
};
EnergyEstimateReport energy_estimates_check(const DynSpace& sp, const BlockKernel& Q,
                                            const Foliation& fol, int k0, int k1, const Vec& psi,
                                            double C, double slack = 1e-9);

struct GreenFormulaReport {
  double deviation = 0;
  double scale = 0;
};
GreenFormulaReport greens_formula_check(const DynSpace& sp, const BlockKernel& Q,
                                        const Foliation& fol, int k0, int k1, const Vec& psi,
                                        const Vec& phi);

// Macroscopic wave functions grouped into time slots.
struct SlotBasis {
  Mat basis;
  std::vector<int> slot;
  int slots = 0;
  int per_slot = 0;
};
// Functions constant over blocks of block_len layers, one column per (block, site, spin).
SlotBasis block_basis(const DynSpace& sp, int block_len);
// Foliation whose transitions fall in the middle of the blocks.
Foliation block_foliation(const DynSpace& sp, int block_len, double width, double dt,
                          double clip = 1e-16);

struct GreensOperators {
  SlotBasis vary;
  Mat M;         // M restricted to the basis
  int q = 0;     // slot range of M
  Mat ret, adv;  // functionals f = basis^dag K w  ->  coefficients of s w
  double shielding = 0;  // smallest relative singular value of the diagonal strip blocks
  double upper = 0;      // relative size of the acausal part of the strip systems

  Vec functional(const DynSpace& sp, const Vec& w) const;
  Vec retarded(const DynSpace& sp, const Vec& w) const;
  Vec advanced(const DynSpace& sp, const Vec& w) const;
  Vec fundamental(const DynSpace& sp, const Vec& w) const;
  // coefficients of the strip solution of Q psi = w for slots [a, b]
  Vec strip_solution(const Vec& f, int a, int b) const;
};
GreensOperators greens_operators(const DynSpace& sp, const BlockKernel& Q, const SlotBasis& vary,
                                 double tol = 1e-10);

struct StabilizationReport {
  double inner_change = 0;  // max relative change on inner slots as the window grows
  double past_residual = 0; // size before the support of w
  int windows = 0;
};
StabilizationReport stabilization_check(const GreensOperators& g, const Vec& f, int first, int last);

struct RankInfo {
  int rank = 0;
  double gap = 0;  // retained smallest / discarded largest
  bool clean = false;
};
RankInfo numerical_rank(const Mat& A, double rel_tol = 1e-10, double gap_min = 1e3);

struct ExactSequenceReport {
  int dim_w0 = 0;
  int rank_q_w0 = 0;
  int dim_tc = 0;
  int dim_ker_k = 0;
  double ker_k_contains = 0;  // residual of Q(W0) inside ker k
  int rank_k = 0;
  int dim_we = 0;
  int dim_ker_q = 0;
  double ker_q_contains = 0;  // residual of im k inside ker Q
  int rank_q_we = 0;
  int dim_target = 0;
  double q_k_residual = 0;
  double min_gap = 0;
  bool ambiguous = false;
  bool exact() const;
};
ExactSequenceReport exact_sequence_check(const GreensOperators& g, double gap_min = 1e3);

struct CutoffOperator {
  Mat pi;
  int k0 = 0, k1 = 0;
};
double cutoff_violation(const DynSpace& sp, const Foliation& fol, const CutoffOperator& c);
CutoffOperator region_cutoff(const DynSpace& sp, const Region& past, int k0, int k1);
cplx cutoff_current(const DynSpace& sp, const BlockKernel& Q, const Mat& pi, const Vec& psi,
                    const Vec& phi);
cplx cutoff_current(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol,
                    const CutoffOperator& c, const Vec& psi, const Vec& phi, double tol = 1e-12);

// Strong solution by marching through the layers; the first 2r layers of psi0 are kept.
Vec march(const DynSpace& sp, const BlockKernel& Q, int range, const Vec& psi0);

struct PropagationReport {
  double localize_residual = 0;
  double conservation = 0;
  double norm_omega = 0, norm_omega2 = 0;  // <(1-eta)psi|(1-eta)psi> on both sets
  bool premise = false;
  bool holds = false;
};
PropagationReport propagation_check(const DynSpace& sp, const BlockKernel& Q, const Region& omega,
                                    const Region& omega2, const RVec& eta, const Vec& psi,
                                    const Mat& vary, double tol = 1e-8);

// Smallest and largest site with a nonzero entry per layer, -1 when empty.
std::vector<std::pair<int, int>> support_extent(const DynSpace& sp, const Vec& psi,
                                                double tol = 1e-13);

struct ChainConfig {
  int layers = 16;
  int sites = 1;
  double a = 0.05, b = 0.2;   // time couplings at distance 1 and 2
  double c_space = 0.1;
  double mass = 0.1;
  double eps = 0.01;          // random banded Hermitian part
  std::uint64_t seed = 1;
};
struct Chain {
  DynSpace space;
  DynKernel dyn;
};
Chain make_chain(const ChainConfig& cfg);

}  // namespace cfs
