#pragma once

#include "cfs/action.hpp"

#include <string>
#include <vector>

namespace cfs {

enum class KernelKind { p, full, reg, sing, dyn, r };
std::string to_string(KernelKind k);
KernelKind kernel_kind_from_string(const std::string& s);

// Point-pair indexed family of 2n x 2n blocks, (i,j) maps S_{x_j} -> S_{x_i}.
struct BlockKernel {
  int npoints = 0;
  int spin = 0;
  KernelKind kind = KernelKind::full;
  std::vector<Mat> blocks;
  std::vector<char> flagged;  // pairs where the finite-difference fallback was used

  BlockKernel() = default;
  BlockKernel(int N, int k, KernelKind kind);
  Mat& at(int i, int j) { return blocks[static_cast<size_t>(i * npoints + j)]; }
  const Mat& at(int i, int j) const { return blocks[static_cast<size_t>(i * npoints + j)]; }
  Mat dense() const;
  static BlockKernel from_dense(const Mat& m, int N, int k, KernelKind kind);
};

BlockKernel operator-(const BlockKernel& a, const BlockKernel& b);
BlockKernel operator*(double s, const BlockKernel& a);

// Spin adjoint of a block S_y -> S_x: G_y^{-1} A^dagger G_x.
Mat spin_adjoint(const Mat& a, const RVec& gx, const RVec& gy);
double kernel_asymmetry(const BlockKernel& k, const Measure& rho);

BlockKernel fermionic_projector_kernel(const Measure& rho);

// g(P) = L_kappa evaluated from the chain P G_y^{-1} P^dagger G_x.
double chain_functional(const Mat& P, const RVec& gx, const RVec& gy, int n, double kappa);

struct QBlock {
  Mat q;
  bool fallback = false;
};
// Q with  dL = 2 Re Tr(Q dP*)  for P as a free 2n x 2n block.
QBlock q_from_p(const Mat& P, const RVec& gx, const RVec& gy, int n, double kappa);
QBlock q_block(const Point& x, const Point& y, double kappa);
BlockKernel q_kernel(const Measure& rho, double kappa);

// Wave functions: one 2n-spinor per point, stacked.
Vec physical_wave(const Measure& rho, const Vec& u);
Mat physical_waves(const Measure& rho);  // columns psi^u for the hf basis

struct QsingReport {
  bool accepted = true;
  double max_support_residual = 0;   // Q^sing applied to physical waves
  double max_surface_residual = 0;   // surface contribution on Omega
  std::vector<double> per_u;
};

// Q^reg = Q - Q^sing after checking both vanishing conditions.
BlockKernel q_reg_split(const BlockKernel& Q, const BlockKernel& Qsing, const Measure& rho,
                        const std::vector<char>& omega, double tol, QsingReport* report = nullptr);

struct CommutatorJet {
  Mat generator;
  std::vector<Mat> field;  // i[A, x_i]
};

Mat commutator_field(const Mat& A, const Point& x);
CommutatorJet commutator_jet(const Mat& A, const Measure& rho, double tol = 1e-12);
// Rank-one generator |u><u|.
Mat rank_one(const Vec& u);

// u(x) = -dPsi* Psi - Psi* dPsi with dPsi a 2n x f map vanishing on the complement of hf.
Mat fermionic_field(const Point& x, const Mat& dpsi);

struct DerivConfig {
  double h = 1e-3;  // relative step
  bool richardson = true;
};

// First derivatives along Hermitian directions in each slot (empty = zero).
double directional_derivative_L(const Point& x, const Point& y, const Mat& v1, const Mat& v2,
                                double kappa, const DerivConfig& cfg = {});
// d/ds d/dt L(x + s u1, y + t v2)
double mixed_derivative_L(const Point& x, const Point& y, const Mat& u1, const Mat& v2,
                          double kappa, const DerivConfig& cfg = {});
// D_v ell(x) with ell the measure average, slot-1 derivative only.
double ell_derivative(const Measure& rho, const Point& x, const Mat& v, double kappa,
                      const DerivConfig& cfg = {});

// <u, Delta v>(x_i) for all i via nested central differences.
RVec linearized_field_residual(const Measure& rho, const std::vector<Mat>& v,
                               const TestJet& u, double kappa, double ds_dv = 0.0,
                               const DerivConfig& cfg = {});

}  // namespace cfs
