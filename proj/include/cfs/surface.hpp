#pragma once

#include "cfs/kernels.hpp"

#include <vector>

namespace cfs {

// Membership flag per point of M.
using Region = std::vector<char>;

Region region_from_indices(int npoints, const std::vector<int>& idx);
std::vector<int> region_indices(const Region& omega);

// Jet with a fixed Hermitian direction per point, no scalar part.
TestJet vector_jet(const std::vector<Mat>& v);
TestJet commutator_test_jet(const Mat& A, const Measure& rho);

// Finite-difference routes.
double gamma(const Measure& rho, const Region& omega, const TestJet& v, double kappa,
             const DerivConfig& cfg = {});
double sigma(const Measure& rho, const Region& omega, const TestJet& u, const TestJet& v,
             double kappa, const DerivConfig& cfg = {});

// Contractions with Q for commutator jets C(x) = i[A,x].
double d1_commutator(const Point& x, const Point& y, const Mat& Qxy, const Mat& A);
double gamma_commutator(const Measure& rho, const Region& omega, const BlockKernel& Q, const Mat& A);
// sigma(C(A), C(B)) from the one-form of the bracket jet.
double sigma_commutator(const Measure& rho, const Region& omega, const BlockKernel& Q, const Mat& A,
                        const Mat& B);

// Gram matrix G_K of <.|.>^Omega on stacked frame-coordinate wave functions.
Mat surface_form_gram(const Measure& rho, const Region& omega, const BlockKernel& Q);
cplx surface_form(const Measure& rho, const Region& omega, const BlockKernel& Q, const Vec& psi,
                  const Vec& phi);
cplx commutator_inner_product(const Measure& rho, const Region& omega, const BlockKernel& Q,
                              const Vec& u, const Vec& v);
// Polarization of gamma(C(.)) along rank-one generators, finite differences.
cplx commutator_inner_product_polarized(const Measure& rho, const Region& omega, double kappa,
                                        const Vec& u, const Vec& v, const DerivConfig& cfg = {});

struct RepresentationReport {
  Mat gram;                  // <.|.>^Omega on the hf basis
  double c = 0;              // best-fit constant
  double deviation = 0;      // ||gram - c 1|| / |c|
  bool represents = false;
  std::vector<double> gamma_values;  // gamma(C(A)) per generator
  std::vector<double> trace_values;  // c tr A per generator
};
RepresentationReport represents_scalar_check(const Measure& rho, const Region& omega,
                                             const BlockKernel& Q, const std::vector<Mat>& generators,
                                             double tol = 1e-9);

// |gamma^Omega(v) - gamma^Omega'(v)| per jet.
std::vector<double> conservation_check(const Measure& rho, const Region& omega, const Region& omega2,
                                       const std::vector<TestJet>& jets, double kappa,
                                       const DerivConfig& cfg = {});

// Operator norm of a block in the |x|-weighted spin norms.
double block_norm(const Point& x, const Point& y, const Mat& q);
RVec surface_layer_measure(const Measure& rho, const Region& omega, const BlockKernel& Qreg);
Mat adapted_gram(const Measure& rho, const RVec& mu);
cplx adapted_l2(const Measure& rho, const RVec& mu, const Vec& psi, const Vec& phi);

struct SurfaceHilbert {
  RVec mu;
  Mat GW;  // positive semidefinite, block diagonal
  Mat GK;  // Hermitian
  std::vector<int> active;  // points with positive surface weight
};
SurfaceHilbert surface_hilbert(const Measure& rho, const Region& omega, const BlockKernel& Qreg);

}  // namespace cfs
