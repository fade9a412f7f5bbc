#pragma once

#include "cfs/surface.hpp"

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

namespace cfs {

// Coordinates of the wave-function space kept after dropping points with zero surface weight.
std::vector<int> active_coordinates(const std::vector<int>& points, int spin);
Mat restrict_gram(const Mat& G, const std::vector<int>& coords);
Vec restrict_vec(const Vec& v, const std::vector<int>& coords);
Vec embed_vec(const Vec& v, const std::vector<int>& coords, int full_dim);

struct RieszOperator {
  Mat S;                  // on the active coordinates
  std::vector<int> coords;
  double gw_min = 0;      // smallest eigenvalue of G_W on the quotient
  double sigma_min = 0;   // smallest singular value of S, relative to the largest
  bool injective = false;
  double relation_residual = 0;  // ||G_W S - G_K|| / ||G_K||
};

RieszOperator riesz_from_grams(const Mat& GW, const Mat& GK, double tol = 1e-10);
RieszOperator riesz_operator(const SurfaceHilbert& h, int spin, bool strict = false,
                             double tol = 1e-10);

// F maps point i of rho to point F[i] of rho-tilde.
Mat transport_map(const Measure& rho, const Measure& rt, const std::vector<int>& F);
Mat t_operator(const Mat& pi, const Mat& GW, const Mat& GWt);

struct SqrtReport {
  double residual = 0;        // ||sqrtB^2 - B|| / ||B||
  double cut_distance = 0;    // min distance of spec(B) to (-inf, 0], relative to ||B||
  double eigvec_cond = 0;
};
Mat operator_sqrt(const Mat& B, SqrtReport* report = nullptr, double cut_tol = 1e-12,
                  double cond_max = 1e10);

struct AdmissibilityReport {
  bool s_injective = false;
  bool st_injective = false;
  bool t_injective = false;
  bool pi_surjective = false;
  bool b_bounded = false;
  bool spectrum_ok = false;
  double t_min = 0, pi_min = 0;
  double b_norm = 0;
  double isometry_residual = 0;
  SqrtReport sqrt;
  bool admissible() const {
    return s_injective && st_injective && t_injective && pi_surjective && b_bounded && spectrum_ok;
  }
};

struct ExtensionOperators {
  std::vector<int> coords;  // active coordinates, shared by both spacetimes
  int full_dim = 0;
  Mat GK, GKt, GW, GWt;
  Mat S, St, pi, T, B, sqrtB, I;
  AdmissibilityReport report;

  // I applied to a full-length wave function over rho-tilde; zeros on inactive points.
  Vec apply(const Vec& psi_t) const;
};

struct IsometryConfig {
  bool strict = false;  // refuse instead of quotienting null points
  double tol = 1e-10;
  int check_pairs = 20;
  std::uint64_t seed = 1;
};

ExtensionOperators build_isometry(const Measure& rho, const Measure& rt, const Region& omega,
                                  const BlockKernel& Qreg, const BlockKernel& Qreg_t,
                                  const std::vector<int>& F, const IsometryConfig& cfg = {});

std::vector<int> identity_map(int n);

// One-parameter family tau -> rho-tilde_tau with rho-tilde_0 = rho and identity point map.
using VariationFamily = std::function<Measure(double)>;
VariationFamily conjugation_family(const Measure& rho, const Mat& A);

// I(tau) and the first-order prediction 1 + (tau/2)(pi1 + S^-1 (pi1 - T1) S + S^-1 S1).
struct FirstOrderReport {
  Mat I1_predicted;
  std::vector<double> steps;
  std::vector<double> errors;  // ||I(tau) - 1 - tau I1|| per step
  double order = 0;            // fitted log-log slope
};
FirstOrderReport first_order_check(const Measure& rho, const Region& omega, double kappa,
                                   const VariationFamily& family, const std::vector<double>& steps,
                                   double h = 1e-5);

struct ExtendedSpace {
  Mat basis;           // columns, full-length wave functions over rho
  Mat gram;            // <.|.>^Omega on the basis
  int positive = 0, negative = 0;
  int dropped = 0;     // null directions removed
  bool positive_definite = false;
};

// Spans psi^u (u in the hf basis) and I_k psi-tilde^u_k.
ExtendedSpace extend_space(const Measure& rho, const Region& omega, const BlockKernel& Qreg,
                           const std::vector<ExtensionOperators>& ops,
                           const std::vector<Measure>& varied, double tol = 1e-10);

// d/dtau I(tau) psi-tilde^u_tau at tau = 0, central differences with one Richardson step.
Vec extension_derivative(const Measure& rho, const Region& omega, double kappa,
                         const VariationFamily& family, const Vec& u, double h = 1e-4);

struct CompatibilityInput {
  // indexed [pair][u]: DPsi(v, u) over rho for both past sets
  std::vector<std::vector<Vec>> dpsi, dpsi2;
  // optional holomorphic parts z and z-bar, same indexing
  std::vector<std::vector<Vec>> dz, dz2, dzbar, dzbar2;
  // jets for the sigma check against commutator jets of the generators
  std::vector<TestJet> jets;
  std::vector<Mat> generators;
  double kappa = 0;
};

struct CompatibilityReport {
  double apres0 = 0;  // max deviation over (v, u, u')
  double apres = 0;   // max deviation over (v, u, v', u')
  double c0 = 0, c1 = 0, c2 = 0, c3 = 0;
  bool holomorphic = false;
  double sigma_preserve = 0;  // max |sigma^Omega(C, v)|
  double scale = 0;           // max modulus entering the comparisons
};

CompatibilityReport compatibility_check(const Measure& rho, const Region& omega, const Region& omega2,
                                        const BlockKernel& Qreg, const CompatibilityInput& in,
                                        const DerivConfig& cfg = {});

}  // namespace cfs
