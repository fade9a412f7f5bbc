#include "cfs/surface.hpp"

#include <cmath>
#include <limits>

namespace cfs {

namespace {

bool has_dir(const TestJet& j, int i) {
  return !j.v.empty() && j.v[static_cast<size_t>(i)].size() > 0;
}

Mat dir_or_empty(const TestJet& j, int i) { return has_dir(j, i) ? j.v[static_cast<size_t>(i)] : Mat(); }

double scalar_at(const TestJet& j, int i) { return j.a.size() > 0 ? j.a(i) : 0.0; }

void check_region(const Measure& rho, const Region& omega) {
  if (static_cast<int>(omega.size()) != rho.size())
    throw Refusal("region size does not match the number of points");
}

// +1 for Omega x complement, -1 for the reverse pair.
int side_sign(const Region& omega, int i, int j) {
  if (omega[static_cast<size_t>(i)] && !omega[static_cast<size_t>(j)]) return 1;
  if (!omega[static_cast<size_t>(i)] && omega[static_cast<size_t>(j)]) return -1;
  return 0;
}

// nabla derivatives of L for one ordered pair
double nabla1(const Point& x, const Point& y, double ax, const Mat& vx, double L, double kappa,
              const DerivConfig& cfg) {
  double d = ax * L;
  if (vx.size() > 0) d += directional_derivative_L(x, y, vx, Mat(), kappa, cfg);
  return d;
}

double nabla2(const Point& x, const Point& y, double ay, const Mat& vy, double L, double kappa,
              const DerivConfig& cfg) {
  double d = ay * L;
  if (vy.size() > 0) d += directional_derivative_L(x, y, Mat(), vy, kappa, cfg);
  return d;
}

double nabla12(const Point& x, const Point& y, const TestJet& u, int i, const TestJet& v, int j,
               double L, double kappa, const DerivConfig& cfg) {
  const double au = scalar_at(u, i), av = scalar_at(v, j);
  const Mat ux = dir_or_empty(u, i), vy = dir_or_empty(v, j);
  double d = au * av * L;
  if (vy.size() > 0 && au != 0) d += au * directional_derivative_L(x, y, Mat(), vy, kappa, cfg);
  if (ux.size() > 0 && av != 0) d += av * directional_derivative_L(x, y, ux, Mat(), kappa, cfg);
  if (ux.size() > 0 && vy.size() > 0) d += mixed_derivative_L(x, y, ux, vy, kappa, cfg);
  return d;
}

}  // namespace

Region region_from_indices(int npoints, const std::vector<int>& idx) {
  Region r(static_cast<size_t>(npoints), 0);
  for (int i : idx) {
    if (i < 0 || i >= npoints) throw Refusal("region index out of range");
    r[static_cast<size_t>(i)] = 1;
  }
  return r;
}

std::vector<int> region_indices(const Region& omega) {
  std::vector<int> out;
  for (size_t i = 0; i < omega.size(); ++i)
    if (omega[i]) out.push_back(static_cast<int>(i));
  return out;
}

TestJet vector_jet(const std::vector<Mat>& v) {
  TestJet j;
  j.a = RVec::Zero(static_cast<Eigen::Index>(v.size()));
  j.v = v;
  j.label = "vector";
  return j;
}

TestJet commutator_test_jet(const Mat& A, const Measure& rho) {
  TestJet j = vector_jet(commutator_jet(A, rho).field);
  j.label = "commutator";
  return j;
}

double gamma(const Measure& rho, const Region& omega, const TestJet& v, double kappa,
             const DerivConfig& cfg) {
  check_region(rho, omega);
  const int N = rho.size();
  double sum = 0;
  for (int i = 0; i < N; ++i) {
    if (!omega[static_cast<size_t>(i)]) continue;
    for (int j = 0; j < N; ++j) {
      if (omega[static_cast<size_t>(j)]) continue;
      const Point &x = rho.points[i], &y = rho.points[j];
      const double L = lagrangian_kappa(x, y, kappa);
      const double d = nabla1(x, y, scalar_at(v, i), dir_or_empty(v, i), L, kappa, cfg) -
                       nabla2(x, y, scalar_at(v, j), dir_or_empty(v, j), L, kappa, cfg);
      sum += rho.weights[i] * rho.weights[j] * d;
    }
  }
  return sum;
}

double sigma(const Measure& rho, const Region& omega, const TestJet& u, const TestJet& v,
             double kappa, const DerivConfig& cfg) {
  check_region(rho, omega);
  const int N = rho.size();
  double sum = 0;
  for (int i = 0; i < N; ++i) {
    if (!omega[static_cast<size_t>(i)]) continue;
    for (int j = 0; j < N; ++j) {
      if (omega[static_cast<size_t>(j)]) continue;
      const Point &x = rho.points[i], &y = rho.points[j];
      const double L = lagrangian_kappa(x, y, kappa);
      const double d = nabla12(x, y, u, i, v, j, L, kappa, cfg) - nabla12(x, y, v, i, u, j, L, kappa, cfg);
      sum += rho.weights[i] * rho.weights[j] * d;
    }
  }
  return sum;
}

double d1_commutator(const Point& x, const Point& y, const Mat& Qxy, const Mat& A) {
  const cplx i1(0, 1);
  const Mat Dx = x.spectrum().cast<cplx>().asDiagonal();
  return 2.0 * std::real(i1 * (y.frame().adjoint() * A * x.frame() * Dx * Qxy).trace());
}

double gamma_commutator(const Measure& rho, const Region& omega, const BlockKernel& Q, const Mat& A) {
  check_region(rho, omega);
  const int N = rho.size();
  double sum = 0;
  for (int i = 0; i < N; ++i) {
    if (!omega[static_cast<size_t>(i)]) continue;
    for (int j = 0; j < N; ++j) {
      if (omega[static_cast<size_t>(j)]) continue;
      const Point &x = rho.points[i], &y = rho.points[j];
      const double d = d1_commutator(x, y, Q.at(i, j), A) - d1_commutator(y, x, Q.at(j, i), A);
      sum += rho.weights[i] * rho.weights[j] * d;
    }
  }
  return sum;
}

double sigma_commutator(const Measure& rho, const Region& omega, const BlockKernel& Q, const Mat& A,
                        const Mat& B) {
  // [C_A, C_B] is the commutator jet of -i[A,B]; gamma([C_A,C_B]) = -2 sigma(C_A, C_B).
  const cplx i1(0, 1);
  const Mat G = -i1 * (A * B - B * A);
  return -0.5 * gamma_commutator(rho, omega, Q, G);
}

Mat surface_form_gram(const Measure& rho, const Region& omega, const BlockKernel& Q) {
  check_region(rho, omega);
  const int N = rho.size(), k = rho.spin_dim();
  const cplx m2i(0, -2);
  Mat G = Mat::Zero(N * k, N * k);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const int s = side_sign(omega, i, j);
      if (s == 0) continue;
      const RVec g = rho.points[i].metric();
      G.block(i * k, j * k, k, k) =
          (m2i * static_cast<double>(s) * rho.weights[i] * rho.weights[j]) * (g.cast<cplx>().asDiagonal() * Q.at(i, j));
    }
  return G;
}

cplx surface_form(const Measure& rho, const Region& omega, const BlockKernel& Q, const Vec& psi,
                  const Vec& phi) {
  return psi.dot(surface_form_gram(rho, omega, Q) * phi);
}

cplx commutator_inner_product(const Measure& rho, const Region& omega, const BlockKernel& Q,
                              const Vec& u, const Vec& v) {
  return surface_form(rho, omega, Q, physical_wave(rho, u), physical_wave(rho, v));
}

cplx commutator_inner_product_polarized(const Measure& rho, const Region& omega, double kappa,
                                        const Vec& u, const Vec& v, const DerivConfig& cfg) {
  const cplx i1(0, 1);
  auto q = [&](const Vec& w) {
    return gamma(rho, omega, commutator_test_jet(rank_one(w), rho), kappa, cfg);
  };
  const cplx val = q(u + v) - q(u - v) - i1 * q(u + i1 * v) + i1 * q(u - i1 * v);
  return 0.25 * val;
}

RepresentationReport represents_scalar_check(const Measure& rho, const Region& omega,
                                             const BlockKernel& Q, const std::vector<Mat>& generators,
                                             double tol) {
  RepresentationReport rep;
  const Mat W = physical_waves(rho);
  rep.gram = W.adjoint() * surface_form_gram(rho, omega, Q) * W;
  const double d = static_cast<double>(rep.gram.rows());
  rep.c = d > 0 ? rep.gram.trace().real() / d : 0.0;
  const Mat I = Mat::Identity(rep.gram.rows(), rep.gram.cols());
  if (std::abs(rep.c) > 0)
    rep.deviation = (rep.gram - rep.c * I).norm() / std::abs(rep.c);
  else
    rep.deviation = std::numeric_limits<double>::infinity();
  rep.represents = rep.c > 0 && rep.deviation <= tol;
  for (const Mat& A : generators) {
    rep.gamma_values.push_back(gamma_commutator(rho, omega, Q, A));
    const Mat Af = rho.hf.adjoint() * A * rho.hf;
    rep.trace_values.push_back(rep.c * Af.trace().real());
  }
  return rep;
}

std::vector<double> conservation_check(const Measure& rho, const Region& omega, const Region& omega2,
                                       const std::vector<TestJet>& jets, double kappa,
                                       const DerivConfig& cfg) {
  std::vector<double> out;
  out.reserve(jets.size());
  for (const TestJet& v : jets)
    out.push_back(std::abs(gamma(rho, omega, v, kappa, cfg) - gamma(rho, omega2, v, kappa, cfg)));
  return out;
}

double block_norm(const Point& x, const Point& y, const Mat& q) {
  const RVec sx = x.abs_spectrum().cwiseSqrt();
  const RVec sy = y.abs_spectrum().cwiseSqrt().cwiseInverse();
  const Mat m = sx.cast<cplx>().asDiagonal() * q * sy.cast<cplx>().asDiagonal();
  Eigen::JacobiSVD<Mat> svd(m);
  return svd.singularValues().size() > 0 ? svd.singularValues()(0) : 0.0;
}

RVec surface_layer_measure(const Measure& rho, const Region& omega, const BlockKernel& Qreg) {
  check_region(rho, omega);
  const int N = rho.size();
  RVec mu = RVec::Zero(N);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      if (side_sign(omega, i, j) == 0) continue;
      mu(i) += rho.weights[j] * block_norm(rho.points[i], rho.points[j], Qreg.at(i, j));
    }
  for (int i = 0; i < N; ++i) mu(i) *= rho.weights[i];
  return mu;
}

Mat adapted_gram(const Measure& rho, const RVec& mu) {
  const int N = rho.size(), k = rho.spin_dim();
  Mat G = Mat::Zero(N * k, N * k);
  for (int i = 0; i < N; ++i)
    G.block(i * k, i * k, k, k) = (mu(i) * rho.points[i].abs_spectrum()).cast<cplx>().asDiagonal();
  return G;
}

cplx adapted_l2(const Measure& rho, const RVec& mu, const Vec& psi, const Vec& phi) {
  return psi.dot(adapted_gram(rho, mu) * phi);
}

SurfaceHilbert surface_hilbert(const Measure& rho, const Region& omega, const BlockKernel& Qreg) {
  SurfaceHilbert h;
  h.mu = surface_layer_measure(rho, omega, Qreg);
  h.GW = adapted_gram(rho, h.mu);
  h.GK = surface_form_gram(rho, omega, Qreg);
  const double scale = h.mu.size() > 0 ? h.mu.maxCoeff() : 0.0;
  for (int i = 0; i < rho.size(); ++i)
    if (h.mu(i) > 1e-14 * scale) h.active.push_back(i);
  return h;
}

}  // namespace cfs
