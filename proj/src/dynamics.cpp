#include "cfs/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

namespace cfs {

namespace {

const cplx kI(0, 1);

Mat diag(const RVec& d) { return d.cast<cplx>().asDiagonal(); }

cplx weighted(const Vec& a, const RVec& w, const Vec& b) {
  return a.dot(w.cast<cplx>().cwiseProduct(b));
}

RVec metric_vector(const DynSpace& sp) {
  RVec g(sp.dim());
  for (int i = 0; i < sp.size(); ++i) g.segment(i * sp.spin, sp.spin) = sp.metric[static_cast<size_t>(i)];
  return g;
}

RVec strip_eta(const Foliation& fol, int k0, int k1) {
  if (k0 < 0 || k1 >= fol.steps() || k0 > k1) throw Refusal("time strip outside the foliation grid");
  return fol.eta_at(k1) - fol.eta_at(k0);
}

// Orthonormal basis of the null space of A, using the numerical rank.
Mat null_space(const Mat& A, double rel_tol, RankInfo* info = nullptr) {
  if (A.cols() == 0) return Mat(0, 0);
  if (A.rows() == 0) return Mat::Identity(A.cols(), A.cols());
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeFullV);
  const RVec s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  int r = 0;
  while (r < s.size() && s(r) > rel_tol * smax && smax > 0) ++r;
  if (info) {
    info->rank = r;
    info->gap = (r > 0 && r < s.size() && s(r) > 0) ? s(r - 1) / s(r)
                                                     : std::numeric_limits<double>::infinity();
  }
  return svd.matrixV().rightCols(A.cols() - r);
}

Mat range_basis(const Mat& A, double rel_tol, RankInfo* info = nullptr) {
  if (A.cols() == 0) return Mat(A.rows(), 0);
  Eigen::JacobiSVD<Mat> svd(A, Eigen::ComputeThinU);
  const RVec s = svd.singularValues();
  const double smax = s.size() > 0 ? s(0) : 0.0;
  int r = 0;
  while (r < s.size() && s(r) > rel_tol * smax && smax > 0) ++r;
  if (info) {
    info->rank = r;
    info->gap = (r > 0 && r < s.size() && s(r) > 0) ? s(r - 1) / s(r)
                                                     : std::numeric_limits<double>::infinity();
  }
  return svd.matrixU().leftCols(r);
}

// psi^dag (-2i)(E M - M E) phi with E = diag(e), given u = M phi and v = M psi
cplx gram_value(const RVec& e, const Vec& psi, const Vec& phi, const Vec& u, const Vec& v) {
  return -2.0 * kI * (weighted(psi, e, u) - weighted(v, e, phi));
}

}  // namespace

void DynSpace::validate() const {
  const int N = size();
  if (N == 0) throw Refusal("empty dynamical space");
  if (spin <= 0) throw Refusal("spin dimension must be positive");
  if (static_cast<int>(metric.size()) != N || static_cast<int>(layer.size()) != N)
    throw Refusal("dynamical space arrays have inconsistent lengths");
  if (!site.empty() && static_cast<int>(site.size()) != N)
    throw Refusal("site labels have the wrong length");
  for (int i = 0; i < N; ++i) {
    if (!(weights(i) > 0)) throw Refusal("weights must be positive");
    const RVec& g = metric[static_cast<size_t>(i)];
    if (g.size() != spin) throw Refusal("metric has the wrong spin dimension");
    for (int a = 0; a < spin; ++a)
      if (g(a) == 0) throw Refusal("spin metric must be nondegenerate");
    if (layer[static_cast<size_t>(i)] < 0) throw Refusal("layer indices must be nonnegative");
  }
}

DynSpace dyn_space(const Measure& rho, const std::vector<int>& layer) {
  DynSpace sp;
  sp.spin = rho.spin_dim();
  sp.weights = Eigen::Map<const RVec>(rho.weights.data(), static_cast<Eigen::Index>(rho.weights.size()));
  for (const Point& p : rho.points) sp.metric.push_back(p.metric());
  sp.layer = layer;
  sp.site.assign(static_cast<size_t>(rho.size()), -1);
  sp.validate();
  return sp;
}

RVec expand(const DynSpace& sp, const RVec& per_point) {
  RVec out(sp.dim());
  for (int i = 0; i < sp.size(); ++i) out.segment(i * sp.spin, sp.spin).setConstant(per_point(i));
  return out;
}

RVec krein_weights(const DynSpace& sp) { return expand(sp, sp.weights).cwiseProduct(metric_vector(sp)); }

RVec l2_weights(const DynSpace& sp) { return expand(sp, sp.weights).cwiseProduct(metric_vector(sp).cwiseAbs()); }

RVec euclidean_signs(const DynSpace& sp) {
  return metric_vector(sp).unaryExpr([](double g) { return g > 0 ? 1.0 : -1.0; });
}

Mat apply_matrix(const DynSpace& sp, const BlockKernel& Q) {
  if (Q.npoints != sp.size() || Q.spin != sp.spin) throw Refusal("kernel does not match the dynamical space");
  return Q.dense() * diag(expand(sp, sp.weights));
}

Mat pairing_matrix(const DynSpace& sp, const BlockKernel& Q) {
  return diag(krein_weights(sp)) * apply_matrix(sp, Q);
}

DynKernel make_dyn_kernel(const DynSpace& sp, BlockKernel Q, double tol) {
  sp.validate();
  DynKernel d;
  const Mat M = pairing_matrix(sp, Q);
  const double nm = M.norm();
  d.asymmetry = nm > 0 ? (M - M.adjoint()).norm() / nm : 0.0;
  double bmax = 0;
  for (const Mat& b : Q.blocks) bmax = std::max(bmax, b.norm());
  for (int i = 0; i < sp.size(); ++i)
    for (int j = 0; j < sp.size(); ++j)
      if (Q.at(i, j).norm() > tol * bmax)
        d.range = std::max(d.range, std::abs(sp.layer[static_cast<size_t>(i)] - sp.layer[static_cast<size_t>(j)]));
  d.Q = std::move(Q);
  d.Q.kind = KernelKind::dyn;
  return d;
}

void Foliation::validate(double tol) const {
  const int K = steps(), N = static_cast<int>(eta.cols());
  if (K < 2) throw Refusal("foliation needs at least two time steps");
  if (eta.rows() != K || theta.rows() != K || theta.cols() != N) throw Refusal("foliation arrays have inconsistent shapes");
  for (int k = 1; k < K; ++k)
    if (!(t(k) > t(k - 1))) throw Refusal("foliation times must increase");
  for (int x = 0; x < N; ++x) {
    double tmax = 0;
    for (int k = 0; k < K; ++k) {
      const double e = eta(k, x);
      if (e < -tol || e > 1 + tol) throw Refusal("eta leaves [0,1]");
      if (k > 0 && e < eta(k - 1, x) - tol) throw Refusal("eta is not monotone in t");
      if (theta(k, x) < -tol) throw Refusal("theta is negative");
      tmax = std::max(tmax, theta(k, x));
    }
    if (eta(0, x) > tol || eta(K - 1, x) < 1 - tol) throw Refusal("eta does not saturate at the grid ends");
    if (!(tmax > 0)) throw Refusal("surface layers do not cover every point");
  }
}

Foliation logistic_foliation(const std::vector<double>& tau, const RVec& t, double width, double clip) {
  if (!(width > 0)) throw Refusal("foliation width must be positive");
  const int K = static_cast<int>(t.size()), N = static_cast<int>(tau.size());
  Foliation f;
  f.t = t;
  f.eta = RMat::Zero(K, N);
  f.theta = RMat::Zero(K, N);
  for (int k = 0; k < K; ++k)
    for (int x = 0; x < N; ++x) {
      const double e = 1.0 / (1.0 + std::exp(-(t(k) - tau[static_cast<size_t>(x)]) / width));
      if (e < clip) continue;
      if (e > 1 - clip) {
        f.eta(k, x) = 1;
        continue;
      }
      f.eta(k, x) = e;
      f.theta(k, x) = e * (1 - e) / width;
    }
  return f;
}

Foliation foliation_from_eta(const RVec& t, const RMat& eta) {
  const int K = static_cast<int>(t.size());
  if (K < 3 || eta.rows() != K) throw Refusal("need at least three steps matching the eta rows");
  Foliation f;
  f.t = t;
  f.eta = eta;
  f.theta = RMat::Zero(K, eta.cols());
  // three-point formulas on a possibly nonuniform grid
  auto d3 = [&](int i0, int i1, int i2, int at, int x) {
    const double x0 = t(i0), x1 = t(i1), x2 = t(i2), s = t(at);
    const double l0 = ((s - x1) + (s - x2)) / ((x0 - x1) * (x0 - x2));
    const double l1 = ((s - x0) + (s - x2)) / ((x1 - x0) * (x1 - x2));
    const double l2 = ((s - x0) + (s - x1)) / ((x2 - x0) * (x2 - x1));
    return l0 * eta(i0, x) + l1 * eta(i1, x) + l2 * eta(i2, x);
  };
  for (int x = 0; x < eta.cols(); ++x) {
    f.theta(0, x) = d3(0, 1, 2, 0, x);
    for (int k = 1; k < K - 1; ++k) f.theta(k, x) = d3(k - 1, k, k + 1, k, x);
    f.theta(K - 1, x) = d3(K - 3, K - 2, K - 1, K - 1, x);
  }
  f.theta = f.theta.cwiseMax(0.0);
  return f;
}

RVec uniform_grid(double t0, double t1, int steps) {
  if (steps < 2 || !(t1 > t0)) throw Refusal("invalid time grid");
  return RVec::LinSpaced(steps, t0, t1);
}

QdynBuild build_qdyn(const DynSpace& sp, const BlockKernel& Qreg, const std::vector<int>& strip,
                     const Mat& targets, double tol) {
  sp.validate();
  const int N = sp.size(), k = sp.spin, D = sp.dim();
  if (static_cast<int>(strip.size()) != N) throw Refusal("strip labels do not cover the points");
  if (targets.rows() != D) throw Refusal("target wave functions have the wrong length");
  const Mat A = apply_matrix(sp, Qreg);
  const Mat B = A * targets;
  const RVec w = expand(sp, sp.weights), g = metric_vector(sp);

  std::map<int, std::vector<int>> coords;
  for (int i = 0; i < N; ++i)
    for (int a = 0; a < k; ++a) coords[strip[static_cast<size_t>(i)]].push_back(i * k + a);

  Mat R = Mat::Zero(D, D);
  QdynBuild out;
  const double bscale = B.norm();
  for (const auto& [label, idx] : coords) {
    const int n = static_cast<int>(idx.size());
    Mat X(n, targets.cols()), Y(n, targets.cols());
    for (int r = 0; r < n; ++r) {
      X.row(r) = w(idx[static_cast<size_t>(r)]) * targets.row(idx[static_cast<size_t>(r)]);
      Y.row(r) = g(idx[static_cast<size_t>(r)]) * B.row(idx[static_cast<size_t>(r)]);
    }
    const double ynorm = Y.norm();
    if (ynorm <= tol * std::max(bscale, 1e-300)) continue;
    Eigen::JacobiSVD<Mat> svd(X, Eigen::ComputeFullU | Eigen::ComputeFullV);
    const RVec s = svd.singularValues();
    int rk = 0;
    while (rk < s.size() && s(rk) > tol * s(0)) ++rk;
    const Mat Vn = svd.matrixV().rightCols(X.cols() - rk);
    if (Vn.cols() > 0 && (Y * Vn).norm() > 1e3 * tol * ynorm)
      throw Refusal("strip " + std::to_string(label) + ": kernel condition fails, targets vanishing on the strip are not annihilated");
    const Mat XY = X.adjoint() * Y;
    if ((XY - XY.adjoint()).norm() > 1e3 * tol * X.norm() * ynorm)
      throw Refusal("strip " + std::to_string(label) + ": no symmetric correction reproduces the targets");
    Mat Xp = Mat::Zero(X.cols(), n);
    for (int r = 0; r < rk; ++r)
      Xp += svd.matrixV().col(r) * (svd.matrixU().col(r).adjoint() / s(r));
    Mat H = Y * Xp + Xp.adjoint() * Y.adjoint() - Xp.adjoint() * XY * Xp;
    H = 0.5 * (H + H.adjoint()).eval();
    for (int r = 0; r < n; ++r)
      for (int c = 0; c < n; ++c)
        R(idx[static_cast<size_t>(r)], idx[static_cast<size_t>(c)]) = H(r, c) / g(idx[static_cast<size_t>(r)]);
  }
  out.R = BlockKernel::from_dense(R, N, k, KernelKind::r);
  const Mat resid = B - R * diag(w) * targets;
  for (const auto& [label, idx] : coords) {
    double num = 0, den = 0;
    for (int c : idx) {
      num += resid.row(c).squaredNorm();
      den += B.row(c).squaredNorm();
    }
    // strips that only carry rounding noise are measured against the whole image
    const double floor = tol * bscale * tol * bscale;
    out.strip_residual.push_back(std::sqrt(num / (den > floor ? den : std::max(bscale * bscale, 1e-300))));
  }
  const Mat MR = pairing_matrix(sp, out.R);
  out.r_asymmetry = MR.norm() > 0 ? (MR - MR.adjoint()).norm() / MR.norm() : 0.0;
  out.dyn = make_dyn_kernel(sp, Qreg - out.R);
  for (double r : out.strip_residual)
    if (r > 1e3 * tol) throw NumericalFailure("least-squares correction leaves a residual of " + std::to_string(r));
  return out;
}

std::vector<double> dynamical_residual(const DynSpace& sp, const BlockKernel& Q, const Vec& psi,
                                       const std::vector<int>& strip) {
  if (static_cast<int>(strip.size()) != sp.size()) throw Refusal("strip labels do not cover the points");
  const Vec r = apply_matrix(sp, Q) * psi;
  std::map<int, double> acc;
  for (int i = 0; i < sp.size(); ++i)
    acc[strip[static_cast<size_t>(i)]] += r.segment(i * sp.spin, sp.spin).squaredNorm();
  std::vector<double> out;
  for (const auto& [label, v] : acc) out.push_back(std::sqrt(v));
  return out;
}

Mat softened_gram(const DynSpace& sp, const BlockKernel& Q, const RVec& eta) {
  const Mat M = pairing_matrix(sp, Q);
  const Mat E = diag(expand(sp, eta));
  return -2.0 * kI * (E * M - M * E);
}

cplx softened_product(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol, int k,
                      const Vec& psi, const Vec& phi) {
  return psi.dot(softened_gram(sp, Q, fol.eta_at(k)) * phi);
}

cplx softened_product_strip(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol, int k0,
                            int k, const Vec& psi, const Vec& phi) {
  const Mat A = apply_matrix(sp, Q);
  const RVec d = krein_weights(sp).cwiseProduct(expand(sp, strip_eta(fol, k0, k)));
  return -2.0 * kI * (weighted(psi, d, A * phi) - weighted(A * psi, d, phi));
}

cplx sharp_product(const DynSpace& sp, const BlockKernel& Q, const Region& omega, const Vec& psi,
                   const Vec& phi) {
  if (static_cast<int>(omega.size()) != sp.size()) throw Refusal("region size does not match the number of points");
  RVec chi(sp.size());
  for (int i = 0; i < sp.size(); ++i) chi(i) = omega[static_cast<size_t>(i)] ? 1.0 : 0.0;
  return psi.dot(softened_gram(sp, Q, chi) * phi);
}

cplx krein_product(const DynSpace& sp, const Vec& psi, const Vec& phi) {
  return weighted(psi, krein_weights(sp), phi);
}

cplx krein_strip(const DynSpace& sp, const Foliation& fol, int k0, int k1, const Vec& psi, const Vec& phi) {
  return weighted(psi, krein_weights(sp).cwiseProduct(expand(sp, strip_eta(fol, k0, k1))), phi);
}

cplx l2_strip(const DynSpace& sp, const Foliation& fol, int k0, int k1, const Vec& psi, const Vec& phi) {
  return weighted(psi, l2_weights(sp).cwiseProduct(expand(sp, strip_eta(fol, k0, k1))), phi);
}

double layer_norm2(const DynSpace& sp, const Foliation& fol, int k, const Vec& psi) {
  return weighted(psi, l2_weights(sp).cwiseProduct(expand(sp, fol.theta_at(k))), psi).real();
}

EnergyIdentityReport energy_identity_check(const DynSpace& sp, const BlockKernel& Q,
                                           const Foliation& fol, const Vec& psi, const Vec& phi) {
  EnergyIdentityReport rep;
  const Mat A = apply_matrix(sp, Q);
  const Vec Apsi = A * psi, Aphi = A * phi;
  const RVec kw = krein_weights(sp);
  const Mat M = diag(kw) * A;
  const Vec u = M * phi, v = M * psi;
  std::vector<cplx> P(static_cast<size_t>(fol.steps()));
  for (int k = 0; k < fol.steps(); ++k)
    P[static_cast<size_t>(k)] = gram_value(expand(sp, fol.eta_at(k)), psi, phi, u, v);
  for (int k = 1; k + 1 < fol.steps(); ++k) {
    const cplx lhs = (P[static_cast<size_t>(k + 1)] - P[static_cast<size_t>(k - 1)]) / (fol.t(k + 1) - fol.t(k - 1));
    const RVec d = kw.cwiseProduct(expand(sp, fol.theta_at(k)));
    const cplx rhs = -2.0 * kI * (weighted(psi, d, Aphi) - weighted(Apsi, d, phi));
    const double dev = std::abs(lhs - rhs);
    rep.per_step.push_back(dev);
    rep.deviation = std::max(rep.deviation, dev);
    rep.scale = std::max(rep.scale, std::abs(rhs));
  }
  return rep;
}

HyperbolicityReport hyperbolicity_from_grams(const std::vector<Mat>& A, const std::vector<Mat>& B, double tol) {
  if (A.size() != B.size() || A.empty()) throw Refusal("need matching nonempty lists of Gram matrices");
  HyperbolicityReport rep;
  double ascale = 0, bscale = 0;
  for (size_t k = 0; k < A.size(); ++k) {
    ascale = std::max(ascale, A[k].norm());
    bscale = std::max(bscale, B[k].norm());
  }
  if (!(ascale > 0)) throw Refusal("surface form vanishes on the span");
  double c2 = 0;
  for (size_t k = 0; k < A.size(); ++k) {
    const Mat a = 0.5 * (A[k] + A[k].adjoint()), b = 0.5 * (B[k] + B[k].adjoint());
    Eigen::SelfAdjointEigenSolver<Mat> es(a);
    const RVec ev = es.eigenvalues();
    rep.min_eigenvalue = std::min(rep.min_eigenvalue, ev.size() > 0 ? ev(0) / ascale : 0.0);
    if (ev.size() > 0 && ev(0) < -tol * ascale)
      throw Refusal("surface form is indefinite on the span at step " + std::to_string(k) +
                    " (boundary is not spacelike)");
    std::vector<int> keep, drop;
    for (int i = 0; i < ev.size(); ++i) (ev(i) > tol * ascale ? keep : drop).push_back(i);
    const Mat U = es.eigenvectors();
    if (!drop.empty()) {
      Mat Un(U.rows(), static_cast<Eigen::Index>(drop.size()));
      for (size_t i = 0; i < drop.size(); ++i) Un.col(static_cast<Eigen::Index>(i)) = U.col(drop[i]);
      if ((Un.adjoint() * b * Un).norm() > 1e3 * tol * std::max(bscale, 1e-300))
        throw Refusal("layer norm is nonzero where the surface form vanishes at step " + std::to_string(k));
    }
    double val = 0;
    if (!keep.empty()) {
      Mat Ur(U.rows(), static_cast<Eigen::Index>(keep.size()));
      RVec s(static_cast<Eigen::Index>(keep.size()));
      for (size_t i = 0; i < keep.size(); ++i) {
        Ur.col(static_cast<Eigen::Index>(i)) = U.col(keep[i]);
        s(static_cast<Eigen::Index>(i)) = 1.0 / std::sqrt(ev(keep[i]));
      }
      const Mat red = diag(s) * Ur.adjoint() * b * Ur * diag(s);
      Eigen::SelfAdjointEigenSolver<Mat> er(0.5 * (red + red.adjoint()), Eigen::EigenvaluesOnly);
      val = std::max(0.0, er.eigenvalues().maxCoeff());
    }
    rep.c2_per_step.push_back(val);
    if (val > c2) {
      c2 = val;
      rep.worst_step = static_cast<int>(k);
    }
  }
  rep.C = std::sqrt(c2);
  return rep;
}

HyperbolicityReport hyperbolicity_constant(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol,
                                           int k0, int k1, const Mat& basis, double tol) {
  strip_eta(fol, k0, k1);
  const Mat M = pairing_matrix(sp, Q);
  const RVec lw = l2_weights(sp);
  std::vector<Mat> A, B;
  for (int k = k0; k <= k1; ++k) {
    const Mat E = diag(expand(sp, fol.eta_at(k)));
    A.push_back(basis.adjoint() * (-2.0 * kI * (E * M - M * E)) * basis);
    B.push_back(basis.adjoint() * diag(lw.cwiseProduct(expand(sp, fol.theta_at(k)))) * basis);
  }
  HyperbolicityReport rep = hyperbolicity_from_grams(A, B, tol);
  if (rep.worst_step >= 0) rep.worst_step += k0;
  return rep;
}

double gamma_constant(double C, double t0, double tmax) { return 2.0 * C * C * (tmax - t0); }

Mat test_space(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol, int k, const Mat& basis,
               double tol) {
  const Mat M = pairing_matrix(sp, Q);
  const double mn = M.norm();
  const RVec one_minus = RVec::Ones(sp.dim()) - expand(sp, fol.eta_at(k));
  std::vector<int> keep;
  for (int c = 0; c < basis.cols(); ++c) {
    const Vec phi = basis.col(c);
    const double n2 = phi.squaredNorm();
    if (one_minus.cast<cplx>().cwiseProduct(phi).norm() > tol * std::sqrt(n2)) continue;
    const Vec u = M * phi;
    bool ok = true;
    for (int kk = k; kk < fol.steps() && ok; ++kk)
      ok = std::abs(gram_value(expand(sp, fol.eta_at(kk)), phi, phi, u, u)) <= tol * mn * n2;
    if (ok) keep.push_back(c);
  }
  Mat out(basis.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t i = 0; i < keep.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = basis.col(keep[i]);
  return out;
}

Mat zero_initial_space(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol, int k0,
                       const Mat& basis, double tol) {
  const Mat M = pairing_matrix(sp, Q);
  const double mn = M.norm();
  const RVec e = expand(sp, fol.eta_at(k0));
  const Mat G = -2.0 * kI * (diag(e) * M - M * diag(e));
  std::vector<int> keep;
  for (int c = 0; c < basis.cols(); ++c) {
    const Vec phi = basis.col(c);
    const double n2 = phi.squaredNorm();
    if (e.cast<cplx>().cwiseProduct(phi).norm() > tol * std::sqrt(n2)) continue;
    if ((G * phi).norm() > tol * mn * std::sqrt(n2)) continue;
    keep.push_back(c);
  }
  Mat out(basis.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t i = 0; i < keep.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = basis.col(keep[i]);
  return out;
}

WeakSolution solve_weak(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol, int k0, int k1,
                        const Vec& w, const Mat& tests, double C, double rank_tol) {
  if (w.size() != sp.dim() || tests.rows() != sp.dim()) throw Refusal("inhomogeneity or test basis has the wrong length");
  WeakSolution sol;
  const RVec eI = expand(sp, strip_eta(fol, k0, k1));
  const RVec nl = l2_weights(sp).cwiseProduct(eI), kl = krein_weights(sp).cwiseProduct(eI);
  const RVec sgn = euclidean_signs(sp);
  const Mat A = apply_matrix(sp, Q);
  const Mat Y = A * tests;
  const Mat gram = Y.adjoint() * diag(nl) * Y;
  const Vec rhs = tests.adjoint() * kl.cast<cplx>().cwiseProduct(w);
  sol.test_dim = static_cast<int>(tests.cols());

  Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (gram + gram.adjoint()));
  const RVec ev = es.eigenvalues();
  const double emax = ev.size() > 0 ? ev.maxCoeff() : 0.0;
  Vec c = Vec::Zero(tests.cols());
  for (int i = 0; i < ev.size(); ++i) {
    if (!(ev(i) > rank_tol * emax)) continue;
    ++sol.rank;
    const Vec u = es.eigenvectors().col(i);
    c += u * (u.dot(rhs) / ev(i));
  }
  sol.V = tests * c;
  sol.psi = sgn.cast<cplx>().cwiseProduct(A * sol.V);
  for (int i = 0; i < sol.psi.size(); ++i)
    if (!(eI(i) > 0)) sol.psi(i) = 0;

  sol.norm_psi = std::sqrt(std::max(0.0, weighted(sol.psi, nl, sol.psi).real()));
  sol.norm_w = std::sqrt(std::max(0.0, weighted(w, nl, w).real()));
  for (int j = 0; j < tests.cols(); ++j) {
    const Vec phi = tests.col(j);
    const cplx lhs = weighted(A * phi, kl, sol.psi);
    const cplx r = weighted(phi, kl, w);
    const double s = std::sqrt(weighted(A * phi, nl, A * phi).real()) * sol.norm_psi +
                     std::sqrt(weighted(phi, nl, phi).real()) * sol.norm_w;
    sol.weak_residual = std::max(sol.weak_residual, s > 0 ? std::abs(lhs - r) / s : std::abs(lhs - r));
  }
  sol.gamma = gamma_constant(C, fol.t(k0), fol.t(k1));
  sol.bound_ok = sol.norm_psi <= sol.gamma * sol.norm_w * (1 + 1e-12) + 1e-300;
  return sol;
}

EnergyEstimateReport energy_estimates_check(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol,
                                            int k0, int k1, const Vec& psi, double C, double slack) {
  EnergyEstimateReport rep;
  const Vec Qpsi = apply_matrix(sp, Q) * psi;
  const double nq = std::sqrt(std::max(0.0, l2_strip(sp, fol, k0, k1, Qpsi, Qpsi).real()));
  const double T = fol.t(k1) - fol.t(k0);
  const Vec v = pairing_matrix(sp, Q) * psi;
  auto surf = [&](int k) { return gram_value(expand(sp, fol.eta_at(k)), psi, psi, v, v).real(); };
  rep.initial_norm = std::sqrt(std::abs(surf(k0)));
  for (int k = k0; k <= k1; ++k) rep.ees1_lhs = std::max(rep.ees1_lhs, std::sqrt(std::max(0.0, surf(k))));
  rep.ees1_rhs = 2.0 * C * std::sqrt(T) * nq;
  rep.ees2_lhs = std::sqrt(std::max(0.0, l2_strip(sp, fol, k0, k1, psi, psi).real()));
  rep.ees2_rhs = gamma_constant(C, fol.t(k0), fol.t(k1)) * nq;
  const double floor = slack * psi.norm() * 1e-6;
  rep.ok = rep.ees1_lhs <= rep.ees1_rhs * (1 + slack) + floor && rep.ees2_lhs <= rep.ees2_rhs * (1 + slack) + floor;
  return rep;
}

GreenFormulaReport greens_formula_check(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol,
                                        int k0, int k1, const Vec& psi, const Vec& phi) {
  GreenFormulaReport rep;
  const Mat A = apply_matrix(sp, Q);
  const cplx lhs = krein_strip(sp, fol, k0, k1, A * psi, phi) - krein_strip(sp, fol, k0, k1, psi, A * phi);
  const cplx rhs = -softened_product(sp, Q, fol, k1, psi, phi) + softened_product(sp, Q, fol, k0, psi, phi);
  rep.deviation = std::abs(-2.0 * kI * lhs - rhs);
  rep.scale = psi.norm() * phi.norm() * pairing_matrix(sp, Q).norm();
  return rep;
}

namespace {

std::vector<int> slot_cols(const SlotBasis& v, int a, int b) {
  std::vector<int> out;
  for (int c = 0; c < static_cast<int>(v.slot.size()); ++c)
    if (v.slot[static_cast<size_t>(c)] >= a && v.slot[static_cast<size_t>(c)] <= b) out.push_back(c);
  return out;
}

Mat pick(const Mat& m, const std::vector<int>& rows, const std::vector<int>& cols) {
  Mat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cols.size()));
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = 0; j < cols.size(); ++j)
      out(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = m(rows[i], cols[j]);
  return out;
}

// Square causal system: test slots [a, b - q] against trial slots [a + q, b].
Mat strip_inverse(const GreensOperators& g, int a, int b, std::vector<int>& test, std::vector<int>& trial) {
  test = slot_cols(g.vary, a, b - g.q);
  trial = slot_cols(g.vary, a + g.q, b);
  if (test.size() != trial.size() || test.empty()) throw Refusal("strip window too short for the kernel range");
  Eigen::FullPivLU<Mat> lu(pick(g.M, test, trial));
  if (!lu.isInvertible()) throw NumericalFailure("strip system is singular");
  return lu.inverse();
}

}  // namespace

SlotBasis block_basis(const DynSpace& sp, int block_len) {
  sp.validate();
  if (block_len <= 0) throw Refusal("block length must be positive");
  const int T = *std::max_element(sp.layer.begin(), sp.layer.end()) + 1;
  std::vector<int> sites;
  for (int i = 0; i < sp.size(); ++i) {
    const int s = sp.site.empty() ? -1 : sp.site[static_cast<size_t>(i)];
    if (std::find(sites.begin(), sites.end(), s) == sites.end()) sites.push_back(s);
  }
  std::sort(sites.begin(), sites.end());
  SlotBasis v;
  v.slots = T / block_len;
  v.per_slot = static_cast<int>(sites.size()) * sp.spin;
  if (v.slots == 0) throw Refusal("fewer layers than one block");
  v.basis = Mat::Zero(sp.dim(), v.slots * v.per_slot);
  int col = 0;
  for (int j = 0; j < v.slots; ++j)
    for (int s : sites)
      for (int a = 0; a < sp.spin; ++a, ++col) {
        v.slot.push_back(j);
        for (int i = 0; i < sp.size(); ++i) {
          const int si = sp.site.empty() ? -1 : sp.site[static_cast<size_t>(i)];
          if (si == s && sp.layer[static_cast<size_t>(i)] / block_len == j) v.basis(i * sp.spin + a, col) = 1.0;
        }
      }
  return v;
}

Foliation block_foliation(const DynSpace& sp, int block_len, double width, double dt, double clip) {
  if (block_len <= 0 || !(dt > 0)) throw Refusal("invalid block foliation parameters");
  std::vector<double> tau;
  for (int l : sp.layer) tau.push_back(std::floor((l + 0.5 * block_len) / block_len));
  const auto [lo, hi] = std::minmax_element(tau.begin(), tau.end());
  const double margin = width * std::log(1.0 / clip) + 1.0;
  const double t0 = *lo - margin, t1 = *hi + margin;
  const int steps = static_cast<int>(std::ceil((t1 - t0) / dt)) + 1;
  return logistic_foliation(tau, uniform_grid(t0, t0 + (steps - 1) * dt, steps), width, clip);
}

Vec GreensOperators::functional(const DynSpace& sp, const Vec& w) const {
  return vary.basis.adjoint() * krein_weights(sp).cast<cplx>().cwiseProduct(w);
}

Vec GreensOperators::retarded(const DynSpace& sp, const Vec& w) const {
  return vary.basis * (ret * functional(sp, w));
}

Vec GreensOperators::advanced(const DynSpace& sp, const Vec& w) const {
  return vary.basis * (adv * functional(sp, w));
}

Vec GreensOperators::fundamental(const DynSpace& sp, const Vec& w) const {
  return cplx(0, 0.5) * (advanced(sp, w) - retarded(sp, w));
}

Vec GreensOperators::strip_solution(const Vec& f, int a, int b) const {
  std::vector<int> test, trial;
  const Mat inv = strip_inverse(*this, a, b, test, trial);
  Vec rhs(static_cast<Eigen::Index>(test.size()));
  for (size_t i = 0; i < test.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = f(test[i]);
  const Vec c = inv * rhs;
  Vec out = Vec::Zero(M.cols());
  for (size_t i = 0; i < trial.size(); ++i) out(trial[i]) = c(static_cast<Eigen::Index>(i));
  return out;
}

GreensOperators greens_operators(const DynSpace& sp, const BlockKernel& Q, const SlotBasis& vary, double tol) {
  GreensOperators g;
  g.vary = vary;
  const Mat& P = vary.basis;
  g.M = P.adjoint() * pairing_matrix(sp, Q) * P;
  const double mn = g.M.norm();
  if (!(mn > 0)) throw Refusal("kernel vanishes on the macroscopic span");
  const int m = static_cast<int>(P.cols()), n = vary.slots;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j)
      if (std::abs(g.M(i, j)) > tol * mn)
        g.q = std::max(g.q, std::abs(vary.slot[static_cast<size_t>(i)] - vary.slot[static_cast<size_t>(j)]));
  if (g.q == 0) throw Refusal("kernel does not couple different time slots");
  if (n < 2 * g.q + 1) throw Refusal("too few time slots for the kernel range");

  // shielding: diagonal blocks of the causal systems must be invertible
  g.shielding = std::numeric_limits<double>::infinity();
  for (int i = 0; i + g.q < n; ++i) {
    const Mat blk = pick(g.M, slot_cols(vary, i, i), slot_cols(vary, i + g.q, i + g.q));
    Eigen::JacobiSVD<Mat> svd(blk);
    const RVec s = svd.singularValues();
    g.shielding = std::min(g.shielding, s.size() > 0 ? s(s.size() - 1) / mn : 0.0);
    for (int j = i + g.q + 1; j < n; ++j)
      g.upper = std::max(g.upper, pick(g.M, slot_cols(vary, i, i), slot_cols(vary, j, j)).norm() / mn);
  }
  if (g.shielding < tol) throw Refusal("shielding fails: a diagonal block of the causal system is singular");
  if (g.upper > tol) throw Refusal("shielding fails: the kernel couples beyond its slot range");

  g.ret = Mat::Zero(m, m);
  g.adv = Mat::Zero(m, m);
  std::vector<int> test, trial;
  Mat inv = strip_inverse(g, 0, n - 1, test, trial);
  for (size_t i = 0; i < trial.size(); ++i)
    for (size_t j = 0; j < test.size(); ++j)
      g.ret(trial[i], test[j]) = -inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  // advanced: test slots [q, n-1] against trial slots [0, n-1-q]
  test = slot_cols(vary, g.q, n - 1);
  trial = slot_cols(vary, 0, n - 1 - g.q);
  Eigen::FullPivLU<Mat> lu(pick(g.M, test, trial));
  if (!lu.isInvertible()) throw NumericalFailure("advanced strip system is singular");
  inv = lu.inverse();
  for (size_t i = 0; i < trial.size(); ++i)
    for (size_t j = 0; j < test.size(); ++j)
      g.adv(trial[i], test[j]) = -inv(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
  return g;
}

StabilizationReport stabilization_check(const GreensOperators& g, const Vec& f, int first, int last) {
  const int n = g.vary.slots;
  if (first < 0 || last + g.q > n - 1 || first > last) throw Refusal("support of the inhomogeneity does not fit the slots");
  StabilizationReport rep;
  const Vec ref = g.strip_solution(f, 0, n - 1);
  const double rn = ref.norm();
  double past = 0;
  for (int c : slot_cols(g.vary, 0, first + g.q - 1)) past += std::norm(ref(c));
  rep.past_residual = rn > 0 ? std::sqrt(past) / rn : std::sqrt(past);
  for (int s = 0;; ++s) {
    const int a = std::max(0, first - s), b = std::min(n - 1, last + g.q + s);
    const Vec c = g.strip_solution(f, a, b);
    double d = 0;
    for (int col : slot_cols(g.vary, a, b)) d += std::norm(c(col) - ref(col));
    rep.inner_change = std::max(rep.inner_change, rn > 0 ? std::sqrt(d) / rn : std::sqrt(d));
    ++rep.windows;
    if (a == 0 && b == n - 1) break;
  }
  return rep;
}

RankInfo numerical_rank(const Mat& A, double rel_tol, double gap_min) {
  RankInfo info;
  if (A.size() == 0) {
    info.gap = std::numeric_limits<double>::infinity();
    info.clean = true;
    return info;
  }
  range_basis(A, rel_tol, &info);
  info.clean = info.gap >= gap_min;
  return info;
}

bool ExactSequenceReport::exact() const {
  return !ambiguous && rank_q_w0 == dim_w0 && dim_ker_k == dim_w0 && ker_k_contains < 1e-8 &&
         dim_ker_q == rank_k && ker_q_contains < 1e-8 && rank_q_we == dim_target &&
         dim_tc == rank_k + dim_ker_k && q_k_residual < 1e-8;
}

ExactSequenceReport exact_sequence_check(const GreensOperators& g, double gap_min) {
  ExactSequenceReport rep;
  rep.min_gap = std::numeric_limits<double>::infinity();
  const double rel = 1e-10;
  auto note = [&](const RankInfo& r) {
    rep.min_gap = std::min(rep.min_gap, r.gap);
    if (r.gap < gap_min) rep.ambiguous = true;
  };
  auto rank = [&](const Mat& A) {
    const RankInfo r = numerical_rank(A, rel, gap_min);
    note(r);
    return r.rank;
  };
  auto kernel = [&](const Mat& A) {
    RankInfo r;
    r.gap = std::numeric_limits<double>::infinity();
    Mat N = null_space(A, rel, &r);
    note(r);
    return N;
  };

  const int n = g.vary.slots, q = g.q, m = static_cast<int>(g.M.cols());
  const std::vector<int> inner = slot_cols(g.vary, q, n - 1 - q);
  const std::vector<int> outer = [&] {
    std::vector<int> o;
    for (int c = 0; c < m; ++c)
      if (std::find(inner.begin(), inner.end(), c) == inner.end()) o.push_back(c);
    return o;
  }();
  const int dimF = static_cast<int>(inner.size());
  Mat EF = Mat::Zero(m, dimF);
  for (int i = 0; i < dimF; ++i) EF(inner[static_cast<size_t>(i)], i) = 1.0;
  Mat Eout = Mat::Zero(static_cast<Eigen::Index>(outer.size()), m);
  for (size_t i = 0; i < outer.size(); ++i) Eout(static_cast<Eigen::Index>(i), outer[i]) = 1.0;
  const Mat I = Mat::Identity(m, m);
  const double mn = g.M.norm();

  // compactly supported solutions of the homogeneous equation with Q psi inside the window
  Mat S(2 * m + Eout.rows(), m);
  S << g.ret * g.M + I, g.adv * g.M + I, Eout * g.M;
  const Mat Z0 = kernel(S);
  rep.dim_w0 = static_cast<int>(Z0.cols());
  rep.rank_q_w0 = rep.dim_w0 > 0 ? rank(g.M * Z0) : 0;

  const Mat Kc = cplx(0, 0.5) * (g.adv - g.ret);
  const Mat KF = Kc * EF;
  rep.dim_tc = dimF;
  const Mat Nk = kernel(KF);
  rep.dim_ker_k = static_cast<int>(Nk.cols());
  if (rep.dim_w0 > 0) {
    const Mat QW = EF.adjoint() * g.M * Z0;
    rep.ker_k_contains = (QW - Nk * (Nk.adjoint() * QW)).norm() / std::max(QW.norm(), 1e-300);
  }
  rep.rank_k = rank(KF);

  Mat both(m, 2 * dimF);
  both << g.ret * EF, g.adv * EF;
  RankInfo ri;
  const Mat Eb = range_basis(both, rel, &ri);
  note(ri);
  rep.dim_we = static_cast<int>(Eb.cols());
  const Mat QE = EF.adjoint() * g.M * Eb;
  const Mat Kq = Eb * kernel(QE);
  rep.dim_ker_q = static_cast<int>(Kq.cols());
  rep.ker_q_contains = (KF - Kq * (Kq.adjoint() * KF)).norm() / std::max(KF.norm(), 1e-300);
  rep.rank_q_we = rank(QE);
  rep.dim_target = dimF;
  rep.q_k_residual = (EF.adjoint() * g.M * KF).norm() / std::max(mn * KF.norm(), 1e-300);
  return rep;
}

double cutoff_violation(const DynSpace& sp, const Foliation& fol, const CutoffOperator& c) {
  const RVec e0 = expand(sp, fol.eta_at(c.k0)), e1 = expand(sp, fol.eta_at(c.k1));
  const Mat I = Mat::Identity(sp.dim(), sp.dim());
  const double a = (diag(e0) * (I - c.pi)).norm();
  const double b = (diag(RVec::Ones(sp.dim()) - e1) * c.pi).norm();
  return std::max(a, b);
}

CutoffOperator region_cutoff(const DynSpace& sp, const Region& past, int k0, int k1) {
  if (static_cast<int>(past.size()) != sp.size()) throw Refusal("region size does not match the number of points");
  RVec chi(sp.size());
  for (int i = 0; i < sp.size(); ++i) chi(i) = past[static_cast<size_t>(i)] ? 1.0 : 0.0;
  CutoffOperator c;
  c.pi = diag(expand(sp, chi));
  c.k0 = k0;
  c.k1 = k1;
  return c;
}

cplx cutoff_current(const DynSpace& sp, const BlockKernel& Q, const Mat& pi, const Vec& psi, const Vec& phi) {
  const Mat A = apply_matrix(sp, Q);
  const RVec kw = krein_weights(sp);
  const Vec ppsi = pi * psi, pphi = pi * phi;
  return -2.0 * kI * (weighted(ppsi, kw, A * (phi - pphi)) - weighted(psi - ppsi, kw, A * pphi));
}

cplx cutoff_current(const DynSpace& sp, const BlockKernel& Q, const Foliation& fol, const CutoffOperator& c,
                    const Vec& psi, const Vec& phi, double tol) {
  const double v = cutoff_violation(sp, fol, c);
  if (v > tol) throw Refusal("cutoff operator does not interpolate between the surface layers (violation " +
                             std::to_string(v) + ")");
  return cutoff_current(sp, Q, c.pi, psi, phi);
}

Vec march(const DynSpace& sp, const BlockKernel& Q, int range, const Vec& psi0) {
  sp.validate();
  if (range <= 0) throw Refusal("kernel range must be positive");
  if (psi0.size() != sp.dim()) throw Refusal("initial data has the wrong length");
  const int T = *std::max_element(sp.layer.begin(), sp.layer.end()) + 1;
  std::vector<std::vector<int>> coords(static_cast<size_t>(T));
  for (int i = 0; i < sp.size(); ++i)
    for (int a = 0; a < sp.spin; ++a) coords[static_cast<size_t>(sp.layer[static_cast<size_t>(i)])].push_back(i * sp.spin + a);
  const Mat A = apply_matrix(sp, Q);
  Vec psi = Vec::Zero(sp.dim());
  for (int l = 0; l < std::min(T, 2 * range); ++l)
    for (int c : coords[static_cast<size_t>(l)]) psi(c) = psi0(c);
  for (int l = range; l + range < T; ++l) {
    const auto& rows = coords[static_cast<size_t>(l)];
    const auto& cols = coords[static_cast<size_t>(l + range)];
    if (rows.size() != cols.size()) throw Refusal("layers have different sizes, marching is not defined");
    const Vec full = A * psi;
    Vec rhs(static_cast<Eigen::Index>(rows.size()));
    for (size_t i = 0; i < rows.size(); ++i) rhs(static_cast<Eigen::Index>(i)) = -full(rows[i]);
    Eigen::FullPivLU<Mat> lu(pick(A, rows, cols));
    if (!lu.isInvertible()) throw NumericalFailure("layer coupling is singular at layer " + std::to_string(l));
    const Vec x = lu.solve(rhs);
    for (size_t i = 0; i < cols.size(); ++i) psi(cols[i]) = x(static_cast<Eigen::Index>(i));
  }
  return psi;
}

PropagationReport propagation_check(const DynSpace& sp, const BlockKernel& Q, const Region& omega,
                                    const Region& omega2, const RVec& eta, const Vec& psi, const Mat& vary,
                                    double tol) {
  if (static_cast<int>(omega.size()) != sp.size() || static_cast<int>(omega2.size()) != sp.size() ||
      eta.size() != sp.size())
    throw Refusal("region or cutoff size does not match the number of points");
  for (int i = 0; i < sp.size(); ++i)
    if (omega[static_cast<size_t>(i)] && !omega2[static_cast<size_t>(i)]) throw Refusal("first region is not contained in the second");
  RVec c1(sp.size()), c2(sp.size());
  for (int i = 0; i < sp.size(); ++i) {
    c1(i) = omega[static_cast<size_t>(i)] ? 1.0 : 0.0;
    c2(i) = omega2[static_cast<size_t>(i)] ? 1.0 : 0.0;
  }
  const Mat G1 = softened_gram(sp, Q, c1), G2 = softened_gram(sp, Q, c2);
  const double gn = std::max(G1.norm(), 1e-300);
  const Mat E = diag(expand(sp, eta));
  Mat span(sp.dim(), vary.cols() + 1);
  span << vary, psi;
  PropagationReport rep;
  rep.localize_residual = ((E * span).adjoint() * (G1 - G2) * span).norm() / (gn * std::max(span.squaredNorm(), 1e-300));
  const double pn2 = std::max(psi.squaredNorm(), 1e-300);
  rep.conservation = std::abs(psi.dot((G1 - G2) * psi)) / (gn * pn2);
  const Vec u = psi - E * psi;
  rep.norm_omega = u.dot(G1 * u).real();
  rep.norm_omega2 = u.dot(G2 * u).real();
  rep.premise = std::abs(rep.norm_omega) <= tol * tol * gn * pn2;
  rep.holds = !rep.premise || std::abs(rep.norm_omega2) <= tol * tol * gn * pn2;
  return rep;
}

std::vector<std::pair<int, int>> support_extent(const DynSpace& sp, const Vec& psi, double tol) {
  const int T = *std::max_element(sp.layer.begin(), sp.layer.end()) + 1;
  std::vector<std::pair<int, int>> out(static_cast<size_t>(T), {-1, -1});
  const double mx = psi.cwiseAbs().maxCoeff();
  for (int i = 0; i < sp.size(); ++i) {
    if (psi.segment(i * sp.spin, sp.spin).cwiseAbs().maxCoeff() <= tol * mx) continue;
    const int s = sp.site.empty() ? 0 : std::max(0, sp.site[static_cast<size_t>(i)]);
    auto& e = out[static_cast<size_t>(sp.layer[static_cast<size_t>(i)])];
    e.first = e.first < 0 ? s : std::min(e.first, s);
    e.second = std::max(e.second, s);
  }
  return out;
}

Chain make_chain(const ChainConfig& cfg) {
  if (cfg.layers < 5 || cfg.sites < 1) throw Refusal("chain needs at least five layers and one site");
  const int L = cfg.layers, S = cfg.sites, N = L * S, D = 2 * N;
  Chain ch;
  DynSpace& sp = ch.space;
  sp.spin = 2;
  sp.weights = RVec::Ones(N);
  for (int l = 0; l < L; ++l)
    for (int s = 0; s < S; ++s) {
      RVec g(2);
      g << 1, -1;
      sp.metric.push_back(g);
      sp.layer.push_back(l);
      sp.site.push_back(s);
    }
  auto at = [S](int l, int s) { return 2 * (l * S + s); };
  Mat H = Mat::Zero(D, D);
  Mat s1(2, 2), s3(2, 2);
  s1 << 0, 1, 1, 0;
  s3 << 1, 0, 0, -1;
  const Mat I2 = Mat::Identity(2, 2);
  for (int l = 0; l < L; ++l)
    for (int s = 0; s < S; ++s) {
      H.block(at(l, s), at(l, s), 2, 2) += -cfg.mass * s3;
      for (int d = 1; d <= 2; ++d) {
        if (l + d >= L) continue;
        const cplx c = kI * (d == 1 ? cfg.a : cfg.b);
        H.block(at(l, s), at(l + d, s), 2, 2) += c * I2;
        H.block(at(l + d, s), at(l, s), 2, 2) += std::conj(c) * I2;
      }
      if (s + 1 < S) {
        H.block(at(l, s), at(l, s + 1), 2, 2) += kI * cfg.c_space * s1;
        H.block(at(l, s + 1), at(l, s), 2, 2) += -kI * cfg.c_space * s1;
      }
    }
  Rng rng(cfg.seed);
  const Mat X = random_gaussian(D, D, rng);
  Mat P = Mat::Zero(D, D);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const int dl = std::abs(i / S - j / S), ds = std::abs(i % S - j % S);
      if (dl > 2 || ds > 1 || (dl == 2 && ds != 0)) continue;
      P.block(2 * i, 2 * j, 2, 2) = X.block(2 * i, 2 * j, 2, 2);
    }
  H += 0.5 * cfg.eps * (P + P.adjoint());
  RVec g = RVec::Ones(D);
  for (int i = 0; i < N; ++i) g(2 * i + 1) = -1;
  const Mat K = diag(g) * H;
  ch.dyn = make_dyn_kernel(sp, BlockKernel::from_dense(K, N, 2, KernelKind::dyn));
  return ch;
}

}  // namespace cfs
