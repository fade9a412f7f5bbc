#include "cfs/extension.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>

namespace cfs {

namespace {

double smallest_sv_ratio(const Mat& m) {
  if (m.size() == 0) return 0.0;
  Eigen::JacobiSVD<Mat> svd(m);
  const RVec s = svd.singularValues();
  return s(0) > 0 ? s(s.size() - 1) / s(0) : 0.0;
}

// Permutation that maps a rho-ordered wave function into rho-tilde ordering.
Mat permutation(const std::vector<int>& F, int spin) {
  const int N = static_cast<int>(F.size());
  Mat P = Mat::Zero(N * spin, N * spin);
  for (int i = 0; i < N; ++i) P.block(F[i] * spin, i * spin, spin, spin).setIdentity();
  return P;
}

void check_bijection(const std::vector<int>& F, int N) {
  if (static_cast<int>(F.size()) != N) throw Refusal("point map has wrong length");
  std::vector<char> hit(static_cast<size_t>(N), 0);
  for (int j : F) {
    if (j < 0 || j >= N || hit[static_cast<size_t>(j)]) throw Refusal("point map is not a bijection");
    hit[static_cast<size_t>(j)] = 1;
  }
}

Vec random_wave(int dim, Rng& rng) {
  std::normal_distribution<double> g;
  Vec v(dim);
  for (int i = 0; i < dim; ++i) v(i) = cplx(g(rng), g(rng));
  return v;
}

}  // namespace

std::vector<int> active_coordinates(const std::vector<int>& points, int spin) {
  std::vector<int> c;
  c.reserve(points.size() * static_cast<size_t>(spin));
  for (int p : points)
    for (int a = 0; a < spin; ++a) c.push_back(p * spin + a);
  return c;
}

Mat restrict_gram(const Mat& G, const std::vector<int>& coords) {
  const int m = static_cast<int>(coords.size());
  Mat R(m, m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) R(i, j) = G(coords[i], coords[j]);
  return R;
}

Vec restrict_vec(const Vec& v, const std::vector<int>& coords) {
  Vec r(static_cast<Eigen::Index>(coords.size()));
  for (size_t i = 0; i < coords.size(); ++i) r(static_cast<Eigen::Index>(i)) = v(coords[i]);
  return r;
}

Vec embed_vec(const Vec& v, const std::vector<int>& coords, int full_dim) {
  Vec r = Vec::Zero(full_dim);
  for (size_t i = 0; i < coords.size(); ++i) r(coords[i]) = v(static_cast<Eigen::Index>(i));
  return r;
}

RieszOperator riesz_from_grams(const Mat& GW, const Mat& GK, double tol) {
  RieszOperator r;
  Eigen::SelfAdjointEigenSolver<Mat> es(GW);
  const RVec ev = es.eigenvalues();
  const double top = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
  r.gw_min = ev.size() ? ev(0) : 0.0;
  if (ev.size() == 0 || r.gw_min <= tol * top)
    throw NumericalFailure("riesz_operator: adapted Gram is singular on the quotient (min eigenvalue " +
                           std::to_string(r.gw_min) + ", max " + std::to_string(top) + ")");
  r.S = GW.ldlt().solve(GK);
  r.sigma_min = smallest_sv_ratio(r.S);
  r.injective = r.sigma_min > tol;
  const double nk = std::max(GK.norm(), 1e-300);
  r.relation_residual = (GW * r.S - GK).norm() / nk;
  return r;
}

RieszOperator riesz_operator(const SurfaceHilbert& h, int spin, bool strict, double tol) {
  const int N = static_cast<int>(h.mu.size());
  if (strict && static_cast<int>(h.active.size()) < N)
    throw Refusal("riesz_operator: surface measure vanishes at " +
                  std::to_string(N - static_cast<int>(h.active.size())) + " points (strict mode)");
  const auto coords = active_coordinates(h.active, spin);
  RieszOperator r = riesz_from_grams(restrict_gram(h.GW, coords), restrict_gram(h.GK, coords), tol);
  r.coords = coords;
  return r;
}

Mat transport_map(const Measure& rho, const Measure& rt, const std::vector<int>& F) {
  check_bijection(F, rho.size());
  if (rt.size() != rho.size() || rt.spin_dim() != rho.spin_dim())
    throw Refusal("transport_map: measures have different shapes");
  const int N = rho.size(), k = rho.spin_dim();
  Mat pi = Mat::Zero(N * k, N * k);
  for (int i = 0; i < N; ++i) {
    const Point& x = rho.points[i];
    const Point& fx = rt.points[F[i]];
    const RVec left = x.abs_spectrum().cwiseSqrt().cwiseInverse();
    const RVec right = fx.abs_spectrum().cwiseSqrt();
    pi.block(i * k, F[i] * k, k, k) = left.cast<cplx>().asDiagonal() * (x.frame().adjoint() * fx.frame()) *
                                       right.cast<cplx>().asDiagonal();
  }
  return pi;
}

Mat t_operator(const Mat& pi, const Mat& GW, const Mat& GWt) {
  return GWt.ldlt().solve(pi.adjoint() * GW * pi);
}

Mat operator_sqrt(const Mat& B, SqrtReport* report, double cut_tol, double cond_max) {
  SqrtReport rep;
  const double nb = B.norm();
  if (B.size() == 0 || !std::isfinite(nb)) throw NumericalFailure("operator_sqrt: empty or non-finite operator");
  Eigen::ComplexEigenSolver<Mat> es(B);
  if (es.info() != Eigen::Success) throw NumericalFailure("operator_sqrt: eigensolver failed");
  const Mat V = es.eigenvectors();
  const Vec lam = es.eigenvalues();
  Eigen::JacobiSVD<Mat> svd(V);
  const RVec sv = svd.singularValues();
  rep.eigvec_cond = sv(sv.size() - 1) > 0 ? sv(0) / sv(sv.size() - 1) : std::numeric_limits<double>::infinity();
  double dist = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < lam.size(); ++i) {
    const cplx z = lam(i);
    const double d = z.real() >= 0 ? std::abs(z) : std::abs(z.imag());
    dist = std::min(dist, d);
  }
  rep.cut_distance = nb > 0 ? dist / nb : 0.0;
  if (report) *report = rep;
  if (rep.cut_distance <= cut_tol) throw Refusal("operator_sqrt: spectrum touches the cut (-inf, 0]");
  if (rep.eigvec_cond > cond_max) throw NumericalFailure("operator_sqrt: operator is numerically defective");
  Vec root(lam.size());
  for (Eigen::Index i = 0; i < lam.size(); ++i) root(i) = std::sqrt(lam(i));
  const Mat R = V * root.asDiagonal() * V.partialPivLu().inverse();
  rep.residual = (R * R - B).norm() / nb;
  if (report) *report = rep;
  return R;
}

Vec ExtensionOperators::apply(const Vec& psi_t) const {
  return embed_vec(I * restrict_vec(psi_t, coords), coords, full_dim);
}

std::vector<int> identity_map(int n) {
  std::vector<int> F(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) F[static_cast<size_t>(i)] = i;
  return F;
}

ExtensionOperators build_isometry(const Measure& rho, const Measure& rt, const Region& omega,
                                  const BlockKernel& Qreg, const BlockKernel& Qreg_t,
                                  const std::vector<int>& F, const IsometryConfig& cfg) {
  check_bijection(F, rho.size());
  const int N = rho.size(), k = rho.spin_dim();
  // Omega is carried along by F.
  Region omega_t(static_cast<size_t>(N), 0);
  for (int i = 0; i < N; ++i) omega_t[static_cast<size_t>(F[i])] = omega[static_cast<size_t>(i)];

  const SurfaceHilbert h = surface_hilbert(rho, omega, Qreg);
  const SurfaceHilbert ht = surface_hilbert(rt, omega_t, Qreg_t);

  // Pull the rho-tilde structures back to rho ordering.
  const Mat Pm = permutation(F, k);
  const Mat GKt_full = Pm.adjoint() * ht.GK * Pm;
  const Mat GWt_full = Pm.adjoint() * ht.GW * Pm;
  const Mat pi_full = transport_map(rho, rt, F) * Pm;

  std::vector<int> pts;
  for (int i = 0; i < N; ++i) {
    const bool a = std::find(h.active.begin(), h.active.end(), i) != h.active.end();
    const bool b = std::find(ht.active.begin(), ht.active.end(), F[i]) != ht.active.end();
    if (a && b) pts.push_back(i);
  }
  if (cfg.strict && static_cast<int>(pts.size()) < N)
    throw Refusal("build_isometry: surface measure vanishes at some points (strict mode)");
  if (pts.empty()) throw Refusal("build_isometry: empty surface layer");

  ExtensionOperators ops;
  ops.full_dim = N * k;
  ops.coords = active_coordinates(pts, k);
  ops.GK = restrict_gram(h.GK, ops.coords);
  ops.GW = restrict_gram(h.GW, ops.coords);
  ops.GKt = restrict_gram(GKt_full, ops.coords);
  ops.GWt = restrict_gram(GWt_full, ops.coords);
  ops.pi = restrict_gram(pi_full, ops.coords);

  AdmissibilityReport& rep = ops.report;
  const RieszOperator rs = riesz_from_grams(ops.GW, ops.GK, cfg.tol);
  const RieszOperator rst = riesz_from_grams(ops.GWt, ops.GKt, cfg.tol);
  ops.S = rs.S;
  ops.St = rst.S;
  rep.s_injective = rs.injective;
  rep.st_injective = rst.injective;
  if (!rep.s_injective) throw Refusal("not admissible (ii): S is not injective");
  if (!rep.st_injective) throw Refusal("not admissible (ii): S-tilde is not injective");

  ops.T = t_operator(ops.pi, ops.GW, ops.GWt);
  rep.t_min = smallest_sv_ratio(ops.T);
  rep.pi_min = smallest_sv_ratio(ops.pi);
  rep.t_injective = rep.t_min > cfg.tol;
  rep.pi_surjective = rep.pi_min > cfg.tol;
  if (!rep.t_injective) throw Refusal("not admissible (ii): T-hat is not injective");
  if (!rep.pi_surjective) throw Refusal("not admissible (ii): transport is not surjective");

  const auto pi_lu = ops.pi.partialPivLu();
  const Mat right = pi_lu.solve(Mat::Identity(ops.pi.rows(), ops.pi.cols()));
  const Mat mid = ops.T.partialPivLu().solve(ops.St * right);
  ops.B = ops.S.partialPivLu().solve(ops.pi * mid);
  rep.b_norm = ops.B.norm();
  rep.b_bounded = std::isfinite(rep.b_norm) && rep.b_norm < 1e12;
  if (!rep.b_bounded) throw Refusal("not admissible (iv): B is not bounded");

  try {
    ops.sqrtB = operator_sqrt(ops.B, &rep.sqrt);
  } catch (const Refusal&) {
    rep.spectrum_ok = false;
    throw Refusal("not admissible (iv): spectrum of B meets (-inf, 0]");
  }
  rep.spectrum_ok = true;
  ops.I = ops.sqrtB * ops.pi;

  Rng rng(cfg.seed);
  const int m = static_cast<int>(ops.coords.size());
  const Mat lhs = ops.I.adjoint() * ops.GK * ops.I;
  const double scale = std::max(ops.GKt.norm(), 1e-300);
  for (int t = 0; t < cfg.check_pairs; ++t) {
    const Vec a = random_wave(m, rng), b = random_wave(m, rng);
    const double r = std::abs(a.dot(lhs * b) - a.dot(ops.GKt * b)) / (scale * a.norm() * b.norm());
    rep.isometry_residual = std::max(rep.isometry_residual, r);
  }
  return ops;
}

VariationFamily conjugation_family(const Measure& rho, const Mat& A) {
  return [rho, A](double tau) {
    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    const Vec ph = (cplx(0, tau) * es.eigenvalues().cast<cplx>()).array().exp();
    const Mat U = es.eigenvectors() * ph.asDiagonal() * es.eigenvectors().adjoint();
    return conjugate(rho, U);
  };
}

FirstOrderReport first_order_check(const Measure& rho, const Region& omega, double kappa,
                                   const VariationFamily& family, const std::vector<double>& steps,
                                   double h) {
  const auto F = identity_map(rho.size());
  const BlockKernel Q = q_kernel(rho, kappa);
  auto at = [&](double tau) {
    const Measure rt = family(tau);
    return build_isometry(rho, rt, omega, Q, q_kernel(rt, kappa), F);
  };
  const ExtensionOperators base = at(0.0);
  const ExtensionOperators plus = at(h), minus = at(-h);
  if (plus.coords != base.coords || minus.coords != base.coords)
    throw NumericalFailure("first_order_check: active set changes along the family");
  const Mat pi1 = (plus.pi - minus.pi) / (2 * h);
  const Mat T1 = (plus.T - minus.T) / (2 * h);
  const Mat S1 = (plus.St - minus.St) / (2 * h);
  const auto Slu = base.S.partialPivLu();
  FirstOrderReport rep;
  rep.I1_predicted = 0.5 * (pi1 + Slu.solve((pi1 - T1) * base.S) + Slu.solve(S1));
  const Mat one = Mat::Identity(base.I.rows(), base.I.cols());
  for (double tau : steps) {
    const ExtensionOperators e = at(tau);
    rep.steps.push_back(tau);
    rep.errors.push_back((e.I - one - tau * rep.I1_predicted).norm());
  }
  if (steps.size() >= 2) {
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(steps.size());
    for (size_t i = 0; i < steps.size(); ++i) {
      const double x = std::log(steps[i]), y = std::log(std::max(rep.errors[i], 1e-300));
      sx += x, sy += y, sxx += x * x, sxy += x * y;
    }
    rep.order = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  }
  return rep;
}

ExtendedSpace extend_space(const Measure& rho, const Region& omega, const BlockKernel& Qreg,
                           const std::vector<ExtensionOperators>& ops,
                           const std::vector<Measure>& varied, double tol) {
  if (ops.size() != varied.size()) throw Refusal("extend_space: operator and measure lists differ in length");
  const Mat base = physical_waves(rho);
  const Eigen::Index nu = base.cols();
  Mat Phi(base.rows(), nu * static_cast<Eigen::Index>(1 + ops.size()));
  Phi.leftCols(nu) = base;
  for (size_t k = 0; k < ops.size(); ++k)
    for (Eigen::Index a = 0; a < nu; ++a)
      Phi.col(nu * static_cast<Eigen::Index>(k + 1) + a) = ops[k].apply(physical_wave(varied[k], rho.hf.col(a)));

  const Mat GK = surface_form_gram(rho, omega, Qreg);
  Mat G = Phi.adjoint() * GK * Phi;
  G = 0.5 * (G + G.adjoint()).eval();
  Eigen::SelfAdjointEigenSolver<Mat> es(G);
  const RVec ev = es.eigenvalues();
  const double top = ev.size() ? ev.cwiseAbs().maxCoeff() : 0.0;
  ExtendedSpace out;
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < ev.size(); ++i) {
    if (std::abs(ev(i)) > tol * std::max(top, 1e-300)) keep.push_back(i);
    else ++out.dropped;
  }
  out.basis.resize(Phi.rows(), static_cast<Eigen::Index>(keep.size()));
  for (size_t c = 0; c < keep.size(); ++c) {
    const Eigen::Index i = keep[c];
    out.basis.col(static_cast<Eigen::Index>(c)) = Phi * es.eigenvectors().col(i) / std::sqrt(std::abs(ev(i)));
    if (ev(i) > 0) ++out.positive;
    else ++out.negative;
  }
  out.gram = out.basis.adjoint() * GK * out.basis;
  out.positive_definite = out.negative == 0 && out.positive > 0;
  return out;
}

Vec extension_derivative(const Measure& rho, const Region& omega, double kappa,
                         const VariationFamily& family, const Vec& u, double h) {
  const auto F = identity_map(rho.size());
  const BlockKernel Q = q_kernel(rho, kappa);
  auto g = [&](double tau) {
    const Measure rt = family(tau);
    return build_isometry(rho, rt, omega, Q, q_kernel(rt, kappa), F).apply(physical_wave(rt, u));
  };
  const Vec d1 = (g(h) - g(-h)) / (2 * h);
  const Vec d2 = (g(h / 2) - g(-h / 2)) / h;
  return (4.0 * d2 - d1) / 3.0;
}

CompatibilityReport compatibility_check(const Measure& rho, const Region& omega, const Region& omega2,
                                        const BlockKernel& Qreg, const CompatibilityInput& in,
                                        const DerivConfig& cfg) {
  CompatibilityReport rep;
  const Mat G1 = surface_form_gram(rho, omega, Qreg);
  const Mat G2 = surface_form_gram(rho, omega2, Qreg);
  const Mat base = physical_waves(rho);
  auto track = [&](cplx a, cplx b, double& worst) {
    worst = std::max(worst, std::abs(a - b));
    rep.scale = std::max({rep.scale, std::abs(a), std::abs(b)});
  };
  if (in.dpsi.size() != in.dpsi2.size()) throw Refusal("compatibility_check: mismatched derivative lists");
  for (size_t p = 0; p < in.dpsi.size(); ++p)
    for (size_t a = 0; a < in.dpsi[p].size(); ++a) {
      const Vec& d1 = in.dpsi[p][a];
      const Vec& d2 = in.dpsi2[p][a];
      for (Eigen::Index b = 0; b < base.cols(); ++b)
        track(d1.dot(G1 * base.col(b)), d2.dot(G2 * base.col(b)), rep.apres0);
      for (size_t q = 0; q < in.dpsi.size(); ++q)
        for (size_t b = 0; b < in.dpsi[q].size(); ++b)
          track(d1.dot(G1 * in.dpsi[q][b]), d2.dot(G2 * in.dpsi2[q][b]), rep.apres);
    }
  rep.holomorphic = !in.dz.empty();
  if (rep.holomorphic) {
    if (in.dz.size() != in.dz2.size() || in.dz.size() != in.dzbar.size() || in.dz.size() != in.dzbar2.size())
      throw Refusal("compatibility_check: mismatched holomorphic lists");
    for (size_t p = 0; p < in.dz.size(); ++p)
      for (size_t a = 0; a < in.dz[p].size(); ++a) {
        const Vec &z1 = in.dz[p][a], &z2 = in.dz2[p][a];
        const Vec &w1 = in.dzbar[p][a], &w2 = in.dzbar2[p][a];
        const Vec psi = base.col(static_cast<Eigen::Index>(a));
        track(z1.dot(G1 * psi), z2.dot(G2 * psi), rep.c0);
        track(z1.dot(G1 * z1), z2.dot(G2 * z2), rep.c1);
        track(w1.dot(G1 * w1), w2.dot(G2 * w2), rep.c2);
        track(z1.dot(G1 * w1), z2.dot(G2 * w2), rep.c3);
      }
  }
  for (const Mat& A : in.generators) {
    const TestJet c = commutator_test_jet(A, rho);
    for (const TestJet& v : in.jets)
      rep.sigma_preserve = std::max(rep.sigma_preserve, std::abs(sigma(rho, omega, c, v, in.kappa, cfg)));
  }
  return rep;
}

}  // namespace cfs
