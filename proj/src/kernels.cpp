#include "cfs/kernels.hpp"

#include <algorithm>
#include <cmath>

namespace cfs {

std::string to_string(KernelKind k) {
  switch (k) {
    case KernelKind::p: return "p";
    case KernelKind::full: return "full";
    case KernelKind::reg: return "reg";
    case KernelKind::sing: return "sing";
    case KernelKind::dyn: return "dyn";
    case KernelKind::r: return "r";
  }
  return "?";
}

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "p") return KernelKind::p;
  if (s == "full") return KernelKind::full;
  if (s == "reg") return KernelKind::reg;
  if (s == "sing") return KernelKind::sing;
  if (s == "dyn") return KernelKind::dyn;
  if (s == "r") return KernelKind::r;
  throw IoError("unknown kernel kind '" + s + "'");
}

BlockKernel::BlockKernel(int N, int k, KernelKind kd)
    : npoints(N), spin(k), kind(kd),
      blocks(static_cast<size_t>(N * N), Mat::Zero(k, k)),
      flagged(static_cast<size_t>(N * N), 0) {}

Mat BlockKernel::dense() const {
  Mat m(npoints * spin, npoints * spin);
  for (int i = 0; i < npoints; ++i)
    for (int j = 0; j < npoints; ++j) m.block(i * spin, j * spin, spin, spin) = at(i, j);
  return m;
}

BlockKernel BlockKernel::from_dense(const Mat& m, int N, int k, KernelKind kind) {
  BlockKernel out(N, k, kind);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) out.at(i, j) = m.block(i * k, j * k, k, k);
  return out;
}

BlockKernel operator-(const BlockKernel& a, const BlockKernel& b) {
  if (a.npoints != b.npoints || a.spin != b.spin) throw Refusal("kernel shape mismatch");
  BlockKernel out = a;
  for (size_t i = 0; i < out.blocks.size(); ++i) out.blocks[i] -= b.blocks[i];
  return out;
}

BlockKernel operator*(double s, const BlockKernel& a) {
  BlockKernel out = a;
  for (auto& b : out.blocks) b *= s;
  return out;
}

Mat spin_adjoint(const Mat& a, const RVec& gx, const RVec& gy) {
  return gy.cwiseInverse().cast<cplx>().asDiagonal() * a.adjoint() * gx.cast<cplx>().asDiagonal();
}

double kernel_asymmetry(const BlockKernel& k, const Measure& rho) {
  double worst = 0;
  for (int i = 0; i < k.npoints; ++i)
    for (int j = 0; j < k.npoints; ++j) {
      const Mat adj = spin_adjoint(k.at(i, j), rho.points[i].metric(), rho.points[j].metric());
      worst = std::max(worst, (adj - k.at(j, i)).norm());
    }
  return worst;
}

BlockKernel fermionic_projector_kernel(const Measure& rho) {
  const int N = rho.size(), k = rho.spin_dim();
  BlockKernel out(N, k, KernelKind::p);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) out.at(i, j) = p_block(rho.points[i], rho.points[j]);
  return out;
}

namespace {

Mat chain_from_p(const Mat& P, const RVec& gx, const RVec& gy) {
  return P * spin_adjoint(P, gx, gy);
}

QBlock q_by_differences(const Mat& P, const RVec& gx, const RVec& gy, int n, double kappa) {
  const double h = 1e-6 * std::max(P.norm(), 1e-300);
  Mat z(P.rows(), P.cols());
  for (Eigen::Index j = 0; j < P.cols(); ++j)
    for (Eigen::Index i = 0; i < P.rows(); ++i) {
      Mat pp = P, pm = P;
      pp(i, j) += h;
      pm(i, j) -= h;
      const double dre = (chain_functional(pp, gx, gy, n, kappa) - chain_functional(pm, gx, gy, n, kappa)) / (2 * h);
      pp = P; pm = P;
      pp(i, j) += cplx(0, h);
      pm(i, j) -= cplx(0, h);
      const double dim = (chain_functional(pp, gx, gy, n, kappa) - chain_functional(pm, gx, gy, n, kappa)) / (2 * h);
      z(i, j) = 0.5 * cplx(dre, dim);
    }
  QBlock out;
  out.q = gx.cwiseInverse().cast<cplx>().asDiagonal() * z * gy.cast<cplx>().asDiagonal();
  out.fallback = true;
  return out;
}

}  // namespace

double chain_functional(const Mat& P, const RVec& gx, const RVec& gy, int n, double kappa) {
  Eigen::ComplexEigenSolver<Mat> es(chain_from_p(P, gx, gy), false);
  if (es.info() != Eigen::Success) throw NumericalFailure("chain_functional: eigensolver failed");
  return lagrangian_kappa(es.eigenvalues(), n, kappa);
}

QBlock q_from_p(const Mat& P, const RVec& gx, const RVec& gy, int n, double kappa) {
  const Eigen::Index k = P.rows();
  const Mat A = chain_from_p(P, gx, gy);
  const double pscale = gx.cwiseAbs().maxCoeff() * gy.cwiseAbs().maxCoeff();
  if (A.norm() <= 1e-24 * pscale * pscale) {
    QBlock z;
    z.q = Mat::Zero(k, k);
    z.fallback = true;
    return z;
  }
  Eigen::ComplexEigenSolver<Mat> es(A, true);
  if (es.info() != Eigen::Success) return q_by_differences(P, gx, gy, n, kappa);
  const Vec& lam = es.eigenvalues();
  const Mat& R = es.eigenvectors();
  const double lscale = lam.cwiseAbs().maxCoeff();
  bool degenerate = lam.cwiseAbs().minCoeff() < 1e-8 * lscale;
  for (Eigen::Index i = 0; i < k && !degenerate; ++i)
    for (Eigen::Index j = i + 1; j < k; ++j)
      if (std::abs(lam(i) - lam(j)) < 1e-8 * lscale) degenerate = true;
  Eigen::JacobiSVD<Mat> svd(R);
  const RVec& sv = svd.singularValues();
  if (degenerate || sv(k - 1) < 1e-8 * sv(0)) return q_by_differences(P, gx, gy, n, kappa);

  const RVec m = lam.cwiseAbs();
  const double S = m.sum();
  Vec c(k);
  for (Eigen::Index i = 0; i < k; ++i) {
    const double w = 2 * m(i) - S / n + 2 * kappa * S;
    c(i) = w * std::conj(lam(i)) / m(i);
  }
  const Mat K = R * c.asDiagonal() * R.partialPivLu().inverse();
  const Mat Gx = gx.cast<cplx>().asDiagonal();
  const Mat Gxi = gx.cwiseInverse().cast<cplx>().asDiagonal();
  QBlock out;
  out.q = 0.5 * (K + Gxi * K.adjoint() * Gx) * P;
  return out;
}

QBlock q_block(const Point& x, const Point& y, double kappa) {
  return q_from_p(p_block(x, y), x.metric(), y.metric(), x.n(), kappa);
}

BlockKernel q_kernel(const Measure& rho, double kappa) {
  const int N = rho.size(), k = rho.spin_dim();
  BlockKernel out(N, k, KernelKind::full);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      QBlock b = q_block(rho.points[i], rho.points[j], kappa);
      out.at(i, j) = b.q;
      out.flagged[static_cast<size_t>(i * N + j)] = b.fallback;
    }
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) {
      const size_t ij = static_cast<size_t>(i * N + j), ji = static_cast<size_t>(j * N + i);
      if (!out.flagged[ij] && !out.flagged[ji]) continue;
      const RVec gi = rho.points[i].metric(), gj = rho.points[j].metric();
      const Mat sym = 0.5 * (out.at(i, j) + spin_adjoint(out.at(j, i), gj, gi));
      out.at(i, j) = sym;
      out.at(j, i) = spin_adjoint(sym, gi, gj);
      out.flagged[ij] = out.flagged[ji] = 1;
    }
  return out;
}

Vec physical_wave(const Measure& rho, const Vec& u) {
  const int k = rho.spin_dim();
  Vec psi(rho.wave_dim());
  for (int i = 0; i < rho.size(); ++i) psi.segment(i * k, k) = rho.points[i].frame().adjoint() * u;
  return psi;
}

Mat physical_waves(const Measure& rho) {
  Mat out(rho.wave_dim(), rho.hf.cols());
  for (Eigen::Index a = 0; a < rho.hf.cols(); ++a) out.col(a) = physical_wave(rho, rho.hf.col(a));
  return out;
}

BlockKernel q_reg_split(const BlockKernel& Q, const BlockKernel& Qsing, const Measure& rho,
                        const std::vector<char>& omega, double tol, QsingReport* report) {
  const int N = rho.size(), k = rho.spin_dim();
  if (kernel_asymmetry(Qsing, rho) > 1e-10 * std::max(1.0, Qsing.dense().norm()))
    throw Refusal("q_reg_split: Q^sing is not symmetric");
  QsingReport rep;
  const Mat waves = physical_waves(rho);
  for (Eigen::Index a = 0; a < waves.cols(); ++a) {
    double worst = 0;
    for (int i = 0; i < N; ++i) {
      Vec acc = Vec::Zero(k);
      for (int j = 0; j < N; ++j) acc += rho.weights[j] * Qsing.at(i, j) * waves.col(a).segment(j * k, k);
      worst = std::max(worst, acc.norm());
    }
    rep.per_u.push_back(worst);
    rep.max_support_residual = std::max(rep.max_support_residual, worst);
  }
  for (Eigen::Index a = 0; a < waves.cols(); ++a)
    for (Eigen::Index b = 0; b < waves.cols(); ++b) {
      cplx acc = 0;
      for (int i = 0; i < N; ++i)
        for (int j = 0; j < N; ++j) {
          if (omega[i] == omega[j]) continue;
          const double sgn = omega[i] ? 1.0 : -1.0;
          acc += sgn * rho.weights[i] * rho.weights[j] *
                 spin_product(rho.points[i], waves.col(a).segment(i * k, k),
                              Qsing.at(i, j) * waves.col(b).segment(j * k, k));
        }
      rep.max_surface_residual = std::max(rep.max_surface_residual, std::abs(acc));
    }
  rep.accepted = rep.max_support_residual <= tol && rep.max_surface_residual <= tol;
  if (report) *report = rep;
  if (!rep.accepted)
    throw Refusal("q_reg_split: Q^sing violates the vanishing conditions (support residual " +
                  std::to_string(rep.max_support_residual) + ", surface residual " +
                  std::to_string(rep.max_surface_residual) + ")");
  BlockKernel out = Q - Qsing;
  out.kind = KernelKind::reg;
  return out;
}

Mat commutator_field(const Mat& A, const Point& x) {
  const Mat xo = x.op();
  return cplx(0, 1) * (A * xo - xo * A);
}

CommutatorJet commutator_jet(const Mat& A, const Measure& rho, double tol) {
  const double an = std::max(A.norm(), 1e-300);
  if ((A - A.adjoint()).norm() > tol * an) throw Refusal("commutator_jet: generator is not Hermitian");
  const Mat ph = rho.hf * rho.hf.adjoint();
  if ((A - ph * A * ph).norm() > tol * an)
    throw Refusal("commutator_jet: generator does not vanish on the complement of H^f");
  CommutatorJet j;
  j.generator = A;
  for (const auto& x : rho.points) j.field.push_back(commutator_field(A, x));
  return j;
}

Mat rank_one(const Vec& u) { return u * u.adjoint(); }

Mat fermionic_field(const Point& x, const Mat& dpsi) {
  const Mat G = x.metric().cast<cplx>().asDiagonal();
  const Mat t = x.frame() * G * dpsi;
  return -(t + t.adjoint());
}

namespace {

Point moved(const Point& x, const Mat& v, double t) {
  if (v.size() == 0 || t == 0.0) return x;
  return project_rank(x.op() + t * v, x.n());
}

double step_for(const Point& x, const Mat& v, double h) {
  if (v.size() == 0) return h;
  const double vn = v.norm();
  if (vn == 0) return h;
  return h * std::max(x.abs_spectrum().maxCoeff(), 1e-300) / vn;
}

template <class F>
double central(F&& f, double h, bool richardson) {
  auto d = [&](double s) { return (f(s) - f(-s)) / (2 * s); };
  if (!richardson) return d(h);
  return (4 * d(h / 2) - d(h)) / 3;
}

}  // namespace

double directional_derivative_L(const Point& x, const Point& y, const Mat& v1, const Mat& v2,
                                double kappa, const DerivConfig& cfg) {
  const bool z1 = v1.size() == 0 || v1.norm() == 0, z2 = v2.size() == 0 || v2.norm() == 0;
  if (z1 && z2) return 0.0;
  const double h = std::min(z1 ? 1e300 : step_for(x, v1, cfg.h), z2 ? 1e300 : step_for(y, v2, cfg.h));
  auto f = [&](double t) {
    return lagrangian_kappa(z1 ? x : moved(x, v1, t), z2 ? y : moved(y, v2, t), kappa);
  };
  return central(f, h, cfg.richardson);
}

double mixed_derivative_L(const Point& x, const Point& y, const Mat& u1, const Mat& v2,
                          double kappa, const DerivConfig& cfg) {
  if (u1.size() == 0 || v2.size() == 0 || u1.norm() == 0 || v2.norm() == 0) return 0.0;
  const double hs = step_for(x, u1, cfg.h), ht = step_for(y, v2, cfg.h);
  auto d = [&](double a) {
    const Point xp = moved(x, u1, a * hs), xm = moved(x, u1, -a * hs);
    const Point yp = moved(y, v2, a * ht), ym = moved(y, v2, -a * ht);
    return (lagrangian_kappa(xp, yp, kappa) - lagrangian_kappa(xp, ym, kappa) -
            lagrangian_kappa(xm, yp, kappa) + lagrangian_kappa(xm, ym, kappa)) /
           (4 * a * a * hs * ht);
  };
  if (!cfg.richardson) return d(1.0);
  return (4 * d(0.5) - d(1.0)) / 3;
}

double ell_derivative(const Measure& rho, const Point& x, const Mat& v, double kappa,
                      const DerivConfig& cfg) {
  if (v.size() == 0 || v.norm() == 0) return 0.0;
  auto f = [&](double t) {
    const Point xt = moved(x, v, t);
    double acc = 0;
    for (int j = 0; j < rho.size(); ++j) acc += rho.weights[j] * lagrangian_kappa(xt, rho.points[j], kappa);
    return acc;
  };
  return central(f, step_for(x, v, cfg.h), cfg.richardson);
}

RVec linearized_field_residual(const Measure& rho, const std::vector<Mat>& v, const TestJet& u,
                               double kappa, double ds_dv, const DerivConfig& cfg) {
  const int N = rho.size();
  RVec out = RVec::Zero(N);
  auto vat = [&](int j) -> const Mat& {
    static const Mat empty;
    return j < static_cast<int>(v.size()) ? v[static_cast<size_t>(j)] : empty;
  };
  for (int i = 0; i < N; ++i) {
    // h(x') = sum_j rho_j (D_{1,v_i} + D_{2,v_j}) L(x', x_j) - ds/dv, jets held fixed
    auto h = [&](const Point& xp) {
      double acc = 0;
      for (int j = 0; j < N; ++j)
        acc += rho.weights[j] * directional_derivative_L(xp, rho.points[j], vat(i), vat(j), kappa, cfg);
      return acc - ds_dv;
    };
    const double a = u.a.size() > i ? u.a(i) : 0.0;
    double val = a == 0.0 ? 0.0 : a * h(rho.points[i]);
    const Mat& ui = i < static_cast<int>(u.v.size()) ? u.v[static_cast<size_t>(i)] : Mat();
    if (ui.size() != 0 && ui.norm() != 0) {
      const Point& x = rho.points[i];
      auto f = [&](double t) { return h(moved(x, ui, t)); };
      val += central(f, step_for(x, ui, 10 * cfg.h), cfg.richardson);
    }
    out(i) = val;
  }
  return out;
}

}  // namespace cfs
