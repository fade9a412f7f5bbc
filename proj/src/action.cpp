#include "cfs/action.hpp"
#include "cfs/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

namespace cfs {

void Measure::validate() const {
  space.validate();
  if (points.empty()) throw Refusal("measure: no points");
  if (weights.size() != points.size()) throw Refusal("measure: weights/points size mismatch");
  if (hf.rows() != space.dim_f || hf.cols() != space.dim_hf)
    throw Refusal("measure: hf basis has the wrong shape");
  for (size_t i = 0; i < points.size(); ++i) {
    const Point& x = points[i];
    if (!(weights[i] > 0.0) || !std::isfinite(weights[i]))
      throw Refusal("measure: weight " + std::to_string(i) + " is not positive");
    if (x.dim_f() != space.dim_f || x.n() != space.n)
      throw Refusal("measure: point " + std::to_string(i) + " has the wrong dimensions");
    if (std::abs(x.local_trace() - space.c) > 1e-10 * std::max(1.0, std::abs(space.c)))
      throw Refusal("measure: point " + std::to_string(i) + " violates the local trace");
  }
}

void Measure::prune() {
  std::vector<Point> p;
  std::vector<double> w;
  for (size_t i = 0; i < points.size(); ++i)
    if (weights[i] > 0.0) {
      p.push_back(points[i]);
      w.push_back(weights[i]);
    }
  points = std::move(p);
  weights = std::move(w);
}

Mat default_hf(const SpaceSpec& s) { return Mat::Identity(s.dim_f, s.dim_hf); }

Measure make_measure(const SpaceSpec& s, std::vector<Point> pts, std::vector<double> w) {
  Measure m;
  m.space = s;
  if (w.empty()) w.assign(pts.size(), 1.0);
  m.points = std::move(pts);
  m.weights = std::move(w);
  m.hf = default_hf(s);
  m.prune();
  m.validate();
  return m;
}

Measure conjugate(const Measure& rho, const Mat& U) {
  Measure m = rho;
  for (auto& p : m.points) p = conjugate(p, U);
  m.hf = U * rho.hf;
  return m;
}

Measure random_measure(const SpaceSpec& s, int npoints, Rng& rng) {
  std::vector<Point> pts;
  std::uniform_real_distribution<double> u(0.5, 1.5);
  std::vector<double> w;
  for (int i = 0; i < npoints; ++i) {
    pts.push_back(random_point(s, rng));
    w.push_back(u(rng));
  }
  return make_measure(s, std::move(pts), std::move(w));
}

RMat lagrangian_matrix(const Measure& rho, double kappa) {
  const int N = rho.size();
  RMat L(N, N);
  for (int i = 0; i < N; ++i)
    for (int j = i; j < N; ++j) L(i, j) = L(j, i) = lagrangian_kappa(rho.points[i], rho.points[j], kappa);
  return L;
}

ActionReport causal_action(const Measure& rho, double kappa) {
  ActionReport r;
  const int N = rho.size();
  for (int i = 0; i < N; ++i) {
    r.volume += rho.weights[i];
    r.trace_integral += rho.weights[i] * rho.points[i].local_trace();
    for (int j = 0; j < N; ++j) {
      const Vec ev = product_spectrum(rho.points[i], rho.points[j]);
      const double w = rho.weights[i] * rho.weights[j];
      const double sw = spectral_weight(ev);
      r.action += w * lagrangian_kappa(ev, rho.space.n, kappa);
      r.boundedness += w * sw * sw;
    }
  }
  r.s_param = fit_s(rho, kappa);
  return r;
}

double ell(const Measure& rho, const Point& x, double kappa, double s) {
  double acc = 0;
  for (int j = 0; j < rho.size(); ++j) acc += rho.weights[j] * lagrangian_kappa(x, rho.points[j], kappa);
  return acc - s;
}

RVec ell_values(const Measure& rho, double kappa, double s) {
  const RMat L = lagrangian_matrix(rho, kappa);
  const RVec w = Eigen::Map<const RVec>(rho.weights.data(), rho.size());
  return (L * w).array() - s;
}

double fit_s(const Measure& rho, double kappa) { return ell_values(rho, kappa, 0.0).mean(); }

namespace {

// Hermitian basis of C^{k x k}, orthonormal in the trace inner product.
std::vector<Mat> hermitian_basis(int k) {
  std::vector<Mat> out;
  for (int i = 0; i < k; ++i) {
    Mat e = Mat::Zero(k, k);
    e(i, i) = 1;
    out.push_back(e);
  }
  const double r = 1 / std::sqrt(2.0);
  for (int i = 0; i < k; ++i)
    for (int j = i + 1; j < k; ++j) {
      Mat e = Mat::Zero(k, k);
      e(i, j) = e(j, i) = r;
      out.push_back(e);
      Mat g = Mat::Zero(k, k);
      g(i, j) = cplx(0, -r);
      g(j, i) = cplx(0, r);
      out.push_back(g);
    }
  return out;
}

}  // namespace

Mat tangent_tracefree(const Point& x, const Mat& g) {
  const Mat pi = x.frame() * x.frame().adjoint();
  const Mat q = Mat::Identity(g.rows(), g.cols()) - pi;
  Mat t = g - q * g * q;
  t = 0.5 * (t + t.adjoint());
  return t - (t.trace().real() / x.spin_dim()) * pi;
}

std::vector<TestJet> default_test_jets(const Measure& rho, JetSpace space) {
  const int N = rho.size(), f = rho.space.dim_f;
  std::vector<TestJet> jets;
  TestJet one;
  one.a = RVec::Ones(N);
  one.label = "scalar:1";
  jets.push_back(one);
  if (space == JetSpace::scalar_only) {
    for (int i = 0; i < N; ++i) {
      TestJet t;
      t.a = RVec::Zero(N);
      t.a(i) = 1;
      t.label = "scalar:" + std::to_string(i);
      jets.push_back(t);
    }
    return jets;
  }
  const std::vector<Mat> basis = hermitian_basis(f);
  for (int i = 0; i < N; ++i) {
    const Point& x = rho.points[i];
    for (size_t b = 0; b < basis.size(); ++b) {
      Mat dir = space == JetSpace::rotations ? commutator_field(basis[b], x)
                                             : tangent_tracefree(x, basis[b]);
      if (dir.norm() < 1e-12 * std::max(1.0, x.abs_spectrum().maxCoeff())) continue;
      TestJet t;
      t.a = RVec::Zero(N);
      t.v.assign(static_cast<size_t>(N), Mat());
      t.v[static_cast<size_t>(i)] = dir / dir.norm();
      t.label = (space == JetSpace::rotations ? "rot:" : "dir:") + std::to_string(i) + ":" +
                std::to_string(b);
      jets.push_back(std::move(t));
    }
  }
  return jets;
}

ELResidual el_residual(const Measure& rho, double kappa, const std::vector<TestJet>& jets,
                       const std::vector<Point>& probes, const ELConfig& cfg) {
  if (!(cfg.fd_step > 1e-12)) throw NumericalFailure("el_residual: finite-difference step underflow");
  const int N = rho.size(), k = rho.spin_dim();
  ELResidual r;
  r.s_param = cfg.s ? *cfg.s : fit_s(rho, kappa);
  r.ell_values = ell_values(rho, kappa, r.s_param);
  r.max_abs_ell_on_M = r.ell_values.cwiseAbs().maxCoeff();
  r.min_ell_offsupport = std::numeric_limits<double>::quiet_NaN();
  for (const auto& p : probes) {
    const double v = ell(rho, p, kappa, r.s_param);
    if (std::isnan(r.min_ell_offsupport) || v < r.min_ell_offsupport) r.min_ell_offsupport = v;
  }

  DerivConfig dc;
  dc.h = cfg.fd_step;
  r.weak_residuals = RVec::Zero(static_cast<Eigen::Index>(jets.size()));
  for (size_t j = 0; j < jets.size(); ++j) {
    const TestJet& t = jets[j];
    double worst = 0;
    for (int i = 0; i < N; ++i) {
      const double a = i < t.a.size() ? t.a(i) : 0.0;
      double val = a * r.ell_values(i);
      if (i < static_cast<int>(t.v.size())) val += ell_derivative(rho, rho.points[i], t.v[i], kappa, dc);
      worst = std::max(worst, std::abs(val));
    }
    r.weak_residuals(static_cast<Eigen::Index>(j)) = worst;
  }

  // trace multiplier: sum_y rho_y Q(x,y) Psi(y) = r Psi(x) over the hf waves
  const BlockKernel Q = q_kernel(rho, kappa);
  const Mat waves = physical_waves(rho);
  Vec lhs(waves.size()), rhs(waves.size());
  Eigen::Index pos = 0;
  for (Eigen::Index a = 0; a < waves.cols(); ++a)
    for (int i = 0; i < N; ++i) {
      Vec acc = Vec::Zero(k);
      for (int jj = 0; jj < N; ++jj) acc += rho.weights[jj] * Q.at(i, jj) * waves.col(a).segment(jj * k, k);
      lhs.segment(pos, k) = acc;
      rhs.segment(pos, k) = waves.col(a).segment(i * k, k);
      pos += k;
    }
  const double den = rhs.squaredNorm();
  r.r_param = den > 0 ? (rhs.dot(lhs)).real() / den : 0.0;
  const double ln = lhs.norm();
  r.r_residual = ln > 0 ? (lhs - r.r_param * rhs).norm() / ln : 0.0;
  return r;
}

Mat ell_gradient(const Measure& rho, const Point& x, double kappa) {
  // L(x,y) depends on x only through X = F_y* x F_y; differentiate in that 2n x 2n block.
  const int k = x.spin_dim(), n = x.n();
  const std::vector<Mat> basis = hermitian_basis(k);
  Mat g = Mat::Zero(x.dim_f(), x.dim_f());
  const Mat xo = x.op();
  for (int j = 0; j < rho.size(); ++j) {
    const Point& y = rho.points[j];
    const Mat X = y.frame().adjoint() * xo * y.frame();
    const Mat D = y.spectrum().cast<cplx>().asDiagonal();
    const double h = 1e-6 * std::max(1.0, X.norm());
    auto L = [&](const Mat& m) {
      Eigen::ComplexEigenSolver<Mat> es(m * D, false);
      return lagrangian_kappa(es.eigenvalues(), n, kappa);
    };
    Mat gX = Mat::Zero(k, k);
    for (const Mat& e : basis) {
      const double d = (L(X + h * e) - L(X - h * e)) / (2 * h);
      gX += d * e;
    }
    g += rho.weights[j] * (y.frame() * gX * y.frame().adjoint());
  }
  return 0.5 * (g + g.adjoint());
}

MinimizeResult minimize(const Measure& rho0, double kappa, const MinimizeConfig& cfg) {
  rho0.validate();
  const int N = rho0.size();
  const double volume = std::accumulate(rho0.weights.begin(), rho0.weights.end(), 0.0);
  MinimizeResult res;
  Measure cur = rho0;
  double cur_action = causal_action(cur, kappa).action;
  Measure best = cur;
  double best_action = cur_action;
  double eta = cfg.step;
  int stall = 0;

  auto log_row = [&](int it, const Measure& m) {
    const ActionReport rep = causal_action(m, kappa);
    const RVec ev = ell_values(m, kappa, rep.s_param);
    res.trace.push_back({it, rep.action, rep.volume, rep.boundedness, ev.cwiseAbs().maxCoeff()});
  };
  log_row(0, cur);

  int it = 1;
  for (; it <= cfg.max_iter; ++it) {
    std::vector<Mat> grads(static_cast<size_t>(N));
    double gmax = 0, xscale = 0;
    for (int i = 0; i < N; ++i) {
      grads[i] = tangent_tracefree(cur.points[i], ell_gradient(cur, cur.points[i], kappa));
      gmax = std::max(gmax, grads[i].norm());
      xscale = std::max(xscale, cur.points[i].abs_spectrum().maxCoeff());
    }
    const RVec lv = ell_values(cur, kappa, 0.0);
    const double lmean = lv.mean();
    const double lspread = (lv.array() - lmean).abs().maxCoeff();
    if (gmax <= cfg.tol * std::max(1.0, cur_action) && lspread <= cfg.tol * std::max(1.0, cur_action)) {
      res.converged = true;
      break;
    }

    bool accepted = false;
    for (int bt = 0; bt < 30 && !accepted; ++bt, eta *= 0.5) {
      Measure trial = cur;
      bool ok = true;
      try {
        for (int i = 0; i < N; ++i) {
          if (gmax == 0) break;
          const Mat step = (eta * xscale / gmax) * grads[i];
          const Point p = project_rank(cur.points[i].op() - step, cur.space.n);
          trial.points[i] = make_point(p.frame(), p.spectrum(), cur.space.c);
        }
      } catch (const Refusal&) {
        ok = false;
      }
      if (!ok) continue;
      double wsum = 0;
      for (int i = 0; i < N; ++i) {
        trial.weights[i] = cur.weights[i] * std::exp(-eta * cfg.weight_step / std::max(cfg.step, 1e-300) *
                                                     (lv(i) - lmean) / std::max(std::abs(lmean), 1e-300));
        wsum += trial.weights[i];
      }
      for (auto& w : trial.weights) w *= volume / wsum;
      const double a = causal_action(trial, kappa).action;
      if (a < cur_action) {
        cur = std::move(trial);
        const double prev = cur_action;
        cur_action = a;
        accepted = true;
        if (prev - a <= cfg.tol * std::max(1.0, prev)) ++stall;
        else stall = 0;
      }
    }
    if (accepted) {
      eta = std::min(eta * 4.0, cfg.step);
      log_row(it, cur);
      if (cur_action < best_action) {
        best = cur;
        best_action = cur_action;
      }
    } else {
      ++stall;
      eta = cfg.step;
    }
    if (stall >= cfg.patience) {
      res.converged = true;
      break;
    }
  }
  res.iterations = std::min(it, cfg.max_iter);
  res.measure = best;
  res.report = causal_action(best, kappa);
  return res;
}

Measure symmetric_critical_generator(int group_size, const SpaceSpec& s, const Point& seed,
                                     const Mat& U) {
  if (group_size < 1) throw Refusal("symmetric_critical_generator: group_size must be >= 1");
  std::vector<Point> pts;
  std::vector<double> w;
  Point x = make_point(seed.frame(), seed.spectrum(), s.c);
  for (int k = 0; k < group_size; ++k) {
    bool merged = false;
    const Mat xo = x.op();
    for (size_t j = 0; j < pts.size(); ++j)
      if ((pts[j].op() - xo).norm() <= 1e-10 * std::max(1.0, xo.norm())) {
        w[j] += 1.0 / group_size;
        merged = true;
        break;
      }
    if (!merged) {
      pts.push_back(x);
      w.push_back(1.0 / group_size);
    }
    x = conjugate(x, U);
  }
  return make_measure(s, std::move(pts), std::move(w));
}

namespace {

Point polygon_point(int k, int m, double alpha, double beta, const Mat& V) {
  const double th = 2 * std::numbers::pi * k / m;
  const cplx ph = std::polar(1.0, th);
  Mat e(2, 2);
  e << 1, 1, ph, -ph;
  e /= std::sqrt(2.0);
  RVec spec(2);
  spec << alpha + beta, alpha - beta;
  return Point(V * e, spec);
}

}  // namespace

Measure polygon_orbit(int group_size, int dim_f, double c, double beta, const Mat& embed) {
  if (group_size < 1) throw Refusal("polygon_orbit: group_size must be >= 1");
  const double alpha = c / 2;
  if (!(beta > std::abs(alpha))) throw Refusal("polygon_orbit: beta must exceed |c|/2");
  if (embed.rows() != dim_f || embed.cols() < 2) throw Refusal("polygon_orbit: embed must be f x (>=2)");
  SpaceSpec s{dim_f, 2, 1, c};
  const Mat V = embed.leftCols(2);
  std::vector<Point> pts;
  for (int k = 0; k < group_size; ++k) pts.push_back(polygon_point(k, group_size, alpha, beta, V));
  Measure m = make_measure(s, std::move(pts), std::vector<double>(static_cast<size_t>(group_size), 1.0 / group_size));
  m.hf = V;
  return m;
}

}  // namespace cfs
