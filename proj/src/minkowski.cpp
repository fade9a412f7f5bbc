#include "cfs/minkowski.hpp"

#include <cmath>
#include <limits>

namespace cfs {

namespace {

const cplx kI(0, 1);

std::string show(const Vec3& k) {
  return "(" + std::to_string(k(0)) + ", " + std::to_string(k(1)) + ", " + std::to_string(k(2)) + ")";
}

}  // namespace

Mat DiracStructure::slash(double k0, const Vec3& k) const {
  return k0 * gamma[0] - k(0) * gamma[1] - k(1) * gamma[2] - k(2) * gamma[3];
}

double DiracStructure::clifford_residual() const {
  double worst = 0;
  const Mat I = Mat::Identity(4, 4);
  for (int mu = 0; mu < 4; ++mu)
    for (int nu = 0; nu < 4; ++nu) {
      const double eta = mu != nu ? 0.0 : (mu == 0 ? 1.0 : -1.0);
      const Mat ac = gamma[mu] * gamma[nu] + gamma[nu] * gamma[mu];
      worst = std::max(worst, (ac - 2.0 * eta * I).norm());
    }
  return worst;
}

DiracStructure dirac_structure(double mass) {
  if (!(mass > 0)) throw Refusal("Dirac mass must be positive");
  DiracStructure d;
  d.mass = mass;
  Mat s[3] = {Mat::Zero(2, 2), Mat::Zero(2, 2), Mat::Zero(2, 2)};
  s[0] << 0, 1, 1, 0;
  s[1] << 0, -kI, kI, 0;
  s[2] << 1, 0, 0, -1;
  d.gamma[0] = Mat::Zero(4, 4);
  d.gamma[0].diagonal() << 1, 1, -1, -1;
  for (int i = 0; i < 3; ++i) {
    d.gamma[i + 1] = Mat::Zero(4, 4);
    d.gamma[i + 1].block(0, 2, 2, 2) = s[i];
    d.gamma[i + 1].block(2, 0, 2, 2) = -s[i];
  }
  return d;
}

ShellSolution shell_solution(const DiracStructure& d, const Vec3& k, int sign) {
  ShellSolution sol;
  sol.k = k;
  sol.sign = sign >= 0 ? 1 : -1;
  const double w = sol.sign * d.omega(k);
  // (kslash - m)(kslash + m) = k^2 - m^2 = 0 on the shell
  const Mat P = d.slash(w, k) + d.mass * Mat::Identity(4, 4);
  Eigen::JacobiSVD<Mat> svd(P, Eigen::ComputeThinU);
  sol.basis = svd.matrixU().leftCols(2);
  sol.residual = ((d.slash(w, k) - d.mass * Mat::Identity(4, 4)) * sol.basis).norm();
  return sol;
}

double Polynomial::operator()(double x) const {
  double v = 0;
  for (auto it = c.rbegin(); it != c.rend(); ++it) v = v * x + *it;
  return v;
}

Mat QhatModel::evaluate(const DiracStructure& d, double k0, const Vec3& k) const {
  const double q2 = k0 * k0 - k.squaredNorm();
  if (!(q2 > 0)) throw NumericalFailure("momentum " + show(k) + " with k0 = " + std::to_string(k0) + " is not timelike");
  return a(q2) / std::sqrt(q2) * d.slash(k0, k) + b(q2) * Mat::Identity(4, 4);
}

StateStabilityReport state_stability_check(const QhatModel& model, const std::vector<double>& masses,
                                           const std::vector<double>& q2_grid, double tol) {
  if (q2_grid.empty() || masses.empty()) throw Refusal("need masses and a nonempty q^2 grid");
  StateStabilityReport rep;
  rep.min_a = std::numeric_limits<double>::infinity();
  rep.grid_min = std::numeric_limits<double>::infinity();
  for (double q2 : q2_grid) {
    if (!(q2 > 0)) throw Refusal("q^2 grid must lie inside the lower mass cone");
    rep.min_a = std::min(rep.min_a, model.a(q2));
    const double f = model.a(q2) + model.b(q2);
    if (f < rep.grid_min) {
      rep.grid_min = f;
      rep.argmin_q2 = q2;
    }
  }
  rep.a_nonnegative = rep.min_a >= -tol;
  rep.minimal_on_shell = true;
  rep.value_at_shell = -std::numeric_limits<double>::infinity();
  for (double m : masses) {
    const double f = model.a(m * m) + model.b(m * m);
    rep.value_at_shell = std::max(rep.value_at_shell, f);
    if (f > rep.grid_min + tol * std::max(1.0, std::abs(rep.grid_min))) rep.minimal_on_shell = false;
  }
  return rep;
}

QhatEvaluator MinkowskiModel::evaluator(const DiracStructure& d) const {
  const MinkowskiModel self = *this;
  return [self, d](double w, const Vec3& k) {
    const double wk = d.omega(k);
    Mat q = self.q.evaluate(d, w, k);
    q += self.alpha(k.squaredNorm()) * (d.slash(-wk, k) - d.mass * Mat::Identity(4, 4));
    q += self.cprime * (0.5 * (std::abs(w - wk) + std::abs(w + wk)) - wk) * d.gamma[0];
    return q;
  };
}

MomentumGrid momentum_grid(int n, double kmax) {
  if (n < 1 || !(kmax >= 0)) throw Refusal("invalid momentum grid");
  MomentumGrid g;
  const double norm = 1.0 / std::pow(2 * M_PI, 3);
  if (n == 1) {
    g.k.push_back(Vec3::Zero());
    g.w.push_back(norm);
    return g;
  }
  const double h = 2 * kmax / (n - 1);
  auto w1 = [&](int i) { return (i == 0 || i == n - 1) ? 0.5 * h : h; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      for (int l = 0; l < n; ++l) {
        g.k.emplace_back(-kmax + i * h, -kmax + j * h, -kmax + l * h);
        g.w.push_back(norm * w1(i) * w1(j) * w1(l));
      }
  return g;
}

Mat RhatResult::R(const DiracStructure& d, size_t i) const {
  const Vec3& k = points.at(i).k;
  return points[i].h * (d.slash(-d.omega(k), k) - d.mass * Mat::Identity(4, 4));
}

RhatResult rhat_construct(const QhatEvaluator& qreg, const MomentumGrid& grid, const DiracStructure& d,
                          double tol, const std::vector<double>& extra_masses) {
  std::vector<double> masses{d.mass};
  masses.insert(masses.end(), extra_masses.begin(), extra_masses.end());
  RhatResult res;
  const Mat I = Mat::Identity(4, 4);
  for (const Vec3& k : grid.k) {
    RhatPoint pt;
    pt.k = k;
    const Mat ansatz = d.slash(-d.omega(k), k) - d.mass * I;
    std::vector<Mat> X, Y, Qm, Psim;
    std::vector<double> scale_p, scale_m;
    double num = 0, den = 0;
    for (double m : masses) {
      DiracStructure db = d;
      db.mass = m;
      const double w = db.omega(k);
      const Mat up = shell_solution(db, k, +1).basis;
      const Mat qp = qreg(w, k);
      X.push_back(ansatz * up);
      Y.push_back(qp * up);
      scale_p.push_back(qp.norm());
      num += (X.back().adjoint() * Y.back()).trace().real();
      den += X.back().squaredNorm();
      Qm.push_back(qreg(-w, k));
      Psim.push_back(shell_solution(db, k, -1).basis);
      scale_m.push_back(Qm.back().norm());
    }
    pt.h = den > 0 ? -num / den : 0.0;
    for (size_t b = 0; b < masses.size(); ++b) {
      const double up = (Y[b] + pt.h * X[b]).norm();
      pt.upper_residual = std::max(pt.upper_residual, scale_p[b] > 0 ? up / scale_p[b] : up);
      const double lo = ((Qm[b] + pt.h * ansatz) * Psim[b]).norm();
      pt.lower_residual = std::max(pt.lower_residual, scale_m[b] > 0 ? lo / scale_m[b] : lo);
    }
    pt.lower_annihilation = (ansatz * Psim[0]).norm();
    res.max_upper = std::max(res.max_upper, pt.upper_residual);
    res.max_lower = std::max(res.max_lower, pt.lower_residual);
    res.points.push_back(pt);
  }
  res.sufficient = res.max_upper <= tol && res.max_lower <= tol;
  return res;
}

QhatEvaluator qdyn_hat(const QhatEvaluator& qreg, const std::function<Mat(const Vec3&)>& rhat) {
  return [qreg, rhat](double w, const Vec3& k) -> Mat { return qreg(w, k) + rhat(k); };
}

Mat derivative_jump(const QhatEvaluator& q, double omega, const Vec3& k, double step) {
  static const double c[5] = {-25.0 / 12, 4.0, -3.0, 4.0 / 3, -0.25};
  if (!(step > 0)) throw Refusal("derivative step must be positive");
  if (4 * step >= std::abs(omega)) throw Refusal("derivative stencil at " + show(k) + " reaches the other shell");
  Mat up = Mat::Zero(4, 4), dn = Mat::Zero(4, 4);
  try {
    for (int j = 0; j < 5; ++j) {
      up += c[j] * q(omega + j * step, k);
      dn += c[j] * q(omega - j * step, k);
    }
  } catch (const NumericalFailure& e) {
    throw NumericalFailure(std::string("derivative stencil failed at the shell: ") + e.what());
  }
  const Mat out = (up + dn) / step;
  if (!out.allFinite()) throw NumericalFailure("derivative stencil produced non-finite values at " + show(k));
  return out;
}

ShellData random_shell_data(const DiracStructure& d, const MomentumGrid& grid, Rng& rng) {
  ShellData s;
  for (const Vec3& k : grid.k) {
    s.plus.push_back(shell_solution(d, k, +1).basis * random_gaussian(2, 1, rng));
    s.minus.push_back(shell_solution(d, k, -1).basis * random_gaussian(2, 1, rng));
  }
  return s;
}

MomentumProduct momentum_surface_product(const QhatEvaluator& q, const DiracStructure& d,
                                         const MomentumGrid& grid, const ShellData& psi,
                                         const ShellData& phi, double c, double step) {
  const size_t n = grid.k.size();
  if (psi.plus.size() != n || psi.minus.size() != n || phi.plus.size() != n || phi.minus.size() != n)
    throw Refusal("shell data does not match the momentum grid");
  MomentumProduct out;
  std::vector<Mat> Dp(n), Dm(n);
  double csum = 0;
  for (size_t i = 0; i < n; ++i) {
    const double w = d.omega(grid.k[i]);
    Dp[i] = derivative_jump(q, w, grid.k[i], step);
    Dm[i] = derivative_jump(q, -w, grid.k[i], step);
    csum += ((d.gamma[0] * Dp[i]).trace().real() + (d.gamma[0] * Dm[i]).trace().real()) / 4;
  }
  out.cprime = n > 0 ? csum / (2.0 * static_cast<double>(n)) : 0.0;
  const double ref = std::max(std::abs(out.cprime) * d.gamma[0].norm(), 1e-300);
  out.value = 0;
  out.dirac_current = 0;
  for (size_t i = 0; i < n; ++i) {
    const Vec u = psi.plus[i] + psi.minus[i];
    const Vec g0u = d.gamma[0].adjoint() * u;
    out.value += grid.w[i] * c * (g0u.dot(Dp[i] * phi.plus[i]) + g0u.dot(Dm[i] * phi.minus[i]));
    out.dirac_current += grid.w[i] * c * out.cprime * u.dot(phi.plus[i] + phi.minus[i]);
    const double dev = std::max((Dp[i] - out.cprime * d.gamma[0]).norm(), (Dm[i] - out.cprime * d.gamma[0]).norm()) / ref;
    out.current_deviation.push_back(dev);
    out.max_deviation = std::max(out.max_deviation, dev);
  }
  return out;
}

SingSupportReport qsing_support_check(const std::function<Mat(double, const Vec3&)>& qsing,
                                      const std::vector<std::array<double, 4>>& momenta, double tol) {
  SingSupportReport rep;
  for (const auto& p : momenta) {
    const Vec3 k(p[1], p[2], p[3]);
    if (!(p[0] < 0 && p[0] * p[0] - k.squaredNorm() > 0)) continue;
    rep.max_inside = std::max(rep.max_inside, qsing(p[0], k).norm());
    ++rep.checked;
  }
  rep.ok = rep.max_inside <= tol;
  return rep;
}

QhatEvaluator subtract(const QhatEvaluator& q, const QhatEvaluator& qsing) {
  return [q, qsing](double w, const Vec3& k) -> Mat { return q(w, k) - qsing(w, k); };
}

cplx contour_residues(const std::vector<cplx>& poles, double c, double t) {
  if (poles.size() < 2) throw Refusal("integrand must decay at least quadratically");
  cplx sum = 0;
  for (size_t j = 0; j < poles.size(); ++j) {
    if (poles[j].imag() == c) throw Refusal("pole on the integration contour");
    const bool below = poles[j].imag() < c;
    if ((t >= 0) != below) continue;
    cplx r = std::exp(-kI * poles[j] * t);
    for (size_t l = 0; l < poles.size(); ++l)
      if (l != j) r /= poles[j] - poles[l];
    sum += r;
  }
  // closing below runs clockwise
  return (t >= 0 ? -2.0 : 2.0) * M_PI * kI * sum;
}

cplx contour_quadrature(const std::vector<cplx>& poles, double c, double t, double cutoff, double dx) {
  const long n = static_cast<long>(std::ceil(2 * cutoff / dx));
  const double h = 2 * cutoff / static_cast<double>(n);
  cplx sum = 0;
  for (long i = 0; i <= n; ++i) {
    const cplx w(-cutoff + static_cast<double>(i) * h, c);
    cplx f = std::exp(-kI * w * t);
    for (const cplx& p : poles) f /= w - p;
    sum += (i == 0 || i == n ? 0.5 : 1.0) * f;
  }
  return sum * h;
}

}  // namespace cfs
