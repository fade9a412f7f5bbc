#include "cfs/core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace cfs {

void SpaceSpec::validate() const {
  if (dim_f < 1 || n < 1) throw Refusal("space: dim_f and n must be positive");
  if (2 * n > dim_f) throw Refusal("space: 2n exceeds dim_f");
  if (dim_hf < 1 || dim_hf > dim_f) throw Refusal("space: dim_hf must lie in [1, dim_f]");
}

Point::Point(Mat frame, RVec spectrum) : frame_(std::move(frame)), spec_(std::move(spectrum)) {
  if (frame_.cols() != spec_.size() || spec_.size() % 2 != 0)
    throw Refusal("point: frame/spectrum size mismatch");
}

Mat Point::op() const {
  return frame_ * spec_.cast<cplx>().asDiagonal() * frame_.adjoint();
}

Point make_point(const Mat& frame, const RVec& spectrum, double c) {
  const Eigen::Index k = spectrum.size();
  if (k == 0 || k % 2 != 0 || frame.cols() != k)
    throw Refusal("make_point: frame must have 2n columns matching the spectrum");
  if (frame.rows() < k) throw Refusal("make_point: frame has fewer rows than columns");

  Eigen::JacobiSVD<Mat> svd(frame, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const RVec& sv = svd.singularValues();
  if (sv(0) <= 0.0 || sv(k - 1) < 1e-10 * sv(0))
    throw Refusal("make_point: frame is rank deficient");
  Mat q = svd.matrixU() * svd.matrixV().adjoint();

  std::vector<Eigen::Index> pos, neg;
  for (Eigen::Index i = 0; i < k; ++i) {
    if (spectrum(i) > 0) pos.push_back(i);
    else if (spectrum(i) < 0) neg.push_back(i);
  }
  if (static_cast<Eigen::Index>(pos.size()) != k / 2 || static_cast<Eigen::Index>(neg.size()) != k / 2)
    throw Refusal("make_point: spectrum needs exactly n positive and n negative entries");

  Mat f(frame.rows(), k);
  RVec s(k);
  Eigen::Index j = 0;
  for (auto i : pos) { f.col(j) = q.col(i); s(j++) = spectrum(i); }
  for (auto i : neg) { f.col(j) = q.col(i); s(j++) = spectrum(i); }

  const double tr = s.sum();
  if (std::abs(tr) <= 1e-14 * s.cwiseAbs().sum())
    throw Refusal("make_point: zero local trace cannot be rescaled");
  const double factor = c / tr;
  if (!(factor > 0.0))
    throw Refusal("make_point: rescaling to the target trace would flip the signature");
  return Point(std::move(f), s * factor);
}

Point project_rank(const Mat& op, int n) {
  Mat h = 0.5 * (op + op.adjoint());
  Eigen::SelfAdjointEigenSolver<Mat> es(h);
  if (es.info() != Eigen::Success) throw NumericalFailure("project_rank: eigensolver failed");
  const RVec& ev = es.eigenvalues();  // ascending
  const int f = static_cast<int>(h.rows());
  if (ev(f - n) <= 0.0 || ev(n - 1) >= 0.0)
    throw Refusal("project_rank: operator lost its signature");
  Mat fr(f, 2 * n);
  RVec s(2 * n);
  for (int i = 0; i < n; ++i) {
    fr.col(i) = es.eigenvectors().col(f - 1 - i);
    s(i) = ev(f - 1 - i);
    fr.col(n + i) = es.eigenvectors().col(i);
    s(n + i) = ev(i);
  }
  return Point(std::move(fr), std::move(s));
}

Point conjugate(const Point& x, const Mat& U) { return Point(U * x.frame(), x.spectrum()); }

Mat p_block(const Point& x, const Point& y) {
  return x.frame().adjoint() * y.frame() * y.spectrum().cast<cplx>().asDiagonal();
}

Mat closed_chain(const Point& x, const Point& y) { return p_block(x, y) * p_block(y, x); }

Vec sort_spectrum(Vec ev) {
  std::vector<cplx> v(ev.data(), ev.data() + ev.size());
  std::stable_sort(v.begin(), v.end(), [](cplx a, cplx b) {
    const double ma = std::abs(a), mb = std::abs(b);
    const double tol = 1e-13 * std::max({ma, mb, 1e-300});
    if (std::abs(ma - mb) > tol) return ma > mb;
    return std::arg(a) < std::arg(b);
  });
  for (Eigen::Index i = 0; i < ev.size(); ++i) ev(i) = v[static_cast<size_t>(i)];
  return ev;
}

Vec product_spectrum(const Point& x, const Point& y) {
  if (x.dim_f() != y.dim_f() || x.n() != y.n())
    throw Refusal("product_spectrum: points live in different spaces");
  Eigen::ComplexEigenSolver<Mat> es(closed_chain(x, y), false);
  if (es.info() != Eigen::Success) throw NumericalFailure("product_spectrum: eigensolver failed");
  return sort_spectrum(es.eigenvalues());
}

double lagrangian(const Vec& ev, int n) {
  double acc = 0.0;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    for (Eigen::Index j = 0; j < ev.size(); ++j) {
      const double d = std::abs(ev(i)) - std::abs(ev(j));
      acc += d * d;
    }
  return acc / (4.0 * n);
}

double spectral_weight(const Vec& ev) { return ev.cwiseAbs().sum(); }

double lagrangian_kappa(const Vec& ev, int n, double kappa) {
  const double s = spectral_weight(ev);
  return lagrangian(ev, n) + kappa * s * s;
}

double lagrangian_kappa(const Point& x, const Point& y, double kappa) {
  return lagrangian_kappa(product_spectrum(x, y), x.n(), kappa);
}

Causal causal_classify(const Vec& ev, double tol) {
  if (ev.size() == 0) return Causal::spacelike;
  const RVec m = ev.cwiseAbs();
  const double scale = std::max(m.maxCoeff(), 1e-300);
  if (m.maxCoeff() - m.minCoeff() <= tol * scale) return Causal::spacelike;
  for (Eigen::Index i = 0; i < ev.size(); ++i)
    if (std::abs(ev(i).imag()) > tol * scale) return Causal::lightlike;
  return Causal::timelike;
}

std::string to_string(Causal c) {
  switch (c) {
    case Causal::spacelike: return "spacelike";
    case Causal::timelike: return "timelike";
    case Causal::lightlike: return "lightlike";
  }
  return "?";
}

cplx spin_product(const Point& x, const Vec& u, const Vec& v) {
  if (u.size() != x.spin_dim() || v.size() != x.spin_dim())
    throw Refusal("spin_product: spinor dimension mismatch");
  return -(u.adjoint() * (x.spectrum().cast<cplx>().asDiagonal() * v))(0);
}

double spin_norm(const Point& x, const Vec& u) {
  if (u.size() != x.spin_dim()) throw Refusal("spin_norm: spinor dimension mismatch");
  return std::sqrt((u.cwiseAbs2().array() * x.abs_spectrum().array()).sum());
}

Mat euclidean_sign(const Point& x) {
  Vec d(x.spin_dim());
  for (int i = 0; i < x.spin_dim(); ++i) d(i) = x.spectrum()(i) > 0 ? -1.0 : 1.0;
  return d.asDiagonal();
}

Mat random_gaussian(int rows, int cols, Rng& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  Mat m(rows, cols);
  for (int j = 0; j < cols; ++j)
    for (int i = 0; i < rows; ++i) {
      const double re = g(rng);
      const double im = g(rng);
      m(i, j) = cplx(re, im);
    }
  return m;
}

Mat random_unitary(int f, Rng& rng) {
  Eigen::HouseholderQR<Mat> qr(random_gaussian(f, f, rng));
  Mat q = qr.householderQ() * Mat::Identity(f, f);
  // fix column phases so the distribution does not depend on QR sign choices
  Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
  for (int i = 0; i < f; ++i) {
    const double a = std::abs(r(i, i));
    if (a > 0) q.col(i) *= r(i, i) / a;
  }
  return q;
}

Mat random_hermitian(int f, Rng& rng) {
  Mat a = random_gaussian(f, f, rng);
  return 0.5 * (a + a.adjoint());
}

Mat random_frame(int f, int k, Rng& rng) { return random_unitary(f, rng).leftCols(k); }

Point random_point(const SpaceSpec& s, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  RVec spec(2 * s.n);
  for (int tries = 0; tries < 1000; ++tries) {
    for (int i = 0; i < s.n; ++i) spec(i) = u(rng);
    for (int i = 0; i < s.n; ++i) spec(s.n + i) = -u(rng);
    if (spec.sum() * s.c < 0) {
      RVec t(2 * s.n);
      t.head(s.n) = -spec.tail(s.n);
      t.tail(s.n) = -spec.head(s.n);
      spec = t;
    }
    if (std::abs(spec.sum()) > 0.2 * spec.cwiseAbs().sum()) break;
  }
  return make_point(random_frame(s.dim_f, 2 * s.n, rng), spec, s.c);
}

}  // namespace cfs
