#include "cfs/core.hpp"

#include <gtest/gtest.h>

#include <algorithm>

using namespace cfs;

namespace {

Vec nonzero_eigenvalues(const Mat& m, double tol) {
  Eigen::ComplexEigenSolver<Mat> es(m);
  std::vector<cplx> ev;
  for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i)
    if (std::abs(es.eigenvalues()(i)) > tol) ev.push_back(es.eigenvalues()(i));
  Vec out(static_cast<Eigen::Index>(ev.size()));
  for (size_t i = 0; i < ev.size(); ++i) out(static_cast<Eigen::Index>(i)) = ev[i];
  return out;
}

}  // namespace

TEST(Point, FrameSpectrumAndTrace) {
  Rng rng(1);
  for (int n : {1, 2}) {
    SpaceSpec s{6, 3, n, 1.7};
    for (int rep = 0; rep < 20; ++rep) {
      const Point x = random_point(s, rng);
      EXPECT_LT((x.frame().adjoint() * x.frame() - Mat::Identity(2 * n, 2 * n)).norm(), 1e-12);
      EXPECT_NEAR(x.local_trace(), 1.7, 1e-10);
      int pos = 0, neg = 0;
      for (double g : x.metric()) (g > 0 ? pos : neg)++;
      EXPECT_EQ(pos, n);
      EXPECT_EQ(neg, n);
      EXPECT_NEAR(x.op().trace().real(), 1.7, 1e-10);
    }
  }
}

TEST(Point, ZeroTraceSpectrumRefused) {
  Rng rng(2);
  const Mat F = random_frame(4, 2, rng);
  RVec spec(2);
  spec << 1.0, -1.0;
  EXPECT_THROW(make_point(F, spec, 1.0), Refusal);
}

TEST(Point, NegativeRescaleRefused) {
  Rng rng(2);
  const Mat F = random_frame(4, 2, rng);
  RVec spec(2);
  spec << 0.5, -1.5;
  EXPECT_THROW(make_point(F, spec, 1.0), Refusal);
}

TEST(SpaceSpec, Validation) {
  EXPECT_THROW((SpaceSpec{3, 2, 2, 1.0}).validate(), Refusal);
  EXPECT_THROW((SpaceSpec{4, 5, 1, 1.0}).validate(), Refusal);
  EXPECT_NO_THROW((SpaceSpec{4, 2, 2, 1.0}).validate());
}

TEST(ProductSpectrum, MatchesAssembledProduct) {
  Rng rng(3);
  for (int rep = 0; rep < 30; ++rep) {
    SpaceSpec s{7, 3, 1 + rep % 2, 1.0};
    const Point x = random_point(s, rng), y = random_point(s, rng);
    const Mat xy = x.op() * y.op();
    const Vec ref = sort_spectrum(nonzero_eigenvalues(xy, 1e-10 * xy.norm()));
    const Vec got = product_spectrum(x, y);
    ASSERT_EQ(got.size(), 2 * s.n);
    for (Eigen::Index i = 0; i < ref.size(); ++i)
      EXPECT_LT(std::abs(got(i) - ref(i)), 1e-8 * std::max(1.0, std::abs(ref(i))));
    for (Eigen::Index i = ref.size(); i < got.size(); ++i) EXPECT_LT(std::abs(got(i)), 1e-8 * xy.norm());
  }
}

TEST(Lagrangian, UnitaryInvarianceAndSymmetry) {
  Rng rng(4);
  for (int rep = 0; rep < 50; ++rep) {
    SpaceSpec s{6, 2, 1 + rep % 2, 1.0};
    const Point x = random_point(s, rng), y = random_point(s, rng);
    const double kappa = 0.3;
    const Mat U = random_unitary(6, rng);
    const double l = lagrangian_kappa(x, y, kappa);
    EXPECT_NEAR(lagrangian_kappa(conjugate(x, U), conjugate(y, U), kappa), l, 1e-10 * std::max(1.0, l));
    EXPECT_NEAR(lagrangian_kappa(y, x, kappa), l, 1e-10 * std::max(1.0, l));
    EXPECT_GE(lagrangian_kappa(x, y, 0.0), -1e-12);
  }
}

TEST(Lagrangian, SpacelikePairsVanish) {
  Rng rng(5);
  int seen = 0;
  for (int rep = 0; rep < 400 && seen < 10; ++rep) {
    SpaceSpec s{4, 2, 1, 1.0};
    const Point x = random_point(s, rng), y = random_point(s, rng);
    const Vec ev = product_spectrum(x, y);
    if (causal_classify(ev, 1e-12) != Causal::spacelike) continue;
    ++seen;
    const double scale = spectral_weight(ev);
    EXPECT_LE(lagrangian(ev, 1), 1e-10 * scale * scale);
  }
  EXPECT_GT(seen, 0);
}

TEST(Lagrangian, HandComputedSpectra) {
  Vec ev(2);
  ev << cplx(2.0, 0.0), cplx(1.0, 0.0);
  // |l1| - |l2| = 1, squared, halved over n = 1 pairs: sum |li - lj|^2 / 4n
  EXPECT_NEAR(lagrangian(ev, 1), 0.5, 1e-14);
  Vec cc(2);
  cc << cplx(1.0, 1.0), cplx(1.0, -1.0);
  EXPECT_EQ(causal_classify(cc), Causal::spacelike);
  EXPECT_NEAR(lagrangian(cc, 1), 0.0, 1e-14);
}

TEST(SpinProduct, SignatureAndEuclideanSign) {
  Rng rng(6);
  const Point x = random_point(SpaceSpec{5, 2, 2, 1.0}, rng);
  const Mat E = euclidean_sign(x);
  EXPECT_LT((E * E - Mat::Identity(4, 4)).norm(), 1e-12);
  for (int rep = 0; rep < 10; ++rep) {
    const Vec u = random_gaussian(4, 1, rng), v = random_gaussian(4, 1, rng);
    EXPECT_NEAR(std::abs(spin_product(x, u, v) - std::conj(spin_product(x, v, u))), 0.0, 1e-12);
  }
}

TEST(Random, DeterministicGivenSeed) {
  Rng a(9), b(9);
  EXPECT_EQ((random_unitary(5, a) - random_unitary(5, b)).norm(), 0.0);
}
