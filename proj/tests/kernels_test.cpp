#include "cfs/surface.hpp"

#include <gtest/gtest.h>

using namespace cfs;

namespace {

// Fourth-order central difference of g(P + t d) at t = 0.
double fd_directional(const Mat& P, const Mat& d, const RVec& gx, const RVec& gy, int n, double kappa, double h) {
  auto g = [&](double t) { return chain_functional(P + t * d, gx, gy, n, kappa); };
  return (8 * (g(h / 2) - g(-h / 2)) - (g(h) - g(-h))) / (6 * h);
}

}  // namespace

TEST(Q, GradientOracleAgainstFiniteDifferences) {
  Rng rng(31);
  std::uniform_real_distribution<double> kap(0.0, 1.0);
  for (int rep = 0; rep < 40; ++rep) {
    SpaceSpec s{6, 3, 1 + rep % 2, 1.0};
    const Point x = random_point(s, rng), y = random_point(s, rng);
    const double kappa = kap(rng);
    const Mat P = p_block(x, y);
    const QBlock q = q_from_p(P, x.metric(), y.metric(), x.n(), kappa);
    const double scale = (1 + kappa) * std::pow(std::max(1.0, P.norm()), 3);
    for (int k = 0; k < 3; ++k) {
      Mat d = random_gaussian(static_cast<int>(P.rows()), static_cast<int>(P.cols()), rng);
      d /= d.norm();
      const double fd = fd_directional(P, d, x.metric(), y.metric(), x.n(), kappa, 1e-4 * P.norm());
      const double an = 2 * (q.q * spin_adjoint(d, x.metric(), y.metric())).trace().real();
      EXPECT_LE(std::abs(fd - an), 1e-6 * scale);
    }
  }
}

TEST(Q, KernelSymmetric) {
  Rng rng(32);
  const Measure rho = random_measure(SpaceSpec{5, 3, 1, 1.0}, 6, rng);
  EXPECT_LT(kernel_asymmetry(q_kernel(rho, 0.3), rho), 1e-10);
  EXPECT_LT(kernel_asymmetry(fermionic_projector_kernel(rho), rho), 1e-12);
}

TEST(P, SpinAdjointSwapsArguments) {
  Rng rng(33);
  SpaceSpec s{6, 3, 2, 1.0};
  const Point x = random_point(s, rng), y = random_point(s, rng);
  const Mat Pxy = p_block(x, y), Pyx = p_block(y, x);
  EXPECT_LT((spin_adjoint(Pxy, x.metric(), y.metric()) - Pyx).norm(), 1e-12 * Pxy.norm());
}

TEST(P, ClosedChainIsospectralToProduct) {
  Rng rng(34);
  SpaceSpec s{5, 2, 1, 1.0};
  const Point x = random_point(s, rng), y = random_point(s, rng);
  EXPECT_NEAR(closed_chain(x, y).trace().real(), (x.op() * y.op()).trace().real(), 1e-10);
}

TEST(Q, ChainFunctionalReproducesLagrangian) {
  Rng rng(35);
  SpaceSpec s{5, 2, 1, 1.0};
  const Point x = random_point(s, rng), y = random_point(s, rng);
  const double l = lagrangian_kappa(x, y, 0.4);
  EXPECT_NEAR(chain_functional(p_block(x, y), x.metric(), y.metric(), 1, 0.4), l, 1e-10 * std::max(1.0, l));
}

TEST(Commutator, VectorFieldBracketIsCommutatorJet) {
  Rng rng(36);
  for (int rep = 0; rep < 10; ++rep) {
    const Mat A = random_hermitian(5, rng), B = random_hermitian(5, rng);
    const Point x = random_point(SpaceSpec{5, 3, 1, 1.0}, rng);
    const Mat m = x.op();
    auto CA = [&](const Mat& p) { return Mat(cplx(0, 1) * (A * p - p * A)); };
    auto CB = [&](const Mat& p) { return Mat(cplx(0, 1) * (B * p - p * B)); };
    const double h = 0.5;  // the fields are linear, so central differences are exact
    const Mat DaB = (CB(m + h * CA(m)) - CB(m - h * CA(m))) / (2 * h);
    const Mat DbA = (CA(m + h * CB(m)) - CA(m - h * CB(m))) / (2 * h);
    const Mat G = cplx(0, 1) * (A * B - B * A);
    const Mat rhs = -commutator_field(G, x);
    EXPECT_LT((DaB - DbA - rhs).norm(), 1e-12 * std::max(1.0, rhs.norm()));
  }
}

TEST(Commutator, UnitaryInvarianceOfBothSlots) {
  Rng rng(37);
  for (int rep = 0; rep < 10; ++rep) {
    SpaceSpec s{5, 3, 1 + rep % 2, 1.0};
    const Point x = random_point(s, rng), y = random_point(s, rng);
    const Mat A = random_hermitian(5, rng);
    const double d = directional_derivative_L(x, y, commutator_field(A, x), commutator_field(A, y), 0.2);
    const double d1 = directional_derivative_L(x, y, commutator_field(A, x), Mat(), 0.2);
    EXPECT_LE(std::abs(d), 1e-7 * std::max(1.0, std::abs(d1)));
  }
}

TEST(Commutator, JetRefusesGeneratorsOutsideHf) {
  Rng rng(38);
  const Measure rho = random_measure(SpaceSpec{5, 2, 1, 1.0}, 3, rng);
  EXPECT_THROW(commutator_jet(random_hermitian(5, rng), rho), Refusal);
  Mat A = Mat::Zero(5, 5);
  A.topLeftCorner(2, 2) = random_hermitian(2, rng);
  const CommutatorJet j = commutator_jet(A, rho);
  ASSERT_EQ(j.field.size(), 3u);
  for (const Mat& f : j.field) EXPECT_LT((f - f.adjoint()).norm(), 1e-12);
  Mat nh = A;
  nh(0, 1) += 1.0;
  EXPECT_THROW(commutator_jet(nh, rho), Refusal);
}

TEST(Waves, PhysicalWaveIsFrameProjection) {
  Rng rng(39);
  const Measure rho = random_measure(SpaceSpec{5, 3, 1, 1.0}, 3, rng);
  const Vec u = random_gaussian(5, 1, rng);
  const Vec psi = physical_wave(rho, u);
  ASSERT_EQ(psi.size(), rho.wave_dim());
  for (int i = 0; i < 3; ++i)
    EXPECT_LT((psi.segment(2 * i, 2) - rho.points[static_cast<size_t>(i)].frame().adjoint() * u).norm(), 1e-12);
}

TEST(QSplit, ZeroSingularPartKeepsQ) {
  Rng rng(40);
  const Measure rho = random_measure(SpaceSpec{4, 2, 1, 1.0}, 4, rng);
  const BlockKernel Q = q_kernel(rho, 0.2);
  const BlockKernel zero(4, 2, KernelKind::sing);
  QsingReport rep;
  const BlockKernel R = q_reg_split(Q, zero, rho, region_from_indices(4, {0, 1}), 1e-12, &rep);
  EXPECT_TRUE(rep.accepted);
  EXPECT_EQ((R.dense() - Q.dense()).norm(), 0.0);
}

TEST(QSplit, RefusesSingularPartActingOnPhysicalWaves) {
  Rng rng(41);
  const Measure rho = random_measure(SpaceSpec{4, 2, 1, 1.0}, 4, rng);
  const BlockKernel Q = q_kernel(rho, 0.2);
  EXPECT_THROW(q_reg_split(Q, 0.5 * Q, rho, region_from_indices(4, {0, 1}), 1e-10), Refusal);
}

TEST(KernelKind, StringRoundTrip) {
  for (KernelKind k : {KernelKind::p, KernelKind::full, KernelKind::reg, KernelKind::sing, KernelKind::dyn, KernelKind::r})
    EXPECT_EQ(kernel_kind_from_string(to_string(k)), k);
  EXPECT_THROW(kernel_kind_from_string("bogus"), IoError);
}
