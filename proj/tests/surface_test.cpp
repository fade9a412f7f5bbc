#include "fixtures.hpp"

#include <gtest/gtest.h>

using namespace cfs;

namespace {

struct Sample {
  Measure rho;
  Region omega;
  double kappa = 0.3;
};

Sample random_setup(std::uint64_t seed, SpaceSpec s = {5, 3, 1, 1.0}) {
  Rng rng(seed);
  Sample out{random_measure(s, 6, rng), region_from_indices(6, {0, 1, 3})};
  return out;
}

Mat hf_generator(const Measure& rho, Rng& rng) {
  const int f = rho.space.dim_f, h = rho.space.dim_hf;
  Mat A = Mat::Zero(f, f);
  A.topLeftCorner(h, h) = random_hermitian(h, rng);
  return A;
}

}  // namespace

// The bracket identity with the factor obtained by differentiating unitary invariance in both
// slots with opposite signs at x and y: gamma([C_A, C_B]) = -2 sigma(C_A, C_B).
TEST(Bracket, GammaOfBracketAgainstSigma) {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Sample s = random_setup(seed);
    Rng rng(100 + seed);
    const Mat A = hf_generator(s.rho, rng), B = hf_generator(s.rho, rng);
    const Mat G = cplx(0, 1) * (A * B - B * A);
    const double g = -gamma(s.rho, s.omega, commutator_test_jet(G, s.rho), s.kappa);
    const double sg = sigma(s.rho, s.omega, commutator_test_jet(A, s.rho), commutator_test_jet(B, s.rho), s.kappa);
    EXPECT_LE(std::abs(g + 2 * sg), 1e-7 * std::abs(g));
  }
}

TEST(Gamma, AnalyticAndFiniteDifferenceRoutesAgree) {
  Sample s = random_setup(7);
  Rng rng(7);
  const BlockKernel Q = q_kernel(s.rho, s.kappa);
  for (int rep = 0; rep < 3; ++rep) {
    const Mat A = hf_generator(s.rho, rng), B = hf_generator(s.rho, rng);
    const double fd = gamma(s.rho, s.omega, commutator_test_jet(A, s.rho), s.kappa);
    EXPECT_LE(std::abs(fd - gamma_commutator(s.rho, s.omega, Q, A)), 1e-7 * std::max(1.0, std::abs(fd)));
    const double sfd = sigma(s.rho, s.omega, commutator_test_jet(A, s.rho), commutator_test_jet(B, s.rho), s.kappa);
    EXPECT_LE(std::abs(sfd - sigma_commutator(s.rho, s.omega, Q, A, B)), 1e-6 * std::max(1.0, std::abs(sfd)));
  }
}

TEST(InnerProduct, KernelRouteMatchesPolarization) {
  Sample s = random_setup(8, {3, 3, 1, 1.0});
  Rng rng(8);
  const BlockKernel Q = q_kernel(s.rho, s.kappa);
  for (int rep = 0; rep < 3; ++rep) {
    const Vec u = random_gaussian(3, 1, rng), v = random_gaussian(3, 1, rng);
    const cplx a = commutator_inner_product(s.rho, s.omega, Q, u, v);
    const cplx b = commutator_inner_product_polarized(s.rho, s.omega, s.kappa, u, v);
    EXPECT_LE(std::abs(a - b), 1e-6 * std::max(1.0, std::abs(a)));
  }
}

TEST(InnerProduct, HermitianAndSesquilinear) {
  Sample s = random_setup(9);
  Rng rng(9);
  const BlockKernel Q = q_kernel(s.rho, s.kappa);
  const int d = s.rho.wave_dim();
  const Vec p = random_gaussian(d, 1, rng), q = random_gaussian(d, 1, rng), r = random_gaussian(d, 1, rng);
  const cplx a(0.3, -1.2);
  const cplx pq = surface_form(s.rho, s.omega, Q, p, q);
  EXPECT_LE(std::abs(pq - std::conj(surface_form(s.rho, s.omega, Q, q, p))), 1e-12 * std::max(1.0, std::abs(pq)));
  const cplx lin = surface_form(s.rho, s.omega, Q, p, a * q + r);
  const cplx ref = a * pq + surface_form(s.rho, s.omega, Q, p, r);
  EXPECT_LE(std::abs(lin - ref), 1e-12 * std::max(1.0, std::abs(ref)));
  const Mat G = surface_form_gram(s.rho, s.omega, Q);
  EXPECT_LE((G - G.adjoint()).norm(), 1e-12 * G.norm());
}

// A singular part u_i (G_j u_j)^dag h_ij with u_j spin-orthogonal to the physical wave is symmetric
// and kills the physical waves, so it is admitted and leaves the inner product untouched.
TEST(InnerProduct, UnchangedBySubtractingAdmittedSingularPart) {
  Sample s = random_setup(10, {4, 1, 1, 1.0});
  Rng rng(10);
  const BlockKernel Q = q_kernel(s.rho, s.kappa);
  const int N = s.rho.size();
  const Vec psi = physical_wave(s.rho, s.rho.hf.col(0));
  std::vector<Vec> u(static_cast<size_t>(N));
  for (int j = 0; j < N; ++j) {
    const Vec w = psi.segment(2 * j, 2);
    Vec e(2);
    e << -std::conj(w(1)), std::conj(w(0));
    const RVec g = s.rho.points[static_cast<size_t>(j)].metric();
    u[static_cast<size_t>(j)] = g.cast<cplx>().cwiseInverse().asDiagonal() * e;
  }
  const Mat h = random_hermitian(N, rng);
  BlockKernel S(N, 2, KernelKind::sing);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < N; ++j) {
      const RVec g = s.rho.points[static_cast<size_t>(j)].metric();
      const Vec gu = g.cast<cplx>().asDiagonal() * u[static_cast<size_t>(j)];
      S.at(i, j) = h(i, j) * u[static_cast<size_t>(i)] * gu.adjoint();
    }
  QsingReport rep;
  const BlockKernel R = q_reg_split(Q, S, s.rho, s.omega, 1e-10, &rep);
  EXPECT_TRUE(rep.accepted);
  EXPECT_GT((R.dense() - Q.dense()).norm(), 1e-3);
  const cplx a = surface_form(s.rho, s.omega, Q, psi, psi), b = surface_form(s.rho, s.omega, R, psi, psi);
  EXPECT_LE(std::abs(a - b), 1e-10 * std::max(1.0, std::abs(a)));
}

TEST(SurfaceHilbert, PositiveL2GramAndHermitianKreinGram) {
  Sample s = random_setup(11);
  const SurfaceHilbert h = surface_hilbert(s.rho, s.omega, q_kernel(s.rho, s.kappa));
  Eigen::SelfAdjointEigenSolver<Mat> es(h.GW);
  EXPECT_GE(es.eigenvalues().minCoeff(), -1e-12 * std::max(1.0, es.eigenvalues().maxCoeff()));
  EXPECT_LE((h.GK - h.GK.adjoint()).norm(), 1e-12 * std::max(1.0, h.GK.norm()));
  for (double m : h.mu) EXPECT_GE(m, 0.0);
}

TEST(SurfaceLayer, EmptyAndFullRegionsHaveNoSurface) {
  Sample s = random_setup(12);
  const BlockKernel Q = q_kernel(s.rho, s.kappa);
  Rng rng(12);
  const Mat A = random_hermitian(5, rng);
  EXPECT_EQ(gamma_commutator(s.rho, Region(6, 0), Q, A), 0.0);
  EXPECT_EQ(gamma_commutator(s.rho, Region(6, 1), Q, A), 0.0);
}

TEST(Conservation, HexagonAndPerturbedControl) {
  const Measure hx = fx::hexagon();
  const auto regions = fx::hexagon_regions();
  Rng rng(13);
  const Mat A = hx.hf * random_hermitian(2, rng) * hx.hf.adjoint();
  const std::vector<TestJet> jets{commutator_test_jet(A, hx)};
  const double scale = fx::commutator_scale(hx, A, fx::hexagon_kappa);
  const auto d = conservation_check(hx, regions[0], regions[1], jets, fx::hexagon_kappa);
  EXPECT_LE(d[0], 1e-6 * scale);
  const Measure pert = fx::perturbed(hx, 0.01, rng);
  const auto dp = conservation_check(pert, regions[0], regions[1], {commutator_test_jet(A, pert)}, fx::hexagon_kappa);
  EXPECT_GT(dp[0], 100 * d[0]);
}

TEST(Regions, IndexRoundTrip) {
  const Region r = region_from_indices(5, {4, 1});
  EXPECT_EQ(region_indices(r), (std::vector<int>{1, 4}));
  EXPECT_THROW(region_from_indices(3, {3}), Refusal);
}
