#include "cfs/kernels.hpp"

#include <gtest/gtest.h>

using namespace cfs;

TEST(Action, InvariantUnderGlobalConjugation) {
  Rng rng(11);
  for (int rep = 0; rep < 5; ++rep) {
    const Measure rho = random_measure(SpaceSpec{5, 3, 1 + rep % 2, 1.0}, 6, rng);
    const Measure rt = conjugate(rho, random_unitary(5, rng));
    const ActionReport a = causal_action(rho, 0.2), b = causal_action(rt, 0.2);
    EXPECT_NEAR(a.action, b.action, 1e-10 * a.action);
    EXPECT_NEAR(a.boundedness, b.boundedness, 1e-10 * a.boundedness);
    EXPECT_GE(a.action, 0.0);
    EXPECT_GE(a.boundedness, 0.0);
  }
}

TEST(Action, TraceIntegralIsVolumeTimesTrace) {
  Rng rng(12);
  const Measure rho = random_measure(SpaceSpec{4, 2, 1, 1.3}, 5, rng);
  const ActionReport a = causal_action(rho, 0.0);
  EXPECT_NEAR(a.trace_integral, 1.3 * a.volume, 1e-12);
}

TEST(Ell, MatrixAssemblyMatchesPairSum) {
  Rng rng(13);
  const Measure rho = random_measure(SpaceSpec{5, 2, 1, 1.0}, 7, rng);
  const double kappa = 0.4, s = 0.3;
  const RVec v = ell_values(rho, kappa, s);
  for (int i = 0; i < rho.size(); ++i) {
    double naive = -s;
    for (int j = 0; j < rho.size(); ++j)
      naive += rho.weights[static_cast<size_t>(j)] * lagrangian_kappa(rho.points[static_cast<size_t>(i)], rho.points[static_cast<size_t>(j)], kappa);
    EXPECT_NEAR(v(i), naive, 1e-12 * std::max(1.0, std::abs(naive)));
    EXPECT_NEAR(ell(rho, rho.points[static_cast<size_t>(i)], kappa, s), naive, 1e-12 * std::max(1.0, std::abs(naive)));
  }
  EXPECT_NEAR(fit_s(rho, kappa), ell_values(rho, kappa, 0.0).mean(), 1e-14);
}

TEST(ELResidual, ScalarJetsGiveExactProduct) {
  Rng rng(14);
  const Measure rho = random_measure(SpaceSpec{4, 2, 1, 1.0}, 5, rng);
  TestJet j;
  j.a = RVec::LinSpaced(5, -1.0, 2.0);
  const ELResidual r = el_residual(rho, 0.1, {j}, {});
  EXPECT_EQ(r.weak_residuals(0), (j.a.array() * r.ell_values.array()).abs().maxCoeff());
}

TEST(ELResidual, ExplicitSOverridesFit) {
  Rng rng(15);
  const Measure rho = random_measure(SpaceSpec{4, 2, 1, 1.0}, 5, rng);
  ELConfig cfg;
  cfg.s = 0.25;
  const ELResidual r = el_residual(rho, 0.1, {}, {}, cfg);
  EXPECT_EQ(r.s_param, 0.25);
  EXPECT_LT((r.ell_values - ell_values(rho, 0.1, 0.25)).norm(), 1e-14);
}

TEST(ELResidual, ProbesReportOffSupportMinimum) {
  Rng rng(16);
  const Measure rho = random_measure(SpaceSpec{4, 2, 1, 1.0}, 4, rng);
  std::vector<Point> probes{random_point(rho.space, rng), random_point(rho.space, rng)};
  const ELResidual r = el_residual(rho, 0.1, {}, probes);
  const double a = ell(rho, probes[0], 0.1, r.s_param), b = ell(rho, probes[1], 0.1, r.s_param);
  EXPECT_DOUBLE_EQ(r.min_ell_offsupport, std::min(a, b));
}

TEST(Polygon, CommutatorDerivativesOfEllVanish) {
  Rng rng(17);
  const Measure hx = polygon_orbit(6, 12, 1.0, 0.7, random_unitary(12, rng));
  for (int rep = 0; rep < 5; ++rep) {
    const Mat A = random_hermitian(12, rng);
    for (const Point& x : hx.points) {
      const double d = ell_derivative(hx, x, commutator_field(A, x), 0.2);
      EXPECT_LT(std::abs(d), 1e-8);
    }
  }
  const RVec l = ell_values(hx, 0.2, 0.0);
  EXPECT_LT((l.array() - l.mean()).abs().maxCoeff(), 1e-12 * std::abs(l.mean()));
}

TEST(Minimize, ActionNeverIncreases) {
  Rng rng(18);
  const Measure rho = random_measure(SpaceSpec{4, 2, 1, 1.0}, 4, rng);
  MinimizeConfig cfg;
  cfg.max_iter = 25;
  const MinimizeResult r = minimize(rho, 0.2, cfg);
  ASSERT_GE(r.trace.size(), 2u);
  for (size_t i = 1; i < r.trace.size(); ++i) EXPECT_LE(r.trace[i].action, r.trace[i - 1].action * (1 + 1e-12));
  EXPECT_NEAR(r.report.volume, r.trace.front().volume, 1e-10);
  for (const Point& x : r.measure.points) EXPECT_NEAR(x.local_trace(), 1.0, 1e-10);
}

TEST(Minimize, DeterministicGivenInput) {
  Rng rng(19);
  const Measure rho = random_measure(SpaceSpec{4, 2, 1, 1.0}, 4, rng);
  MinimizeConfig cfg;
  cfg.max_iter = 10;
  const MinimizeResult a = minimize(rho, 0.2, cfg), b = minimize(rho, 0.2, cfg);
  ASSERT_EQ(a.trace.size(), b.trace.size());
  for (size_t i = 0; i < a.trace.size(); ++i) EXPECT_EQ(a.trace[i].action, b.trace[i].action);
}

TEST(Measure, ZeroWeightsPruned) {
  Rng rng(20);
  Measure rho = random_measure(SpaceSpec{4, 2, 1, 1.0}, 4, rng);
  rho.weights[1] = 0.0;
  rho.prune();
  EXPECT_EQ(rho.size(), 3);
}

TEST(Measure, NegativeWeightRefused) {
  Rng rng(21);
  Measure rho = random_measure(SpaceSpec{4, 2, 1, 1.0}, 3, rng);
  rho.weights[0] = -1.0;
  EXPECT_THROW(rho.validate(), Refusal);
}
