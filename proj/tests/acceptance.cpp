// Acceptance run: one PASS/FAIL line per criterion.
// --expect-fail N marks criterion N as a known failure; the exit status is nonzero when any other
// criterion fails or when a marked one passes.

#include "fixtures.hpp"

#include <cstdarg>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <set>
#include <sstream>

using namespace cfs;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Outcome gradient_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Rng rng(101);
  std::uniform_real_distribution<double> kap(0.0, 1.0);
  double worst = 0;
  int done = 0, skipped = 0;
  while (done < 100) {
    SpaceSpec s{6, 3, 1 + done % 2, 1.0};
    const Point x = random_point(s, rng), y = random_point(s, rng);
    const double kappa = kap(rng);
    const Mat P = p_block(x, y);
    const QBlock q = q_from_p(P, x.metric(), y.metric(), x.n(), kappa);
    if (q.fallback) {
      ++skipped;
      continue;
    }
    Mat d = random_gaussian(static_cast<int>(P.rows()), static_cast<int>(P.cols()), rng);
    d /= d.norm();
    const double h = 1e-4 * P.norm();
    auto g = [&](double t) { return chain_functional(P + t * d, x.metric(), y.metric(), x.n(), kappa); };
    const double fd = (8 * (g(h / 2) - g(-h / 2)) - (g(h) - g(-h))) / (6 * h);
    const double an = 2 * (q.q * spin_adjoint(d, x.metric(), y.metric())).trace().real();
    const double scale = (1 + kappa) * std::pow(std::max(1.0, P.norm()), 3);
    worst = std::max(worst, std::abs(fd - an) / scale);
    ++done;
  }
  const double sec = seconds_since(t0);
  return {worst <= 1e-6 && sec < 10.0,
          fmt("worst %.2e (limit 1e-6) over 100 chains, %d degenerate redrawn, %.2f s", worst, skipped, sec)};
}

Outcome unitary_invariance() {
  Rng rng(102);
  double inv = 0, d12 = 0;
  for (int rep = 0; rep < 50; ++rep) {
    SpaceSpec s{5, 3, 1 + rep % 2, 1.0};
    const Point x = random_point(s, rng), y = random_point(s, rng);
    const Mat U = random_unitary(5, rng);
    const double l = lagrangian_kappa(x, y, 0.3);
    inv = std::max(inv, std::abs(lagrangian_kappa(conjugate(x, U), conjugate(y, U), 0.3) - l) / std::max(1.0, l));
    const Mat A = random_hermitian(5, rng);
    const Mat cx = commutator_field(A, x), cy = commutator_field(A, y);
    const double both = directional_derivative_L(x, y, cx, cy, 0.3);
    const double scale = std::abs(directional_derivative_L(x, y, cx, Mat(), 0.3)) +
                         std::abs(directional_derivative_L(x, y, Mat(), cy, 0.3));
    d12 = std::max(d12, std::abs(both) / std::max(scale, 1e-300));
  }
  return {inv <= 1e-10 && d12 <= 1e-7, fmt("invariance %.2e (1e-10), (D1+D2)L relative %.2e (1e-7), 50 directions", inv, d12)};
}

Outcome bracket_identities() {
  double comm = 0, dev = 0, rmin = 1e300, rmax = -1e300;
  int fd_agree = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    Rng rng(200 + seed);
    const Measure rho = random_measure(SpaceSpec{5, 3, 1, 1.0}, 6, rng);
    const Region om = region_from_indices(6, {0, 1, 3});
    Mat A = Mat::Zero(5, 5), B = Mat::Zero(5, 5);
    A.topLeftCorner(3, 3) = random_hermitian(3, rng);
    B.topLeftCorner(3, 3) = random_hermitian(3, rng);
    const Mat G = cplx(0, 1) * (A * B - B * A);
    for (const Point& x : rho.points) {
      const Mat m = x.op();
      auto CA = [&](const Mat& p) { return Mat(cplx(0, 1) * (A * p - p * A)); };
      auto CB = [&](const Mat& p) { return Mat(cplx(0, 1) * (B * p - p * B)); };
      const Mat br = (CB(m + CA(m)) - CB(m - CA(m))) / 2.0 - (CA(m + CB(m)) - CA(m - CB(m))) / 2.0;
      const Mat rhs = -commutator_field(G, x);
      comm = std::max(comm, (br - rhs).norm() / std::max(1.0, rhs.norm()));
    }
    const BlockKernel Q = q_kernel(rho, 0.3);
    const double g = -gamma_commutator(rho, om, Q, G);
    const double sg = sigma_commutator(rho, om, Q, A, B);
    const double sfd = sigma(rho, om, commutator_test_jet(A, rho), commutator_test_jet(B, rho), 0.3);
    fd_agree += std::abs(sfd - sg) <= 1e-6 * std::abs(sg);
    dev = std::max(dev, std::abs(g + 0.5 * sg) / std::abs(g));
    rmin = std::min(rmin, g / sg);
    rmax = std::max(rmax, g / sg);
  }
  return {comm <= 1e-12 && dev <= 1e-7,
          fmt("[C(A),C(B)] = -C(i[A,B]) to %.1e; gamma([C,C'])/sigma in [%.9f, %.9f] against the stated -0.5 "
              "(relative deviation %.2f); finite-difference sigma agrees on %d/20",
              comm, rmin, rmax, dev, fd_agree)};
}

Outcome conservation_law() {
  const Measure hx = fx::hexagon();
  const auto reg = fx::hexagon_regions();
  Rng rng(104);
  const Measure pert = fx::perturbed(hx, 0.01, rng);
  double clean = 0, dirty = 0;
  for (int j = 0; j < 10; ++j) {
    const Mat A = hx.hf * random_hermitian(2, rng) * hx.hf.adjoint();
    const double s = fx::commutator_scale(hx, A, fx::hexagon_kappa);
    const double sp = fx::commutator_scale(pert, A, fx::hexagon_kappa);
    for (auto [a, b] : fx::hexagon_pairs()) {
      clean = std::max(clean, conservation_check(hx, reg[a], reg[b], {commutator_test_jet(A, hx)}, fx::hexagon_kappa)[0] / s);
      dirty = std::max(dirty, conservation_check(pert, reg[a], reg[b], {commutator_test_jet(A, pert)}, fx::hexagon_kappa)[0] / sp);
    }
  }
  return {clean <= 1e-6 && dirty > 100 * clean && dirty > 1e-6,
          fmt("critical hexagon %.2e (1e-6), 1%%-perturbed control %.2e, 10 jets x 5 region pairs", clean, dirty)};
}

Outcome extension_isometry() {
  double iso = 0, root = 0;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    Rng rng(300 + seed);
    const Measure rho = random_measure(SpaceSpec{4, 2, 1, 1.0}, 6, rng);
    const Region om = region_from_indices(6, {0, 1, 2});
    const Measure rt = conjugate(rho, random_unitary(4, rng));
    const BlockKernel Q = q_kernel(rho, 0.2), Qt = q_kernel(rt, 0.2);
    const ExtensionOperators e = build_isometry(rho, rt, om, Q, Qt, identity_map(6));
    for (int k = 0; k < 20; ++k) {
      const Vec a = random_gaussian(rho.wave_dim(), 1, rng), b = random_gaussian(rho.wave_dim(), 1, rng);
      const cplx lhs = surface_form(rho, om, Q, e.apply(a), e.apply(b));
      const cplx rhs = surface_form(rt, om, Qt, a, b);
      iso = std::max(iso, std::abs(lhs - rhs) / std::max(std::abs(rhs), 1e-300));
    }
    root = std::max(root, e.report.sqrt.residual);
  }
  return {iso <= 1e-8 && root <= 1e-9, fmt("isometry %.2e (1e-8), sqrt(B)^2 - B %.2e (1e-9), 5 conjugations x 20 pairs", iso, root)};
}

Outcome compatibility_obstruction() {
  const Measure hx = fx::hexagon();
  const auto reg = fx::hexagon_regions();
  const BlockKernel Q = q_kernel(hx, fx::hexagon_kappa);
  Rng rng(106);
  const Mat V = fx::hexagon_embedding().leftCols(2);
  const Mat A = V * random_hermitian(2, rng) * V.adjoint();
  const VariationFamily fam = conjugation_family(hx, A);
  CompatibilityInput in;
  in.kappa = fx::hexagon_kappa;
  std::vector<Vec> d1, d2;
  for (Eigen::Index a = 0; a < 2; ++a) {
    d1.push_back(extension_derivative(hx, reg[0], fx::hexagon_kappa, fam, hx.hf.col(a)));
    d2.push_back(extension_derivative(hx, reg[1], fx::hexagon_kappa, fam, hx.hf.col(a)));
  }
  in.dpsi = {d1};
  in.dpsi2 = {d2};
  in.jets = {commutator_test_jet(A, hx)};
  in.generators = {V * random_hermitian(2, rng) * V.adjoint()};
  const CompatibilityReport r = compatibility_check(hx, reg[0], reg[1], Q, in);
  return {r.sigma_preserve <= 1e-7 && r.apres0 > 1e-3 * r.scale,
          fmt("sigma preservation %.2e (1e-7) holds; first-order relation off by %.2e at scale %.2e", r.sigma_preserve, r.apres0, r.scale)};
}

Outcome green_formula() {
  const Chain ch = fx::chain(16);
  const Foliation fol = fx::foliation(ch.space);
  Rng rng(107);
  std::uniform_int_distribution<int> U(0, fol.steps() - 1);
  double worst = 0;
  for (int i = 0; i < 50; ++i) {
    int a = U(rng), b = U(rng);
    if (a > b) std::swap(a, b);
    const Vec p = random_gaussian(ch.space.dim(), 1, rng), q = random_gaussian(ch.space.dim(), 1, rng);
    const GreenFormulaReport r = greens_formula_check(ch.space, ch.dyn.Q, fol, a, b, p, q);
    worst = std::max(worst, r.deviation / r.scale);
  }
  return {worst <= 1e-10, fmt("worst relative %.2e (1e-10), 50 strips on a 16-point chain", worst)};
}

Outcome energy_machinery() {
  const auto t0 = std::chrono::steady_clock::now();
  const Chain ch = fx::chain(24);
  const SlotBasis v = block_basis(ch.space, fx::block);
  const Foliation fol = fx::foliation(ch.space);
  const int k1 = fol.steps() - 1;
  const HyperbolicityReport h = hyperbolicity_constant(ch.space, ch.dyn.Q, fol, 0, k1, v.basis);
  const double G = gamma_constant(h.C, fol.t(0), fol.t(k1));
  const bool gamma_ok = std::abs(G - 2 * h.C * h.C * (fol.t(k1) - fol.t(0))) <= 1e-12 * G;
  const Mat Z = zero_initial_space(ch.space, ch.dyn.Q, fol, 0, v.basis);
  Rng rng(108);
  int ok = 0;
  for (int i = 0; i < 50; ++i)
    ok += energy_estimates_check(ch.space, ch.dyn.Q, fol, 0, k1, Z * random_gaussian(static_cast<int>(Z.cols()), 1, rng), h.C).ok;
  const Mat T = test_space(ch.space, ch.dyn.Q, fol, k1, v.basis);
  const WeakSolution s = solve_weak(ch.space, ch.dyn.Q, fol, 0, k1, random_gaussian(ch.space.dim(), 1, rng), T, h.C);
  const double sec = seconds_since(t0);
  const bool pass = ch.dyn.range == 2 && gamma_ok && ok == 50 && s.weak_residual <= 1e-9 && s.bound_ok && sec < 30.0;
  return {pass, fmt("N=24 r=%d: C=%.4f Gamma=%.2f, estimates %d/50, weak residual %.1e (1e-9), |psi| %.3g <= Gamma |w| %.3g, %.2f s",
                    ch.dyn.range, h.C, G, ok, s.weak_residual, s.norm_psi, s.gamma * s.norm_w, sec)};
}

Outcome greens_operators_check() {
  double stab = 0, inverse = 0, adj = 0, quot = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Chain ch = fx::chain(32, 1 + static_cast<int>(seed % 2), seed);
    const SlotBasis v = block_basis(ch.space, fx::block);
    const GreensOperators g = greens_operators(ch.space, ch.dyn.Q, v);
    Rng rng(400 + seed);
    const StabilizationReport st = stabilization_check(g, fx::slot_coefficients(v, 3, 4, rng), 3, 4);
    stab = std::max({stab, st.inner_change, st.past_residual});

    const Vec w1 = v.basis * fx::slot_coefficients(v, 2, 5, rng), w2 = v.basis * fx::slot_coefficients(v, 2, 5, rng);
    const Vec f = g.functional(ch.space, w1);
    const int n = v.slots;
    for (auto* op : {&g.ret, &g.adv}) {
      const Vec r = g.M * ((*op) * f) + f;
      double num = 0, den = 0;
      for (Eigen::Index c = 0; c < f.size(); ++c) {
        const int sl = v.slot[static_cast<size_t>(c)];
        if (sl < g.q || sl > n - 1 - g.q) continue;
        num = std::max(num, std::abs(r(c)));
        den = std::max(den, std::abs(f(c)));
      }
      inverse = std::max(inverse, num / den);
    }
    const cplx a = krein_product(ch.space, g.retarded(ch.space, w1), w2);
    const cplx b = krein_product(ch.space, w1, g.advanced(ch.space, w2));
    adj = std::max(adj, std::abs(a - b) / std::max(std::abs(a), 1e-300));

    // remove the part of a random vector seen by the macroscopic functionals
    const Vec r = random_gaussian(ch.space.dim(), 1, rng);
    const Mat KB = krein_weights(ch.space).cast<cplx>().asDiagonal() * v.basis;
    const Mat Gm = v.basis.adjoint() * KB;
    const Vec wperp = r - v.basis * Gm.ldlt().solve(KB.adjoint() * r);
    quot = std::max({quot, g.retarded(ch.space, wperp).norm() / r.norm(), g.advanced(ch.space, wperp).norm() / r.norm()});
  }
  const bool pass = stab <= 1e-8 && inverse <= 1e-8 && adj <= 1e-9 && quot <= 1e-9;
  return {pass, fmt("stabilization %.1e, Q s = -1 on inner strips %.1e (1e-8), adjointness %.1e (1e-9), on the complement %.1e, 3 fixtures",
                    stab, inverse, adj, quot)};
}

Outcome exact_sequence() {
  int exact = 0;
  double gap = 1e300;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    const Chain ch = fx::chain(32, 1 + static_cast<int>(seed % 2), seed);
    const ExactSequenceReport e = exact_sequence_check(greens_operators(ch.space, ch.dyn.Q, block_basis(ch.space, fx::block)));
    exact += e.exact() && !e.ambiguous && e.min_gap >= 1e3;
    gap = std::min(gap, e.min_gap);
  }
  return {exact == 10, fmt("%d/10 fixtures satisfy all four identities, smallest gap ratio %.1e", exact, gap)};
}

Outcome cutoff_currents() {
  double indep = 0, rel = 0;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const Chain ch = fx::chain(32, 1 + static_cast<int>(seed % 2), seed);
    const SlotBasis v = block_basis(ch.space, fx::block);
    const GreensOperators g = greens_operators(ch.space, ch.dyn.Q, v);
    const Foliation fol = fx::foliation(ch.space);
    Rng rng(500 + seed);
    const Vec w1 = v.basis * fx::slot_coefficients(v, 3, 4, rng), w2 = v.basis * fx::slot_coefficients(v, 2, 5, rng);
    const Vec p1 = g.fundamental(ch.space, w1), p2 = g.fundamental(ch.space, w2);
    const cplx ref = krein_product(ch.space, w1, p2);
    std::vector<cplx> cur;
    for (int j : {3, 4, 5}) {
      Region past(static_cast<size_t>(ch.space.size()), 0);
      for (int i = 0; i < ch.space.size(); ++i) past[static_cast<size_t>(i)] = ch.space.layer[static_cast<size_t>(i)] < 4 * j;
      cur.push_back(cutoff_current(ch.space, ch.dyn.Q, fol, region_cutoff(ch.space, past, 0, fol.steps() - 1), p1, p2));
    }
    for (const cplx& c : cur) {
      indep = std::max(indep, std::abs(c - cur[0]) / std::abs(cur[0]));
      rel = std::max(rel, std::abs(c - ref) / std::abs(ref));
    }
  }
  return {indep <= 1e-8 && rel <= 1e-9, fmt("spread across 3 cutoffs %.1e (1e-8), against the Krein pairing %.1e (1e-9)", indep, rel)};
}

Outcome finite_propagation() {
  int holds = 0, premise = 0, grow = 0;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    ChainConfig cfg;
    cfg.layers = 16;
    cfg.sites = 10;
    cfg.seed = seed;
    const Chain ch = make_chain(cfg);
    const DynSpace& sp = ch.space;
    Rng rng(seed);
    Vec psi0 = Vec::Zero(sp.dim());
    const Mat r = random_gaussian(sp.dim(), 1, rng);
    for (int i = 0; i < sp.size(); ++i)
      if (sp.layer[static_cast<size_t>(i)] < 4 && sp.site[static_cast<size_t>(i)] <= 1) psi0.segment(2 * i, 2) = r.block(2 * i, 0, 2, 1);
    const Vec psi = march(sp, ch.dyn.Q, ch.dyn.range, psi0);
    const auto ext = support_extent(sp, psi);
    for (int l = 1; l < 16; ++l) grow = std::max(grow, ext[static_cast<size_t>(l)].second - ext[static_cast<size_t>(l - 1)].second);
    const int p = 4 + static_cast<int>(seed % 4), p2 = p + 2;
    Region om(static_cast<size_t>(sp.size())), om2(static_cast<size_t>(sp.size()));
    RVec eta(sp.size());
    for (int i = 0; i < sp.size(); ++i) {
      const int l = sp.layer[static_cast<size_t>(i)], s = sp.site[static_cast<size_t>(i)];
      om[static_cast<size_t>(i)] = l <= p;
      om2[static_cast<size_t>(i)] = om[static_cast<size_t>(i)] || (l <= p2 && s >= 7 && s <= 8);
      eta(i) = s >= 5 ? 0.0 : 1.0;
    }
    const PropagationReport rep = propagation_check(sp, ch.dyn.Q, om, om2, eta, psi, block_basis(sp, fx::block).basis);
    holds += rep.holds;
    premise += rep.premise;
  }
  return {grow <= 1 && holds == 10, fmt("site support grows by at most %d per layer (band 1); implication holds on %d/10 lens fixtures (%d with the premise met)", grow, holds, premise)};
}

Outcome minkowski_toy() {
  const MinkowskiModel m = fx::solvable_model();
  const DiracStructure d = dirac_structure(m.mass);
  const MomentumGrid grid = momentum_grid(5, 1.0);
  const QhatEvaluator q = m.evaluator(d);
  const RhatResult r = rhat_construct(q, grid, d);
  const QhatEvaluator qd = qdyn_hat(q, [&](const Vec3& k) {
    for (size_t i = 0; i < grid.k.size(); ++i)
      if ((grid.k[i] - k).norm() < 1e-14) return r.R(d, i);
    return Mat(Mat::Zero(4, 4));
  });
  Rng rng(113);
  const ShellData a = random_shell_data(d, grid, rng), b = random_shell_data(d, grid, rng);
  const MomentumProduct p = momentum_surface_product(qd, d, grid, a, b);
  const double cur = std::abs(p.value - p.dirac_current) / std::abs(p.value);
  return {r.sufficient && r.max_upper <= 1e-10 && r.max_lower <= 1e-10 && cur <= 1e-9,
          fmt("shell residuals %.1e / %.1e (1e-10); product vs Dirac current %.1e (1e-9), fitted c' %.9f", r.max_upper, r.max_lower, cur, p.cprime)};
}

Outcome determinism() {
  const Json sc = Json::parse(R"({
    "seed": 5, "kappa": 0.2,
    "measure": {"generator": "random", "space": {"dim_f": 4, "dim_hf": 2, "n": 1, "c": 1.0}, "points": 6},
    "omega": [0, 1, 2], "omega2": [0, 1, 3],
    "dynamics": {"chain": {"layers": 16}},
    "minkowski": {"model": {"mass": 1.0, "a": [0.5, 0.1], "b": [-0.2, -0.7, 0.3], "alpha": [0.4, -0.2], "cprime": 0.7},
                  "grid": {"n": 3, "kmax": 1.0}},
    "stages": ["kernels", "surface", "extension", "dynamics", "minkowski"]
  })");
  const bool same = dump(run_scenario(sc, {})) == dump(run_scenario(sc, {}));
  Rng rng(114);
  const Measure rho = random_measure(SpaceSpec{5, 3, 2, 1.0}, 4, rng);
  const std::string m = dump(to_json(rho));
  const std::string k = dump(to_json(q_kernel(rho, 0.3)));
  const std::string f = dump(to_json(fx::foliation(fx::chain(8).space)));
  const bool rt = m == dump(to_json(measure_from_json(Json::parse(m)))) &&
                  k == dump(to_json(kernel_from_json(Json::parse(k)))) &&
                  f == dump(to_json(foliation_from_json(Json::parse(f))));
  return {same && rt, fmt("repeated scenario bundles %s; measure/kernel/foliation round-trips %s", same ? "identical" : "differ",
                          rt ? "byte-exact" : "differ")};
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> expected;
  for (int i = 1; i < argc; ++i)
    if (std::strcmp(argv[i], "--expect-fail") == 0 && i + 1 < argc) expected.insert(std::atoi(argv[++i]));

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"gradient oracle", gradient_oracle},
      {"unitary invariance", unitary_invariance},
      {"commutator brackets", bracket_identities},
      {"conservation law", conservation_law},
      {"extension isometry", extension_isometry},
      {"compatibility obstruction", compatibility_obstruction},
      {"Green's formula", green_formula},
      {"energy machinery", energy_machinery},
      {"Green's operators", greens_operators_check},
      {"exact sequence", exact_sequence},
      {"cutoff currents", cutoff_currents},
      {"finite propagation", finite_propagation},
      {"Minkowski toy", minkowski_toy},
      {"determinism and round-trip", determinism},
  };
  int unexpected = 0, passed = 0;
  for (size_t i = 0; i < criteria.size(); ++i) {
    const int id = static_cast<int>(i) + 1;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    passed += o.pass;
    const bool known = expected.count(id) > 0;
    if (o.pass == known) ++unexpected;
    std::printf("%s %2d %s: %s%s\n", o.pass ? "PASS" : "FAIL", id, criteria[i].first.c_str(), o.detail.c_str(),
                known ? (o.pass ? " [expected to fail]" : " [known failure]") : "");
    std::fflush(stdout);
  }
  std::printf("%d/%zu criteria pass\n", passed, criteria.size());
  return unexpected == 0 ? 0 : 1;
}
