#include "cfs/scenario.hpp"

#include <CLI11.hpp>

#include <iostream>

using namespace cfs;

namespace {

struct Global {
  int threads = 1;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;

  Tolerances tolerances() const {
    Tolerances t;
    for (const auto& o : overrides) t.apply_override(o);
    return t;
  }
  std::uint64_t seed_or(std::uint64_t def) const { return seed ? *seed : def; }
};

// Regions and strip labels may be given inline, e.g. --omega '[0,1,2]'.
Json arg_json(const std::string& arg) {
  const auto p = arg.find_first_not_of(" \t");
  if (p == std::string::npos || (arg[p] != '[' && arg[p] != '{')) return read_json(arg);
  try {
    return Json::parse(arg);
  } catch (const Json::parse_error& e) {
    throw IoError("inline JSON argument: " + std::string(e.what()));
  }
}

void emit(const std::string& path, const Json& j) {
  if (path.empty() || path == "-")
    std::cout << dump(j);
  else
    write_json(path, j);
}

Measure load_measure(const std::string& path) {
  try {
    return measure_from_json(read_json(path));
  } catch (const IoError& e) {
    throw IoError(path + ": " + e.what());
  }
}

// {"space", "kernel"}, a chain description, or a bare space plus --qdyn.
struct DynFixture {
  DynSpace sp;
  BlockKernel Q;
  int range = 0;
  int block = 4;
  SlotBasis vary;
  Foliation fol;
};

DynFixture load_fixture(const std::string& path, const std::string& qdyn, const std::string& foliation) {
  const Json j = path.empty() ? Json::object() : read_json(path);
  DynFixture f;
  if (has(j, "layer")) {
    // a bare serialized space; the kernel comes from --qdyn
    if (qdyn.empty()) throw Refusal(path + ": a bare space needs --qdyn");
    f.sp = dynspace_from_json(j, "");
    f.Q = kernel_from_json(read_json(qdyn));
    f.vary = block_basis(f.sp, f.block);
    f.fol = block_foliation(f.sp, f.block, 0.25, 0.05);
  } else if (has(j, "space")) {
    f.sp = dynspace_from_json(j["space"], "/space");
    f.Q = kernel_from_json(field(j, "kernel", ""), "/kernel");
    f.block = has(j, "block") ? get_int(j["block"], "/block") : 4;
    f.vary = block_basis(f.sp, f.block);
    f.fol = block_foliation(f.sp, f.block, has(j, "width") ? get_double(j["width"], "/width") : 0.25,
                            has(j, "dt") ? get_double(j["dt"], "/dt") : 0.05);
  } else {
    DynamicsSetup s = dynamics_setup(j, "");
    f.sp = s.chain.space;
    f.Q = s.chain.dyn.Q;
    f.vary = s.vary;
    f.fol = s.fol;
    if (has(j, "block")) f.block = get_int(j["block"], "/block");
  }
  if (!qdyn.empty()) f.Q = kernel_from_json(read_json(qdyn));
  if (!foliation.empty()) f.fol = foliation_from_json(read_json(foliation));
  f.fol.validate();
  f.range = make_dyn_kernel(f.sp, f.Q).range;
  return f;
}

Vec load_vec(const std::string& path, const std::string& key, int dim) {
  const Json j = read_json(path);
  const Vec v = vec_from_json(has(j, key) ? j[key] : j, has(j, key) ? "/" + key : "");
  if (v.size() != dim) throw IoError(path + ": expected " + std::to_string(dim) + " components");
  return v;
}

std::vector<Mat> load_matrices(const std::string& path) {
  const Json j = read_json(path);
  if (!j.is_array()) throw IoError(path + ": expected an array of matrices");
  std::vector<Mat> out;
  for (size_t i = 0; i < j.size(); ++i) out.push_back(mat_from_json(j[i], "/" + std::to_string(i)));
  return out;
}

int cmd_minimize(const Global& g, const std::string& scen, double kappa, const std::string& out,
                 const std::string& trace) {
  const Json sc = read_json(scen);
  Rng rng(g.seed_or(has(sc, "seed") ? static_cast<std::uint64_t>(get_int(sc["seed"], "/seed")) : 1));
  const std::string base = std::filesystem::path(scen).parent_path().string();
  const Measure rho0 = measure_from_source(has(sc, "measure") ? sc["measure"] : sc, has(sc, "measure") ? "/measure" : "", base, rng);
  MinimizeConfig cfg;
  if (has(sc, "minimize")) {
    const Json& m = sc["minimize"];
    if (has(m, "max_iter")) cfg.max_iter = get_int(m["max_iter"], "/minimize/max_iter");
    if (has(m, "step")) cfg.step = get_double(m["step"], "/minimize/step");
    if (has(m, "tol")) cfg.tol = get_double(m["tol"], "/minimize/tol");
  }
  const MinimizeResult r = minimize(rho0, kappa, cfg);
  emit(out, to_json(r.measure));
  if (!trace.empty()) {
    Csv csv;
    csv.header = {"iter", "action", "volume", "boundedness", "max_ell"};
    for (const TraceRow& t : r.trace) csv.rows.push_back({double(t.iter), t.action, t.volume, t.boundedness, t.max_ell});
    write_text(trace, csv.str());
  }
  std::cerr << "action " << r.report.action << (r.converged ? " (converged)" : " (not converged)") << "\n";
  return 0;
}

int cmd_check_el(const Global& g, const std::string& mpath, double kappa, const std::string& report) {
  const Measure rho = load_measure(mpath);
  const ELResidual r = el_residual(rho, kappa, default_test_jets(rho), {});
  const double weak = r.weak_residuals.size() ? r.weak_residuals.cwiseAbs().maxCoeff() : 0.0;
  const bool ok = r.max_abs_ell_on_M <= g.tolerances()["el"] && r.min_ell_offsupport >= -g.tolerances()["el"];
  emit(report, Json{{"ell_on_support", r.max_abs_ell_on_M}, {"min_ell_off_support", r.min_ell_offsupport},
                    {"max_weak_residual", weak}, {"s", r.s_param}, {"r", r.r_param}, {"passes", ok}});
  return 0;
}

int cmd_kernel(const Global& g, const std::string& mpath, double kappa, const std::string& kind,
               const std::string& qsing, const std::string& omega, const std::string& out) {
  const Measure rho = load_measure(mpath);
  BlockKernel Q;
  if (kind == "p") {
    Q = fermionic_projector_kernel(rho);
  } else {
    Q = q_kernel(rho, kappa);
    if (kind == "reg") {
      const BlockKernel S = qsing.empty() ? BlockKernel(rho.size(), rho.spin_dim(), KernelKind::sing) : kernel_from_json(read_json(qsing));
      Region om(static_cast<size_t>(rho.size()), 1);
      if (!omega.empty()) om = region_from_json(arg_json(omega), rho.size(), "");
      QsingReport rep;
      Q = q_reg_split(Q, S, rho, om, g.tolerances()["kernel"], &rep);
    } else if (kind != "full") {
      throw Refusal("unknown kernel kind '" + kind + "'");
    }
  }
  emit(out, to_json(Q));
  return 0;
}

int cmd_surface(const Global& g, const std::string& mpath, double kappa, const std::string& omega,
                const std::string& omega2, const std::string& jets, const std::string& report) {
  const Measure rho = load_measure(mpath);
  const Region om = region_from_json(arg_json(omega), rho.size(), "");
  const BlockKernel Q = q_kernel(rho, kappa);
  std::vector<Mat> gens;
  if (!jets.empty()) {
    gens = load_matrices(jets);
  } else {
    Rng rng(g.seed_or(1));
    for (int i = 0; i < 3; ++i) gens.push_back(random_hermitian(rho.space.dim_f, rng));
  }
  Json rows = Json::array();
  std::optional<Region> om2;
  if (!omega2.empty()) om2 = region_from_json(arg_json(omega2), rho.size(), "");
  for (const Mat& A : gens) {
    if (A.rows() != rho.space.dim_f || A.cols() != rho.space.dim_f) throw IoError(jets + ": generator has the wrong size");
    Json r{{"gamma", gamma_commutator(rho, om, Q, A)}};
    if (om2) r["gamma_omega2"] = gamma_commutator(rho, *om2, Q, A);
    rows.push_back(r);
  }
  emit(report, Json{{"jets", rows}});
  return 0;
}

int cmd_extend(const Global& g, const std::string& mpath, double kappa, const std::string& omega,
               const std::string& vars, const std::string& report) {
  const Measure rho = load_measure(mpath);
  const Region om = region_from_json(arg_json(omega), rho.size(), "");
  const BlockKernel Q = q_kernel(rho, kappa);
  const Json vj = read_json(vars);
  if (!vj.is_array()) throw IoError(vars + ": expected an array of variations");
  IsometryConfig cfg;
  cfg.tol = g.tolerances()["isometry"];
  cfg.seed = g.seed_or(1);
  Json rows = Json::array();
  std::vector<ExtensionOperators> ops;
  std::vector<Measure> varied;
  for (size_t i = 0; i < vj.size(); ++i) {
    const std::string p = "/" + std::to_string(i);
    const Mat A = mat_from_json(field(vj[i], "generator", p), p + "/generator");
    if (A.rows() != rho.space.dim_f || A.cols() != rho.space.dim_f) throw IoError(vars + p + "/generator: wrong size");
    const double tau = has(vj[i], "tau") ? get_double(vj[i]["tau"], p + "/tau") : 1.0;
    Measure c = conjugation_family(rho, A)(tau);
    std::vector<int> F = has(vj[i], "map") ? get_ints(vj[i]["map"], p + "/map") : identity_map(rho.size());
    if (static_cast<int>(F.size()) != rho.size()) throw IoError(vars + p + "/map: wrong length");
    Measure rt = c;
    for (int k = 0; k < rho.size(); ++k) {
      if (F[k] < 0 || F[k] >= rho.size()) throw IoError(vars + p + "/map: index out of range");
      rt.points[static_cast<size_t>(F[k])] = c.points[static_cast<size_t>(k)];
      rt.weights[static_cast<size_t>(F[k])] = c.weights[static_cast<size_t>(k)];
    }
    if (has(vj[i], "weights")) {
      const auto f = get_doubles(vj[i]["weights"], p + "/weights");
      if (static_cast<int>(f.size()) != rho.size()) throw IoError(vars + p + "/weights: wrong length");
      for (size_t k = 0; k < f.size(); ++k) rt.weights[k] *= f[k];
    }
    const ExtensionOperators e = build_isometry(rho, rt, om, Q, q_kernel(rt, kappa), F, cfg);
    rows.push_back(Json{{"admissible", e.report.admissible()}, {"isometry_residual", e.report.isometry_residual},
                        {"sqrt_residual", e.report.sqrt.residual}, {"b_norm", e.report.b_norm}});
    ops.push_back(e);
    varied.push_back(rt);
  }
  const ExtendedSpace ext = extend_space(rho, om, Q, ops, varied, cfg.tol);
  emit(report, Json{{"variations", rows}, {"dimension", ext.basis.cols()}, {"positive", ext.positive},
                    {"negative", ext.negative}, {"dropped", ext.dropped}, {"positive_definite", ext.positive_definite}});
  return 0;
}

int cmd_qdyn(const Global& g, const std::string& fix, const std::string& strips, const std::string& targets,
             const std::string& out, const std::string& report) {
  const DynFixture f = load_fixture(fix, "", "");
  std::vector<int> labels;
  if (!strips.empty()) labels = get_ints(arg_json(strips), "");
  else
    for (int l : f.sp.layer) labels.push_back(l / f.block);
  const Json tj = read_json(targets);
  if (!tj.is_array()) throw IoError(targets + ": expected an array of wave functions");
  Mat T(f.sp.dim(), static_cast<Eigen::Index>(tj.size()));
  for (size_t i = 0; i < tj.size(); ++i) {
    const Vec v = vec_from_json(tj[i], "/" + std::to_string(i));
    if (v.size() != f.sp.dim()) throw IoError(targets + "/" + std::to_string(i) + ": wrong length");
    T.col(static_cast<Eigen::Index>(i)) = v;
  }
  const QdynBuild b = build_qdyn(f.sp, f.Q, labels, T, g.tolerances()["qdyn"]);
  emit(out, to_json(b.dyn.Q));
  if (!report.empty())
    write_json(report, Json{{"strip_residual", b.strip_residual}, {"r_asymmetry", b.r_asymmetry}, {"range", b.dyn.range}});
  return 0;
}

int cmd_solve(const Global& g, const std::string& fix, const std::string& qdyn, const std::string& fol,
              const std::string& rhs, const std::string& out) {
  const DynFixture f = load_fixture(fix, qdyn, fol);
  const Tolerances tol = g.tolerances();
  Rng rng(g.seed_or(1));
  const Vec w = rhs.empty() ? Vec(random_gaussian(f.sp.dim(), 1, rng)) : load_vec(rhs, "w", f.sp.dim());
  const int last = f.fol.steps() - 1;
  const HyperbolicityReport h = hyperbolicity_constant(f.sp, f.Q, f.fol, 0, last, f.vary.basis, tol["hyperbolicity"]);
  const Mat tests = test_space(f.sp, f.Q, f.fol, last, f.vary.basis, tol["test_space"]);
  const WeakSolution s = solve_weak(f.sp, f.Q, f.fol, 0, last, w, tests, h.C, tol["weak_rank"]);
  emit(out, Json{{"psi", to_json(s.psi)},
                 {"C", h.C},
                 {"Gamma", s.gamma},
                 {"weak_residual", s.weak_residual},
                 {"norm_psi", s.norm_psi},
                 {"norm_w", s.norm_w},
                 {"bound_ok", s.bound_ok},
                 {"rank", s.rank},
                 {"test_dim", s.test_dim}});
  return 0;
}

Vec inner_rhs(const DynFixture& f, const GreensOperators& gr, Rng& rng) {
  Vec c = Vec::Zero(f.vary.basis.cols());
  const Mat r = random_gaussian(static_cast<int>(c.size()), 1, rng);
  for (Eigen::Index i = 0; i < c.size(); ++i)
    if (f.vary.slot[static_cast<size_t>(i)] >= gr.q && f.vary.slot[static_cast<size_t>(i)] < f.vary.slots - gr.q) c(i) = r(i, 0);
  return f.vary.basis * c;
}

int cmd_greens(const Global& g, const std::string& fix, const std::string& rhs, const std::string& out) {
  const DynFixture f = load_fixture(fix, "", "");
  const GreensOperators gr = greens_operators(f.sp, f.Q, f.vary, g.tolerances()["rank"]);
  Rng rng(g.seed_or(1));
  const Vec w = rhs.empty() ? inner_rhs(f, gr, rng) : load_vec(rhs, "w", f.sp.dim());
  const Vec fw = gr.functional(f.sp, w);
  int first = f.vary.slots, lastslot = -1;
  for (Eigen::Index i = 0; i < fw.size(); ++i)
    if (std::abs(fw(i)) > 0) {
      first = std::min(first, f.vary.slot[static_cast<size_t>(i)]);
      lastslot = std::max(lastslot, f.vary.slot[static_cast<size_t>(i)]);
    }
  Json rep{{"retarded", to_json(gr.retarded(f.sp, w))},
           {"advanced", to_json(gr.advanced(f.sp, w))},
           {"fundamental", to_json(gr.fundamental(f.sp, w))},
           {"slot_range", gr.q},
           {"shielding", gr.shielding}};
  if (lastslot >= 0 && first >= 0 && lastslot + gr.q <= f.vary.slots - 1) {
    const StabilizationReport st = stabilization_check(gr, fw, first, lastslot);
    rep["stabilization"] = Json{{"inner_change", st.inner_change}, {"past_residual", st.past_residual}, {"windows", st.windows}};
  }
  emit(out, rep);
  return 0;
}

int cmd_exactseq(const Global& g, const std::string& fix, const std::string& report) {
  const DynFixture f = load_fixture(fix, "", "");
  const Tolerances tol = g.tolerances();
  const ExactSequenceReport e = exact_sequence_check(greens_operators(f.sp, f.Q, f.vary, tol["rank"]), tol["gap"]);
  emit(report, Json{{"exact", e.exact()},         {"dim_w0", e.dim_w0},         {"rank_q_w0", e.rank_q_w0},
                    {"dim_tc", e.dim_tc},         {"dim_ker_k", e.dim_ker_k},   {"rank_k", e.rank_k},
                    {"dim_we", e.dim_we},         {"dim_ker_q", e.dim_ker_q},   {"rank_q_we", e.rank_q_we},
                    {"dim_target", e.dim_target}, {"ker_k_contains", e.ker_k_contains},
                    {"ker_q_contains", e.ker_q_contains}, {"min_gap", e.min_gap}, {"ambiguous", e.ambiguous}});
  return e.exact() ? 0 : 3;
}

int cmd_propagate(const Global& g, const std::string& fix, const std::string& initial, const std::string& out) {
  const DynFixture f = load_fixture(fix, "", "");
  Vec psi0;
  if (!initial.empty()) {
    psi0 = load_vec(initial, "psi", f.sp.dim());
  } else {
    Rng rng(g.seed_or(1));
    const Mat r = random_gaussian(f.sp.dim(), 1, rng);
    psi0 = Vec::Zero(f.sp.dim());
    for (int i = 0; i < f.sp.size(); ++i)
      if (f.sp.layer[static_cast<size_t>(i)] < 2 * f.range && (f.sp.site.empty() || f.sp.site[static_cast<size_t>(i)] <= 0))
        psi0.segment(i * f.sp.spin, f.sp.spin) = r.block(i * f.sp.spin, 0, f.sp.spin, 1);
  }
  const Vec psi = march(f.sp, f.Q, f.range, psi0);
  Json ext = Json::array();
  for (const auto& [lo, hi] : support_extent(f.sp, psi)) ext.push_back(Json::array({lo, hi}));
  emit(out, Json{{"psi", to_json(psi)}, {"support", ext}, {"range", f.range}});
  return 0;
}

int cmd_minkowski(const Global& g, const std::string& model, const std::string& grid, const std::string& report,
                  const std::string& summary) {
  const MinkowskiModel m = minkowski_model_from_json(read_json(model), "");
  const MomentumGrid gr = momentum_grid_from_json(read_json(grid), "");
  const MinkowskiRun run = run_minkowski(m, gr, g.tolerances(), g.seed_or(1));
  if (report.empty() || report == "-")
    std::cout << run.csv.str();
  else
    write_text(report, run.csv.str());
  if (!summary.empty()) write_json(summary, run.summary());
  if (!run.rhat.sufficient)
    throw Refusal("the one-parameter ansatz cannot annihilate the upper shell (residual " +
                  std::to_string(run.rhat.max_upper) + ")");
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Causal fermion system toolkit"};
  app.require_subcommand(1);
  Global g;
  std::uint64_t seed = 0;
  app.add_option("--threads", g.threads, "Worker threads")->check(CLI::PositiveNumber);
  auto* seed_opt = app.add_option("--seed", seed, "Seed for randomized fixtures");
  app.add_option("--tol-override", g.overrides, "Tolerance override key=value")->take_all();

  std::string scenario, out, trace, measure, report, kind = "full", qsing, omega, omega2, jets, vars;
  std::string fixture, strips, targets, qdyn, foliation, rhs, initial, model, grid, summary;
  double kappa = 0.1;

  auto* c_min = app.add_subcommand("minimize", "Minimize the causal action");
  c_min->add_option("--scenario", scenario)->required();
  c_min->add_option("--kappa", kappa);
  c_min->add_option("--out", out);
  c_min->add_option("--trace", trace);

  auto* c_el = app.add_subcommand("check-el", "Euler-Lagrange residuals of a measure");
  c_el->add_option("--measure", measure)->required();
  c_el->add_option("--kappa", kappa);
  c_el->add_option("--report", report);

  auto* c_ker = app.add_subcommand("kernel", "Kernel Q, P or Q^reg of a measure");
  c_ker->add_option("--measure", measure)->required();
  c_ker->add_option("--kappa", kappa);
  c_ker->add_option("--kind", kind)->check(CLI::IsMember({"p", "full", "reg"}));
  c_ker->add_option("--qsing", qsing);
  c_ker->add_option("--omega", omega);
  c_ker->add_option("--out", out);

  auto* c_surf = app.add_subcommand("surface", "Surface-layer integrals of commutator jets");
  c_surf->add_option("--measure", measure)->required();
  c_surf->add_option("--omega", omega)->required();
  c_surf->add_option("--omega2", omega2);
  c_surf->add_option("--jets", jets);
  c_surf->add_option("--kappa", kappa);
  c_surf->add_option("--report", report);

  auto* c_ext = app.add_subcommand("extend", "Isometric extension along variations");
  c_ext->add_option("--measure", measure)->required();
  c_ext->add_option("--variations", vars)->required();
  c_ext->add_option("--omega", omega)->required();
  c_ext->add_option("--kappa", kappa);
  c_ext->add_option("--report", report);

  auto* c_qd = app.add_subcommand("qdyn", "Build the dynamical kernel");
  c_qd->add_option("--fixture,--measure", fixture);
  c_qd->add_option("--strips", strips);
  c_qd->add_option("--targets", targets)->required();
  c_qd->add_option("--out", out);
  c_qd->add_option("--report", report);

  auto* c_solve = app.add_subcommand("solve", "Weak solution of the dynamical wave equation");
  c_solve->add_option("--fixture,--measure", fixture);
  c_solve->add_option("--qdyn", qdyn);
  c_solve->add_option("--foliation", foliation);
  c_solve->add_option("--rhs", rhs);
  c_solve->add_option("--out", out);

  auto* c_gr = app.add_subcommand("greens", "Retarded, advanced and fundamental solutions");
  c_gr->add_option("--fixture,--measure", fixture);
  c_gr->add_option("--rhs", rhs);
  c_gr->add_option("--out", out);

  auto* c_ex = app.add_subcommand("exactseq", "Rank identities of the exact sequence");
  c_ex->add_option("--fixture,--measure", fixture);
  c_ex->add_option("--report", report);

  auto* c_prop = app.add_subcommand("propagate", "Strong solution by layer marching");
  c_prop->add_option("--fixture,--measure", fixture);
  c_prop->add_option("--initial", initial);
  c_prop->add_option("--out", out);

  auto* c_mk = app.add_subcommand("minkowski", "Momentum-space toy model");
  c_mk->add_option("--model", model)->required();
  c_mk->add_option("--grid", grid)->required();
  c_mk->add_option("--report", report);
  c_mk->add_option("--summary", summary);

  auto* c_run = app.add_subcommand("run", "Run a scenario");
  c_run->add_option("--scenario", scenario)->required();
  c_run->add_option("--out", out);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  if (*seed_opt) g.seed = seed;
  Eigen::setNbThreads(g.threads);

  try {
    if (*c_min) return cmd_minimize(g, scenario, kappa, out, trace);
    if (*c_el) return cmd_check_el(g, measure, kappa, report);
    if (*c_ker) return cmd_kernel(g, measure, kappa, kind, qsing, omega, out);
    if (*c_surf) return cmd_surface(g, measure, kappa, omega, omega2, jets, report);
    if (*c_ext) return cmd_extend(g, measure, kappa, omega, vars, report);
    if (*c_qd) return cmd_qdyn(g, fixture, strips, targets, out, report);
    if (*c_solve) return cmd_solve(g, fixture, qdyn, foliation, rhs, out);
    if (*c_gr) return cmd_greens(g, fixture, rhs, out);
    if (*c_ex) return cmd_exactseq(g, fixture, report);
    if (*c_prop) return cmd_propagate(g, fixture, initial, out);
    if (*c_mk) return cmd_minkowski(g, model, grid, report, summary);
    if (*c_run) {
      RunOptions o;
      o.seed = g.seed;
      o.tol_overrides = g.overrides;
      emit(out, run_scenario_file(scenario, o));
      return 0;
    }
  } catch (const Error& e) {
    std::cerr << "cfs: " << e.what() << "\n";
    return e.code();
  } catch (const Json::exception& e) {
    std::cerr << "cfs: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
