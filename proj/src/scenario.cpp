#include "cfs/scenario.hpp"

#include <algorithm>
#include <filesystem>

namespace cfs {

namespace {

double opt_double(const Json& j, const std::string& key, const std::string& ptr, double def) {
  return has(j, key) ? get_double(j[key], ptr + "/" + key) : def;
}

int opt_int(const Json& j, const std::string& key, const std::string& ptr, int def) {
  return has(j, key) ? get_int(j[key], ptr + "/" + key) : def;
}

std::vector<double> opt_poly(const Json& j, const std::string& key, const std::string& ptr) {
  return has(j, key) ? get_doubles(j[key], ptr + "/" + key) : std::vector<double>{};
}

Json cplx_json(cplx z) { return to_json(z); }

}  // namespace

Tolerances::Tolerances()
    : values_{{"el", 1e-8},        {"kernel", 1e-12},     {"qdyn", 1e-10},  {"hyperbolicity", 1e-10},
              {"weak_rank", 1e-12}, {"test_space", 1e-12}, {"rank", 1e-10},  {"gap", 1e3},
              {"isometry", 1e-10}, {"cutoff", 1e-12},     {"green", 1e-10}, {"propagation", 1e-8},
              {"rhat", 1e-10}} {}

double Tolerances::operator[](const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) throw IoError("unknown tolerance '" + key + "'");
  return it->second;
}

void Tolerances::set(const std::string& key, double value) {
  auto it = values_.find(key);
  if (it == values_.end()) throw IoError("unknown tolerance '" + key + "'");
  if (!(value > 0)) throw IoError("tolerance '" + key + "' must be positive");
  it->second = value;
}

void Tolerances::apply_override(const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos) throw IoError("tolerance override '" + assignment + "' is not key=value");
  double v = 0;
  try {
    size_t used = 0;
    v = std::stod(assignment.substr(eq + 1), &used);
    if (used != assignment.size() - eq - 1) throw std::invalid_argument("trailing");
  } catch (const std::exception&) {
    throw IoError("tolerance override '" + assignment + "' has no numeric value");
  }
  set(assignment.substr(0, eq), v);
}

const std::vector<std::string>& stage_order() {
  static const std::vector<std::string> order{"minimize", "kernels", "surface", "extension", "dynamics", "minkowski"};
  return order;
}

std::string resolve_path(const std::string& base_dir, const std::string& path) {
  if (base_dir.empty() || std::filesystem::path(path).is_absolute()) return path;
  return (std::filesystem::path(base_dir) / path).string();
}

Measure measure_from_source(const Json& j, const std::string& ptr, const std::string& base_dir, Rng& rng) {
  if (has(j, "file")) {
    const std::string path = resolve_path(base_dir, get_string(j["file"], ptr + "/file"));
    try {
      return measure_from_json(read_json(path));
    } catch (const IoError& e) {
      throw IoError(ptr + "/file: " + e.what());
    }
  }
  const std::string gen = get_string(field(j, "generator", ptr), ptr + "/generator");
  if (gen == "random") {
    const SpaceSpec s = space_from_json(field(j, "space", ptr), ptr + "/space");
    s.validate();
    return random_measure(s, get_int(field(j, "points", ptr), ptr + "/points"), rng);
  }
  if (gen == "polygon") {
    const int f = opt_int(j, "dim_f", ptr, 12);
    return polygon_orbit(opt_int(j, "group_size", ptr, 6), f, opt_double(j, "c", ptr, 1.0),
                         opt_double(j, "beta", ptr, 0.7), random_unitary(f, rng));
  }
  throw IoError(ptr + "/generator: unknown generator '" + gen + "'");
}

ChainConfig chain_config_from_json(const Json& j, const std::string& ptr) {
  ChainConfig c;
  if (j.is_null()) return c;
  if (!j.is_object()) throw IoError(ptr + ": expected an object");
  c.layers = opt_int(j, "layers", ptr, c.layers);
  c.sites = opt_int(j, "sites", ptr, c.sites);
  c.a = opt_double(j, "a", ptr, c.a);
  c.b = opt_double(j, "b", ptr, c.b);
  c.c_space = opt_double(j, "c_space", ptr, c.c_space);
  c.mass = opt_double(j, "mass", ptr, c.mass);
  c.eps = opt_double(j, "eps", ptr, c.eps);
  c.seed = static_cast<std::uint64_t>(opt_int(j, "seed", ptr, static_cast<int>(c.seed)));
  return c;
}

MinkowskiModel minkowski_model_from_json(const Json& j, const std::string& ptr) {
  MinkowskiModel m;
  m.mass = get_double(field(j, "mass", ptr), ptr + "/mass");
  m.q.a.c = get_doubles(field(j, "a", ptr), ptr + "/a");
  m.q.b.c = get_doubles(field(j, "b", ptr), ptr + "/b");
  m.alpha.c = opt_poly(j, "alpha", ptr);
  m.cprime = opt_double(j, "cprime", ptr, 0.0);
  if (!(m.mass > 0)) throw IoError(ptr + "/mass: must be positive");
  return m;
}

MomentumGrid momentum_grid_from_json(const Json& j, const std::string& ptr) {
  return momentum_grid(get_int(field(j, "n", ptr), ptr + "/n"), get_double(field(j, "kmax", ptr), ptr + "/kmax"));
}

Json MinkowskiRun::summary() const {
  return Json{{"max_upper_residual", rhat.max_upper},
              {"max_lower_residual", rhat.max_lower},
              {"ansatz_sufficient", rhat.sufficient},
              {"cprime", product.cprime},
              {"product", cplx_json(product.value)},
              {"dirac_current", cplx_json(product.dirac_current)},
              {"max_current_deviation", product.max_deviation},
              {"clifford_residual", clifford},
              {"shell_residual", shell_residual}};
}

MinkowskiRun run_minkowski(const MinkowskiModel& model, const MomentumGrid& grid, const Tolerances& tol,
                           std::uint64_t seed) {
  MinkowskiRun run;
  const DiracStructure d = dirac_structure(model.mass);
  run.clifford = d.clifford_residual();
  for (const Vec3& k : grid.k)
    for (int s : {1, -1}) run.shell_residual = std::max(run.shell_residual, shell_solution(d, k, s).residual);
  const QhatEvaluator q = model.evaluator(d);
  run.rhat = rhat_construct(q, grid, d, tol["rhat"]);
  const RhatResult& rh = run.rhat;
  const QhatEvaluator qd = qdyn_hat(q, [&rh, &grid, d](const Vec3& k) -> Mat {
    for (size_t i = 0; i < grid.k.size(); ++i)
      if (grid.k[i] == k) return rh.R(d, i);
    throw Refusal("momentum off the grid");
  });
  Rng rng(seed);
  const ShellData psi = random_shell_data(d, grid, rng), phi = random_shell_data(d, grid, rng);
  run.product = momentum_surface_product(qd, d, grid, psi, phi);
  run.csv.header = {"kx", "ky", "kz", "h", "upper_residual", "lower_residual", "current_deviation"};
  for (size_t i = 0; i < grid.k.size(); ++i) {
    const RhatPoint& p = rh.points[i];
    run.csv.rows.push_back({p.k(0), p.k(1), p.k(2), p.h, p.upper_residual, p.lower_residual,
                            run.product.current_deviation[i]});
  }
  return run;
}

DynamicsSetup dynamics_setup(const Json& j, const std::string& ptr) {
  if (!j.is_null() && !j.is_object()) throw IoError(ptr + ": expected an object");
  const Json none;
  DynamicsSetup s;
  s.chain = make_chain(chain_config_from_json(has(j, "chain") ? j["chain"] : none, ptr + "/chain"));
  const int block = opt_int(j, "block", ptr, 4);
  s.vary = block_basis(s.chain.space, block);
  s.fol = block_foliation(s.chain.space, block, opt_double(j, "width", ptr, 0.25), opt_double(j, "dt", ptr, 0.05));
  return s;
}

namespace {

struct Context {
  const Json& sc;
  const RunOptions& opts;
  Tolerances tol;
  std::uint64_t seed = 1;
  Rng rng;
  std::optional<Measure> rho;
  std::optional<BlockKernel> Q;
  double kappa = 0;

  Context(const Json& s, const RunOptions& o) : sc(s), opts(o) {}

  Measure& measure() {
    if (!rho) rho = measure_from_source(field(sc, "measure", ""), "/measure", opts.base_dir, rng);
    return *rho;
  }
  const BlockKernel& kernel() {
    if (!Q) Q = q_kernel(measure(), kappa);
    return *Q;
  }
  Region region(const std::string& key) {
    return region_from_json(field(sc, key, ""), measure().size(), "/" + key);
  }
};

Json stage_minimize(Context& c) {
  const Json& cfgj = has(c.sc, "minimize") ? c.sc["minimize"] : Json::object();
  MinimizeConfig cfg;
  cfg.max_iter = opt_int(cfgj, "max_iter", "/minimize", cfg.max_iter);
  cfg.patience = opt_int(cfgj, "patience", "/minimize", cfg.patience);
  cfg.step = opt_double(cfgj, "step", "/minimize", cfg.step);
  cfg.weight_step = opt_double(cfgj, "weight_step", "/minimize", cfg.weight_step);
  cfg.tol = opt_double(cfgj, "tol", "/minimize", cfg.tol);
  const Measure start = c.measure();
  const MinimizeResult r = minimize(start, c.kappa, cfg);
  c.rho = r.measure;
  c.Q.reset();
  return Json{{"action", r.report.action},     {"volume", r.report.volume},
              {"boundedness", r.report.boundedness}, {"converged", r.converged},
              {"iterations", r.iterations},    {"points", r.measure.size()}};
}

Json stage_kernels(Context& c) {
  const BlockKernel& Q = c.kernel();
  double bmax = 0;
  int flagged = 0;
  for (const Mat& b : Q.blocks) bmax = std::max(bmax, b.norm());
  for (char f : Q.flagged) flagged += f ? 1 : 0;
  return Json{{"points", Q.npoints}, {"spin", Q.spin}, {"asymmetry", kernel_asymmetry(Q, c.measure())},
              {"max_block_norm", bmax}, {"fallback_pairs", flagged}};
}

Json stage_surface(Context& c) {
  const Region omega = c.region("omega");
  const int jets = opt_int(c.sc, "jets", "", 3);
  const int f = c.measure().space.dim_f;
  Json gam = Json::array(), gam2 = Json::array();
  const bool second = has(c.sc, "omega2");
  const Region omega2 = second ? c.region("omega2") : Region{};
  for (int i = 0; i < jets; ++i) {
    const Mat A = random_hermitian(f, c.rng);
    gam.push_back(gamma_commutator(c.measure(), omega, c.kernel(), A));
    if (second) gam2.push_back(gamma_commutator(c.measure(), omega2, c.kernel(), A));
  }
  const Mat G = surface_form_gram(c.measure(), omega, c.kernel());
  Json out{{"gamma", gam}, {"gram_asymmetry", G.norm() > 0 ? (G - G.adjoint()).norm() / G.norm() : 0.0}};
  if (second) out["gamma_omega2"] = gam2;
  return out;
}

Json stage_extension(Context& c) {
  const Region omega = c.region("omega");
  const double tau = opt_double(c.sc, "tau", "", 0.05);
  const Mat A = random_hermitian(c.measure().space.dim_f, c.rng);
  const Measure rt = conjugation_family(c.measure(), A)(tau);
  const BlockKernel Qt = q_kernel(rt, c.kappa);
  IsometryConfig cfg;
  cfg.tol = c.tol["isometry"];
  cfg.seed = c.seed;
  const ExtensionOperators ops = build_isometry(c.measure(), rt, omega, c.kernel(), Qt, identity_map(c.measure().size()), cfg);
  return Json{{"admissible", ops.report.admissible()},
              {"isometry_residual", ops.report.isometry_residual},
              {"sqrt_residual", ops.report.sqrt.residual},
              {"b_norm", ops.report.b_norm}};
}

Json stage_dynamics(Context& c) {
  const Json& dj = has(c.sc, "dynamics") ? c.sc["dynamics"] : Json();
  const DynamicsSetup s = dynamics_setup(dj, "/dynamics");
  const DynSpace& sp = s.chain.space;
  const BlockKernel& Q = s.chain.dyn.Q;
  const int last = s.fol.steps() - 1;
  double green = 0;
  std::uniform_int_distribution<int> step(0, last);
  for (int i = 0; i < 10; ++i) {
    int a = step(c.rng), b = step(c.rng);
    if (a > b) std::swap(a, b);
    const Vec psi = random_gaussian(sp.dim(), 1, c.rng), phi = random_gaussian(sp.dim(), 1, c.rng);
    const GreenFormulaReport g = greens_formula_check(sp, Q, s.fol, a, b, psi, phi);
    green = std::max(green, g.scale > 0 ? g.deviation / g.scale : g.deviation);
  }
  const HyperbolicityReport h = hyperbolicity_constant(sp, Q, s.fol, 0, last, s.vary.basis, c.tol["hyperbolicity"]);
  const Mat tests = test_space(sp, Q, s.fol, last, s.vary.basis, c.tol["test_space"]);
  const Vec w = random_gaussian(sp.dim(), 1, c.rng);
  const WeakSolution ws = solve_weak(sp, Q, s.fol, 0, last, w, tests, h.C, c.tol["weak_rank"]);
  const GreensOperators g = greens_operators(sp, Q, s.vary, c.tol["rank"]);
  const ExactSequenceReport ex = exact_sequence_check(g, c.tol["gap"]);
  return Json{{"green_formula_deviation", green},
              {"C", h.C},
              {"Gamma", gamma_constant(h.C, s.fol.t(0), s.fol.t(last))},
              {"weak_residual", ws.weak_residual},
              {"weak_bound_ok", ws.bound_ok},
              {"test_dim", ws.test_dim},
              {"kernel_range_slots", g.q},
              {"exact_sequence", ex.exact()},
              {"dim_w0", ex.dim_w0},
              {"rank_k", ex.rank_k},
              {"dim_we", ex.dim_we},
              {"min_gap", ex.min_gap}};
}

Json stage_minkowski(Context& c) {
  const Json& mj = field(c.sc, "minkowski", "");
  const MinkowskiModel model = minkowski_model_from_json(field(mj, "model", "/minkowski"), "/minkowski/model");
  const MomentumGrid grid = momentum_grid_from_json(field(mj, "grid", "/minkowski"), "/minkowski/grid");
  return run_minkowski(model, grid, c.tol, c.seed).summary();
}

}  // namespace

Json run_scenario(const Json& sc, const RunOptions& opts) {
  if (!sc.is_object()) throw IoError("/: scenario must be an object");
  Context c(sc, opts);
  if (has(sc, "tolerances")) {
    const Json& t = sc["tolerances"];
    if (!t.is_object()) throw IoError("/tolerances: expected an object");
    for (auto it = t.begin(); it != t.end(); ++it) {
      try {
        c.tol.set(it.key(), get_double(it.value(), "/tolerances/" + it.key()));
      } catch (const IoError& e) {
        throw IoError("/tolerances/" + it.key() + ": " + e.what());
      }
    }
  }
  for (const std::string& o : opts.tol_overrides) c.tol.apply_override(o);
  c.seed = opts.seed ? *opts.seed : static_cast<std::uint64_t>(opt_int(sc, "seed", "", 1));
  c.rng.seed(c.seed);
  c.kappa = opt_double(sc, "kappa", "", 0.1);

  std::vector<std::string> wanted;
  const Json& st = field(sc, "stages", "");
  if (!st.is_array()) throw IoError("/stages: expected an array");
  for (size_t i = 0; i < st.size(); ++i) {
    const std::string name = get_string(st[i], "/stages/" + std::to_string(i));
    if (std::find(stage_order().begin(), stage_order().end(), name) == stage_order().end())
      throw IoError("/stages/" + std::to_string(i) + ": unknown stage '" + name + "'");
    wanted.push_back(name);
  }

  Json bundle{{"seed", c.seed}, {"tolerances", c.tol.values()}, {"stages", Json::array()}};
  for (const std::string& name : stage_order()) {
    if (std::find(wanted.begin(), wanted.end(), name) == wanted.end()) continue;
    Json rep;
    try {
      if (name == "minimize") rep = stage_minimize(c);
      else if (name == "kernels") rep = stage_kernels(c);
      else if (name == "surface") rep = stage_surface(c);
      else if (name == "extension") rep = stage_extension(c);
      else if (name == "dynamics") rep = stage_dynamics(c);
      else rep = stage_minkowski(c);
    } catch (const Refusal& e) {
      throw Refusal("stage " + name + ": " + e.what());
    } catch (const NumericalFailure& e) {
      throw NumericalFailure("stage " + name + ": " + e.what());
    } catch (const IoError& e) {
      throw IoError("stage " + name + ": " + e.what());
    }
    rep["stage"] = name;
    bundle["stages"].push_back(rep);
  }
  return bundle;
}

Json run_scenario_file(const std::string& path, RunOptions opts) {
  const Json sc = read_json(path);
  if (opts.base_dir.empty()) opts.base_dir = std::filesystem::path(path).parent_path().string();
  return run_scenario(sc, opts);
}

}  // namespace cfs
