#pragma once

#include "cfs/io.hpp"
#include "cfs/minkowski.hpp"

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace cfs {

// Named tolerances; every module threshold used by the CLI and scenarios comes from here.
class Tolerances {
public:
  Tolerances();
  double operator[](const std::string& key) const;
  void set(const std::string& key, double value);
  // "key=value"
  void apply_override(const std::string& assignment);
  const std::map<std::string, double>& values() const { return values_; }

private:
  std::map<std::string, double> values_;
};

struct RunOptions {
  std::optional<std::uint64_t> seed;
  std::vector<std::string> tol_overrides;
  std::string base_dir;  // relative file references resolve against this
};

// Stage names in execution order.
const std::vector<std::string>& stage_order();

std::string resolve_path(const std::string& base_dir, const std::string& path);

// {"file": path} or {"generator": "random" | "polygon", ...}
Measure measure_from_source(const Json& j, const std::string& ptr, const std::string& base_dir, Rng& rng);
ChainConfig chain_config_from_json(const Json& j, const std::string& ptr);
MinkowskiModel minkowski_model_from_json(const Json& j, const std::string& ptr);
MomentumGrid momentum_grid_from_json(const Json& j, const std::string& ptr);

struct MinkowskiRun {
  RhatResult rhat;
  MomentumProduct product;
  double clifford = 0;
  double shell_residual = 0;
  Csv csv;
  Json summary() const;
};
MinkowskiRun run_minkowski(const MinkowskiModel& model, const MomentumGrid& grid, const Tolerances& tol,
                           std::uint64_t seed);

// Chain fixture plus the block basis and foliation used by the dynamics subcommands.
struct DynamicsSetup {
  Chain chain;
  SlotBasis vary;
  Foliation fol;
};
DynamicsSetup dynamics_setup(const Json& j, const std::string& ptr);

// Executes the stages listed in the scenario; the bundle holds one report per stage.
Json run_scenario(const Json& scenario, const RunOptions& opts);
Json run_scenario_file(const std::string& path, RunOptions opts);

}  // namespace cfs
