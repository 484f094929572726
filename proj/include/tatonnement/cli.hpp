#pragma once

#include "tatonnement/engine.hpp"
#include "tatonnement/equilibrium.hpp"
#include "tatonnement/market.hpp"
#include "tatonnement/protocol.hpp"

#include <json.hpp>

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace tat {

constexpr int kSummaryVersion = 1;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct RunConfig {
  MarketSpec market;
  ProtocolConfig cfg;
  Mode mode = Mode::async;
  std::string schedule_kind = "staggered";  // staggered | synchronous
  std::optional<std::uint64_t> schedule_seed;  // defaults to seed
  double horizon_days = 50.0;
  std::uint64_t seed = 1;
  std::optional<Vec> p0;
  double p0_perturbation = 0.2;  // p0 = p* (1 +- perturbation) when p0 is absent
  std::optional<Vec> s_star;
  std::optional<Vec> stock0;
  std::optional<Vec> capacity;
  std::optional<double> plan_f;  // size warehouses with warehouse_plan
  double sweep_target = 0.1;     // days-to-threshold uses phi <= target phi(0)
  std::vector<std::string> assertions;
  std::string trace_path;
  std::string summary_path;
};

// Keys: market (path or object), preset, protocol (field overrides), mode,
// schedule {kind, seed}, horizon_days, seed, p0, p0_perturbation, s_star,
// stock0, capacity, plan {f}, sweep_target, assertions, outputs {trace, summary}.
// Relative paths resolve against base_dir.  Throws ParseError or UsageError.
RunConfig parse_run_config(const nlohmann::json& j, const std::string& base_dir = ".");
void apply_protocol_overrides(ProtocolConfig& cfg, const nlohmann::json& j);
nlohmann::json protocol_to_json(const ProtocolConfig& cfg);

const std::vector<std::string>& known_assertions();

// Full validation gate for a run: the mode's theorem hypotheses plus the
// market's elasticity against the declared E.
ParamReport validate_run(const RunConfig& rc);

// Runs the simulation.  Writes the trace when csv is given and returns the
// versioned summary {daily_phi, contraction_factors, breaches, assertion_results, ...}.
nlohmann::json execute_run(const RunConfig& rc, std::ostream* csv);
bool assertions_passed(const nlohmann::json& summary);

nlohmann::json equilibrium_to_json(const EquilibriumResult& r);
nlohmann::json flex_to_json(const FlexReport& r, int n);
nlohmann::json plan_to_json(const WarehousePlan& p);
WarehousePlan plan_for_run(const RunConfig& rc, double f);

// Exit codes: 0 ok, 1 assertion or validation failure, 2 usage or parse error.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tat
