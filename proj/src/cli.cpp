#include "tatonnement/cli.hpp"

#include "tatonnement/discrete.hpp"
#include "tatonnement/io.hpp"
#include "tatonnement/metrics.hpp"
#include "tatonnement/schedule.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>
#include <thread>

namespace tat {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr double kTol = 1e-9;

std::string resolve(const std::string& path, const std::string& base) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  return (fs::path(base) / path).string();
}

template <class T>
T get_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ParseError(std::string("config key '") + key + "': " + e.what());
  }
}

std::optional<Vec> opt_vec(const json& j, const char* key, int n) {
  if (!j.contains(key)) return std::nullopt;
  Vec v = vec_from_json(j.at(key));
  if (v.size() != n) throw ParseError(std::string("config key '") + key + "' needs one entry per good");
  return v;
}

json ivec_to_json(const IVec& v) {
  json a = json::array();
  for (auto x : v) a.push_back(x);
  return a;
}

json doubles(const std::vector<double>& v) {
  json a = json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Vec default_p0(const RunConfig& rc, const Vec& p_star) {
  Vec p = p_star;
  for (int i = 0; i < p.size(); ++i) p[i] *= 1.0 + (i % 2 == 0 ? 1.0 : -1.0) * rc.p0_perturbation;
  return p;
}

struct Outcome {
  std::vector<double> phi;   // per day (per round in sync mode)
  std::vector<double> gap;   // sum_i |w_tilde - w| p at day start
  std::vector<SyncRound> rounds;
  long monotonicity_violations = 0;
  long breaches = 0;
  std::optional<WarehousePlan> plan;
  int max_zone_after_settling = 0;
  double horizon = 0.0;
};

json assertion(const std::string& tag, bool passed, double observed, double required, long checked,
               const std::string& detail = "") {
  json a{{"tag", tag}, {"passed", passed}, {"observed", observed}, {"required", required},
         {"checked", checked}};
  if (!detail.empty()) a["detail"] = detail;
  return a;
}

// Largest day-over-day ratio on days selected by keep(k), where k is the
// index of the day at whose start the condition is evaluated.
template <class Keep>
std::pair<double, long> worst_ratio(const std::vector<double>& phi, Keep keep) {
  double worst = 0.0;
  long n = 0;
  for (std::size_t k = 0; k + 1 < phi.size(); ++k) {
    if (!keep(k)) continue;
    // phi = 0 must stay 0 for the day to contract.
    const double r = phi[k] > 0.0    ? phi[k + 1] / phi[k]
                     : phi[k + 1] > 0 ? std::numeric_limits<double>::infinity()
                                      : 0.0;
    worst = std::max(worst, r);
    ++n;
  }
  return {worst, n};
}

json daily_factor_check(const std::string& tag, const std::vector<double>& phi, double factor,
                        const std::function<bool(std::size_t)>& keep) {
  auto [worst, n] = worst_ratio(phi, keep);
  return assertion(tag, worst <= factor + kTol, worst, factor, n);
}

json check_one(const std::string& tag, const RunConfig& rc, const Outcome& o) {
  const auto& c = rc.cfg;
  auto needs = [&](std::initializer_list<Mode> modes) {
    return std::find(modes.begin(), modes.end(), rc.mode) != modes.end();
  };
  auto not_applicable = [&] {
    return assertion(tag, false, 0.0, 0.0, 0, "does not apply to mode " + to_string(rc.mode));
  };
  auto all = [](std::size_t) { return true; };

  if (tag == "thm-sync-progress") {
    if (!needs({Mode::sync})) return not_applicable();
    double worst = -std::numeric_limits<double>::infinity();
    long n = 0;
    for (std::size_t k = 0; k + 1 < o.rounds.size(); ++k) {
      const double gain = o.rounds[k].phi - o.rounds[k + 1].phi;
      worst = std::max(worst, o.rounds[k].bound - gain);
      ++n;
    }
    if (n == 0) worst = 0.0;
    return assertion(tag, worst <= kTol, worst, 0.0, n, "observed is max(bound - decrease)");
  }
  if (tag == "thm-async-daily") {
    if (!needs({Mode::async})) return not_applicable();
    return daily_factor_check(tag, o.phi, 1.0 - c.lambda * c.alpha1 / 2.0, all);
  }
  if (tag == "thm-war-daily") {
    if (!needs({Mode::warehouse})) return not_applicable();
    auto base = daily_factor_check(tag, o.phi, 1.0 - c.kappa * (c.alpha2 - 1.0) / 4.0, all);
    const double strong = 1.0 - c.lambda * c.alpha1 / (8.0 * (1.0 + c.alpha2));
    auto far = daily_factor_check(tag, o.phi, strong, [&](std::size_t k) {
      return o.phi[k] >= 2.0 * (1.0 + 2.0 * c.alpha2) * o.gap[k];
    });
    base["far_from_target"] = far;
    base["passed"] = base["passed"].get<bool>() && far["passed"].get<bool>();
    return base;
  }
  if (tag == "thm-fast-daily") {
    if (!needs({Mode::fast})) return not_applicable();
    return daily_factor_check(tag, o.phi, 1.0 - c.kappa / 4.0, all);
  }
  if (tag == "thm-noisy-i-daily" || tag == "thm-noisy-ii-daily" || tag == "thm-discrete-daily") {
    const bool one = tag == "thm-noisy-i-daily";
    const bool disc = tag == "thm-discrete-daily";
    if (!needs({one ? Mode::noisy_i : disc ? Mode::discrete : Mode::noisy_ii})) return not_applicable();
    const double M = rc.market.money_supply;
    const double thr = disc ? discrete_phi_threshold(c, market_facts(rc.market))
                            : one ? noisy_i_threshold(c, M) : noisy_ii_threshold(c, M);
    auto r = daily_factor_check(tag, o.phi, 1.0 - c.kappa * (c.alpha2 - 1.0) / 8.0,
                                [&](std::size_t k) { return o.phi[k] >= thr; });
    r["threshold"] = thr;
    return r;
  }
  if (tag == "cor-updates-monotone") {
    if (!needs({Mode::async, Mode::warehouse, Mode::noisy_i, Mode::noisy_ii, Mode::fast}))
      return not_applicable();
    return assertion(tag, o.monotonicity_violations == 0,
                     static_cast<double>(o.monotonicity_violations), 0.0, 1);
  }
  if (tag == "lem-good-wrhs") {
    if (!rc.capacity && !o.plan) return assertion(tag, false, 0, 0, 0, "needs capacities or a plan");
    bool ok = o.breaches == 0;
    std::string detail = "observed is the breach count";
    if (o.plan) {
      if (o.horizon >= o.plan->settling_days) {
        ok = ok && o.max_zone_after_settling <= 2;
        detail += "; max zone after settling " + std::to_string(o.max_zone_after_settling);
      } else {
        detail += "; horizon ends before the settling time";
      }
    }
    return assertion(tag, ok, static_cast<double>(o.breaches), 0.0, 1, detail);
  }
  throw UsageError("unknown assertion tag '" + tag + "'");
}

}  // namespace

const std::vector<std::string>& known_assertions() {
  static const std::vector<std::string> tags{
      "thm-sync-progress", "thm-async-daily",    "thm-war-daily",      "thm-fast-daily",
      "thm-noisy-i-daily", "thm-noisy-ii-daily", "thm-discrete-daily", "cor-updates-monotone",
      "lem-good-wrhs"};
  return tags;
}

void apply_protocol_overrides(ProtocolConfig& c, const json& j) {
  if (!j.is_object()) throw ParseError("protocol must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    try {
      if (k == "lambda") c.lambda = it->get<double>();
      else if (k == "kappa") c.kappa = it->get<double>();
      else if (k == "alpha1") c.alpha1 = it->get<double>();
      else if (k == "alpha2") c.alpha2 = it->get<double>();
      else if (k == "d") c.d = it->get<double>();
      else if (k == "b") c.b = it->get<double>();
      else if (k == "E") c.E = it->get<double>();
      else if (k == "E_wealth") c.E_wealth = it->get<double>();
      else if (k == "fast_updates") c.fast_updates = it->get<bool>();
      else if (k == "noise_rho") c.noise_rho = it->get<double>();
      else if (k == "noise_mode") c.noise_mode = noise_mode_from_string(it->get<std::string>());
      else if (k == "discrete") c.discrete = it->get<bool>();
      else throw ParseError("unknown protocol field '" + k + "'");
    } catch (const json::exception& e) {
      throw ParseError("protocol field '" + k + "': " + e.what());
    } catch (const DomainError& e) {
      throw ParseError("protocol field '" + k + "': " + e.what());
    }
  }
}

json protocol_to_json(const ProtocolConfig& c) {
  return {{"lambda", c.lambda},          {"kappa", c.kappa},
          {"alpha1", c.alpha1},          {"alpha2", c.alpha2},
          {"d", c.d},                    {"b", c.b},
          {"E", c.E},                    {"E_wealth", c.E_wealth},
          {"fast_updates", c.fast_updates}, {"noise_rho", c.noise_rho},
          {"noise_mode", to_string(c.noise_mode)}, {"discrete", c.discrete}};
}

RunConfig parse_run_config(const json& j, const std::string& base_dir) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  static const std::vector<std::string> keys{
      "market", "preset", "protocol", "mode", "schedule", "horizon_days", "seed", "p0",
      "p0_perturbation", "s_star", "stock0", "capacity", "plan", "sweep_target", "assertions",
      "outputs"};
  for (auto it = j.begin(); it != j.end(); ++it)
    if (std::find(keys.begin(), keys.end(), it.key()) == keys.end())
      throw ParseError("unknown config key '" + it.key() + "'");

  RunConfig rc;
  if (!j.contains("market")) throw ParseError("config needs a market");
  const auto& jm = j.at("market");
  try {
    rc.market = jm.is_string() ? market_from_json(read_json_file(resolve(jm.get<std::string>(), base_dir)))
                               : market_from_json(jm);
  } catch (const DomainError& e) {
    throw ParseError(std::string("market: ") + e.what());
  }
  const int n = rc.market.n();

  std::optional<Preset> ps;
  if (j.contains("preset")) {
    ps = preset_from_string(get_or<std::string>(j, "preset", ""));
    if (!ps) throw ParseError("unknown preset '" + j.at("preset").get<std::string>() + "'");
    rc.cfg = preset(*ps);
    rc.mode = preset_mode(*ps);
  }
  if (j.contains("protocol")) apply_protocol_overrides(rc.cfg, j.at("protocol"));
  if (j.contains("mode")) {
    try {
      rc.mode = mode_from_string(get_or<std::string>(j, "mode", ""));
    } catch (const DomainError& e) {
      throw ParseError(e.what());
    }
  } else if (!ps) {
    throw ParseError("config needs a preset or a mode");
  }
  if (rc.mode == Mode::discrete) rc.cfg.discrete = true;

  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    if (!s.is_object()) throw ParseError("schedule must be an object");
    rc.schedule_kind = get_or<std::string>(s, "kind", "staggered");
    if (rc.schedule_kind != "staggered" && rc.schedule_kind != "synchronous")
      throw ParseError("schedule kind must be staggered or synchronous");
    if (s.contains("seed")) rc.schedule_seed = get_or<std::uint64_t>(s, "seed", 0);
  }
  rc.horizon_days = get_or<double>(j, "horizon_days", rc.horizon_days);
  if (!(rc.horizon_days > 0.0)) throw ParseError("horizon_days must be positive");
  rc.seed = get_or<std::uint64_t>(j, "seed", rc.seed);
  rc.p0 = opt_vec(j, "p0", n);
  rc.p0_perturbation = get_or<double>(j, "p0_perturbation", rc.p0_perturbation);
  rc.s_star = opt_vec(j, "s_star", n);
  rc.stock0 = opt_vec(j, "stock0", n);
  rc.capacity = opt_vec(j, "capacity", n);
  if (j.contains("plan")) {
    const auto& p = j.at("plan");
    if (!p.is_object() || !p.contains("f")) throw ParseError("plan needs f");
    rc.plan_f = get_or<double>(p, "f", 0.0);
  }
  rc.sweep_target = get_or<double>(j, "sweep_target", rc.sweep_target);
  rc.assertions = get_or<std::vector<std::string>>(j, "assertions", {});
  for (const auto& t : rc.assertions)
    if (std::find(known_assertions().begin(), known_assertions().end(), t) == known_assertions().end())
      throw ParseError("unknown assertion tag '" + t + "'");
  if (j.contains("outputs")) {
    const auto& o = j.at("outputs");
    rc.trace_path = resolve(get_or<std::string>(o, "trace", ""), base_dir);
    rc.summary_path = resolve(get_or<std::string>(o, "summary", ""), base_dir);
  }
  return rc;
}

ParamReport validate_run(const RunConfig& rc) {
  std::optional<MarketFacts> facts;
  if (rc.mode == Mode::discrete) {
    try {
      facts = market_facts(rc.market);
    } catch (const DomainError&) {
    }
  }
  ParamReport r = validate_params(rc.cfg, rc.mode, facts);
  const double E_market = rc.market.elasticity();
  r.constraints.push_back({"market-elasticity-declared", "config", E_market, rc.cfg.E,
                           E_market <= rc.cfg.E * (1.0 + 1e-12)});
  return r;
}

WarehousePlan plan_for_run(const RunConfig& rc, double f) {
  const auto eq = equilibrium_solve(rc.market);
  const Vec& w = rc.market.supplies;
  const Vec p0 = rc.p0 ? *rc.p0 : default_p0(rc, eq.prices);
  const Vec x0 = eval_demand(rc.market, p0);
  const double phi_init = phi_simple(p0, x0, w);
  const double min_wp = (w.array() * eq.prices.array()).minCoeff();
  return warehouse_plan(rc.cfg, f, demand_bound_from_f(rc.cfg.E, f), phi_init, min_wp, w);
}

json execute_run(const RunConfig& rc, std::ostream* csv) {
  const int n = rc.market.n();
  const auto eq = equilibrium_solve(rc.market);
  Outcome o;
  o.horizon = rc.horizon_days;
  json counters = json::object();
  json finals = json::object();
  std::vector<double> S;

  const std::uint64_t sched_seed = rc.schedule_seed.value_or(rc.seed);
  ScheduleSpec schedule = rc.schedule_kind == "synchronous" ? synchronous_schedule(n)
                                                            : make_schedule(n, rc.cfg.b, sched_seed);

  if (rc.mode == Mode::sync) {
    const Vec p0 = rc.p0 ? *rc.p0 : default_p0(rc, eq.prices);
    const int rounds = static_cast<int>(std::ceil(rc.horizon_days));
    o.rounds = run_synchronous(make_evaluator(rc.market), rc.market.supplies, rc.cfg, p0, rounds);
    if (csv) write_csv_header(*csv);
    for (std::size_t k = 0; k < o.rounds.size(); ++k) {
      o.phi.push_back(o.rounds[k].phi);
      o.gap.push_back(0.0);
      if (csv) {
        EventRecord e;
        e.t = static_cast<double>(k);
        e.phi_before = e.phi_after = o.rounds[k].phi;
        e.S = o.rounds[k].phi;
        write_csv_row(*csv, e);
      }
    }
    counters["rounds"] = static_cast<long>(o.rounds.size()) - 1;
    finals["prices"] = vec_to_json(o.rounds.back().p);
  } else if (rc.mode == Mode::discrete) {
    DiscretePlan plan;
    const std::int64_t floor_price = min_discrete_price(rc.cfg.lambda);
    const Vec p0 = rc.p0 ? *rc.p0 : default_p0(rc, eq.prices);
    for (int i = 0; i < n; ++i)
      plan.p0.push_back(std::max<std::int64_t>(floor_price, std::llround(p0[i])));
    plan.s_star = rc.s_star ? *rc.s_star : Vec::Zero(n);
    if (rc.stock0)
      for (int i = 0; i < n; ++i) plan.stock0.push_back(std::llround((*rc.stock0)[i]));
    plan.schedule = make_schedule(n, 1.0, sched_seed);
    plan.csv = csv;
    const auto r = run_discrete(rc.market, rc.cfg, plan, rc.horizon_days);
    for (const auto& d : r.days) {
      o.phi.push_back(d.phi);
      o.gap.push_back(0.0);
      S.push_back(d.S);
    }
    counters = {{"updates", r.updates},
                {"price_changes", r.price_changes},
                {"null_updates", r.null_updates},
                {"null_rule_mismatches", r.null_rule_mismatches},
                {"days_above_threshold", r.days_above_threshold},
                {"max_stock_gap", r.max_stock_gap}};
    finals["prices"] = ivec_to_json(r.final_prices);
    finals["stocks"] = ivec_to_json(r.final_stocks);
  } else {
    SimConfig sc;
    sc.mode = rc.mode;
    sc.cfg = rc.cfg;
    sc.schedule = schedule;
    sc.horizon_days = rc.horizon_days;
    sc.seed = rc.seed;
    sc.p0 = rc.p0 ? *rc.p0 : default_p0(rc, eq.prices);
    sc.p_ref = eq.prices;
    sc.s_star = rc.s_star;
    sc.stock0 = rc.stock0;
    sc.capacity = rc.capacity;
    if (rc.plan_f) {
      o.plan = plan_for_run(rc, *rc.plan_f);
      if (!sc.capacity) sc.capacity = o.plan->capacity;
      if (!sc.s_star) sc.s_star = o.plan->s_star;
    }
    sc.csv = csv;
    if (csv) write_csv_header(*csv);
    const auto r = simulate(rc.market, sc);
    for (const auto& d : r.days) {
      o.phi.push_back(d.phi);
      o.gap.push_back(d.w_tilde_gap);
      S.push_back(d.S);
    }
    o.breaches = r.breaches;
    o.monotonicity_violations = r.monotonicity_violations;
    if (o.plan) o.max_zone_after_settling = r.max_zone_from(o.plan->settling_days);
    counters = {{"update_events", r.update_events},
                {"price_changes", r.price_changes},
                {"null_updates", r.null_updates},
                {"fast_updates", r.fast_updates},
                {"delays", r.delays},
                {"instantiations", r.instantiations},
                {"monotonicity_violations", r.monotonicity_violations},
                {"max_demand_ratio", r.max_demand_ratio},
                {"max_log_price_dev", r.max_log_price_dev}};
    finals["prices"] = vec_to_json(r.final_prices);
    if (r.final_stocks.size() > 0) finals["stocks"] = vec_to_json(r.final_stocks);
  }

  std::vector<double> factors;
  for (std::size_t k = 0; k + 1 < o.phi.size(); ++k)
    factors.push_back(o.phi[k] > 0.0 ? o.phi[k + 1] / o.phi[k] : 1.0);

  json results = json::array();
  for (const auto& tag : rc.assertions) results.push_back(check_one(tag, rc, o));

  json s{{"schema", "tatonnement-run-summary"},
         {"version", kSummaryVersion},
         {"mode", to_string(rc.mode)},
         {"seed", rc.seed},
         {"horizon_days", rc.horizon_days},
         {"protocol", protocol_to_json(rc.cfg)},
         {"equilibrium_prices", vec_to_json(eq.prices)},
         {"daily_phi", doubles(o.phi)},
         {"daily_S", doubles(S)},
         {"contraction_factors", doubles(factors)},
         {"breaches", o.breaches},
         {"counters", counters},
         {"final", finals},
         {"assertion_results", results}};
  if (o.plan) s["plan"] = plan_to_json(*o.plan);
  return s;
}

bool assertions_passed(const json& summary) {
  for (const auto& a : summary.at("assertion_results"))
    if (!a.at("passed").get<bool>()) return false;
  return true;
}

json equilibrium_to_json(const EquilibriumResult& r) {
  return {{"prices", vec_to_json(r.prices)}, {"residual", r.residual}, {"iterations", r.iterations}};
}

json flex_to_json(const FlexReport& r, int n) {
  return {{"c", r.c},
          {"p_star", vec_to_json(r.p_star)},
          {"p_c", vec_to_json(r.p_c)},
          {"p_inv_c", vec_to_json(r.p_inv_c)},
          {"e", r.e},
          {"r_c", r.r_c},
          {"r_inv_c", r.r_inv_c},
          {"rho", r.rho},
          {"bound", flex_bound(r, n)},
          {"bound_holds", check_flex_bound(r, n)}};
}

json plan_to_json(const WarehousePlan& p) {
  json j{{"feasible", p.feasible}, {"fast", p.fast},          {"u", p.u},
         {"alpha4", p.alpha4},     {"D", p.D},                {"f", p.f},
         {"d", p.d},               {"kappa", p.kappa},        {"settling_days", p.settling_days},
         {"alpha4_min", p.alpha4_min}, {"alpha4_max", p.alpha4_max}};
  if (!p.reason.empty()) j["reason"] = p.reason;
  if (p.capacity.size() > 0) j["capacity"] = vec_to_json(p.capacity);
  if (p.s_star.size() > 0) j["s_star"] = vec_to_json(p.s_star);
  return j;
}

namespace {

void print_report(std::ostream& out, const ParamReport& r) {
  out << std::left << std::setw(30) << "constraint" << std::setw(22) << "theorem" << std::setw(16)
      << "lhs" << std::setw(16) << "rhs" << "ok\n";
  for (const auto& c : r.constraints) {
    std::ostringstream lhs, rhs;
    lhs << std::setprecision(8) << c.lhs;
    rhs << std::setprecision(8) << c.rhs;
    out << std::setw(30) << c.id << std::setw(22) << c.theorem << std::setw(16) << lhs.str()
        << std::setw(16) << rhs.str() << (c.ok ? "yes" : "NO") << '\n';
  }
  out << (r.ok() ? "all constraints hold\n" : "some constraints fail\n");
}

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string out_dir;
  bool force = false;
};

RunConfig load_run_config(const std::string& path, const Globals& g) {
  RunConfig rc = parse_run_config(read_json_file(path), fs::path(path).parent_path().string());
  if (g.seed) rc.seed = *g.seed;
  if (!g.out_dir.empty()) {
    fs::create_directories(g.out_dir);
    rc.trace_path = (fs::path(g.out_dir) / "trace.csv").string();
    rc.summary_path = (fs::path(g.out_dir) / "summary.json").string();
  }
  return rc;
}

void emit_json(const json& j, const Globals& g, const std::string& name, std::ostream& out) {
  if (g.out_dir.empty()) {
    out << j.dump(2) << '\n';
    return;
  }
  fs::create_directories(g.out_dir);
  write_text_file((fs::path(g.out_dir) / name).string(), j.dump(2) + "\n");
}

int cmd_validate(const std::string& path, const std::optional<std::string>& mode, const Globals& g,
                 std::ostream& out) {
  RunConfig rc = load_run_config(path, g);
  if (mode) {
    try {
      rc.mode = mode_from_string(*mode);
    } catch (const DomainError& e) {
      throw UsageError(e.what());
    }
  }
  const auto r = validate_run(rc);
  out << "mode " << to_string(rc.mode) << '\n';
  print_report(out, r);
  const auto stated = validate_stated_params(rc.cfg, rc.mode);
  if (!stated.constraints.empty()) {
    out << "stated parameter choices:\n";
    print_report(out, stated);
  }
  return r.ok() ? 0 : 1;
}

int cmd_run(const std::string& path, const Globals& g, std::ostream& out, std::ostream& err) {
  const RunConfig rc = load_run_config(path, g);
  const auto report = validate_run(rc);
  if (!report.ok()) {
    print_report(err, report);
    if (!g.force) {
      err << "validation failed; rerun with --force to simulate anyway\n";
      return 1;
    }
  }
  json summary;
  if (!rc.trace_path.empty()) {
    std::ofstream csv(rc.trace_path, std::ios::binary);
    if (!csv) throw std::runtime_error("cannot write " + rc.trace_path);
    summary = execute_run(rc, &csv);
  } else {
    summary = execute_run(rc, nullptr);
  }
  summary["validated"] = report.ok();
  if (rc.summary_path.empty())
    out << summary.dump(2) << '\n';
  else
    write_text_file(rc.summary_path, summary.dump(2) + "\n");
  for (const auto& a : summary.at("assertion_results"))
    out << (a.at("passed").get<bool>() ? "PASS " : "FAIL ") << a.at("tag").get<std::string>()
        << " observed " << a.at("observed").get<double>() << " required "
        << a.at("required").get<double>() << '\n';
  return assertions_passed(summary) ? 0 : 1;
}

void set_axis(RunConfig& rc, const std::string& axis, double v) {
  auto& c = rc.cfg;
  if (axis == "lambda") c.lambda = v;
  else if (axis == "kappa") c.kappa = v;
  else if (axis == "alpha1") c.alpha1 = v;
  else if (axis == "alpha2") c.alpha2 = v;
  else if (axis == "d") c.d = v;
  else if (axis == "b") c.b = v;
  else if (axis == "E") c.E = v;
  else if (axis == "noise_rho") c.noise_rho = v;
  else if (axis == "horizon_days") rc.horizon_days = v;
  else if (axis == "seed") rc.seed = static_cast<std::uint64_t>(v);
  else if (axis == "p0_perturbation") rc.p0_perturbation = v;
  else throw UsageError("unknown sweep axis '" + axis + "'");
}

int cmd_sweep(const std::string& path, const std::string& axis, const std::vector<double>& values,
              const Globals& g, std::ostream& out) {
  RunConfig base = load_run_config(path, g);
  {
    RunConfig probe = base;
    set_axis(probe, axis, 0.0);  // rejects unknown axes before any work
  }
  base.trace_path.clear();

  std::vector<std::string> rows(values.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t k = next++; k < values.size(); k = next++) {
      RunConfig rc = base;
      set_axis(rc, axis, values[k]);
      std::ostringstream row;
      row << std::setprecision(10) << values[k];
      const bool valid = validate_run(rc).ok();
      if (!valid && !g.force) {
        row << ",0,,,,,,skipped: invalid parameters";
        rows[k] = row.str();
        continue;
      }
      try {
        const json s = execute_run(rc, nullptr);
        const auto& f = s.at("contraction_factors");
        double worst = 0.0, mean = 0.0;
        for (const auto& x : f) {
          worst = std::max(worst, x.get<double>());
          mean += x.get<double>();
        }
        if (!f.empty()) mean /= static_cast<double>(f.size());
        const auto& phi = s.at("daily_phi");
        long days_to = -1;
        const double target = rc.sweep_target * phi.at(0).get<double>();
        for (std::size_t d = 0; d < phi.size(); ++d)
          if (phi[d].get<double>() <= target) {
            days_to = static_cast<long>(d);
            break;
          }
        row << ',' << (valid ? 1 : 0) << ',' << worst << ',' << mean << ',' << days_to << ','
            << s.at("breaches").get<long>() << ',' << (assertions_passed(s) ? 1 : 0) << ',';
      } catch (const std::exception& e) {
        std::string msg = e.what();
        std::replace(msg.begin(), msg.end(), ',', ';');
        std::replace(msg.begin(), msg.end(), '\n', ' ');
        row << ',' << (valid ? 1 : 0) << ",,,,,," << msg;
      }
      rows[k] = row.str();
    }
  };
  const unsigned threads =
      std::max(1u, std::min<unsigned>(std::thread::hardware_concurrency(), static_cast<unsigned>(values.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 0; t + 1 < threads; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  std::ostringstream table;
  table << axis << ",valid,max_factor,mean_factor,days_to_target,breaches,assertions_passed,note\n";
  for (const auto& r : rows) table << r << '\n';
  if (g.out_dir.empty()) {
    out << table.str();
  } else {
    fs::create_directories(g.out_dir);
    write_text_file((fs::path(g.out_dir) / "sweep.csv").string(), table.str());
  }
  return 0;
}

IVec parse_ivec(const std::string& s) {
  IVec v;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      v.push_back(std::stoll(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("expected a comma-separated integer list, got '" + s + "'");
    }
  }
  return v;
}

json lemma_json(const LemmaCheck& c) {
  json j{{"checked", c.checked}, {"violations", c.violations}};
  if (!c.first.empty()) j["first"] = c.first;
  return j;
}

int cmd_build_virtual(const std::string& market_path, const std::string& lo, const std::string& hi,
                      bool no_repair, const Globals& g, std::ostream& out) {
  const MarketSpec spec = market_from_json(read_json_file(market_path));
  const PriceGrid grid(parse_ivec(lo), parse_ivec(hi));
  const auto table = discretize_market(spec, grid, {.repair = !no_repair});
  const auto virt = build_virtual_demands(table);
  const auto rep = check_virtual_lemmas(table, virt);
  json report{{"cells", grid.cells()},
              {"E", table.E},
              {"repaired", table.repaired},
              {"repair_reverted", table.repair_reverted},
              {"interpolated_runs", virt.runs.size()},
              {"undefined_points", virt.undefined_points},
              {"within_one", lemma_json(rep.within_one)},
              {"spending_monotone", lemma_json(rep.spending_monotone)},
              {"wgs", lemma_json(rep.wgs)},
              {"elasticity", lemma_json(rep.elasticity)},
              {"ok", rep.ok()}};
  if (g.out_dir.empty()) {
    write_table_csv(out, table, virt);
  } else {
    fs::create_directories(g.out_dir);
    std::ofstream csv(fs::path(g.out_dir) / "virtual.csv", std::ios::binary);
    write_table_csv(csv, table, virt);
    write_text_file((fs::path(g.out_dir) / "report.json").string(), report.dump(2) + "\n");
    out << (rep.ok() ? "all virtual-demand lemmas hold" : "virtual-demand lemma violations") << '\n';
  }
  return rep.ok() ? 0 : 1;
}

int cmd_lower_bound(double E, double r, double M, std::optional<long> window, const Globals& g,
                    std::ostream& out) {
  const auto lb = lower_bound_market(E, r, M, window);
  json sweep = json::array();
  for (const auto& p : lb.sweep) sweep.push_back({{"p", p.p}, {"x", p.x}, {"misspending", p.misspending}});
  json j{{"E", lb.E},
         {"r", lb.r},
         {"M", lb.M},
         {"p_ref", lb.p_ref},
         {"market", market_to_json(lb.spec)},
         {"min_misspending", lb.min_misspending},
         {"argmin_price", lb.argmin_price},
         {"beta", lb.beta},
         {"certificate_ok", lb.certificate_ok},
         {"sweep", sweep}};
  emit_json(j, g, "lower_bound.json", out);
  return lb.certificate_ok ? 0 : 1;
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tatonnement simulator and theorem checks"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Override the config seed");
  app.add_option("--out", g.out_dir, "Output directory");
  app.add_flag("--force", g.force, "Run even when parameter validation fails");

  std::string config, market, axis, values_s, lo, hi;
  std::optional<std::string> mode;
  std::vector<double> cs;
  double f = 0.0, E = 2.0, r = 10.0, M = 1000.0;
  long window = 0;
  bool no_repair = false;

  auto* validate = app.add_subcommand("validate", "Check a config against its theorem hypotheses");
  validate->add_option("--config", config)->required();
  validate->add_option("--mode", mode, "Validate for another mode");

  auto* run = app.add_subcommand("run", "Simulate a config and check requested assertions");
  run->add_option("--config", config)->required();

  auto* sweep = app.add_subcommand("sweep", "Run a config over values of one parameter");
  sweep->add_option("--config", config)->required();
  sweep->add_option("--param", axis)->required();
  sweep->add_option("--values", values_s, "Comma-separated values; may be empty");

  auto* equilibrium = app.add_subcommand("equilibrium", "Solve for equilibrium prices");
  equilibrium->add_option("--market", market)->required();

  auto* flex = app.add_subcommand("flex", "Equilibrium flex e(c)");
  flex->add_option("--market", market)->required();
  flex->add_option("--c", cs)->required();

  auto* plan = app.add_subcommand("plan-warehouse", "Size warehouses for a config");
  plan->add_option("--config", config)->required();
  auto* f_opt = plan->add_option("--f", f, "Log price band around equilibrium");

  auto* discrete = app.add_subcommand("discrete", "Indivisible goods tools");
  discrete->require_subcommand(1);
  auto* build = discrete->add_subcommand("build-virtual", "Discretize a market and build virtual demands");
  build->add_option("--market", market)->required();
  build->add_option("--lo", lo)->required();
  build->add_option("--hi", hi)->required();
  build->add_flag("--no-repair", no_repair);
  auto* lower = discrete->add_subcommand("lower-bound", "Misspending certificate for the lower-bound market");
  lower->add_option("--E", E)->required();
  lower->add_option("--r", r)->required();
  lower->add_option("--M", M);
  auto* window_opt = lower->add_option("--window", window);

  for (auto* sub : {validate, run, sweep, equilibrium, flex, plan, discrete, build, lower})
    sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& e) {
    err << e.what() << '\n';
    return 2;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*validate) return cmd_validate(config, mode, g, out);
    if (*run) return cmd_run(config, g, out, err);
    if (*sweep) {
      std::vector<double> values;
      std::stringstream ss(values_s);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
          values.push_back(std::stod(item));
        } catch (const std::exception&) {
          throw UsageError("bad sweep value '" + item + "'");
        }
      }
      return cmd_sweep(config, axis, values, g, out);
    }
    if (*equilibrium) {
      const auto spec = market_from_json(read_json_file(market));
      emit_json(equilibrium_to_json(equilibrium_solve(spec)), g, "equilibrium.json", out);
      return 0;
    }
    if (*flex) {
      const auto spec = market_from_json(read_json_file(market));
      json all = json::array();
      for (double c : cs) all.push_back(flex_to_json(equilibrium_flex(spec, c), spec.n()));
      emit_json(all, g, "flex.json", out);
      return 0;
    }
    if (*plan) {
      const RunConfig rc = load_run_config(config, g);
      if (!*f_opt) {
        if (!rc.plan_f) throw UsageError("plan-warehouse needs --f or plan.f in the config");
        f = *rc.plan_f;
      }
      const auto p = plan_for_run(rc, f);
      emit_json(plan_to_json(p), g, "plan.json", out);
      return p.feasible ? 0 : 1;
    }
    if (*build) return cmd_build_virtual(market, lo, hi, no_repair, g, out);
    if (*lower)
      return cmd_lower_bound(E, r, M, *window_opt ? std::optional<long>(window) : std::nullopt, g, out);
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return 2;
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const DomainError& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  } catch (const SolverError& e) {
    err << "solver error: " << e.what() << '\n';
    return 1;
  } catch (const DiscreteConstructionError& e) {
    err << "construction error: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}

}  // namespace tat
