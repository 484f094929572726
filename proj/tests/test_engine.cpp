#include "support.hpp"
#include "tatonnement/engine.hpp"
#include "tatonnement/equilibrium.hpp"

#include <doctest.h>

#include <cmath>
#include <random>
#include <sstream>

using namespace tat;
using testkit::vec;

namespace {

DemandEvaluator constant_demand(Vec x) {
  return make_evaluator([x](const Vec&, double s) { return Vec(x * s); },
                        static_cast<int>(x.size()), 1.0, 0.0);
}

MarketSpec ces_market() {
  return make_market(vec({1, 2}), {BuyerSpec::ces(0.5, vec({1, 2}), 10.0),
                                   BuyerSpec::ces(0.5, vec({2, 1}), 6.0)});
}

SimConfig base_config(Mode mode, const ProtocolConfig& cfg, Vec p0, int n, std::uint64_t seed = 3) {
  SimConfig c;
  c.mode = mode;
  c.cfg = cfg;
  c.p0 = std::move(p0);
  c.schedule = make_schedule(n, std::max(1.0, cfg.b), seed);
  c.horizon_days = 20;
  c.seed = seed;
  return c;
}

}  // namespace

TEST_CASE("null update gate") {
  CHECK_FALSE(null_update_gate(1e-9, 1.0, 0.0, 0.1, 2.0));
  // rho w (2b + kappa) = 1.
  CHECK(null_update_gate(1.5, 1.0, 0.25, 0.0, 2.0));
  CHECK_FALSE(null_update_gate(3.0, 1.0, 0.25, 0.0, 2.0));
  CHECK(null_update_gate(-1.5, 1.0, 0.25, 0.0, 2.0));
}

TEST_CASE("noise") {
  std::mt19937_64 a(5), b(5);
  CHECK(apply_noise(3.0, 2.0, 0.0, a) == 3.0);
  for (int k = 0; k < 1000; ++k) {
    const double r = apply_noise(3.0, 2.0, 0.1, a);
    CHECK(std::abs(r - 3.0) <= 0.2);
    CHECK(r == apply_noise(3.0, 2.0, 0.1, b));
  }
}

TEST_CASE("schedules") {
  auto s = make_schedule(4, 2.0, 9);
  validate_schedule(s, 4, 2.0);
  for (int i = 0; i < 4; ++i) {
    CHECK(s.period[i] >= 0.5);
    CHECK(s.period[i] <= 1.0);
  }
  auto t = make_schedule(4, 2.0, 9);
  CHECK(s.period == t.period);
  CHECK(s.first == t.first);
  CHECK(make_schedule(4, 2.0, 10).period != s.period);
  CHECK_THROWS_AS(validate_schedule(s, 3, 2.0), DomainError);
  ScheduleSpec bad{{0.2}, {0.1}};
  CHECK_THROWS_AS(validate_schedule(bad, 1, 2.0), DomainError);
  ScheduleSpec late{{1.0}, {1.5}};
  CHECK_THROWS_AS(validate_schedule(late, 1, 1.0), DomainError);
}

TEST_CASE("synchronous rounds from equilibrium stay put") {
  auto m = ces_market();
  const Vec ps = equilibrium_solve(m).prices;
  auto rounds = run_synchronous(make_evaluator(m), m.supplies, preset(Preset::sync_basic), ps, 20);
  REQUIRE(rounds.size() == 21);
  CHECK((rounds.back().p - ps).cwiseAbs().maxCoeff() <= 1e-8 * ps.maxCoeff());
}

TEST_CASE("single-good synchronous progress") {
  auto m = make_market(vec({2.0}), {BuyerSpec::cobb_douglas(vec({1.0}), 10.0)});
  auto cfg = preset(Preset::sync_basic);
  // p = 3.5 gives x = 2.857 <= 2w.
  auto rounds = run_synchronous(make_evaluator(m), m.supplies, cfg, vec({3.5}), 30);
  for (std::size_t k = 0; k + 1 < rounds.size(); ++k)
    CHECK(rounds[k].phi - rounds[k + 1].phi >= cfg.lambda * rounds[k].phi - 1e-9);
}

TEST_CASE("multi-good synchronous progress bound") {
  auto m = make_market(vec({1, 2, 1.5}), {BuyerSpec::ces(0.5, vec({1, 2, 1}), 10.0),
                                          BuyerSpec::ces(0.3, vec({2, 1, 1}), 6.0)});
  ProtocolConfig cfg;
  cfg.lambda = 0.15;
  cfg.E = 2.0;
  auto rounds = run_synchronous(make_evaluator(m), m.supplies, cfg, vec({1, 9, 3}), 40);
  for (std::size_t k = 0; k + 1 < rounds.size(); ++k) {
    const auto& r = rounds[k];
    double bound = 0.0;
    for (int i = 0; i < 3; ++i)
      bound += cfg.lambda * r.p[i] * std::min(std::abs(r.x[i] - m.supplies[i]), m.supplies[i]);
    CHECK(r.bound == doctest::Approx(bound).epsilon(1e-12));
    CHECK(r.phi - rounds[k + 1].phi >= bound - 1e-9);
  }
}

TEST_CASE("all-at-once schedule reproduces synchronous rounds") {
  auto m = ces_market();
  auto cfg = preset(Preset::async_basic);
  const Vec p0 = vec({2.0, 11.0});
  auto c = base_config(Mode::async, cfg, p0, 2);
  c.schedule = synchronous_schedule(2);
  c.horizon_days = 10;
  auto sim = simulate(m, c);
  auto rounds = run_synchronous(make_evaluator(m), m.supplies, cfg, p0, 10);
  for (int i = 0; i < 2; ++i)
    CHECK(sim.final_prices[i] == doctest::Approx(rounds.back().p[i]).epsilon(1e-12));
}

TEST_CASE("averaged demand over three constant segments") {
  auto m = ces_market();
  auto cfg = preset(Preset::async_basic);
  cfg.b = 2.0;
  auto c = base_config(Mode::async, cfg, vec({2.0, 11.0}), 2);
  c.schedule = ScheduleSpec{{0.5, 1.0}, {0.25, 1.0}};
  c.horizon_days = 1.0;
  c.keep_events = true;
  auto sim = simulate(m, c);
  std::vector<EventRecord> up0;
  const EventRecord* up1 = nullptr;
  for (const auto& e : sim.events) {
    if (e.kind != EventKind::regular_update) continue;
    if (e.good == 0) up0.push_back(e);
    if (e.good == 1 && !up1) up1 = &e;
  }
  REQUIRE(up0.size() >= 2);
  REQUIRE(up1 != nullptr);
  CHECK(up0[0].t == doctest::Approx(0.25));
  CHECK(up0[1].t == doctest::Approx(0.75));
  auto x1 = [&](double p0) { return eval_demand(m, vec({p0, 11.0}))[1]; };
  const double expect = 0.25 * x1(2.0) + 0.5 * x1(up0[0].p_after) + 0.25 * x1(up0[1].p_after);
  CHECK(up1->t == doctest::Approx(1.0));
  CHECK(up1->x_bar == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("averaged stock change drives the ongoing update") {
  // One good, w = 1, constant demand 5: stock falls from 10 to 8 by t = 0.5.
  auto d = constant_demand(vec({5.0}));
  ProtocolConfig cfg = preset(Preset::warehouse_results);
  cfg.kappa = 0.01;
  SimConfig c;
  c.mode = Mode::warehouse;
  c.cfg = cfg;
  c.p0 = vec({1.0});
  c.schedule = ScheduleSpec{{1.0}, {0.5}};
  c.s_star = vec({10.0});
  c.stock0 = vec({10.0});
  c.horizon_days = 0.6;
  c.keep_events = true;
  auto sim = simulate(d, vec({1.0}), c);
  const EventRecord* e = nullptr;
  for (const auto& r : sim.events)
    if (r.kind == EventKind::regular_update) e = &r;
  REQUIRE(e != nullptr);
  CHECK(e->t == doctest::Approx(0.5));
  CHECK(e->stock == doctest::Approx(8.0));
  // (10 - 8)/0.5 - 0.01 (8 - 10)
  CHECK(e->z_bar_true == doctest::Approx(4.02).epsilon(1e-12));
  CHECK(e->p_after == doctest::Approx(1.0 * (1 + cfg.lambda)));
}

TEST_CASE("fast update fires once w units are sold") {
  auto d = constant_demand(vec({3.0}));
  ProtocolConfig cfg = preset(Preset::fast_results);
  SimConfig c;
  c.mode = Mode::fast;
  c.cfg = cfg;
  c.p0 = vec({1.0});
  c.schedule = ScheduleSpec{{1.0}, {1.0}};
  c.s_star = vec({100.0});
  c.horizon_days = 0.5;
  c.keep_events = true;
  auto sim = simulate(d, vec({1.0}), c);
  const EventRecord* e = nullptr;
  for (const auto& r : sim.events)
    if (r.kind == EventKind::fast_update) {
      e = &r;
      break;
    }
  REQUIRE(e != nullptr);
  CHECK(e->t == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
  CHECK(sim.fast_updates >= 1);
}

TEST_CASE("fast updates stay quiet while demand is below supply") {
  auto m = ces_market();
  const Vec ps = equilibrium_solve(m).prices;
  auto cfg = preset(Preset::fast_results);
  auto c = base_config(Mode::fast, cfg, Vec(1.02 * ps), 2);
  c.s_star = vec({50, 50});
  c.horizon_days = 10;
  auto fast = simulate(m, c);
  CHECK(fast.fast_updates == 0);
  c.mode = Mode::warehouse;
  auto war = simulate(m, c);
  CHECK((fast.final_prices - war.final_prices).cwiseAbs().maxCoeff() <= 1e-9);
}

TEST_CASE("equilibrium start with balanced warehouses is a fixed point") {
  auto m = ces_market();
  const Vec ps = equilibrium_solve(m).prices;
  auto c = base_config(Mode::warehouse, preset(Preset::warehouse_results), ps, 2);
  c.s_star = vec({20, 20});
  auto sim = simulate(m, c);
  CHECK((sim.final_prices - ps).cwiseAbs().maxCoeff() <= 1e-6 * ps.maxCoeff());
  CHECK((sim.final_stocks - *c.s_star).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("runs are deterministic") {
  auto m = ces_market();
  auto cfg = preset(Preset::noisy_ii_basic);
  cfg.noise_rho = 1e-3;
  auto run = [&] {
    auto c = base_config(Mode::noisy_ii, cfg, vec({2.0, 11.0}), 2, 42);
    c.s_star = vec({30, 30});
    std::ostringstream csv;
    c.csv = &csv;
    simulate(m, c);
    return csv.str();
  };
  const std::string a = run();
  CHECK(a == run());
  CHECK(a.rfind("t,kind,good,p_before,p_after,x,x_bar,z_bar_true,z_bar_reported,stock,w_tilde,zone,"
                "phi_total,S_total\n",
                0) == 0);
}

TEST_CASE("stock is conserved and updates only help") {
  auto m = ces_market();
  auto cfg = preset(Preset::warehouse_results);
  auto c = base_config(Mode::warehouse, cfg, vec({2.0, 11.0}), 2);
  c.s_star = vec({30, 30});
  c.stock0 = vec({33, 28});
  c.horizon_days = 60;
  auto sim = simulate(m, c);
  CHECK(sim.max_conservation_error <= 1e-9);
  CHECK(sim.monotonicity_violations == 0);
  CHECK(sim.update_events > 0);
}

TEST_CASE("noise stays within its bound and null updates are recorded") {
  auto m = ces_market();
  auto cfg = preset(Preset::noisy_ii_basic);
  cfg.noise_rho = 0.05;
  const Vec ps = equilibrium_solve(m).prices;
  auto c = base_config(Mode::noisy_ii, cfg, ps, 2);
  c.s_star = vec({30, 30});
  c.horizon_days = 10;
  auto sim = simulate(m, c);
  // Each stock reading is off by at most rho w and updates are >= 1/b apart.
  CHECK(sim.max_noise_error <= (2.0 * cfg.b + cfg.kappa) * (1.0 + 1e-12));
  CHECK(sim.max_noise_error > 1.0);
  CHECK(sim.null_updates > 0);
}

TEST_CASE("discrete mode is not run by the continuous engine") {
  auto m = ces_market();
  auto c = base_config(Mode::discrete, preset(Preset::discrete_basic), vec({2, 11}), 2);
  CHECK_THROWS_AS(simulate(m, c), DomainError);
  auto bad = base_config(Mode::async, preset(Preset::async_basic), vec({2}), 2);
  CHECK_THROWS_AS(simulate(m, bad), DomainError);
}

TEST_CASE("async daily contraction on a short run") {
  auto m = ces_market();
  auto cfg = preset(Preset::async_basic);
  REQUIRE(validate_params(cfg, Mode::async).ok());
  auto c = base_config(Mode::async, cfg, vec({2.0, 11.0}), 2);
  auto sim = simulate(m, c);
  for (double r : sim.daily_ratios()) CHECK(r <= 1 - cfg.lambda * cfg.alpha1 / 2 + 1e-9);
}
