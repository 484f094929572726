#include "support.hpp"
#include "tatonnement/equilibrium.hpp"
#include "tatonnement/metrics.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace tat;
using testkit::vec;

TEST_CASE("cobb-douglas equilibrium in closed form") {
  auto m = make_market(vec({1, 1}), {BuyerSpec::cobb_douglas(vec({0.5, 0.5}), 10.0)});
  auto r = equilibrium_solve(m);
  CHECK(r.prices[0] == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(r.prices[1] == doctest::Approx(5.0).epsilon(1e-14));
  CHECK(r.residual <= kSolverTol);
  Vec x = eval_demand(m, r.prices);
  CHECK(x[0] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("symmetric ces equilibrium is M / (n w)") {
  std::vector<BuyerSpec> bs(3, BuyerSpec::ces(0.6, vec({1, 1, 1, 1}), 5.0));
  auto m = make_market(Vec::Constant(4, 2.0), bs);
  auto r = equilibrium_solve(m);
  for (int i = 0; i < 4; ++i) CHECK(r.prices[i] == doctest::Approx(15.0 / (4 * 2.0)).epsilon(1e-9));
}

TEST_CASE("equilibrium clears the market and scales with money") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 10; ++trial) {
    auto m = testkit::random_market(rng, 3, 3, trial % 2 ? 0.5 : -1.0);
    auto r = equilibrium_solve(m);
    CHECK(r.residual <= kSolverTol);
    Vec x = eval_demand(m, r.prices);
    for (int i = 0; i < 3; ++i) CHECK(x[i] == doctest::Approx(m.supplies[i]).epsilon(1e-9));

    auto rich = m;
    for (auto& b : rich.buyers) b.money *= 2.0;
    rich.money_supply *= 2.0;
    auto r2 = equilibrium_solve(rich);
    for (int i = 0; i < 3; ++i) CHECK(r2.prices[i] == doctest::Approx(2 * r.prices[i]).epsilon(1e-8));
  }
}

TEST_CASE("solver input checks") {
  auto m = make_market(vec({1}), {BuyerSpec::ces(0.5, vec({1}), 1.0)});
  CHECK_THROWS_AS(equilibrium_solve(m, std::nullopt, 0.0), DomainError);
  CHECK_THROWS_AS(equilibrium_solve(m, vec({-1.0})), DomainError);
  CHECK_THROWS_AS(equilibrium_solve(m, vec({1.0, 1.0})), DomainError);
}

TEST_CASE("equilibrium flex") {
  auto ces = make_market(vec({1, 2}), {BuyerSpec::ces(0.5, vec({1, 3}), 4.0),
                                       BuyerSpec::ces(0.5, vec({2, 1}), 7.0)});
  auto f2 = equilibrium_flex(ces, 2.0);
  CHECK(f2.e == doctest::Approx(std::log(2.0)).epsilon(1e-8));
  CHECK(std::log(std::max(f2.r_c, f2.r_inv_c)) == f2.e);
  CHECK(equilibrium_flex(ces, 1.0).e == doctest::Approx(0.0).scale(1.0).epsilon(1e-9));
  CHECK_THROWS_AS(equilibrium_flex(ces, 0.5), DomainError);

  auto cd = make_market(vec({1, 3}), {BuyerSpec::cobb_douglas(vec({1, 2}), 6.0)});
  CHECK(equilibrium_flex(cd, 3.0).e == doctest::Approx(std::log(3.0)).epsilon(1e-12));
}

TEST_CASE("flex bound") {
  auto ces = make_market(vec({1, 2}), {BuyerSpec::ces(0.3, vec({1, 3}), 4.0)});
  auto f2 = equilibrium_flex(ces, 2.0);
  CHECK(f2.rho >= 1.0);
  CHECK(check_flex_bound(f2, 2));
  CHECK(flex_bound(f2, 2) == doctest::Approx(std::log(2.0) + std::log(f2.rho * 2)));
  auto f1 = equilibrium_flex(ces, 1.0);
  CHECK(flex_bound(f1, 2) == 0.0);
  CHECK(check_flex_bound(f1, 2));

  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 30; ++trial) {
    const int n = 1 + trial % 5;
    auto m = testkit::random_market(rng, n, 2, -1.0);
    for (double c : {2.0, 3.0}) {
      auto f = equilibrium_flex(m, c);
      CHECK(check_flex_bound(f, n));
      CHECK(f.r_inv_c <= c * n * f.rho * (1 + 1e-12));
    }
  }
}

TEST_CASE("demand bound from price band") {
  CHECK(demand_bound_from_f(1.0, 0.0) == 1.0);
  CHECK(demand_bound_from_f(1.0, std::log(2.0)) == doctest::Approx(4.0).epsilon(1e-14));
  CHECK_THROWS_AS(demand_bound_from_f(0.5, 0.1), DomainError);

  std::mt19937_64 rng(13);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int trial = 0; trial < 20; ++trial) {
    auto m = testkit::random_market(rng, 3, 3, 0.5);
    const Vec ps = equilibrium_solve(m).prices;
    const double f = 0.2, d = demand_bound_from_f(m.elasticity(), f);
    for (int k = 0; k < 50; ++k) {
      Vec p = ps;
      for (int i = 0; i < 3; ++i) p[i] *= std::exp(f * u(rng));
      Vec x = eval_demand(m, p);
      for (int i = 0; i < 3; ++i) CHECK(x[i] <= d * m.supplies[i] * (1 + 1e-9));
    }
  }
}

TEST_CASE("misspending is at least the shortfall of the most underpriced good") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.2, 1.0);
  for (int trial = 0; trial < 50; ++trial) {
    auto m = testkit::random_market(rng, 3, 3, trial % 2 ? 0.4 : -1.0);
    const Vec ps = equilibrium_solve(m).prices;
    Vec p = ps;
    for (int i = 0; i < 3; ++i) p[i] *= u(rng);
    int i = 0;
    for (int k = 1; k < 3; ++k)
      if (ps[k] / p[k] > ps[i] / p[i]) i = k;
    const Vec x = eval_demand(m, p);
    const double S = (x - m.supplies).cwiseAbs().dot(p);
    CHECK(S >= m.supplies[i] * (ps[i] - p[i]) * (1 - 1e-9));
  }
}

TEST_CASE("zones") {
  CHECK(zone_of(4.5, 4, 8) == 1);
  CHECK(zone_of(3.5, 4, 8) == -1);
  CHECK(zone_of(5.5, 4, 8) == 2);
  CHECK(zone_of(6.5, 4, 8) == 3);
  CHECK(zone_of(0.5, 4, 8) == -4);
  CHECK(zone_of(8.5, 4, 8) == 5);
  CHECK(zone_of(-0.1, 4, 8) == -5);
  CHECK(zone_name(-2) == "low-inner");
  CHECK(zone_name(4) == "high-outer");
  CHECK(zone_name(0) == "invalid");
}

TEST_CASE("day bound matches the formula") {
  auto c = preset(Preset::warehouse_results);
  const double la = c.lambda * c.alpha1;
  const double expect = 16 * (1 + c.alpha2) / la * std::log(10.0 / ((1 - la) / 2 * 1.0));
  CHECK(plan_day_bound(c, 10.0, 1.0) == doctest::Approx(expect).epsilon(1e-14));
  CHECK(plan_day_bound(c, 1e-6, 1.0) == 0.0);
}

TEST_CASE("warehouse plan") {
  auto c = preset(Preset::fast_results);
  c.lambda = 0.001;
  c.kappa = 0.01;
  const Vec w = vec({2, 5});
  auto p = warehouse_plan(c, 0.0, 5.0, 1.0, 1.0, w);
  REQUIRE(p.feasible);
  // With f = 0 only the 8 lambda / alpha4 term is left: u = 8 lambda / (kappa u).
  CHECK(p.u == doctest::Approx(std::sqrt(8 * c.lambda / c.kappa)).epsilon(1e-9));
  CHECK(p.D == 0.0);
  CHECK(p.capacity[0] / w[0] == doctest::Approx(p.capacity[1] / w[1]));
  CHECK(p.s_star[1] == doctest::Approx(p.capacity[1] / 2));
  CHECK(p.zone_width(0) == doctest::Approx(p.capacity[0] / 8));
  CHECK(p.alpha4 == doctest::Approx(c.kappa * p.capacity[0] / (8 * w[0])));

  // The lower bound on alpha4 binds for the preset.
  auto fp = warehouse_plan(preset(Preset::fast_results), 0.0, 5.0, 1.0, 1.0, w);
  CHECK(fp.feasible);
  CHECK(fp.alpha4 == doctest::Approx(fp.alpha4_min));

  // At lambda = 1/20, lambda (1 + 1/alpha4) <= 1/2 needs alpha4 >= 1/9, above 1/12.
  auto wc = preset(Preset::warehouse_results);
  auto none = warehouse_plan(wc, 0.05, demand_bound_from_f(1.0, 0.05), 0.6, 1.0, w);
  CHECK_FALSE(none.feasible);
  CHECK(none.alpha4_min == doctest::Approx(1.0 / 9));

  wc.lambda = 1.0 / 40;
  wc.kappa = wc.lambda * wc.alpha1 / 10;
  // phi_init = 0.6 gives D near 4710 days; (d - 1) D then sets u.
  auto wp = warehouse_plan(wc, 0.05, demand_bound_from_f(1.0, 0.05), 0.6, 1.0, w);
  CHECK(wp.feasible);
  CHECK(wp.D == doctest::Approx(plan_day_bound(wc, 0.6, 1.0)));
  CHECK(wp.u == doctest::Approx((wp.d - 1) * wp.D).epsilon(1e-9));
  const double a4 = wp.alpha4;
  CHECK(wp.u >= (2 * (1 + 4 / a4) * wp.f / wc.lambda + 8 * wc.lambda / a4) * (1 - 1e-9));
  CHECK(a4 >= wp.alpha4_min);

  // A larger start needs warehouses so big that alpha4 passes 1/12.
  auto far = warehouse_plan(wc, 0.05, demand_bound_from_f(1.0, 0.05), 4.0, 1.0, w);
  CHECK_FALSE(far.feasible);
  CHECK(far.alpha4 > 1.0 / 12);

  auto bad = wc;
  bad.kappa = 0.0;
  CHECK_FALSE(warehouse_plan(bad, 0.0, 2.0, 1.0, 1.0, w).feasible);
  auto fat = wc;
  fat.kappa = 1.0;
  fat.lambda = 0.45;
  auto fr = warehouse_plan(fat, 0.0, 2.0, 1.0, 1.0, w);
  CHECK_FALSE(fr.feasible);
  CHECK_FALSE(fr.reason.empty());
}
