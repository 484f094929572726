#include "support.hpp"
#include "tatonnement/market.hpp"
#include "tatonnement/protocol.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace tat;

TEST_CASE("update_price") {
  CHECK(update_price(2.0, 1.0, 1.0, 0.25) == 2.0);
  CHECK(update_price(1.0, 5.0, 1.0, 0.1) == doctest::Approx(1.1).epsilon(1e-15));
  CHECK(update_price(2.0, 0.5, 1.0, 0.25) == doctest::Approx(1.75).epsilon(1e-15));
  CHECK(update_price(3.0, 0.0, 2.0, 0.5) == doctest::Approx(1.5));
  CHECK_THROWS_AS(update_price(1.0, 1.0, 0.0, 0.1), DomainError);
}

TEST_CASE("update_price is monotone in demand and moves at most lambda p") {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const double p = 0.01 + 100 * u(rng), w = 0.1 + 10 * u(rng), lam = 0.5 * u(rng);
    const double x1 = 5 * w * u(rng), x2 = x1 + w * u(rng);
    const double a = update_price(p, x1, w, lam), b = update_price(p, x2, w, lam);
    CHECK(a <= b);
    CHECK(std::abs(a - p) <= lam * p * (1 + 1e-12));
  }
}

TEST_CASE("update_price_median") {
  CHECK(update_price_median(1.0, -3.0, 1.0, 0.1) == doctest::Approx(0.9).epsilon(1e-15));
  CHECK(update_price_median(7.0, 0.0, 2.0, 0.3) == 7.0);
  CHECK(update_price_median(2.0, 1.0, 2.0, 0.1) == doctest::Approx(2.1).epsilon(1e-15));
  CHECK(update_price_median(2.0, 100.0, 2.0, 0.1) == doctest::Approx(2.2).epsilon(1e-15));
}

TEST_CASE("median rule with no warehouse term equals the basic rule") {
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 2000; ++k) {
    const double p = 0.01 + 100 * u(rng), w = 0.1 + 10 * u(rng), lam = 0.5 * u(rng);
    const double xbar = 4 * w * u(rng);
    CHECK(update_price_median(p, xbar - w, w, lam) == update_price(p, xbar, w, lam));
  }
}

TEST_CASE("target demand") {
  CHECK(target_demand(5.0, 0.01, 3.0, 3.0).w_tilde == 5.0);
  CHECK_FALSE(target_demand(5.0, 0.01, 3.0, 3.0).constraint_violated);

  // A full warehouse raises the target, so prices fall and stock drains.
  auto t = target_demand(5.0, 0.01, 10.0, 0.0);
  CHECK(t.w_tilde == doctest::Approx(5.1).epsilon(1e-15));
  CHECK_FALSE(t.constraint_violated);

  auto v = target_demand(3.0, 0.5, 4.0, 0.0);
  CHECK(v.w_tilde == doctest::Approx(5.0));
  CHECK(v.constraint_violated);
  CHECK(target_demand(3.0, 0.5, -4.0, 0.0).w_tilde == doctest::Approx(1.0));
  CHECK(target_demand(3.0, 0.5, -4.0, 0.0).constraint_violated);
  CHECK_FALSE(target_demand(3.0, 0.5, 2.0, 0.0).constraint_violated);
  CHECK_THROWS_AS(target_demand(0.0, 0.5, 2.0, 0.0), DomainError);
}

TEST_CASE("discrete update") {
  CHECK(min_discrete_price(0.1) == 10);
  CHECK(min_discrete_price(1.0 / 20) == 20);
  CHECK(min_discrete_price(0.3) == 4);

  auto up = discrete_update(100, 50.0, 10.0, 0.1);
  CHECK(up.price == 110);
  CHECK_FALSE(up.null_update);

  // Step 0.65 truncates to zero.
  auto a = discrete_update(13, 5.0, 10.0, 0.1);
  CHECK(a.price == 13);
  CHECK(a.null_update);
  // Below the 2(1 + kappa) threshold.
  auto b = discrete_update(1000, 1.9, 1.0, 0.1);
  CHECK(b.price == 1000);
  CHECK(b.null_update);
  CHECK(discrete_update(1000, 2.5, 1.0, 0.1, 0.3).null_update);
  CHECK_FALSE(discrete_update(1000, 2.7, 1.0, 0.1, 0.3).null_update);

  auto floor = discrete_update(10, -1e6, 5.0, 0.1);
  CHECK(floor.price == 10);
  // Clamped at the floor.
  CHECK(discrete_update(11, -100.0, 5.0, 0.1).price == 10);
  CHECK(discrete_update(25, -100.0, 5.0, 0.1).price == 23);
  CHECK_THROWS_AS(discrete_update(9, 10.0, 5.0, 0.1), DomainError);
}

TEST_CASE("discrete update truncation loses less than half") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_int_distribution<std::int64_t> pr(20, 5000);
  for (int k = 0; k < 5000; ++k) {
    const double lam = 0.05, w = 20.0, kap = 0.01;
    const std::int64_t p = pr(rng);
    const double z = 40.0 * u(rng);
    auto r = discrete_update(p, z, w, lam, kap);
    CHECK(r.price >= min_discrete_price(lam));
    const double ideal = p * lam * std::clamp(z / w, -1.0, 1.0);
    const double got = static_cast<double>(r.price - p);
    CHECK(std::abs(got) <= std::abs(ideal) + 1e-9);
    const bool floored = p + static_cast<std::int64_t>(std::trunc(ideal)) < min_discrete_price(lam);
    if (std::abs(ideal) >= 2.0 && std::abs(z) >= 2 * (1 + kap) && !floored)
      CHECK(std::abs(got) >= 0.5 * std::abs(ideal));
    CHECK(r.null_update == (r.price == p));
  }
}

TEST_CASE("validate_params") {
  auto w = preset(Preset::warehouse_results);
  CHECK(w.lambda == doctest::Approx(0.05));
  CHECK(w.kappa == doctest::Approx(0.05 / 16 / 10));
  auto rep = validate_params(w, Mode::warehouse);
  CHECK(rep.ok());
  CHECK(validate_stated_params(w, Mode::warehouse).ok());
  CHECK(rep.find("kappa-vs-decay") != nullptr);

  ProtocolConfig s;
  s.lambda = 0.3;
  s.E = 2.0;
  auto sr = validate_params(s, Mode::sync);
  CHECK_FALSE(sr.ok());
  const Constraint* c = sr.find("sync-step");
  REQUIRE(c != nullptr);
  CHECK_FALSE(c->ok);
  CHECK(c->lhs == doctest::Approx(0.9));
  CHECK(c->rhs == 0.5);

  auto k = w;
  k.kappa = k.lambda * k.alpha1;
  auto kr = validate_params(k, Mode::warehouse);
  REQUIRE(kr.find("kappa-vs-decay") != nullptr);
  CHECK_FALSE(kr.find("kappa-vs-decay")->ok);
  CHECK(kr.find("kappa-vs-decay")->lhs == doctest::Approx(10 * k.kappa));
}

TEST_CASE("every preset passes its own validation") {
  for (Preset p : {Preset::sync_basic, Preset::async_basic, Preset::warehouse_results,
                   Preset::fast_results, Preset::noisy_i_basic, Preset::noisy_ii_basic}) {
    const auto cfg = preset(p);
    const Mode m = preset_mode(p);
    INFO(to_string(m));
    auto r = validate_params(cfg, m);
    for (const auto& c : r.constraints) {
      INFO(c.id);
      CHECK(c.ok);
    }
    CHECK(validate_stated_params(cfg, m).ok());
  }
  // Discrete needs market facts for the supply constraints.
  const auto d = preset(Preset::discrete_basic);
  CHECK_FALSE(validate_params(d, Mode::discrete).ok());
  MarketFacts f{2000.0, 2000.0, 1.0e7};
  CHECK(validate_params(d, Mode::discrete, f).ok());
  f.min_supply = 5.0;
  CHECK_FALSE(validate_params(d, Mode::discrete, f).ok());
}

TEST_CASE("reports are deterministic and list each constraint once") {
  const auto cfg = preset(Preset::fast_results);
  auto a = validate_params(cfg, Mode::fast), b = validate_params(cfg, Mode::fast);
  REQUIRE(a.constraints.size() == b.constraints.size());
  for (std::size_t i = 0; i < a.constraints.size(); ++i) {
    CHECK(a.constraints[i].id == b.constraints[i].id);
    CHECK(a.constraints[i].lhs == b.constraints[i].lhs);
    for (std::size_t j = i + 1; j < a.constraints.size(); ++j)
      CHECK(a.constraints[i].id != a.constraints[j].id);
  }
}

TEST_CASE("same-side property for single goods") {
  std::mt19937_64 rng(8);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int k = 0; k < 500; ++k) {
    const double rho = k % 2 ? 0.0 : 0.9 * u(rng);
    auto m = make_market(testkit::vec({1.0 + u(rng)}),
                         {BuyerSpec::ces(rho, testkit::vec({1.0}), 1.0 + 10 * u(rng))});
    const double E = m.elasticity();
    const double lam = 1.0 / (2.0 * E) * (0.2 + 0.8 * u(rng));
    const double w = m.supplies[0];
    double p = 0.05 + 20 * u(rng);
    for (int it = 0; it < 20; ++it) {
      const double x = eval_demand(m, testkit::vec({p}))[0];
      const double q = update_price(p, x, w, lam);
      const double y = eval_demand(m, testkit::vec({q}))[0];
      const double rel = (y - w) / w;
      if (std::abs(rel) > 1e-12) CHECK((x - w) * (y - w) > 0.0);
      p = q;
    }
  }
}

TEST_CASE("mode and preset names") {
  for (Mode m : {Mode::sync, Mode::async, Mode::warehouse, Mode::fast, Mode::noisy_i,
                 Mode::noisy_ii, Mode::discrete})
    CHECK(mode_from_string(to_string(m)) == m);
  CHECK_THROWS(mode_from_string("bogus"));
  CHECK(preset_from_string("fast") == Preset::fast_results);
  CHECK_FALSE(preset_from_string("nope").has_value());
  CHECK(noise_mode_from_string("known_rho") == NoiseMode::known_rho);
}
