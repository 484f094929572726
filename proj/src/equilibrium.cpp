#include "tatonnement/equilibrium.hpp"

#include <algorithm>
#include <cmath>

namespace tat {

namespace {

double residual_of(const Vec& x, const Vec& w) {
  return ((x - w).array().abs() / w.array()).maxCoeff();
}

bool all_cobb_douglas(const MarketSpec& spec) {
  return std::all_of(spec.buyers.begin(), spec.buyers.end(),
                     [](const BuyerSpec& b) { return b.sigma() == 1.0; });
}

}  // namespace

EquilibriumResult equilibrium_solve(const MarketSpec& spec, const std::optional<Vec>& supplies,
                                    double tol) {
  if (!(tol > 0.0)) throw DomainError("solver tolerance must be positive");
  const Vec w = supplies ? *supplies : spec.supplies;
  if (w.size() != spec.n() || !(w.array() > 0.0).all())
    throw DomainError("supplies override must be positive, one per good");

  EquilibriumResult r;
  if (all_cobb_douglas(spec)) {
    // Spending on each good does not depend on prices.
    r.prices = eval_spending(spec, Vec::Ones(spec.n())).cwiseQuotient(w);
    r.residual = residual_of(eval_demand(spec, r.prices), w);
    return r;
  }

  const double step = std::min(0.1 / spec.elasticity(), 0.05);
  Vec p = eval_spending(spec, Vec::Ones(spec.n())).cwiseQuotient(w);
  EquilibriumResult best{p, residual_of(eval_demand(spec, p), w), 0};
  for (long it = 1; it <= kSolverCap; ++it) {
    const Vec x = eval_demand(spec, p);
    const double res = residual_of(x, w);
    if (res < best.residual) best = {p, res, it - 1};
    if (res <= tol) return {p, res, it - 1};
    const Vec rel = ((x - w).array() / w.array()).min(1.0).matrix();
    p = p.cwiseProduct((Vec::Ones(p.size()) + step * rel));
  }
  throw SolverError("equilibrium solver did not converge", best);
}

FlexReport equilibrium_flex(const MarketSpec& spec, double c, double tol) {
  if (!(c >= 1.0)) throw DomainError("flex needs c >= 1");
  FlexReport r;
  r.c = c;
  r.p_star = equilibrium_solve(spec, spec.supplies, tol).prices;
  r.p_c = equilibrium_solve(spec, Vec(spec.supplies * c), tol).prices;
  r.p_inv_c = equilibrium_solve(spec, Vec(spec.supplies / c), tol).prices;
  r.r_c = r.p_star.cwiseQuotient(r.p_c).maxCoeff();
  r.r_inv_c = r.p_inv_c.cwiseQuotient(r.p_star).maxCoeff();
  r.e = std::log(std::max(r.r_c, r.r_inv_c));
  const Vec wp = spec.supplies.cwiseProduct(r.p_star);
  r.rho = wp.maxCoeff() / wp.minCoeff();
  return r;
}

double flex_bound(const FlexReport& r, int n) {
  return std::log(r.c) + (r.c - 1.0) * std::log(r.rho * n);
}

bool check_flex_bound(const FlexReport& r, int n, double tol) {
  return r.e <= flex_bound(r, n) + tol;
}

double demand_bound_from_f(double E, double f) {
  if (E < 1.0 || f < 0.0) throw DomainError("need E >= 1 and f >= 0");
  return std::exp(2.0 * E * f);
}

int zone_of(double s, double s_star, double capacity) {
  const double delta = s - s_star;
  const double a = std::abs(delta) / (capacity / 8.0);
  int z = 5;
  if (s >= 0.0 && s <= capacity) z = a <= 1.0 ? 1 : a <= 2.0 ? 2 : a <= 3.0 ? 3 : a <= 4.0 ? 4 : 5;
  return delta < 0.0 ? -z : z;
}

std::string zone_name(int zone) {
  static const char* names[] = {"", "safe", "inner", "middle", "outer", "breach"};
  const int a = std::abs(zone);
  if (a < 1 || a > 5) return "invalid";
  return std::string(zone < 0 ? "low-" : "high-") + names[a];
}

double plan_day_bound(const ProtocolConfig& cfg, double phi_init, double min_wp) {
  const double la = cfg.lambda * cfg.alpha1;
  const double arg = phi_init / ((1.0 - la) / 2.0 * min_wp);
  return std::max(0.0, 16.0 * (1.0 + cfg.alpha2) / la * std::log(arg));
}

WarehousePlan warehouse_plan(const ProtocolConfig& cfg, double f, double d, double phi_init,
                             double min_wp, const Vec& supplies) {
  WarehousePlan plan;
  plan.fast = cfg.fast_updates;
  plan.f = f;
  plan.d = d;
  plan.kappa = cfg.kappa;
  if (!(cfg.kappa > 0.0)) {
    plan.reason = "kappa must be positive to size warehouses";
    return plan;
  }
  if (!(cfg.lambda > 0.0 && cfg.lambda < 0.5)) {
    plan.reason = "lambda must lie in (0, 1/2)";
    return plan;
  }
  const double lam = cfg.lambda;
  const double kap = cfg.kappa;
  plan.alpha4_min = lam / (0.5 - lam);
  plan.alpha4_max = 1.0 / 12.0;
  plan.D = plan.fast ? 0.0 : plan_day_bound(cfg, phi_init, min_wp);

  auto need = [&](double u) {
    const double a4 = kap * u;
    const double drift = 2.0 * (1.0 + 4.0 / a4) * f / lam + 8.0 * lam / a4;
    return plan.fast ? drift : std::max((d - 1.0) * plan.D, drift);
  };
  auto gap = [&](double u) { return u - need(u); };

  double lo = plan.alpha4_min / kap;
  double u = lo;
  if (gap(lo) < 0.0) {
    double hi = 2.0 * lo;
    while (gap(hi) < 0.0) hi *= 2.0;
    for (int i = 0; i < 60; ++i) {
      const double mid = 0.5 * (lo + hi);
      (gap(mid) >= 0.0 ? hi : lo) = mid;
    }
    u = hi;
  }
  plan.u = u;
  plan.alpha4 = kap * u;
  plan.capacity = 8.0 * u * supplies;
  plan.s_star = plan.capacity / 2.0;
  plan.settling_days = plan.D + 2.0 * (1.0 + 4.0 / plan.alpha4) * f / lam +
                       8.0 * lam / plan.alpha4 + 8.0 / kap;
  if (plan.alpha4 > plan.alpha4_max * (1.0 + 1e-12)) {
    plan.reason = "alpha4 = " + std::to_string(plan.alpha4) +
                  " exceeds 1/12, so a full or empty warehouse breaks |w_tilde - w| <= w/3";
    return plan;
  }
  plan.feasible = true;
  return plan;
}

}  // namespace tat
