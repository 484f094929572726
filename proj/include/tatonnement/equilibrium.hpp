#pragma once

#include "tatonnement/market.hpp"
#include "tatonnement/protocol.hpp"

#include <optional>
#include <string>

namespace tat {

struct EquilibriumResult {
  Vec prices;
  double residual = 0.0;  // max_i |x_i - w_i| / w_i
  long iterations = 0;
};

struct SolverError : std::runtime_error {
  SolverError(const std::string& what, EquilibriumResult best)
      : std::runtime_error(what), best(std::move(best)) {}
  EquilibriumResult best;
};

constexpr double kSolverTol = 1e-10;
constexpr long kSolverCap = 1000000;

EquilibriumResult equilibrium_solve(const MarketSpec& spec,
                                    const std::optional<Vec>& supplies = std::nullopt,
                                    double tol = kSolverTol);

struct FlexReport {
  double c = 1.0;
  Vec p_star;
  Vec p_c;      // equilibrium for supplies c w (the low prices)
  Vec p_inv_c;  // equilibrium for supplies w / c (the high prices)
  double e = 0.0;
  double r_c = 1.0;      // max_i p*_i / p^(c)_i
  double r_inv_c = 1.0;  // max_i p^(1/c)_i / p*_i
  double rho = 1.0;      // max_{i,j} w_i p*_i / (w_j p*_j)
};

FlexReport equilibrium_flex(const MarketSpec& spec, double c, double tol = kSolverTol);
// e(c) <= ln[c (rho n)^(c-1)]
bool check_flex_bound(const FlexReport& r, int n, double tol = 1e-9);
double flex_bound(const FlexReport& r, int n);

// e^(2 E f): demand multiplier guaranteed once prices stay within p* e^(+-f).
double demand_bound_from_f(double E, double f);

// Zone index of a stock: sign gives the side of s*, magnitude 1..4 is safe,
// inner, middle, outer; 5 means outside [0, c].
int zone_of(double s, double s_star, double capacity);
std::string zone_name(int zone);

struct WarehousePlan {
  bool feasible = false;
  std::string reason;
  bool fast = false;
  Vec capacity;
  Vec s_star;
  double u = 0.0;        // c_i / (8 w_i), common to all goods
  double alpha4 = 0.0;   // kappa u
  double D = 0.0;        // days until demands are 2-bounded
  double f = 0.0;
  double d = 0.0;
  double kappa = 0.0;
  double settling_days = 0.0;
  double alpha4_min = 0.0;  // from lambda (1 + 1/alpha4) <= 1/2
  double alpha4_max = 0.0;  // from |w_tilde - w| <= w/3 at empty or full
  // Zone boundaries relative to s*, in units of c/8.
  double zone_width(int good) const { return capacity[good] / 8.0; }
};

// D = 16(1 + alpha2)/(lambda alpha1) log(phi_init / ((1 - lambda alpha1)/2 min_i w_i p*_i)), >= 0.
double plan_day_bound(const ProtocolConfig& cfg, double phi_init, double min_wp);

WarehousePlan warehouse_plan(const ProtocolConfig& cfg, double f, double d, double phi_init,
                             double min_wp, const Vec& supplies);

}  // namespace tat
