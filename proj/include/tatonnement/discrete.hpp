#pragma once

#include "tatonnement/engine.hpp"
#include "tatonnement/market.hpp"
#include "tatonnement/protocol.hpp"
#include "tatonnement/schedule.hpp"

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tat {

using IVec = std::vector<std::int64_t>;

constexpr std::size_t kMaxGridCells = 1000000;

struct DiscreteConstructionError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rectangular integer price grid, good 0 varying fastest.
struct PriceGrid {
  IVec lo;
  IVec hi;

  PriceGrid() = default;
  PriceGrid(IVec lo_, IVec hi_);

  int n() const { return static_cast<int>(lo.size()); }
  std::size_t cells() const { return cells_; }
  std::size_t stride(int i) const { return stride_[i]; }
  std::int64_t extent(int i) const { return hi[i] - lo[i] + 1; }
  std::size_t index(const IVec& p) const;
  IVec prices(std::size_t cell) const;
  std::int64_t price(std::size_t cell, int i) const;

 private:
  std::vector<std::size_t> stride_;
  std::size_t cells_ = 0;
};

struct DiscreteDemandTable {
  PriceGrid grid;
  std::vector<std::int64_t> x;  // x[cell * n + i]
  double E = 1.0;
  double money = 0.0;           // 0 disables the budget check
  bool repaired = false;        // the largest-remainder repair was kept
  bool repair_reverted = false; // the repair broke Discrete WGS; plain floor kept

  int n() const { return grid.n(); }
  std::int64_t at(std::size_t cell, int i) const { return x[cell * grid.n() + i]; }
};

// Validates shape and nonnegativity.  Does not check Discrete WGS.
DiscreteDemandTable make_table(PriceGrid grid, std::vector<std::int64_t> x, double E,
                               double money = 0.0);

struct DiscreteWgsViolation {
  int good = 0;        // good whose price is lowered
  int affected = -1;   // other good whose demand rose, or -1 for the spending rule
  IVec from;           // higher price vector
  IVec to;             // lowered price vector
  double before = 0.0;
  double after = 0.0;
  std::string describe() const;
};

// Exhaustive check on the grid.  Other goods' demand is checked for unit
// decreases (the rule is transitive); the spending rule for every decrease.
// With a positive money field, also reports cells where spending exceeds it.
std::vector<DiscreteWgsViolation> discrete_wgs_violations(const DiscreteDemandTable& t,
                                                          std::size_t limit = 64);

// Smallest E for which the floor/ceil sandwich holds on every own-price line,
// over points with x >= 1.  Returns 0 when no line constrains E.
double minimal_sandwich_elasticity(const DiscreteDemandTable& t);
// Direct check of the sandwich with the given E over points with x >= 1.
long sandwich_violations(const DiscreteDemandTable& t, double E);

struct DiscretizeOptions {
  bool repair = true;
};

// Floor of the continuous aggregate demand at every grid point, followed by a
// largest-remainder repair that spends leftover money.  The repair is reverted
// if it breaks Discrete WGS.  E is the larger of the family's elasticity and
// the minimal sandwich elasticity of the table.
DiscreteDemandTable discretize_market(const MarketSpec& spec, const PriceGrid& grid,
                                      DiscretizeOptions opt = {});

struct InterpolatedRun {
  int good = 0;
  IVec slice;          // prices of the other goods; own entry holds lo
  std::int64_t h = 0;  // interpolation anchors; interior points lie in (h, k)
  std::int64_t k = 0;
  double c = 0.0;
};

struct VirtualDemandTable {
  PriceGrid grid;
  std::vector<double> y;        // y[cell * n + i]; NaN where undefined
  std::vector<double> m_prime;  // virtual spending on the own-price line, before the closure
  std::vector<InterpolatedRun> runs;
  long undefined_points = 0;

  int n() const { return grid.n(); }
  double at(std::size_t cell, int i) const { return y[cell * grid.n() + i]; }
};

VirtualDemandTable build_virtual_demands(const DiscreteDemandTable& table);

struct LemmaCheck {
  long checked = 0;
  long violations = 0;
  std::string first;
  bool ok() const { return violations == 0; }
};

struct VirtualLemmaReport {
  LemmaCheck within_one;         // x - 1 < y <= x
  LemmaCheck spending_monotone;  // j y(j) non-increasing in own price
  LemmaCheck wgs;                // y_i non-decreasing in other prices
  LemmaCheck elasticity;         // y(p) <= y(p + d)(1 + d/p)^{2E}
  bool ok() const {
    return within_one.ok() && spending_monotone.ok() && wgs.ok() && elasticity.ok();
  }
};

// Exhaustive on the grid.  The elasticity check uses every d on lines of at
// most full_d_line points and d = 1 otherwise (the unit steps compose).
VirtualLemmaReport check_virtual_lemmas(const DiscreteDemandTable& x, const VirtualDemandTable& y,
                                        std::int64_t full_d_line = 400);

void write_table_csv(std::ostream& out, const DiscreteDemandTable& x, const VirtualDemandTable& y);

struct IndivisibilityParams {
  double r = 0.0;  // M / sum_i w_i
  double s = 0.0;  // min_i w_i
};
// Throws DomainError unless every supply is a positive integer.
IndivisibilityParams indivisibility(const MarketSpec& spec);
MarketFacts market_facts(const MarketSpec& spec);

struct DiscretePlan {
  IVec p0;
  Vec s_star;
  IVec stock0;  // defaults to round(s_star)
  ScheduleSpec schedule;
  bool keep_events = false;
  std::ostream* csv = nullptr;
};

struct DiscreteDay {
  double t = 0.0;
  double phi = 0.0;
  double S = 0.0;
  bool above_threshold = false;
};

struct DiscreteRunResult {
  std::vector<DiscreteDay> days;
  std::vector<EventRecord> events;
  IVec final_prices;
  IVec final_stocks;
  long updates = 0;
  long price_changes = 0;
  long null_updates = 0;
  long null_rule_mismatches = 0;    // null iff |z| < 2(1 + kappa) or the truncated step is 0
  long non_integer_stocks = 0;
  double max_stock_gap = 0.0;       // max |s^A - s^I| at event times
  double phi_threshold = 0.0;
  long days_above_threshold = 0;
  long contraction_failures = 0;    // days above threshold without the stated factor
  double max_ratio_above_threshold = 0.0;
  double max_ratio = 0.0;

  std::vector<double> daily_ratios() const;
};

// Ongoing market with integer prices.  The ideal rate is the continuous family
// at the current integer prices; it also serves as the virtual demand in the
// potential.  Sales are the floor of cumulative ideal demand and supply arrives
// as the floor of w t, so stocks stay integral.
DiscreteRunResult run_discrete(const MarketSpec& spec, const ProtocolConfig& cfg,
                               const DiscretePlan& plan, double horizon_days);

struct LowerBoundPoint {
  std::int64_t p = 0;
  double x = 0.0;
  double misspending = 0.0;
};

struct LowerBoundResult {
  MarketSpec spec;        // goods: {item, money}; money trades at price 1
  double E = 0.0;
  double r = 0.0;
  double M = 0.0;
  double p_ref = 0.0;     // r + 1/2, where the item market clears
  std::vector<LowerBoundPoint> sweep;
  double min_misspending = 0.0;
  std::int64_t argmin_price = 0;
  double beta = 0.0;      // min_misspending r / (E M)
  bool certificate_ok = false;
};

// One CES buyer over an item and money.  The item's supply is M/(2r+1), which
// the buyer spends M/2 on at price r + 1/2.  Sweeps integer prices in
// [max(1, r - window), r + 1 + window]; window defaults to r.
LowerBoundResult lower_bound_market(double E, double r, double M,
                                    std::optional<std::int64_t> window = std::nullopt);

}  // namespace tat
