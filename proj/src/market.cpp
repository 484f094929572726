#include "tatonnement/market.hpp"

#include <algorithm>
#include <cmath>

namespace tat {

BuyerSpec BuyerSpec::cobb_douglas(Vec weights, double money) {
  BuyerSpec b;
  b.family = UtilityFamily::cobb_douglas;
  b.weights = std::move(weights);
  b.money = money;
  return b;
}

BuyerSpec BuyerSpec::ces(double rho, Vec weights, double money) {
  BuyerSpec b;
  b.family = UtilityFamily::ces;
  b.rho = rho;
  b.weights = std::move(weights);
  b.money = money;
  return b;
}

double BuyerSpec::sigma() const {
  return family == UtilityFamily::ces ? 1.0 / (1.0 - rho) : 1.0;
}

double MarketSpec::elasticity() const {
  double e = 1.0;
  for (const auto& b : buyers) e = std::max(e, b.sigma());
  return e;
}

void validate(const MarketSpec& spec) {
  const int n = spec.n();
  if (n < 1) throw DomainError("market needs at least one good");
  if (!(spec.supplies.array() > 0.0).all()) throw DomainError("supplies must be positive");
  if (spec.buyers.empty()) throw DomainError("market needs at least one buyer");
  if (static_cast<int>(spec.names.size()) != n) throw DomainError("one name per good");
  double total = 0.0;
  for (const auto& b : spec.buyers) {
    if (b.weights.size() != n) throw DomainError("buyer weights must have one entry per good");
    if (!(b.weights.array() > 0.0).all()) throw DomainError("buyer weights must be positive");
    if (!(b.money > 0.0)) throw DomainError("buyer money must be positive");
    if (b.family == UtilityFamily::ces && !(b.rho >= 0.0 && b.rho < 1.0))
      throw DomainError("ces rho must lie in [0, 1)");
    total += b.money;
  }
  if (total != spec.money_supply) throw DomainError("money supply must equal total buyer money");
}

MarketSpec make_market(Vec supplies, std::vector<BuyerSpec> buyers,
                       std::vector<std::string> names) {
  MarketSpec spec;
  spec.supplies = std::move(supplies);
  spec.buyers = std::move(buyers);
  if (names.empty())
    for (int i = 0; i < spec.n(); ++i) names.push_back("good" + std::to_string(i));
  spec.names = std::move(names);
  spec.money_supply = 0.0;
  for (const auto& b : spec.buyers) spec.money_supply += b.money;
  validate(spec);
  return spec;
}

namespace {

// Spending of one buyer; shares a_i^s p_i^(1-s) / sum_k a_k^s p_k^(1-s).
void add_buyer_spending(const BuyerSpec& b, const Vec& p, double scale, Vec& out) {
  const double s = b.sigma();
  if (s == 1.0) {
    out += (b.money * scale / b.weights.sum()) * b.weights;
    return;
  }
  const Vec terms =
      (s * b.weights.array().log() + (1.0 - s) * p.array().log()).exp().matrix();
  out += (b.money * scale / terms.sum()) * terms;
}

void check_prices(const MarketSpec& spec, const Vec& p) {
  if (p.size() != spec.n()) throw DomainError("price vector has wrong length");
  if (!(p.array() > 0.0).all()) throw DomainError("prices must be strictly positive");
}

}  // namespace

Vec eval_spending(const MarketSpec& spec, const Vec& prices) {
  check_prices(spec, prices);
  Vec m = Vec::Zero(spec.n());
  for (const auto& b : spec.buyers) add_buyer_spending(b, prices, 1.0, m);
  return m;
}

Vec eval_demand(const MarketSpec& spec, const Vec& prices, double money_scale) {
  check_prices(spec, prices);
  Vec m = Vec::Zero(spec.n());
  for (const auto& b : spec.buyers) add_buyer_spending(b, prices, money_scale, m);
  return m.cwiseQuotient(prices);
}

DemandEvaluator make_evaluator(const MarketSpec& spec) {
  DemandEvaluator d;
  d.n = spec.n();
  d.E = spec.elasticity();
  d.E_wealth = 0.0;  // demand is linear in money for both families
  d.fn = [spec](const Vec& p, double scale) { return eval_demand(spec, p, scale); };
  return d;
}

DemandEvaluator make_evaluator(DemandFn fn, int n, double E, double E_wealth) {
  if (E < 1.0) throw DomainError("declared elasticity must be >= 1");
  if (E_wealth < 0.0) throw DomainError("declared wealth elasticity must be >= 0");
  DemandEvaluator d;
  d.fn = std::move(fn);
  d.n = n;
  d.E = E;
  d.E_wealth = E_wealth;
  return d;
}

ElasticityEstimate elasticity_probe(const DemandEvaluator& d, const Vec& prices, int good,
                                    double h, double tol) {
  if (!(prices.array() > 0.0).all()) throw DomainError("prices must be strictly positive");
  Vec up = prices, dn = prices;
  up[good] *= 1.0 + h;
  dn[good] *= 1.0 - h;
  const double x0 = d(prices)[good];
  const double xu = d(up)[good];
  const double xd = d(dn)[good];
  if (!(x0 > 0.0 && xu > 0.0 && xd > 0.0))
    throw ProbeError("demand is not positive at the probe point");
  ElasticityEstimate e;
  e.estimate = -(xu - xd) / (2.0 * h) / x0;
  const double fwd = -(xu - x0) / h / x0;
  const double bwd = -(x0 - xd) / h / x0;
  e.lo = std::min({e.estimate, fwd, bwd});
  e.hi = std::max({e.estimate, fwd, bwd});
  e.ok = e.estimate >= 1.0 - tol && e.estimate <= d.E + tol;
  return e;
}

WgsReport wgs_probe(const DemandEvaluator& d, const Vec& prices, int good, double delta,
                    double rel_tol) {
  if (!(delta > 0.0)) throw DomainError("wgs probe step must be positive");
  Vec raised = prices;
  raised[good] += delta;
  const Vec before = d(prices);
  const Vec after = d(raised);
  WgsReport r;
  r.change.assign(before.size(), 0.0);
  for (int j = 0; j < before.size(); ++j) {
    if (j == good) continue;
    r.change[j] = after[j] - before[j];
    if (after[j] < before[j] * (1.0 - rel_tol)) r.violations.push_back({j, before[j], after[j]});
  }
  return r;
}

WealthEstimate wealth_elasticity_probe(const DemandEvaluator& d, const Vec& prices, double h,
                                       double tol) {
  const Vec x0 = d(prices);
  const Vec xu = d.at_money(prices, 1.0 + h);
  const Vec xd = d.at_money(prices, 1.0 - h);
  WealthEstimate w;
  w.xi = ((xu - xd).array() / (2.0 * h * x0.array())).matrix();
  w.ok = (w.xi.array() >= -d.E_wealth - tol).all();
  return w;
}

bool own_spending_monotone_check(const DemandEvaluator& d, const Vec& prices, int good,
                                 double factor, double rel_tol) {
  if (!(factor >= 1.0)) throw DomainError("factor must be >= 1");
  Vec raised = prices;
  raised[good] *= factor;
  const double before = prices[good] * d(prices)[good];
  const double after = raised[good] * d(raised)[good];
  return after <= before * (1.0 + rel_tol);
}

ProbeReport probe_market(const DemandEvaluator& d, const Vec& prices, double wgs_delta) {
  ProbeReport r;
  const int n = static_cast<int>(prices.size());
  r.elasticity_ok = r.wgs_ok = r.spending_ok = true;
  for (int i = 0; i < n; ++i) {
    r.elasticity.push_back(elasticity_probe(d, prices, i));
    r.elasticity_ok = r.elasticity_ok && r.elasticity.back().ok;
    auto w = wgs_probe(d, prices, i, wgs_delta * prices[i]);
    r.wgs_violations.insert(r.wgs_violations.end(), w.violations.begin(), w.violations.end());
    const bool mono = own_spending_monotone_check(d, prices, i, 1.0 + wgs_delta);
    r.spending_monotone.push_back(mono);
    r.spending_ok = r.spending_ok && mono;
  }
  r.wgs_ok = r.wgs_violations.empty();
  r.wealth = wealth_elasticity_probe(d, prices);
  r.wealth_ok = r.wealth.ok;
  return r;
}

}  // namespace tat
