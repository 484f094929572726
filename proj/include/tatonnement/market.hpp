#pragma once

#include <Eigen/Dense>

#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace tat {

using Vec = Eigen::VectorXd;

struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

struct ProbeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class UtilityFamily { cobb_douglas, ces };

struct BuyerSpec {
  UtilityFamily family = UtilityFamily::cobb_douglas;
  double rho = 0.0;  // ces only, in [0, 1)
  Vec weights;
  double money = 0.0;

  static BuyerSpec cobb_douglas(Vec weights, double money);
  static BuyerSpec ces(double rho, Vec weights, double money);

  // Substitution exponent 1/(1-rho); 1 for Cobb-Douglas.
  double sigma() const;
  double elasticity() const { return sigma(); }
};

struct MarketSpec {
  std::vector<std::string> names;
  Vec supplies;
  std::vector<BuyerSpec> buyers;
  double money_supply = 0.0;

  int n() const { return static_cast<int>(supplies.size()); }
  // Largest own-price elasticity bound over buyers.
  double elasticity() const;
};

// Validates every invariant and fills names/money_supply.  Throws DomainError.
MarketSpec make_market(Vec supplies, std::vector<BuyerSpec> buyers,
                       std::vector<std::string> names = {});
void validate(const MarketSpec& spec);

// Aggregate demand, closed form per buyer.
Vec eval_demand(const MarketSpec& spec, const Vec& prices, double money_scale = 1.0);
Vec eval_spending(const MarketSpec& spec, const Vec& prices);

// prices -> demand, with every buyer's money multiplied by money_scale.
using DemandFn = std::function<Vec(const Vec& prices, double money_scale)>;

struct DemandEvaluator {
  DemandFn fn;
  int n = 0;
  double E = 1.0;         // declared own-price elasticity bound
  double E_wealth = 0.0;  // declared wealth elasticity bound (xi >= -E_wealth)

  Vec operator()(const Vec& p) const { return fn(p, 1.0); }
  Vec at_money(const Vec& p, double scale) const { return fn(p, scale); }
};

DemandEvaluator make_evaluator(const MarketSpec& spec);
DemandEvaluator make_evaluator(DemandFn fn, int n, double E, double E_wealth);

struct ElasticityEstimate {
  double estimate = 0.0;  // central difference
  double lo = 0.0;        // min of the one-sided estimates and the central one
  double hi = 0.0;
  bool ok = false;        // 1 - tol <= estimate <= E + tol
};

struct WgsViolation {
  int good = 0;
  double before = 0.0;
  double after = 0.0;
};

struct WgsReport {
  std::vector<double> change;  // x_j(after) - x_j(before), 0 for the raised good
  std::vector<WgsViolation> violations;
  bool ok() const { return violations.empty(); }
};

struct WealthEstimate {
  Vec xi;
  bool ok = false;  // xi_i >= -E_wealth - tol for all i
};

struct ProbeReport {
  std::vector<ElasticityEstimate> elasticity;
  std::vector<WgsViolation> wgs_violations;
  WealthEstimate wealth;
  std::vector<bool> spending_monotone;
  bool elasticity_ok = false;
  bool wgs_ok = false;
  bool wealth_ok = false;
  bool spending_ok = false;
  bool ok() const { return elasticity_ok && wgs_ok && wealth_ok && spending_ok; }
};

constexpr double kProbeStep = 1e-6;
constexpr double kProbeTol = 1e-3;

ElasticityEstimate elasticity_probe(const DemandEvaluator& d, const Vec& prices, int good,
                                    double h = kProbeStep, double tol = kProbeTol);
WgsReport wgs_probe(const DemandEvaluator& d, const Vec& prices, int good, double delta,
                    double rel_tol = 1e-12);
WealthEstimate wealth_elasticity_probe(const DemandEvaluator& d, const Vec& prices,
                                       double h = 1e-5, double tol = kProbeTol);
bool own_spending_monotone_check(const DemandEvaluator& d, const Vec& prices, int good,
                                 double factor, double rel_tol = 1e-12);
ProbeReport probe_market(const DemandEvaluator& d, const Vec& prices, double wgs_delta = 1e-2);

}  // namespace tat
