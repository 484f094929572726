#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace tat {

enum class NoiseMode { none, unknown_rho, known_rho };
enum class Mode { sync, async, warehouse, fast, noisy_i, noisy_ii, discrete };

std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);
std::string to_string(NoiseMode m);
NoiseMode noise_mode_from_string(const std::string& s);

struct ProtocolConfig {
  double lambda = 0.05;
  double kappa = 0.0;      // 1/day
  double alpha1 = 1.0 / 16.0;
  double alpha2 = 1.5;
  double d = 2.0;          // demand bound multiplier
  double b = 1.0;          // max updates per day
  double E = 1.0;
  double E_wealth = 0.0;
  bool fast_updates = false;
  double noise_rho = 0.0;
  NoiseMode noise_mode = NoiseMode::none;
  bool discrete = false;
};

// Market-dependent quantities some theorems constrain.
struct MarketFacts {
  double min_supply = 0.0;  // s = min_i w_i
  double r = 0.0;           // M / sum_i w_i
  double money = 0.0;       // M
};

// p (1 + lambda min{1, (x - w)/w})
double update_price(double p, double x_used, double w, double lambda);
// p (1 + lambda median{-1, z/w, 1})
double update_price_median(double p, double z_bar, double w, double lambda);

struct TargetDemand {
  double w_tilde = 0.0;
  bool constraint_violated = false;  // |w_tilde - w| > w/3
};
// w + kappa (s - s*): a full warehouse asks for more demand than supply.
TargetDemand target_demand(double w, double kappa, double s, double s_star);

struct DiscreteUpdate {
  std::int64_t price = 0;
  bool null_update = false;
};
std::int64_t min_discrete_price(double lambda);
DiscreteUpdate discrete_update(std::int64_t p, double z_bar, double w, double lambda,
                               double kappa = 0.0);

struct Constraint {
  std::string id;
  std::string theorem;
  double lhs = 0.0;
  double rhs = 0.0;
  bool ok = false;
};

struct ParamReport {
  std::vector<Constraint> constraints;
  bool ok() const;
  const Constraint* find(const std::string& id) const;
};

// Hypotheses of the theorem behind mode, in the inequality form its proof uses.
ParamReport validate_params(const ProtocolConfig& cfg, Mode mode,
                            const std::optional<MarketFacts>& facts = std::nullopt);
// Concrete parameter choices stated alongside the theorems (warehouse, fast).
// Empty for the other modes.
ParamReport validate_stated_params(const ProtocolConfig& cfg, Mode mode);

// Thresholds on phi above which the noisy and discrete theorems assert contraction.
double noisy_i_mu(const ProtocolConfig& cfg);
double noisy_i_threshold(const ProtocolConfig& cfg, double M);
double noisy_ii_mu(const ProtocolConfig& cfg);
double noisy_ii_threshold(const ProtocolConfig& cfg, double M);
double discrete_phi_threshold(const ProtocolConfig& cfg, const MarketFacts& facts);
double discrete_s_threshold(const ProtocolConfig& cfg, double s);

enum class Preset { sync_basic, async_basic, warehouse_results, fast_results, noisy_i_basic,
                    noisy_ii_basic, discrete_basic };
ProtocolConfig preset(Preset p);
std::optional<Preset> preset_from_string(const std::string& s);
Mode preset_mode(Preset p);

}  // namespace tat
