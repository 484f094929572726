#pragma once

#include "tatonnement/market.hpp"
#include "tatonnement/metrics.hpp"
#include "tatonnement/protocol.hpp"
#include "tatonnement/schedule.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace tat {

enum class EventKind { regular_update, fast_update, null_update, day_boundary,
                       delayed_instantiation, breach };
std::string to_string(EventKind k);

struct EventRecord {
  double t = 0.0;
  EventKind kind = EventKind::day_boundary;
  int good = -1;
  double p_before = 0.0;
  double p_after = 0.0;
  double x = 0.0;
  double x_bar = 0.0;
  double z_bar_true = 0.0;
  double z_bar_reported = 0.0;
  double stock = 0.0;
  double w_tilde = 0.0;
  int zone = 0;
  double phi_before = 0.0;
  double phi_after = 0.0;
  double S = 0.0;
};

struct DaySample {
  double t = 0.0;
  double phi = 0.0;
  double S = 0.0;
  double w_tilde_gap = 0.0;  // sum_i |w_tilde_i - w_i| p_i
  int max_zone = 0;          // largest |zone| over goods, 0 without capacities
};

// reading + U[-rho w, rho w]
double apply_noise(double reading, double w, double rho, std::mt19937_64& rng);
// True when the update must be skipped: rho w (2b + kappa) > |z_bar_reported| / 2.
bool null_update_gate(double z_bar_reported, double w, double rho, double kappa, double b);

struct SimConfig {
  Mode mode = Mode::async;
  ProtocolConfig cfg;
  ScheduleSpec schedule;
  double horizon_days = 50.0;
  std::uint64_t seed = 1;
  Vec p0;
  std::optional<Vec> s_star;    // ongoing modes; zero when absent
  std::optional<Vec> stock0;    // defaults to s_star
  std::optional<Vec> capacity;  // enables zones and breach events
  std::optional<Vec> p_ref;     // for max |ln(p / p_ref)|
  bool keep_events = false;
  std::ostream* csv = nullptr;
  std::function<void(const EventRecord&)> observer;
};

struct SimResult {
  std::vector<DaySample> days;
  std::vector<EventRecord> events;
  Vec final_prices;
  Vec final_stocks;
  Vec price_min;
  Vec price_max;
  long update_events = 0;   // regular + fast, excluding null
  long price_changes = 0;
  long null_updates = 0;
  long fast_updates = 0;
  long breaches = 0;
  long delays = 0;
  long instantiations = 0;
  long monotonicity_violations = 0;
  double max_monotonicity_excess = 0.0;  // max (phi_after - phi_before) / phi_before
  double max_demand_ratio = 0.0;         // max x_i / w_tilde_i seen at event times
  double max_log_price_dev = 0.0;
  double max_delay_days = 0.0;
  double max_conservation_error = 0.0;   // relative, per good
  double max_noise_error = 0.0;          // max |z_reported - z_true| / (rho w)

  std::vector<double> daily_ratios() const;
  // Largest |zone| in day samples at t >= from.
  int max_zone_from(double from) const;
};

SimResult simulate(const DemandEvaluator& demand, const Vec& supplies, const SimConfig& cfg);
SimResult simulate(const MarketSpec& spec, const SimConfig& cfg);

struct SyncRound {
  Vec p;
  Vec x;
  double phi = 0.0;
  double bound = 0.0;  // sum_i lambda p_i min{|x_i - w_i|, w_i}
};

// rounds[k] is the state before update k; the last entry is the final state.
std::vector<SyncRound> run_synchronous(const DemandEvaluator& d, const Vec& w,
                                       const ProtocolConfig& cfg, const Vec& p0, int rounds);

void write_csv_header(std::ostream& out);
void write_csv_row(std::ostream& out, const EventRecord& e);

}  // namespace tat
