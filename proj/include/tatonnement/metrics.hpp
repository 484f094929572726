#pragma once

#include "tatonnement/market.hpp"
#include "tatonnement/protocol.hpp"

#include <optional>
#include <string>
#include <vector>

namespace tat {

// Shadow quantities kept for the fast-update potential.  "Shadow" values are
// the ones that would hold had delayed price decreases not been applied.
struct FastShadow {
  double x = 0.0;                 // x'
  double x_bar = 0.0;             // average of x' since tau
  double int_x_minus_actual = 0;  // integral of (x' - x) since tau
  bool delayed = false;
  // Delayed goods only.
  double tau_s = 0.0;             // time the delayed decrease happened
  double tau_prev = 0.0;          // update time preceding tau_s
  double w_tilde_at_s = 0.0;      // target demand at tau_s
  double x_bar_at_s = 0.0;        // averaged demand used at tau_s
  double int_x_since_s = 0.0;     // integral of x' since tau_s
  double int_w_tilde_since_s = 0; // integral of target demand since tau_s
  double price = 0.0;             // shadow price
};

struct GoodSnapshot {
  double p = 0.0;
  double x = 0.0;
  double x_bar = 0.0;
  double tau = 0.0;
  double t = 0.0;
  double w = 0.0;
  double w_tilde = 0.0;
  std::optional<FastShadow> shadow;
};

using Snapshots = std::vector<GoodSnapshot>;

enum class PotentialKind { simple, async, warehouse, noisy_ii, fast, discrete };
std::string to_string(PotentialKind k);

struct PotentialBreakdown {
  PotentialKind kind = PotentialKind::simple;
  std::vector<double> phi;
  double phi_total = 0.0;
  std::vector<double> S;
  double S_total = 0.0;
};

struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};

inline double span(double a, double b, double c) {
  return std::max({a, b, c}) - std::min({a, b, c});
}

PotentialBreakdown phi_simple(const Snapshots& s);
PotentialBreakdown phi_async(const Snapshots& s, double alpha1, double lambda);
PotentialBreakdown phi_warehouse(const Snapshots& s, double alpha1, double alpha2, double lambda);
// Warehouse potential with decay coefficient 4 kappa (1 + alpha2) in place of lambda alpha1.
PotentialBreakdown phi_noisy_ii(const Snapshots& s, double kappa, double alpha2);
PotentialBreakdown phi_fast(const Snapshots& s, const ProtocolConfig& cfg);
PotentialBreakdown misspending(const Snapshots& s);

// The potential the analysis of mode uses.
PotentialBreakdown phi_for_mode(const Snapshots& s, const ProtocolConfig& cfg, Mode mode);

// Single-good terms.
double phi_i_warehouse(const GoodSnapshot& g, double decay, double alpha2);
double psi_regular(const GoodSnapshot& g, const ProtocolConfig& cfg);
double psi_delayed(const GoodSnapshot& g, const ProtocolConfig& cfg);
double misspending_i(const GoodSnapshot& g);

// Instantaneous forms over whole vectors: x_bar = x and w_tilde given.
double phi_simple(const Vec& p, const Vec& x, const Vec& w);
double misspending(const Vec& p, const Vec& x, const Vec& x_bar, const Vec& w, const Vec& w_tilde);

}  // namespace tat
