#include "tatonnement/metrics.hpp"

#include <cmath>

namespace tat {

std::string to_string(PotentialKind k) {
  switch (k) {
    case PotentialKind::simple: return "simple";
    case PotentialKind::async: return "async";
    case PotentialKind::warehouse: return "warehouse";
    case PotentialKind::noisy_ii: return "noisy_ii";
    case PotentialKind::fast: return "fast";
    case PotentialKind::discrete: return "discrete";
  }
  return "?";
}

double misspending_i(const GoodSnapshot& g) {
  return g.p * (std::abs(g.x - g.w) + std::abs(g.x_bar - g.w) + std::abs(g.w_tilde - g.w));
}

double phi_i_warehouse(const GoodSnapshot& g, double decay, double alpha2) {
  return g.p * (span(g.x, g.x_bar, g.w_tilde) - decay * (g.t - g.tau) * std::abs(g.x_bar - g.w_tilde) +
                alpha2 * std::abs(g.w_tilde - g.w));
}

namespace {

template <class F>
PotentialBreakdown build(const Snapshots& s, PotentialKind kind, F phi_i) {
  PotentialBreakdown b;
  b.kind = kind;
  b.phi.reserve(s.size());
  b.S.reserve(s.size());
  for (const auto& g : s) {
    b.phi.push_back(phi_i(g));
    b.S.push_back(misspending_i(g));
  }
  for (double v : b.phi) b.phi_total += v;
  for (double v : b.S) b.S_total += v;
  return b;
}

const FastShadow& shadow_of(const GoodSnapshot& g) {
  if (!g.shadow) throw ContractError("fast potential needs shadow fields on every good");
  return *g.shadow;
}

}  // namespace

PotentialBreakdown phi_simple(const Snapshots& s) {
  return build(s, PotentialKind::simple,
               [](const GoodSnapshot& g) { return g.p * std::abs(g.x - g.w); });
}

PotentialBreakdown phi_async(const Snapshots& s, double alpha1, double lambda) {
  return build(s, PotentialKind::async, [&](const GoodSnapshot& g) {
    return g.p * (span(g.x, g.x_bar, g.w) - alpha1 * lambda * std::abs(g.w - g.x_bar) * (g.t - g.tau));
  });
}

PotentialBreakdown phi_warehouse(const Snapshots& s, double alpha1, double alpha2, double lambda) {
  return build(s, PotentialKind::warehouse,
               [&](const GoodSnapshot& g) { return phi_i_warehouse(g, lambda * alpha1, alpha2); });
}

PotentialBreakdown phi_noisy_ii(const Snapshots& s, double kappa, double alpha2) {
  const double decay = 4.0 * kappa * (1.0 + alpha2);
  return build(s, PotentialKind::noisy_ii,
               [&](const GoodSnapshot& g) { return phi_i_warehouse(g, decay, alpha2); });
}

double psi_regular(const GoodSnapshot& g, const ProtocolConfig& c) {
  const FastShadow& sh = shadow_of(g);
  const double la = c.lambda * c.alpha1;
  const double dt = g.t - g.tau;
  return g.p * (span(sh.x, sh.x_bar, g.w_tilde) - la * dt * std::abs(sh.x_bar - g.w_tilde) +
                (1.0 - la * dt) * sh.int_x_minus_actual + c.alpha2 * std::abs(g.w_tilde - g.w));
}

double psi_delayed(const GoodSnapshot& g, const ProtocolConfig& c) {
  const FastShadow& sh = shadow_of(g);
  const double la = c.lambda * c.alpha1;
  const double lE = c.lambda * c.E;
  const double p = sh.price > 0.0 ? sh.price : g.p;
  const double gap = sh.w_tilde_at_s - sh.x_bar_at_s;
  const double main = span(sh.x, c.d * g.w_tilde, g.w_tilde) + gap * (1.0 - la * (g.t - sh.tau_prev)) -
                      la * (sh.int_x_since_s - sh.int_w_tilde_since_s) +
                      c.alpha2 * std::abs(g.w_tilde - g.w);
  return p * main - p * (lE / (1.0 - lE)) * gap * (sh.int_x_since_s / g.w);
}

PotentialBreakdown phi_fast(const Snapshots& s, const ProtocolConfig& cfg) {
  return build(s, PotentialKind::fast, [&](const GoodSnapshot& g) {
    return shadow_of(g).delayed ? psi_delayed(g, cfg) : psi_regular(g, cfg);
  });
}

PotentialBreakdown misspending(const Snapshots& s) {
  return build(s, PotentialKind::simple, [](const GoodSnapshot& g) { return misspending_i(g); });
}

PotentialBreakdown phi_for_mode(const Snapshots& s, const ProtocolConfig& cfg, Mode mode) {
  switch (mode) {
    case Mode::sync: return phi_simple(s);
    case Mode::async: return phi_async(s, cfg.alpha1, cfg.lambda);
    case Mode::warehouse:
    case Mode::noisy_i: return phi_warehouse(s, cfg.alpha1, cfg.alpha2, cfg.lambda);
    case Mode::fast: return phi_fast(s, cfg);
    case Mode::noisy_ii:
    case Mode::discrete: {
      auto b = phi_noisy_ii(s, cfg.kappa, cfg.alpha2);
      if (mode == Mode::discrete) b.kind = PotentialKind::discrete;
      return b;
    }
  }
  return phi_simple(s);
}

double phi_simple(const Vec& p, const Vec& x, const Vec& w) {
  return (p.array() * (x - w).array().abs()).sum();
}

double misspending(const Vec& p, const Vec& x, const Vec& x_bar, const Vec& w, const Vec& w_tilde) {
  return (p.array() * ((x - w).array().abs() + (x_bar - w).array().abs() +
                       (w_tilde - w).array().abs()))
      .sum();
}

}  // namespace tat
