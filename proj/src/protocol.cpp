#include "tatonnement/protocol.hpp"

#include "tatonnement/market.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tat {

std::string to_string(Mode m) {
  switch (m) {
    case Mode::sync: return "sync";
    case Mode::async: return "async";
    case Mode::warehouse: return "warehouse";
    case Mode::fast: return "fast";
    case Mode::noisy_i: return "noisy_i";
    case Mode::noisy_ii: return "noisy_ii";
    case Mode::discrete: return "discrete";
  }
  return "?";
}

Mode mode_from_string(const std::string& s) {
  for (Mode m : {Mode::sync, Mode::async, Mode::warehouse, Mode::fast, Mode::noisy_i,
                 Mode::noisy_ii, Mode::discrete})
    if (to_string(m) == s) return m;
  throw DomainError("unknown mode '" + s + "'");
}

std::string to_string(NoiseMode m) {
  switch (m) {
    case NoiseMode::none: return "none";
    case NoiseMode::unknown_rho: return "unknown_rho";
    case NoiseMode::known_rho: return "known_rho";
  }
  return "?";
}

NoiseMode noise_mode_from_string(const std::string& s) {
  for (NoiseMode m : {NoiseMode::none, NoiseMode::unknown_rho, NoiseMode::known_rho})
    if (to_string(m) == s) return m;
  throw DomainError("unknown noise mode '" + s + "'");
}

double update_price(double p, double x_used, double w, double lambda) {
  if (!(w > 0.0)) throw DomainError("supply must be positive");
  return p * (1.0 + lambda * std::min(1.0, (x_used - w) / w));
}

double update_price_median(double p, double z_bar, double w, double lambda) {
  if (!(w > 0.0)) throw DomainError("supply must be positive");
  return p * (1.0 + lambda * std::clamp(z_bar / w, -1.0, 1.0));
}

TargetDemand target_demand(double w, double kappa, double s, double s_star) {
  if (!(w > 0.0)) throw DomainError("supply must be positive");
  TargetDemand t;
  t.w_tilde = w + kappa * (s - s_star);
  t.constraint_violated = std::abs(t.w_tilde - w) > w / 3.0;
  return t;
}

std::int64_t min_discrete_price(double lambda) {
  return static_cast<std::int64_t>(std::ceil(1.0 / lambda - 1e-9));
}

DiscreteUpdate discrete_update(std::int64_t p, double z_bar, double w, double lambda,
                               double kappa) {
  if (!(w > 0.0)) throw DomainError("supply must be positive");
  const std::int64_t floor_price = min_discrete_price(lambda);
  if (p < floor_price) throw DomainError("discrete price below ceil(1/lambda)");
  DiscreteUpdate u{p, true};
  if (std::abs(z_bar) < 2.0 * (1.0 + kappa)) return u;
  const double delta = static_cast<double>(p) * lambda * std::clamp(z_bar / w, -1.0, 1.0);
  // The guard keeps products like 100 * 0.1 from truncating to 9.
  const auto step = static_cast<std::int64_t>(std::trunc(delta * (1.0 + 1e-12)));
  if (step == 0) return u;
  const std::int64_t next = std::max(p + step, floor_price);
  if (next == p) return u;
  return {next, false};
}

bool ParamReport::ok() const {
  return std::all_of(constraints.begin(), constraints.end(),
                     [](const Constraint& c) { return c.ok; });
}

const Constraint* ParamReport::find(const std::string& id) const {
  for (const auto& c : constraints)
    if (c.id == id) return &c;
  return nullptr;
}

namespace {

constexpr double kSlack = 1e-12;

class Builder {
 public:
  explicit Builder(std::string theorem) : theorem_(std::move(theorem)) {}
  void le(const std::string& id, double lhs, double rhs) {
    const bool ok = std::isfinite(lhs) && lhs <= rhs + kSlack * std::max(1.0, std::abs(rhs));
    report_.constraints.push_back({id, theorem_, lhs, rhs, ok});
  }
  void lt(const std::string& id, double lhs, double rhs) {
    report_.constraints.push_back({id, theorem_, lhs, rhs, std::isfinite(lhs) && lhs < rhs});
  }
  void eq(const std::string& id, double lhs, double rhs) {
    report_.constraints.push_back({id, theorem_, lhs, rhs, std::abs(lhs - rhs) <= kSlack});
  }
  void missing(const std::string& id) {
    report_.constraints.push_back({id, theorem_, std::nan(""), std::nan(""), false});
  }
  void set_theorem(std::string t) { theorem_ = std::move(t); }
  ParamReport take() { return std::move(report_); }

 private:
  std::string theorem_;
  ParamReport report_;
};

// 1 + 2Ed/(1 - lambda E) + alpha2/2
double update_cost(const ProtocolConfig& c) {
  return 1.0 + 2.0 * c.E * c.d / (1.0 - c.lambda * c.E) + 0.5 * c.alpha2;
}

void config_constraints(Builder& b, const ProtocolConfig& c, bool ongoing, bool bounded_freq) {
  b.set_theorem("config");
  b.lt("lambda-positive", -c.lambda, 0.0);
  b.le("lambda-at-most-half", c.lambda, 0.5);
  b.le("E-at-least-1", 1.0, c.E);
  b.le("lambda-E-band", c.lambda * c.E, 0.5);
  if (ongoing) {
    b.lt("alpha2-above-1", 1.0, c.alpha2);
    b.lt("alpha2-below-2", c.alpha2, 2.0);
    b.le("kappa-nonnegative", 0.0, c.kappa);
  }
  if (bounded_freq) b.le("b-at-least-1", 1.0, c.b);
}

void warehouse_core(Builder& b, const ProtocolConfig& c, double span_factor_lo,
                    double span_factor_d, double update_scale, const std::string& prefix) {
  b.le(prefix + "span-weights",
       c.alpha2 / 2.0 + c.alpha1 * std::max(span_factor_lo, span_factor_d * (c.d - 1.0)), 1.0);
  b.le(prefix + "update-cost", c.lambda * c.alpha1 + update_scale * c.lambda * update_cost(c),
       1.0);
  b.le(prefix + "kappa-vs-decay", 4.0 * c.kappa * (1.0 + c.alpha2), c.lambda * c.alpha1);
  b.le(prefix + "decay-at-most-half", c.lambda * c.alpha1, 0.5);
}

}  // namespace

double noisy_i_mu(const ProtocolConfig& c) {
  return 4.0 / 3.0 * c.lambda * c.noise_rho * c.b * (2.0 * c.b + c.kappa) * update_cost(c);
}

double noisy_i_threshold(const ProtocolConfig& c, double M) {
  const double mu = noisy_i_mu(c);
  const double la = c.lambda * c.alpha1;
  return 16.0 * mu * M / (c.kappa * (c.alpha2 - 1.0)) * (1.0 - la) / (1.0 - la - mu);
}

double noisy_ii_mu(const ProtocolConfig& c) {
  return 8.0 * c.kappa * (1.0 + c.alpha2) * (2.0 * c.b + c.kappa) * c.noise_rho;
}

double noisy_ii_threshold(const ProtocolConfig& c, double M) {
  const double mu = noisy_ii_mu(c);
  const double la = c.lambda * c.alpha1;
  return 32.0 * mu * M / ((1.0 - mu / (1.0 - la)) * (c.kappa * (c.alpha2 - 1.0)));
}

double discrete_s_threshold(const ProtocolConfig& c, double s) {
  const double la = c.lambda * c.alpha1;
  const double k = c.kappa * (1.0 + c.alpha2);
  const double frac = (1.0 - la + 18.0 / s * k + 3.0 * c.kappa / s) / (1.0 - la - 18.0 / s * k);
  return 48.0 / ((c.alpha2 - 1.0) * (1.0 - la)) *
         (1.0 + 6.0 * (1.0 + c.alpha2) + (1.0 + c.alpha2) * frac);
}

double discrete_phi_threshold(const ProtocolConfig& c, const MarketFacts& f) {
  const double la = c.lambda * c.alpha1;
  const double s = f.min_supply;
  const double k = c.kappa * (1.0 + c.alpha2);
  return 48.0 / (c.alpha2 - 1.0) *
         ((1.0 + c.alpha2) * (4.0 / (c.lambda * f.r) + 24.0 / s) + 1.0 / s) * (1.0 - la) /
         (1.0 - la - 18.0 / s * k) * f.money;
}

ParamReport validate_params(const ProtocolConfig& c, Mode mode,
                            const std::optional<MarketFacts>& facts) {
  const bool ongoing = mode != Mode::sync && mode != Mode::async;
  const bool bounded_freq = mode == Mode::noisy_i || mode == Mode::noisy_ii;
  Builder b("config");
  config_constraints(b, c, ongoing, bounded_freq);
  const double la = c.lambda * c.alpha1;

  switch (mode) {
    case Mode::sync:
      b.set_theorem("sync-progress");
      b.le("sync-step", c.lambda * (2.0 * c.E - 1.0), 0.5);
      break;

    case Mode::async:
      b.set_theorem("async-daily");
      b.le("d-at-least-2", 2.0, c.d);
      b.le("alpha1-demand-bound", c.alpha1 * (c.d - 1.0), 1.0);
      b.le("async-update-cost",
           la + c.lambda * (1.0 + 2.0 * c.E * c.d / (1.0 - c.lambda * c.E)), 1.0);
      break;

    case Mode::warehouse:
      b.set_theorem("war-daily");
      warehouse_core(b, c, 1.5, 1.0, 4.0 / 3.0, "");
      b.le("kappa-contraction", c.kappa * (c.alpha2 - 1.0) / 2.0, 1.0);
      break;

    case Mode::fast: {
      b.set_theorem("fast-daily");
      const double Ep = c.E + c.E_wealth;
      const double lE = c.lambda * c.E;
      const double lEp = c.lambda * Ep;
      b.le("d-at-least-5", 5.0, c.d);
      b.le("delay-wealth-band", lEp, 0.25);
      warehouse_core(b, c, 1.5, 1.0, 4.0 / 3.0, "");
      b.le("fast-kappa-bound",
           c.kappa * (c.d - 1.0 + c.alpha2 * (1.0 + lE / (1.0 - lE)) * (c.d - 1.0) / (c.d - 2.0)),
           la / 2.0);
      const double rhs1 = 4.0 / 3.0 * c.lambda * (2.0 * (c.d - 1.0) * c.E / (1.0 - lE) + 1.0);
      b.le("delayed-decrease-1", rhs1,
           1.0 - 2.0 * la - 3.0 * lE / (1.0 - lE) * (1.0 + lEp / (1.0 - lEp)));
      const double eta_num = la * (3.0 * (lEp / (1.0 - lEp) + 1.0) - 2.0 / 3.0);
      const double eta = eta_num / rhs1;
      b.le("delayed-decrease-2", eta_num,
           c.lambda * (2.0 / 3.0 - eta - eta * c.lambda) * (1.0 - c.alpha2 / 3.0));
      break;
    }

    case Mode::noisy_i: {
      b.set_theorem("noisy-i-daily");
      warehouse_core(b, c, 1.5, 1.0, 4.0 / 3.0, "");
      b.le("kappa-contraction", c.kappa * (c.alpha2 - 1.0) / 2.0, 1.0);
      b.le("rho-nonnegative", 0.0, c.noise_rho);
      const double mu = noisy_i_mu(c);
      b.lt("noise-mu-below-decay", mu, 1.0 - la);
      b.le("noise-vs-kappa", 16.0 * mu / (1.0 - la - mu), c.kappa * (c.alpha2 - 1.0));
      break;
    }

    case Mode::noisy_ii: {
      b.set_theorem("noisy-ii-daily");
      warehouse_core(b, c, 3.0, 2.0, 2.0, "");
      b.le("kappa-contraction", c.kappa * (c.alpha2 - 1.0) / 2.0, 1.0);
      b.le("rho-nonnegative", 0.0, c.noise_rho);
      const double mu = noisy_ii_mu(c);
      const double m1 = mu / (1.0 - la);
      b.lt("noise-mu-below-1", m1, 1.0);
      b.le("noise-vs-kappa", mu * ((1.0 + m1) / (1.0 - m1) + 1.0 / (1.0 - la)),
           c.kappa * (c.alpha2 - 1.0) / 2.0);
      break;
    }

    case Mode::discrete: {
      b.set_theorem("discrete-daily");
      warehouse_core(b, c, 4.5, 2.0, 8.0 / 3.0, "");
      if (facts) {
        const double s = facts->min_supply;
        b.le("supply-at-least-6", 6.0, s);
        b.lt("granularity-positive",
             18.0 / s * c.kappa * (1.0 + c.alpha2), 1.0 - la);
        b.le("supply-granularity", discrete_s_threshold(c, s), s);
      } else {
        b.missing("supply-at-least-6");
        b.missing("granularity-positive");
        b.missing("supply-granularity");
      }
      break;
    }
  }
  return b.take();
}

ParamReport validate_stated_params(const ProtocolConfig& c, Mode mode) {
  Builder b("stated");
  const double la = c.lambda * c.alpha1;
  if (mode == Mode::warehouse) {
    b.set_theorem("war-daily-stated");
    b.eq("alpha2-is-3/2", c.alpha2, 1.5);
    b.eq("alpha1-is-1/16", c.alpha1, 1.0 / 16.0);
    b.le("lambda-E", c.lambda * c.E, 1.0 / 17.0);
    b.le("lambda-E-d", c.lambda * c.E * c.d, 5.0 / 17.0);
    b.le("lambda", c.lambda, 1.0 / 14.0);
    b.le("kappa", c.kappa, la / 10.0);
  } else if (mode == Mode::fast) {
    b.set_theorem("fast-daily-stated");
    b.eq("d-is-5", c.d, 5.0);
    b.eq("alpha2-is-3/2", c.alpha2, 1.5);
    b.le("lambda-E-wealth", c.lambda * (c.E + c.E_wealth), 1.0 / 17.0);
    b.le("alpha1", c.alpha1, 1.0 / 16.0);
    b.le("update-cost", la + 4.0 / 3.0 * c.lambda * (1.75 + 10.0 * c.E / (1.0 - c.lambda * c.E)),
         1.0);
    b.le("kappa", c.kappa, la / 13.0);
  }
  return b.take();
}

ProtocolConfig preset(Preset p) {
  ProtocolConfig c;
  switch (p) {
    case Preset::sync_basic:
      c.lambda = 0.1;
      c.E = 2.0;
      break;
    case Preset::async_basic:
      c.lambda = 0.05;
      c.E = 2.0;
      c.d = 3.0;
      c.alpha1 = 0.5;
      break;
    case Preset::warehouse_results:
    case Preset::noisy_i_basic:
    case Preset::noisy_ii_basic:
      c.lambda = 1.0 / 20.0;
      c.E = 1.0;
      c.d = 2.0;
      c.alpha1 = 1.0 / 16.0;
      c.alpha2 = 1.5;
      c.kappa = c.lambda * c.alpha1 / 10.0;
      if (p == Preset::noisy_i_basic) {
        c.b = 2.0;
        c.noise_rho = 1e-7;
        c.noise_mode = NoiseMode::unknown_rho;
      } else if (p == Preset::noisy_ii_basic) {
        c.b = 2.0;
        c.noise_rho = 1e-5;
        c.noise_mode = NoiseMode::known_rho;
      }
      break;
    case Preset::fast_results:
      c.lambda = 1.0 / 40.0;
      c.E = 2.0;
      c.E_wealth = 0.0;
      c.d = 5.0;
      c.alpha1 = 1.0 / 16.0;
      c.alpha2 = 1.5;
      c.kappa = c.lambda * c.alpha1 / 13.0;
      c.fast_updates = true;
      break;
    case Preset::discrete_basic:
      c.lambda = 1.0 / 20.0;
      c.E = 1.0;
      c.d = 2.0;
      c.alpha1 = 1.0 / 20.0;
      c.alpha2 = 1.5;
      c.kappa = c.lambda * c.alpha1 / 10.0;
      c.discrete = true;
      break;
  }
  return c;
}

std::optional<Preset> preset_from_string(const std::string& s) {
  if (s == "sync") return Preset::sync_basic;
  if (s == "async") return Preset::async_basic;
  if (s == "warehouse") return Preset::warehouse_results;
  if (s == "fast") return Preset::fast_results;
  if (s == "noisy_i") return Preset::noisy_i_basic;
  if (s == "noisy_ii") return Preset::noisy_ii_basic;
  if (s == "discrete") return Preset::discrete_basic;
  return std::nullopt;
}

Mode preset_mode(Preset p) {
  switch (p) {
    case Preset::sync_basic: return Mode::sync;
    case Preset::async_basic: return Mode::async;
    case Preset::warehouse_results: return Mode::warehouse;
    case Preset::fast_results: return Mode::fast;
    case Preset::noisy_i_basic: return Mode::noisy_i;
    case Preset::noisy_ii_basic: return Mode::noisy_ii;
    case Preset::discrete_basic: return Mode::discrete;
  }
  return Mode::sync;
}

}  // namespace tat
