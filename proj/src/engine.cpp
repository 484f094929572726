#include "tatonnement/engine.hpp"

#include "tatonnement/equilibrium.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace tat {

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::regular_update: return "regular_update";
    case EventKind::fast_update: return "fast_update";
    case EventKind::null_update: return "null_update";
    case EventKind::day_boundary: return "day_boundary";
    case EventKind::delayed_instantiation: return "delayed_instantiation";
    case EventKind::breach: return "breach";
  }
  return "?";
}

double apply_noise(double reading, double w, double rho, std::mt19937_64& rng) {
  if (rho < 0.0) throw DomainError("rho must be >= 0");
  if (rho == 0.0) return reading;
  std::uniform_real_distribution<double> u(-rho * w, rho * w);
  return reading + u(rng);
}

bool null_update_gate(double z_bar_reported, double w, double rho, double kappa, double b) {
  return rho * w * (2.0 * b + kappa) > std::abs(z_bar_reported) / 2.0;
}

std::vector<double> SimResult::daily_ratios() const {
  std::vector<double> r;
  for (std::size_t k = 1; k < days.size(); ++k)
    r.push_back(days[k - 1].phi > 0.0 ? days[k].phi / days[k - 1].phi : 1.0);
  return r;
}

int SimResult::max_zone_from(double from) const {
  int z = 0;
  for (const auto& d : days)
    if (d.t >= from) z = std::max(z, d.max_zone);
  return z;
}

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

bool is_ongoing(Mode m) {
  return m == Mode::warehouse || m == Mode::fast || m == Mode::noisy_i || m == Mode::noisy_ii;
}

struct GoodState {
  double tau = 0.0;
  double demand_integral = 0.0;  // integral of x since tau
  double sold = 0.0;             // integral of x since the latest update, for fast triggers
  double stock = 0.0;
  double stock_at_tau = 0.0;
  double reading_at_tau = 0.0;
  double next_regular = 0.0;
  double total_sold = 0.0;
  bool outside = false;
  std::mt19937_64 rng;
  // Fast-mode shadow ledger.
  double shadow_price = 0.0;
  double shadow_integral = 0.0;  // integral of x' since tau
  double shadow_minus_actual = 0.0;
  bool delayed = false;
  int increases_since_delay = 0;
  double tau_s = 0.0;
  double tau_prev = 0.0;
  double w_tilde_at_s = 0.0;
  double x_bar_at_s = 0.0;
  double shadow_since_s = 0.0;
  double w_tilde_since_s = 0.0;
};

class Simulator {
 public:
  Simulator(const DemandEvaluator& demand, const Vec& w, const SimConfig& c)
      : d_(demand), w_(w), c_(c), cfg_(c.cfg), n_(static_cast<int>(w.size())) {
    if (c.p0.size() != n_) throw DomainError("initial prices must have one entry per good");
    if (!(c.p0.array() > 0.0).all()) throw DomainError("initial prices must be positive");
    if (c.mode == Mode::discrete) throw DomainError("discrete mode runs through run_discrete");
    validate_schedule(c.schedule, n_, std::max(1.0, cfg_.b));
    ongoing_ = is_ongoing(c.mode);
    fast_ = c.mode == Mode::fast;
    s_star_ = c.s_star ? *c.s_star : Vec::Zero(n_);
    p_ = c.p0;
    res_.price_min = p_;
    res_.price_max = p_;
    const Vec s0 = c.stock0 ? *c.stock0 : s_star_;
    g_.resize(n_);
    for (int i = 0; i < n_; ++i) {
      auto& g = g_[i];
      g.stock = g.stock_at_tau = s0[i];
      g.rng.seed(c.seed * 0x9E3779B97F4A7C15ULL + static_cast<std::uint64_t>(i) + 1);
      g.reading_at_tau = reading(i);
      g.next_regular = c.schedule.first[i];
      g.shadow_price = p_[i];
    }
    x_ = d_(p_);
    if (fast_) xs_ = x_;
  }

  SimResult run() {
    if (c_.csv) write_csv_header(*c_.csv);
    sample_day();
    double next_day = 1.0;
    while (t_ < c_.horizon_days) {
      double t_next = std::min(next_day, c_.horizon_days);
      for (int i = 0; i < n_; ++i) {
        t_next = std::min(t_next, g_[i].next_regular);
        t_next = std::min(t_next, fast_trigger(i));
        t_next = std::min(t_next, instantiation_time(i));
        t_next = std::min(t_next, crossing_time(i));
      }
      advance(t_next);

      if (c_.capacity && ongoing_) handle_crossings();
      if (t_ == next_day) {
        sample_day();
        next_day += 1.0;
      } else if (t_ == c_.horizon_days) {
        sample_day();
      }
      if (fast_) handle_instantiations();

      std::vector<int> batch;
      std::vector<bool> is_fast;
      for (int i = 0; i < n_; ++i) {
        const bool regular = g_[i].next_regular <= t_;
        const bool fast = fast_ && fast_due(i);
        if (regular || fast) {
          batch.push_back(i);
          is_fast.push_back(!regular);
        }
      }
      if (!batch.empty()) update_batch(batch, is_fast);
    }
    res_.final_prices = p_;
    res_.final_stocks = Vec(n_);
    for (int i = 0; i < n_; ++i) {
      res_.final_stocks[i] = g_[i].stock;
      if (!ongoing_) continue;
      const double expect = (c_.stock0 ? (*c_.stock0)[i] : s_star_[i]) + w_[i] * t_ - g_[i].total_sold;
      const double scale = std::max({1.0, std::abs(expect), w_[i] * std::max(t_, 1.0)});
      res_.max_conservation_error =
          std::max(res_.max_conservation_error, std::abs(g_[i].stock - expect) / scale);
    }
    return std::move(res_);
  }

 private:
  double reading(int i) {
    if (cfg_.noise_mode == NoiseMode::none || cfg_.noise_rho == 0.0) return g_[i].stock;
    return apply_noise(g_[i].stock, w_[i], cfg_.noise_rho, g_[i].rng);
  }

  double w_tilde(int i) const {
    return ongoing_ ? w_[i] + cfg_.kappa * (g_[i].stock - s_star_[i]) : w_[i];
  }

  double x_bar(int i) const {
    const double dt = t_ - g_[i].tau;
    return dt > 0.0 ? g_[i].demand_integral / dt : x_[i];
  }

  int zone(int i) const {
    return c_.capacity ? zone_of(g_[i].stock, s_star_[i], (*c_.capacity)[i]) : 0;
  }

  // Due also when the remaining time is below the resolution of t.
  bool fast_due(int i) const {
    const double left = w_[i] - g_[i].sold;
    return left <= w_[i] * 1e-12 || (x_[i] > 0.0 && t_ + left / x_[i] <= t_);
  }

  double fast_trigger(int i) const {
    if (!fast_) return kInf;
    if (fast_due(i)) return t_;
    if (!(x_[i] > 0.0)) return kInf;
    return t_ + (w_[i] - g_[i].sold) / x_[i];
  }

  bool instantiation_due(int i) const {
    if (!g_[i].delayed) return false;
    const double gap = (cfg_.d - 1.0) * w_tilde(i) - xs_[i];
    if (gap >= -1e-12 * xs_[i]) return true;
    const double slope = (cfg_.d - 1.0) * cfg_.kappa * (w_[i] - x_[i]);
    return slope > 0.0 && t_ - gap / slope <= t_;
  }

  // Earliest time the delayed good's shadow demand falls to (d - 1) w_tilde.
  double instantiation_time(int i) const {
    if (!fast_ || !g_[i].delayed) return kInf;
    if (instantiation_due(i)) return t_;
    const double gap = (cfg_.d - 1.0) * w_tilde(i) - xs_[i];
    const double slope = (cfg_.d - 1.0) * cfg_.kappa * (w_[i] - x_[i]);
    return slope > 0.0 ? t_ - gap / slope : kInf;
  }

  // Time the stock next leaves [0, c] (or re-enters it, to re-arm detection).
  double crossing_time(int i) const {
    if (!c_.capacity || !ongoing_) return kInf;
    const double rate = w_[i] - x_[i];
    const double s = g_[i].stock, cap = (*c_.capacity)[i];
    if (!g_[i].outside) {
      if (rate > 0.0) return t_ + std::max(0.0, cap - s) / rate;
      if (rate < 0.0) return t_ + std::max(0.0, s) / -rate;
      return kInf;
    }
    const double eps = crossing_eps(i);
    if (s > cap + eps && rate < 0.0) return t_ + (s - cap) / -rate;
    if (s < -eps && rate > 0.0) return t_ + -s / rate;
    return kInf;
  }

  // Absorbs the rounding of t + (c - s)/rate.
  double crossing_eps(int i) const { return 1e-9 * std::max(1.0, (*c_.capacity)[i]); }

  void advance(double t_next) {
    const double dt = t_next - t_;
    if (dt > 0.0) {
      for (int i = 0; i < n_; ++i) {
        auto& g = g_[i];
        const double used = x_[i] * dt;
        g.demand_integral += used;
        g.sold += used;
        g.total_sold += used;
        if (ongoing_) {
          const double s_old = g.stock;
          g.stock += (w_[i] - x_[i]) * dt;
          if (fast_) {
            g.shadow_integral += xs_[i] * dt;
            g.shadow_minus_actual += (xs_[i] - x_[i]) * dt;
            if (g.delayed) {
              g.shadow_since_s += xs_[i] * dt;
              g.w_tilde_since_s +=
                  dt * (w_[i] + cfg_.kappa * (0.5 * (s_old + g.stock) - s_star_[i]));
            }
          }
        }
      }
    }
    t_ = t_next;
  }

  Snapshots snapshots() const {
    Snapshots s(n_);
    for (int i = 0; i < n_; ++i) {
      auto& sn = s[i];
      sn.p = p_[i];
      sn.x = x_[i];
      sn.x_bar = x_bar(i);
      sn.tau = g_[i].tau;
      sn.t = t_;
      sn.w = w_[i];
      sn.w_tilde = w_tilde(i);
      if (fast_) {
        const auto& g = g_[i];
        FastShadow f;
        f.x = xs_[i];
        const double dt = t_ - g.tau;
        f.x_bar = dt > 0.0 ? g.shadow_integral / dt : xs_[i];
        f.int_x_minus_actual = g.shadow_minus_actual;
        f.delayed = g.delayed;
        f.tau_s = g.tau_s;
        f.tau_prev = g.tau_prev;
        f.w_tilde_at_s = g.w_tilde_at_s;
        f.x_bar_at_s = g.x_bar_at_s;
        f.int_x_since_s = g.shadow_since_s;
        f.int_w_tilde_since_s = g.w_tilde_since_s;
        f.price = g.shadow_price;
        sn.shadow = f;
      }
    }
    return s;
  }

  PotentialBreakdown potential() const { return phi_for_mode(snapshots(), cfg_, c_.mode); }

  void emit(const EventRecord& e) {
    if (c_.keep_events) res_.events.push_back(e);
    if (c_.csv) write_csv_row(*c_.csv, e);
    if (c_.observer) c_.observer(e);
  }

  void track_state() {
    for (int i = 0; i < n_; ++i) {
      res_.max_demand_ratio = std::max(res_.max_demand_ratio, x_[i] / w_tilde(i));
      res_.price_min[i] = std::min(res_.price_min[i], p_[i]);
      res_.price_max[i] = std::max(res_.price_max[i], p_[i]);
      if (c_.p_ref)
        res_.max_log_price_dev =
            std::max(res_.max_log_price_dev, std::abs(std::log(p_[i] / (*c_.p_ref)[i])));
    }
  }

  void sample_day() {
    const auto pb = potential();
    DaySample d;
    d.t = t_;
    d.phi = pb.phi_total;
    d.S = pb.S_total;
    for (int i = 0; i < n_; ++i) {
      d.w_tilde_gap += std::abs(w_tilde(i) - w_[i]) * p_[i];
      d.max_zone = std::max(d.max_zone, std::abs(zone(i)));
    }
    res_.days.push_back(d);
    track_state();
    EventRecord e;
    e.t = t_;
    e.kind = EventKind::day_boundary;
    e.phi_before = e.phi_after = pb.phi_total;
    e.S = pb.S_total;
    emit(e);
  }

  void handle_crossings() {
    for (int i = 0; i < n_; ++i) {
      auto& g = g_[i];
      const double cap = (*c_.capacity)[i];
      const double eps = crossing_eps(i);
      if (g.outside && g.stock >= -eps && g.stock <= cap + eps) g.outside = false;
      if (g.outside) continue;
      const double rate = w_[i] - x_[i];
      if ((g.stock >= cap - eps && rate > 0.0) || (g.stock <= eps && rate < 0.0)) {
        g.outside = true;
        ++res_.breaches;
        EventRecord e;
        e.t = t_;
        e.kind = EventKind::breach;
        e.good = i;
        e.p_before = e.p_after = p_[i];
        e.x = x_[i];
        e.x_bar = x_bar(i);
        e.stock = g.stock;
        e.w_tilde = w_tilde(i);
        e.zone = g.stock > s_star_[i] ? 5 : -5;
        emit(e);
      }
    }
  }

  void instantiate(int i) {
    auto& g = g_[i];
    g.delayed = false;
    g.shadow_price = p_[i];
    ++res_.instantiations;
    res_.max_delay_days = std::max(res_.max_delay_days, t_ - g.tau_s);
  }

  void handle_instantiations() {
    bool any = false;
    for (int i = 0; i < n_; ++i) {
      if (instantiation_due(i)) {
        instantiate(i);
        any = true;
        EventRecord e;
        e.t = t_;
        e.kind = EventKind::delayed_instantiation;
        e.good = i;
        e.p_before = e.p_after = p_[i];
        e.x = x_[i];
        e.x_bar = x_bar(i);
        e.stock = g_[i].stock;
        e.w_tilde = w_tilde(i);
        e.zone = zone(i);
        emit(e);
      }
    }
    if (any) refresh_shadow_demand();
  }

  void refresh_shadow_demand() {
    Vec q(n_);
    for (int i = 0; i < n_; ++i) q[i] = g_[i].delayed ? g_[i].shadow_price : p_[i];
    xs_ = d_(q);
  }

  void update_batch(const std::vector<int>& batch, const std::vector<bool>& is_fast) {
    const double phi_before = potential().phi_total;
    const Vec p_old = p_;
    struct Decision {
      int good;
      double x_bar, z_true, z_rep, reading, w_tilde;
      bool null_update, fast;
    };
    std::vector<Decision> decisions;
    for (std::size_t k = 0; k < batch.size(); ++k) {
      const int i = batch[k];
      auto& g = g_[i];
      Decision dc{i, x_bar(i), 0.0, 0.0, 0.0, w_tilde(i), false, is_fast[k]};
      const double dt = t_ - g.tau;
      if (!ongoing_) {
        dc.z_true = dc.z_rep = dc.x_bar - w_[i];
        p_[i] = update_price(p_old[i], dc.x_bar, w_[i], cfg_.lambda);
      } else {
        dc.z_true = dt > 0.0 ? (g.stock_at_tau - g.stock) / dt - cfg_.kappa * (g.stock - s_star_[i])
                             : x_[i] - dc.w_tilde;
        dc.reading = reading(i);
        dc.z_rep = dt > 0.0 ? (g.reading_at_tau - dc.reading) / dt -
                                  cfg_.kappa * (dc.reading - s_star_[i])
                            : dc.z_true;
        if (cfg_.noise_rho > 0.0)
          res_.max_noise_error = std::max(
              res_.max_noise_error, std::abs(dc.z_rep - dc.z_true) / (cfg_.noise_rho * w_[i]));
        if (cfg_.noise_mode == NoiseMode::known_rho &&
            null_update_gate(dc.z_rep, w_[i], cfg_.noise_rho, cfg_.kappa, cfg_.b)) {
          dc.null_update = true;
        } else {
          p_[i] = update_price_median(p_old[i], dc.z_rep, w_[i], cfg_.lambda);
        }
      }
      decisions.push_back(dc);
    }

    for (const auto& dc : decisions) {
      auto& g = g_[dc.good];
      if (fast_ && !dc.null_update) ledger_update(dc.good, p_old[dc.good], dc.x_bar, dc.w_tilde);
      g.tau = t_;
      g.demand_integral = 0.0;
      g.sold = 0.0;
      g.stock_at_tau = g.stock;
      g.reading_at_tau = ongoing_ ? dc.reading : g.stock;
      g.next_regular = t_ + c_.schedule.period[dc.good];
      g.shadow_integral = 0.0;
      g.shadow_minus_actual = 0.0;
    }
    x_ = d_(p_);
    if (fast_) refresh_shadow_demand();

    const auto after = potential();
    const double phi_after = after.phi_total;
    if (phi_after > phi_before * (1.0 + 1e-9)) ++res_.monotonicity_violations;
    if (phi_before > 0.0)
      res_.max_monotonicity_excess =
          std::max(res_.max_monotonicity_excess, (phi_after - phi_before) / phi_before);
    track_state();

    for (const auto& dc : decisions) {
      const int i = dc.good;
      EventRecord e;
      e.t = t_;
      e.good = i;
      if (dc.null_update) {
        e.kind = EventKind::null_update;
        ++res_.null_updates;
      } else {
        e.kind = dc.fast ? EventKind::fast_update : EventKind::regular_update;
        ++res_.update_events;
        if (dc.fast) ++res_.fast_updates;
        if (p_[i] != p_old[i]) ++res_.price_changes;
      }
      e.p_before = p_old[i];
      e.p_after = p_[i];
      e.x = x_[i];
      e.x_bar = dc.x_bar;
      e.z_bar_true = dc.z_true;
      e.z_bar_reported = dc.z_rep;
      e.stock = g_[i].stock;
      e.w_tilde = dc.w_tilde;
      e.zone = zone(i);
      e.phi_before = phi_before;
      e.phi_after = phi_after;
      e.S = after.S_total;
      emit(e);
    }
  }

  // Shadow bookkeeping for one updated good; p_[i] already holds the new price.
  void ledger_update(int i, double p_old, double xbar_used, double wt) {
    auto& g = g_[i];
    const double p_new = p_[i];
    if (p_new < p_old) {
      if (g.delayed) instantiate(i);
      if (xs_[i] >= cfg_.d * wt) {
        g.delayed = true;
        g.increases_since_delay = 0;
        g.shadow_price = p_old;
        g.tau_s = t_;
        g.tau_prev = g.tau;
        g.w_tilde_at_s = wt;
        g.x_bar_at_s = xbar_used;
        g.shadow_since_s = 0.0;
        g.w_tilde_since_s = 0.0;
        ++res_.delays;
      } else {
        g.shadow_price = p_new;
      }
      return;
    }
    if (g.delayed) {
      ++g.increases_since_delay;
      if (p_new >= g.shadow_price || g.increases_since_delay >= 2) instantiate(i);
      return;
    }
    g.shadow_price = p_new;
  }

  const DemandEvaluator& d_;
  Vec w_;
  const SimConfig& c_;
  ProtocolConfig cfg_;
  int n_;
  bool ongoing_ = false;
  bool fast_ = false;
  Vec s_star_;
  Vec p_;
  Vec x_;
  Vec xs_;
  double t_ = 0.0;
  std::vector<GoodState> g_;
  SimResult res_;
};

}  // namespace

SimResult simulate(const DemandEvaluator& demand, const Vec& supplies, const SimConfig& cfg) {
  Simulator sim(demand, supplies, cfg);
  return sim.run();
}

SimResult simulate(const MarketSpec& spec, const SimConfig& cfg) {
  return simulate(make_evaluator(spec), spec.supplies, cfg);
}

std::vector<SyncRound> run_synchronous(const DemandEvaluator& d, const Vec& w,
                                       const ProtocolConfig& cfg, const Vec& p0, int rounds) {
  std::vector<SyncRound> out;
  Vec p = p0;
  for (int k = 0; k <= rounds; ++k) {
    SyncRound r;
    r.p = p;
    r.x = d(p);
    r.phi = phi_simple(p, r.x, w);
    r.bound = cfg.lambda * (p.array() * (r.x - w).array().abs().min(w.array())).sum();
    out.push_back(r);
    if (k == rounds) break;
    for (int i = 0; i < p.size(); ++i) p[i] = update_price(r.p[i], r.x[i], w[i], cfg.lambda);
  }
  return out;
}

}  // namespace tat
