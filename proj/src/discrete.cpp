#include "tatonnement/discrete.hpp"

#include "tatonnement/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

namespace tat {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::string fmt_prices(const IVec& p) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < p.size(); ++i) os << (i ? "," : "") << p[i];
  os << ')';
  return os.str();
}

Vec as_vec(const IVec& p) {
  Vec v(static_cast<Eigen::Index>(p.size()));
  for (std::size_t i = 0; i < p.size(); ++i) v[static_cast<Eigen::Index>(i)] = static_cast<double>(p[i]);
  return v;
}

// Cells whose own price for good i is lo_i, one per own-price line.
std::vector<std::size_t> line_starts(const PriceGrid& g, int i) {
  std::vector<std::size_t> out;
  out.reserve(g.cells() / static_cast<std::size_t>(g.extent(i)));
  for (std::size_t c = 0; c < g.cells(); ++c)
    if (g.price(c, i) == g.lo[i]) out.push_back(c);
  return out;
}

// Own-price line of good i starting at cell base: values at lo..hi.
template <class T, class Get>
std::vector<T> read_line(const PriceGrid& g, std::size_t base, int i, Get get) {
  std::vector<T> v(static_cast<std::size_t>(g.extent(i)));
  for (std::size_t j = 0; j < v.size(); ++j) v[j] = get(base + j * g.stride(i));
  return v;
}

}  // namespace

PriceGrid::PriceGrid(IVec lo_, IVec hi_) : lo(std::move(lo_)), hi(std::move(hi_)) {
  if (lo.empty() || lo.size() != hi.size()) throw DomainError("grid bounds must be nonempty and match");
  stride_.resize(lo.size());
  std::size_t cells = 1;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (lo[i] < 1 || hi[i] < lo[i]) throw DomainError("grid bounds must satisfy 1 <= lo <= hi");
    stride_[i] = cells;
    const auto ext = static_cast<std::size_t>(hi[i] - lo[i] + 1);
    if (ext > kMaxGridCells || cells > kMaxGridCells / ext)
      throw DomainError("price grid exceeds 10^6 cells");
    cells *= ext;
  }
  cells_ = cells;
}

std::size_t PriceGrid::index(const IVec& p) const {
  if (p.size() != lo.size()) throw DomainError("price vector has the wrong length");
  std::size_t c = 0;
  for (std::size_t i = 0; i < lo.size(); ++i) {
    if (p[i] < lo[i] || p[i] > hi[i]) throw DomainError("price outside the grid");
    c += static_cast<std::size_t>(p[i] - lo[i]) * stride_[i];
  }
  return c;
}

IVec PriceGrid::prices(std::size_t cell) const {
  IVec p(lo.size());
  for (int i = 0; i < n(); ++i) p[i] = price(cell, i);
  return p;
}

std::int64_t PriceGrid::price(std::size_t cell, int i) const {
  return lo[i] + static_cast<std::int64_t>((cell / stride_[i]) % static_cast<std::size_t>(extent(i)));
}

DiscreteDemandTable make_table(PriceGrid grid, std::vector<std::int64_t> x, double E, double money) {
  if (x.size() != grid.cells() * static_cast<std::size_t>(grid.n()))
    throw DomainError("demand table size does not match the grid");
  if (std::any_of(x.begin(), x.end(), [](std::int64_t v) { return v < 0; }))
    throw DomainError("discrete demands must be nonnegative");
  if (!(E >= 1.0)) throw DomainError("discrete elasticity must be >= 1");
  DiscreteDemandTable t;
  t.grid = std::move(grid);
  t.x = std::move(x);
  t.E = E;
  t.money = money;
  return t;
}

std::string DiscreteWgsViolation::describe() const {
  std::ostringstream os;
  os << "lowering good " << good << " from " << fmt_prices(from) << " to " << fmt_prices(to);
  if (affected >= 0)
    os << " raises demand for good " << affected << " from " << before << " to " << after;
  else if (from == to)
    os << ": spending " << before << " exceeds the money supply " << after;
  else
    os << " cuts spending from " << before << " to " << after;
  return os.str();
}

std::vector<DiscreteWgsViolation> discrete_wgs_violations(const DiscreteDemandTable& t,
                                                          std::size_t limit) {
  std::vector<DiscreteWgsViolation> out;
  const PriceGrid& g = t.grid;
  const int n = g.n();
  auto full = [&] { return out.size() >= limit; };

  if (t.money > 0.0) {
    for (std::size_t c = 0; c < g.cells() && !full(); ++c) {
      double spend = 0.0;
      for (int i = 0; i < n; ++i) spend += static_cast<double>(g.price(c, i) * t.at(c, i));
      if (spend > t.money * (1.0 + 1e-12)) {
        const IVec p = g.prices(c);
        out.push_back({0, -1, p, p, spend, t.money});
      }
    }
  }

  for (int i = 0; i < n && !full(); ++i) {
    const auto si = g.stride(i);
    // Other goods, unit decreases.
    for (std::size_t c = 0; c < g.cells() && !full(); ++c) {
      if (g.price(c, i) == g.lo[i]) continue;
      const std::size_t lower = c - si;
      for (int j = 0; j < n; ++j) {
        if (j == i) continue;
        if (t.at(lower, j) > t.at(c, j)) {
          out.push_back({i, j, g.prices(c), g.prices(lower), static_cast<double>(t.at(c, j)),
                         static_cast<double>(t.at(lower, j))});
          if (full()) break;
        }
      }
    }
    // Own spending: for q < p need q x(q) >= p x(p) - (q - 1), i.e.
    // min_{q < p} (q x(q) + q) - 1 >= p x(p).
    for (std::size_t base : line_starts(g, i)) {
      if (full()) break;
      std::int64_t best = std::numeric_limits<std::int64_t>::max();
      std::int64_t best_q = 0;
      for (std::int64_t p = g.lo[i]; p <= g.hi[i]; ++p) {
        const std::size_t c = base + static_cast<std::size_t>(p - g.lo[i]) * si;
        const std::int64_t m = p * t.at(c, i);
        if (best != std::numeric_limits<std::int64_t>::max() && best - 1 < m) {
          IVec from = g.prices(c);
          IVec to = from;
          to[i] = best_q;
          const std::size_t cq = base + static_cast<std::size_t>(best_q - g.lo[i]) * si;
          out.push_back({i, -1, from, to, static_cast<double>(m),
                         static_cast<double>(best_q * t.at(cq, i))});
          if (full()) break;
        }
        if (m + p < best) {
          best = m + p;
          best_q = p;
        }
      }
    }
  }
  return out;
}

double minimal_sandwich_elasticity(const DiscreteDemandTable& t) {
  const PriceGrid& g = t.grid;
  double need = 0.0;
  std::vector<double> lg;
  for (int i = 0; i < g.n(); ++i) {
    lg.resize(static_cast<std::size_t>(g.extent(i)));
    for (std::size_t j = 0; j < lg.size(); ++j) lg[j] = std::log(static_cast<double>(g.lo[i] + static_cast<std::int64_t>(j)));
    for (std::size_t base : line_starts(g, i)) {
      const auto x = read_line<std::int64_t>(g, base, i, [&](std::size_t c) { return t.at(c, i); });
      std::vector<double> lx(x.size()), lx_plus(x.size()), lx_minus(x.size());
      for (std::size_t j = 0; j < x.size(); ++j) {
        lx[j] = x[j] > 0 ? std::log(static_cast<double>(x[j])) : -INFINITY;
        lx_plus[j] = std::log(static_cast<double>(x[j] + 1));
        lx_minus[j] = x[j] > 1 ? std::log(static_cast<double>(x[j] - 1)) : -INFINITY;
      }
      for (std::size_t a = 0; a < x.size(); ++a) {
        if (x[a] < 1) continue;
        for (std::size_t b = a + 1; b < x.size(); ++b) {
          if (x[b] < 1) continue;
          const double dl = lg[b] - lg[a];
          // floor(x(a)(a/b)^E) <= x(b)  <=>  x(a)(a/b)^E < x(b) + 1
          if (x[a] >= x[b] + 1) need = std::max(need, (lx[a] - lx_plus[b]) / dl);
          // x(a) <= ceil(x(b)(b/a)^E)  <=>  x(b)(b/a)^E > x(a) - 1
          if (x[a] - 1 > x[b]) need = std::max(need, (lx_minus[a] - lx[b]) / dl);
        }
      }
    }
  }
  return need;
}

long sandwich_violations(const DiscreteDemandTable& t, double E) {
  const PriceGrid& g = t.grid;
  long bad = 0;
  for (int i = 0; i < g.n(); ++i) {
    for (std::size_t base : line_starts(g, i)) {
      const auto x = read_line<std::int64_t>(g, base, i, [&](std::size_t c) { return t.at(c, i); });
      for (std::size_t a = 0; a < x.size(); ++a) {
        if (x[a] < 1) continue;
        const double pa = static_cast<double>(g.lo[i] + static_cast<std::int64_t>(a));
        for (std::size_t b = a + 1; b < x.size(); ++b) {
          if (x[b] < 1) continue;
          const double pb = static_cast<double>(g.lo[i] + static_cast<std::int64_t>(b));
          const double lower = std::floor(static_cast<double>(x[a]) * std::pow(pa / pb, E));
          const double upper = std::ceil(static_cast<double>(x[b]) * std::pow(pb / pa, E));
          if (lower > static_cast<double>(x[b])) ++bad;
          if (static_cast<double>(x[a]) > upper) ++bad;
        }
      }
    }
  }
  return bad;
}

DiscreteDemandTable discretize_market(const MarketSpec& spec, const PriceGrid& grid,
                                      DiscretizeOptions opt) {
  validate(spec);
  if (grid.n() != spec.n()) throw DomainError("grid dimension does not match the market");
  const int n = spec.n();
  const double M = spec.money_supply;
  std::vector<std::int64_t> floor_x(grid.cells() * n), repaired;
  if (opt.repair) repaired.resize(floor_x.size());

  std::vector<int> order(n);
  for (std::size_t c = 0; c < grid.cells(); ++c) {
    const IVec p = grid.prices(c);
    const Vec x = eval_demand(spec, as_vec(p));
    double left = M;
    std::vector<double> frac(n);
    for (int i = 0; i < n; ++i) {
      // Guard against representation error just below an integer.
      const double f = std::floor(x[i] * (1.0 + 1e-12));
      floor_x[c * n + i] = static_cast<std::int64_t>(f);
      frac[i] = x[i] - f;
      left -= static_cast<double>(p[i]) * f;
    }
    if (!opt.repair) continue;
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return frac[a] > frac[b]; });
    for (int i = 0; i < n; ++i) repaired[c * n + i] = floor_x[c * n + i];
    for (int i : order) {
      if (frac[i] <= 1e-12) break;
      if (static_cast<double>(p[i]) <= left + 1e-9 * M) {
        repaired[c * n + i] += 1;
        left -= static_cast<double>(p[i]);
      }
    }
  }

  const double E_family = spec.elasticity();
  DiscreteDemandTable t;
  if (opt.repair) {
    t = make_table(grid, repaired, std::max(1.0, E_family), M);
    if (discrete_wgs_violations(t, 1).empty()) {
      t.repaired = repaired != floor_x;
    } else {
      t = make_table(grid, floor_x, std::max(1.0, E_family), M);
      t.repair_reverted = true;
    }
  } else {
    t = make_table(grid, floor_x, std::max(1.0, E_family), M);
  }

  if (!t.repaired) {
    const auto bad = discrete_wgs_violations(t, 8);
    if (!bad.empty()) {
      std::string msg = "table violates Discrete WGS:";
      for (const auto& v : bad) msg += "\n  " + v.describe();
      throw DiscreteConstructionError(msg);
    }
  }
  const double need = minimal_sandwich_elasticity(t);
  if (need >= t.E) t.E = need * (1.0 + 1e-9) + 1e-12;
  return t;
}

VirtualDemandTable build_virtual_demands(const DiscreteDemandTable& table) {
  const PriceGrid& g = table.grid;
  const int n = g.n();
  VirtualDemandTable v;
  v.grid = g;
  v.y.assign(g.cells() * n, kNaN);
  v.m_prime.assign(g.cells() * n, kNaN);
  std::vector<double> y_line(g.cells() * n, kNaN);

  for (int i = 0; i < n; ++i) {
    const auto si = g.stride(i);
    const std::int64_t lo = g.lo[i];
    for (std::size_t base : line_starts(g, i)) {
      const auto x = read_line<std::int64_t>(g, base, i, [&](std::size_t c) { return table.at(c, i); });
      const std::size_t L = x.size();
      auto price = [&](std::size_t j) { return static_cast<double>(lo + static_cast<std::int64_t>(j)); };
      auto m = [&](std::size_t j) { return price(j) * static_cast<double>(x[j]); };
      std::vector<double> yl(L, kNaN), ml(L, kNaN);

      // Greedy prefix minima of nonzero spending.
      std::vector<std::size_t> seq;
      for (std::size_t j = 0; j < L; ++j) {
        if (x[j] <= 0) continue;
        if (seq.empty() || m(j) <= m(seq.back())) seq.push_back(j);
      }
      // Points before the first term have zero demand and stay undefined.
      for (std::size_t a = 0; a < seq.size(); ++a) {
        const std::size_t la = seq[a];
        ml[la] = m(la);
        yl[la] = static_cast<double>(x[la]);
        if (a + 1 == seq.size()) {
          for (std::size_t j = la + 1; j < L; ++j) {
            if (x[j] <= 0) continue;
            ml[j] = m(la);
            yl[j] = m(la) / price(j);
          }
          break;
        }
        const std::size_t k = seq[a + 1];
        if (k == la + 1) continue;
        auto flat = [&](std::size_t from, std::size_t to) {  // inclusive range
          for (std::size_t j = from; j <= to; ++j) {
            ml[j] = m(la);
            yl[j] = m(la) / price(j);
          }
        };
        if (m(la) == m(k) || x[k - 1] >= x[k] + 2) {
          flat(la + 1, k - 1);
          continue;
        }
        std::size_t h = la;
        for (std::size_t j = la + 1; j < k; ++j)
          if (x[j] < x[j - 1]) h = j;
        if (h > la) flat(la + 1, h);
        if (h + 1 >= k) continue;
        const double yh = m(la) / price(h);
        const double yk = static_cast<double>(x[k]);
        const double c = std::log(yh / yk) / std::log(price(k) / price(h));
        InterpolatedRun run;
        run.good = i;
        run.slice = g.prices(base);
        run.h = lo + static_cast<std::int64_t>(h);
        run.k = lo + static_cast<std::int64_t>(k);
        run.c = c;
        v.runs.push_back(std::move(run));
        for (std::size_t j = h + 1; j < k; ++j) {
          yl[j] = yh * std::pow(price(h) / price(j), c);
          ml[j] = price(j) * yl[j];
        }
      }
      for (std::size_t j = 0; j < L; ++j) {
        const std::size_t c = base + j * si;
        y_line[c * n + i] = yl[j];
        v.m_prime[c * n + i] = ml[j];
      }
    }
  }

  // Closure: y_i(p) = max{y'_i(p), y_i(p - e_k) : k != i}.  Cells are visited in
  // increasing index order, so p - e_k is final when p is reached.
  for (std::size_t c = 0; c < g.cells(); ++c) {
    for (int i = 0; i < n; ++i) {
      double best = y_line[c * n + i];
      for (int k = 0; k < n; ++k) {
        if (k == i || g.price(c, k) == g.lo[k]) continue;
        const double prev = v.y[(c - g.stride(k)) * n + i];
        if (std::isnan(prev)) continue;
        if (std::isnan(best) || prev > best) best = prev;
      }
      v.y[c * n + i] = best;
      if (std::isnan(best)) ++v.undefined_points;
    }
  }
  return v;
}

VirtualLemmaReport check_virtual_lemmas(const DiscreteDemandTable& t, const VirtualDemandTable& v,
                                        std::int64_t full_d_line) {
  const PriceGrid& g = t.grid;
  const int n = g.n();
  if (v.grid.lo != g.lo || v.grid.hi != g.hi) throw DomainError("tables are on different grids");
  VirtualLemmaReport r;
  auto fail = [&](LemmaCheck& chk, std::size_t cell, int i, const std::string& what) {
    if (chk.violations++ == 0)
      chk.first = "good " + std::to_string(i) + " at " + fmt_prices(g.prices(cell)) + ": " + what;
  };
  const double two_e = 2.0 * t.E;

  for (std::size_t c = 0; c < g.cells(); ++c) {
    for (int i = 0; i < n; ++i) {
      const double x = static_cast<double>(t.at(c, i));
      const double y = v.at(c, i);
      if (x >= 1.0) {
        ++r.within_one.checked;
        if (std::isnan(y) || !(x - 1.0 < y && y <= x * (1.0 + 1e-12)))
          fail(r.within_one, c, i, "x=" + std::to_string(x) + " y=" + std::to_string(y));
      }
      if (std::isnan(y)) continue;
      for (int k = 0; k < n; ++k) {
        if (g.price(c, k) == g.hi[k]) continue;
        const double up = v.at(c + g.stride(k), i);
        if (k == i) {
          if (std::isnan(up)) continue;
          const double p = static_cast<double>(g.price(c, i));
          ++r.spending_monotone.checked;
          if ((p + 1.0) * up > p * y * (1.0 + 1e-12))
            fail(r.spending_monotone, c, i, "spending rises with own price");
        } else {
          ++r.wgs.checked;
          if (std::isnan(up) || up < y * (1.0 - 1e-12))
            fail(r.wgs, c, i, "demand falls when good " + std::to_string(k) + " gets dearer");
        }
      }
    }
  }

  for (int i = 0; i < n; ++i) {
    const bool all_d = g.extent(i) <= full_d_line;
    for (std::size_t base : line_starts(g, i)) {
      const auto y = read_line<double>(g, base, i, [&](std::size_t c) { return v.at(c, i); });
      for (std::size_t a = 0; a < y.size(); ++a) {
        if (std::isnan(y[a])) continue;
        const double p = static_cast<double>(g.lo[i] + static_cast<std::int64_t>(a));
        const std::size_t last = all_d ? y.size() - 1 : std::min(a + 1, y.size() - 1);
        for (std::size_t b = a + 1; b <= last; ++b) {
          if (std::isnan(y[b])) continue;
          const double d = static_cast<double>(b - a);
          ++r.elasticity.checked;
          if (y[a] > y[b] * std::pow(1.0 + d / p, two_e) * (1.0 + 1e-12))
            fail(r.elasticity, base + a * g.stride(i), i,
                 "exceeds the 2E bound at step " + std::to_string(b - a));
        }
      }
    }
  }
  return r;
}

void write_table_csv(std::ostream& out, const DiscreteDemandTable& t, const VirtualDemandTable& v) {
  const int n = t.n();
  for (int i = 0; i < n; ++i) out << (i ? "," : "") << 'p' << i;
  for (int i = 0; i < n; ++i) out << ",x" << i;
  for (int i = 0; i < n; ++i) out << ",y" << i;
  for (int i = 0; i < n; ++i) out << ",m" << i;
  out << '\n';
  char buf[64];
  auto num = [&](double d) -> const char* {
    if (std::isnan(d)) return "";
    std::snprintf(buf, sizeof buf, "%.12g", d);
    return buf;
  };
  for (std::size_t c = 0; c < t.grid.cells(); ++c) {
    for (int i = 0; i < n; ++i) out << (i ? "," : "") << t.grid.price(c, i);
    for (int i = 0; i < n; ++i) out << ',' << t.at(c, i);
    for (int i = 0; i < n; ++i) out << ',' << num(v.at(c, i));
    for (int i = 0; i < n; ++i) out << ',' << num(v.m_prime[c * n + i]);
    out << '\n';
  }
}

IndivisibilityParams indivisibility(const MarketSpec& spec) {
  validate(spec);
  double total = 0.0;
  double s = std::numeric_limits<double>::infinity();
  for (int i = 0; i < spec.n(); ++i) {
    const double w = spec.supplies[i];
    if (w < 1.0 || w != std::floor(w)) throw DomainError("discrete supplies must be positive integers");
    total += w;
    s = std::min(s, w);
  }
  return {spec.money_supply / total, s};
}

MarketFacts market_facts(const MarketSpec& spec) {
  const auto ip = indivisibility(spec);
  return {ip.s, ip.r, spec.money_supply};
}

std::vector<double> DiscreteRunResult::daily_ratios() const {
  std::vector<double> out;
  for (std::size_t k = 1; k < days.size(); ++k)
    out.push_back(days[k - 1].phi > 0.0 ? days[k].phi / days[k - 1].phi : 1.0);
  return out;
}

DiscreteRunResult run_discrete(const MarketSpec& spec, const ProtocolConfig& cfg,
                               const DiscretePlan& plan, double horizon_days) {
  const int n = spec.n();
  const MarketFacts facts = market_facts(spec);
  if (static_cast<int>(plan.p0.size()) != n) throw DomainError("p0 must cover every good");
  if (plan.s_star.size() != n) throw DomainError("s_star must cover every good");
  validate_schedule(plan.schedule, n, 1.0);
  if (!(horizon_days > 0.0)) throw DomainError("horizon must be positive");
  const std::int64_t floor_price = min_discrete_price(cfg.lambda);
  for (auto p : plan.p0)
    if (p < floor_price) throw DomainError("discrete price below ceil(1/lambda)");

  IVec stock0 = plan.stock0;
  if (stock0.empty())
    for (int i = 0; i < n; ++i) stock0.push_back(static_cast<std::int64_t>(std::llround(plan.s_star[i])));
  if (static_cast<int>(stock0.size()) != n) throw DomainError("stock0 must cover every good");

  struct State {
    std::int64_t p;
    double w;
    double ideal = 0.0;  // cumulative ideal demand since 0
    double tau = 0.0;
    double ideal_tau = 0.0;
    std::int64_t sold_tau = 0;
    double next = 0.0;
  };
  std::vector<State> g(n);
  for (int i = 0; i < n; ++i) {
    g[i].p = plan.p0[i];
    g[i].w = spec.supplies[i];
    g[i].next = plan.schedule.first[i];
  }
  auto prices = [&] {
    Vec p(n);
    for (int i = 0; i < n; ++i) p[i] = static_cast<double>(g[i].p);
    return p;
  };
  Vec x = eval_demand(spec, prices());
  double t = 0.0;

  auto sold = [&](int i) { return static_cast<std::int64_t>(std::floor(g[i].ideal)); };
  auto delivered = [&](int i) { return static_cast<std::int64_t>(std::floor(g[i].w * t + 1e-9)); };
  auto stock_actual = [&](int i) { return stock0[i] + delivered(i) - sold(i); };
  auto stock_ideal = [&](int i) { return static_cast<double>(stock0[i]) + g[i].w * t - g[i].ideal; };

  auto snapshots = [&] {
    Snapshots s(n);
    for (int i = 0; i < n; ++i) {
      auto& q = s[i];
      q.p = static_cast<double>(g[i].p);
      q.x = x[i];
      q.x_bar = t > g[i].tau ? (g[i].ideal - g[i].ideal_tau) / (t - g[i].tau) : x[i];
      q.tau = g[i].tau;
      q.t = t;
      q.w = g[i].w;
      q.w_tilde = target_demand(g[i].w, cfg.kappa, stock_ideal(i), plan.s_star[i]).w_tilde;
    }
    return s;
  };
  auto potential = [&] { return phi_for_mode(snapshots(), cfg, Mode::discrete); };

  DiscreteRunResult res;
  res.phi_threshold = discrete_phi_threshold(cfg, facts);
  const double factor = 1.0 - cfg.kappa * (cfg.alpha2 - 1.0) / 8.0;
  auto emit = [&](const EventRecord& e) {
    if (plan.csv) write_csv_row(*plan.csv, e);
    if (plan.keep_events) res.events.push_back(e);
  };
  if (plan.csv) write_csv_header(*plan.csv);

  auto sample_day = [&] {
    const auto pb = potential();
    DiscreteDay d{t, pb.phi_total, pb.S_total, pb.phi_total >= res.phi_threshold};
    if (!res.days.empty()) {
      const auto& prev = res.days.back();
      const double ratio = prev.phi > 0.0 ? d.phi / prev.phi : 1.0;
      res.max_ratio = std::max(res.max_ratio, ratio);
      if (prev.above_threshold) {
        res.max_ratio_above_threshold = std::max(res.max_ratio_above_threshold, ratio);
        if (ratio > factor + 1e-9) ++res.contraction_failures;
      }
    }
    if (d.above_threshold) ++res.days_above_threshold;
    res.days.push_back(d);
    EventRecord e;
    e.t = t;
    e.kind = EventKind::day_boundary;
    e.phi_before = e.phi_after = d.phi;
    e.S = d.S;
    emit(e);
  };
  sample_day();

  double next_day = 1.0;
  while (t < horizon_days) {
    double t_next = std::min(next_day, horizon_days);
    for (const auto& s : g) t_next = std::min(t_next, s.next);
    const double dt = t_next - t;
    for (int i = 0; i < n; ++i) g[i].ideal += x[i] * dt;
    t = t_next;

    for (int i = 0; i < n; ++i) {
      const double gap = std::abs(static_cast<double>(stock_actual(i)) - stock_ideal(i));
      res.max_stock_gap = std::max(res.max_stock_gap, gap);
    }
    if (t >= next_day) {
      sample_day();
      next_day += 1.0;
    }

    for (int i = 0; i < n; ++i) {
      if (g[i].next > t) continue;
      auto& s = g[i];
      const auto before = potential();
      const std::int64_t sold_now = sold(i);
      const double elapsed = t - s.tau;
      const double x_bar_actual = static_cast<double>(sold_now - s.sold_tau) / elapsed;
      const auto target = target_demand(s.w, cfg.kappa, static_cast<double>(stock_actual(i)),
                                        plan.s_star[i]);
      const double z = x_bar_actual - target.w_tilde;
      const auto up = discrete_update(s.p, z, s.w, cfg.lambda, cfg.kappa);

      const double raw = static_cast<double>(s.p) * cfg.lambda * std::clamp(z / s.w, -1.0, 1.0);
      const auto step = static_cast<std::int64_t>(std::trunc(raw * (1.0 + 1e-12)));
      const bool expect_null = std::abs(z) < 2.0 * (1.0 + cfg.kappa) || step == 0 ||
                               (step < 0 && s.p == floor_price);
      if (expect_null != up.null_update) ++res.null_rule_mismatches;

      const std::int64_t p_before = s.p;
      ++res.updates;
      if (up.null_update) ++res.null_updates;
      if (up.price != s.p) ++res.price_changes;
      s.p = up.price;
      s.tau = t;
      s.ideal_tau = s.ideal;
      s.sold_tau = sold_now;
      s.next = t + plan.schedule.period[i];
      x = eval_demand(spec, prices());
      const auto after = potential();

      EventRecord e;
      e.t = t;
      e.kind = up.null_update ? EventKind::null_update : EventKind::regular_update;
      e.good = i;
      e.p_before = static_cast<double>(p_before);
      e.p_after = static_cast<double>(s.p);
      e.x = x[i];
      e.x_bar = x_bar_actual;
      e.z_bar_true = z;
      e.z_bar_reported = z;
      e.stock = static_cast<double>(stock_actual(i));
      e.w_tilde = target.w_tilde;
      e.phi_before = before.phi_total;
      e.phi_after = after.phi_total;
      e.S = after.S_total;
      emit(e);
    }
  }

  for (int i = 0; i < n; ++i) {
    res.final_prices.push_back(g[i].p);
    res.final_stocks.push_back(stock_actual(i));
  }
  return res;
}

LowerBoundResult lower_bound_market(double E, double r, double M, std::optional<std::int64_t> window) {
  if (!(E > 1.0)) throw DomainError("lower-bound market needs E > 1");
  if (!(r >= 1.0)) throw DomainError("lower-bound market needs r >= 1");
  if (!(M > 0.0)) throw DomainError("money must be positive");
  LowerBoundResult res;
  res.E = E;
  res.r = r;
  res.M = M;
  res.p_ref = r + 0.5;
  const double rho = 1.0 - 1.0 / E;
  // Utility (x (r + 1/2))^rho + n^rho: weight (r + 1/2)^rho on the item in the
  // sum-of-powers form, so spending splits evenly at price r + 1/2.
  Vec weights(2);
  weights << std::pow(res.p_ref, rho), 1.0;
  Vec supplies(2);
  supplies << M / (2.0 * r + 1.0), M / 2.0;
  res.spec = make_market(supplies, {BuyerSpec::ces(rho, weights, M)}, {"item", "money"});

  const std::int64_t W = window.value_or(static_cast<std::int64_t>(std::ceil(r)));
  const auto r_floor = static_cast<std::int64_t>(std::floor(r));
  const std::int64_t lo = std::max<std::int64_t>(1, r_floor - W);
  const std::int64_t hi = r_floor + 1 + W;
  res.min_misspending = std::numeric_limits<double>::infinity();
  for (std::int64_t p = lo; p <= hi; ++p) {
    Vec prices(2);
    prices << static_cast<double>(p), 1.0;
    const Vec x = eval_demand(res.spec, prices);
    const double S = static_cast<double>(p) * std::abs(x[0] - supplies[0]) + std::abs(x[1] - supplies[1]);
    res.sweep.push_back({p, x[0], S});
    if (S < res.min_misspending) {
      res.min_misspending = S;
      res.argmin_price = p;
    }
  }
  res.beta = res.min_misspending * r / (E * M);
  res.certificate_ok = res.min_misspending > 0.0;
  return res;
}

}  // namespace tat
