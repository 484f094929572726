#include "tatonnement/schedule.hpp"

#include "tatonnement/market.hpp"

#include <algorithm>
#include <random>

namespace tat {

ScheduleSpec make_schedule(int n, double b, std::uint64_t seed) {
  if (n < 1) throw DomainError("schedule needs at least one good");
  if (!(b >= 1.0)) throw DomainError("b must be >= 1");
  ScheduleSpec s;
  s.seed = seed;
  const double lo = std::max(1.0 / b, 0.5);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int i = 0; i < n; ++i) {
    const double period = lo + unit(rng) * (1.0 - lo);
    const double frac = (i + 0.5) / n;
    s.period.push_back(period);
    s.first.push_back(lo + frac * (period - lo));
  }
  return s;
}

ScheduleSpec synchronous_schedule(int n) {
  ScheduleSpec s;
  s.synchronous = true;
  s.period.assign(n, 1.0);
  s.first.assign(n, 1.0);
  return s;
}

void validate_schedule(const ScheduleSpec& s, int n, double b) {
  if (static_cast<int>(s.period.size()) != n || static_cast<int>(s.first.size()) != n)
    throw DomainError("schedule must cover every good");
  for (int i = 0; i < n; ++i) {
    if (s.period[i] > 1.0 || s.period[i] < 1.0 / b - 1e-12)
      throw DomainError("schedule period outside [1/b, 1]");
    if (!(s.first[i] > 0.0) || s.first[i] > s.period[i])
      throw DomainError("first update must lie in (0, period]");
  }
}

}  // namespace tat
