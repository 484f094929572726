#pragma once

#include <cstdint>
#include <vector>

namespace tat {

// Regular update cadence.  Good i first updates at first[i], then every
// period[i] days after its latest update of any kind.
struct ScheduleSpec {
  std::vector<double> period;
  std::vector<double> first;
  bool synchronous = false;
  std::uint64_t seed = 0;
};

// Periods drawn from [max(1/b, 1/2), 1] with seeded jitter; first updates
// staggered by good index.
ScheduleSpec make_schedule(int n, double b, std::uint64_t seed);
// Every good updates at each integer day.
ScheduleSpec synchronous_schedule(int n);
// Throws DomainError unless every period lies in [1/b, 1] and 0 < first <= period.
void validate_schedule(const ScheduleSpec& s, int n, double b);

}  // namespace tat
