#pragma once

#include "tatonnement/market.hpp"

#include <random>
#include <vector>

namespace testkit {

inline tat::Vec vec(std::initializer_list<double> v) {
  tat::Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

inline std::vector<double> stdvec(const tat::Vec& v) { return {v.data(), v.data() + v.size()}; }

inline tat::Vec uniform_vec(std::mt19937_64& rng, int n, double lo, double hi) {
  std::uniform_real_distribution<double> u(lo, hi);
  tat::Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

// rho < 0 means Cobb-Douglas; otherwise every buyer is CES with that rho.
inline tat::MarketSpec random_market(std::mt19937_64& rng, int n, int buyers, double rho) {
  std::vector<tat::BuyerSpec> bs;
  std::uniform_real_distribution<double> money(1.0, 20.0);
  for (int j = 0; j < buyers; ++j) {
    tat::Vec a = uniform_vec(rng, n, 0.2, 2.0);
    if (rho < 0.0)
      bs.push_back(tat::BuyerSpec::cobb_douglas(a, money(rng)));
    else
      bs.push_back(tat::BuyerSpec::ces(rho, a, money(rng)));
  }
  return tat::make_market(uniform_vec(rng, n, 0.5, 3.0), bs);
}

}  // namespace testkit
