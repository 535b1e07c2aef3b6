#pragma once

#include <random>
#include <vector>

#include "nsq/model.hpp"

namespace nsq::testing {

/// Reproducible random parameter sets with reneging on both sides.
inline std::vector<NSystemParams> random_params(int count, std::uint64_t seed = 20240611) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> rate(0.2, 3.0);
  std::uniform_real_distribution<double> patience(0.1, 2.0);
  std::vector<NSystemParams> out;
  for (int i = 0; i < count; ++i) {
    NSystemParams p;
    p.lambda1 = rate(rng);
    p.lambda2 = rate(rng);
    p.mu1 = rate(rng);
    p.mu2 = rate(rng);
    p.theta_s = patience(rng);
    p.theta_d = patience(rng);
    out.push_back(p);
  }
  return out;
}

inline const std::vector<NSystemParams>& reference_params() {
  static const std::vector<NSystemParams> sets{
      {1.0, 1.0, 2.0, 2.0, 1.0, 1.0},
      {2.0, 0.5, 1.0, 3.0, 0.3, 0.5},
      {0.7, 0.7, 0.7, 0.7, 2.0, 1.0},
  };
  return sets;
}

}  // namespace nsq::testing
