#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <map>
#include <ostream>
#include <vector>

#include "nsq/model.hpp"

namespace nsq {

struct Transition {
  std::size_t from = 0;
  std::size_t to = 0;
  double rate = 0.0;
};

/// CTMC generator restricted to a truncation box. Transitions leaving the box
/// are dropped, so `exit_rates` only counts transitions that stay inside.
template <class State>
struct TruncatedGenerator {
  std::vector<State> states;
  std::map<State, std::size_t> index;
  /// Sorted by (from, to); parallel transitions are merged.
  std::vector<Transition> rates;
  std::vector<double> exit_rates;
  Truncation truncation;

  std::size_t size() const { return states.size(); }
  std::size_t index_of(const State& s) const;
};

using OneSidedGenerator = TruncatedGenerator<OneSidedState>;
using TwoSidedGenerator = TruncatedGenerator<TwoSidedState>;

/// States (m, n) with m <= max_m and n <= max_n. Both bounds must be >= 2.
OneSidedGenerator build_generator_one_sided(const NSystemParams& params, int max_m, int max_n);

/// Empty, left/right (m <= max_m, n <= max_n) and both (i <= max_i,
/// j <= max_j). Every bound must be >= 2; needs theta_s > 0 and theta_d > 0.
TwoSidedGenerator build_generator_two_sided(const NSystemParams& params, const Truncation& bounds);

enum class SolveMethod { automatic, direct, power };

struct SolverOptions {
  SolveMethod method = SolveMethod::automatic;
  double tol = 1e-12;
  std::int64_t max_iterations = 10'000'000;
  /// `automatic` switches from the direct solver to power iteration above this.
  std::size_t direct_limit = 40'000;
};

/// Reachability from the empty state, forwards and backwards.
template <class State>
bool is_irreducible(const TruncatedGenerator<State>& gen);

/// Stationary vector of the truncated chain. Direct mode factorizes Q^T with
/// one equation replaced by the normalization; power mode iterates the
/// uniformized chain P = I + Q / (1.01 max exit rate).
///
/// Throws std::runtime_error on a reducible generator, an oversized direct
/// solve, or power iteration hitting its iteration cap.
template <class State>
StationaryDistribution<State> solve_stationary(const TruncatedGenerator<State>& gen,
                                               const SolverOptions& options = {});

/// ||pi Q||_inf / ||pi||_inf for a distribution on the generator's states.
template <class State>
double stationary_residual(const TruncatedGenerator<State>& gen,
                           const StationaryDistribution<State>& dist);

/// Half the L1 distance between two probability maps; keys missing from one
/// side count as zero.
template <class Key>
double total_variation(const std::map<Key, double>& lhs, const std::map<Key, double>& rhs) {
  double sum = 0.0;
  auto a = lhs.begin();
  auto b = rhs.begin();
  while (a != lhs.end() || b != rhs.end()) {
    if (b == rhs.end() || (a != lhs.end() && a->first < b->first)) {
      sum += std::abs(a->second);
      ++a;
    } else if (a == lhs.end() || b->first < a->first) {
      sum += std::abs(b->second);
      ++b;
    } else {
      sum += std::abs(a->second - b->second);
      ++a;
      ++b;
    }
  }
  return 0.5 * sum;
}

template <class State>
double total_variation(const StationaryDistribution<State>& lhs,
                       const StationaryDistribution<State>& rhs) {
  return total_variation(lhs.probabilities, rhs.probabilities);
}

/// `from,to,rate` rows, one per merged transition.
template <class State>
void write_generator_csv(std::ostream& out, const TruncatedGenerator<State>& gen);

}  // namespace nsq
