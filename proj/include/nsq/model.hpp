#pragma once

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>

namespace nsq {

/// Rates of an N-system matching queue.
///
/// Supply type 1 is flexible (serves both demand types), supply type 2 is
/// inflexible (serves type-2 demand only). Demand type 1 can only be served by
/// flexible supply. `theta_d` is ignored by the one-sided system.
struct NSystemParams {
  double lambda1 = 0.0;
  double lambda2 = 0.0;
  double mu1 = 0.0;
  double mu2 = 0.0;
  double theta_s = 0.0;
  double theta_d = 0.0;

  double supply_rate() const { return lambda1 + lambda2; }
  double demand_rate() const { return mu1 + mu2; }

  /// Probability that an arriving supply unit is flexible.
  double gamma_s() const { return lambda1 / (lambda1 + lambda2); }
  /// Probability that an arriving demand unit is of type 2.
  double gamma_d() const { return mu2 / (mu1 + mu2); }

  bool operator==(const NSystemParams&) const = default;
};

/// Returns `params` unchanged, or throws std::invalid_argument naming the
/// first violated constraint.
NSystemParams validate(const NSystemParams& params);

/// Stability of the one-sided system without reneging:
/// lambda1 + lambda2 < mu1 + mu2 and lambda2 < mu2. Ignores theta_s.
bool stability_check(const NSystemParams& params);

/// Exchanges the roles of the two sides. Flexible supply maps onto type-2
/// demand and inflexible supply onto type-1 demand, so the right-queue regime
/// of `p` behaves like the left-queue regime of `mirror(p)`.
NSystemParams mirror(const NSystemParams& params);

enum class SystemKind { one_sided, two_sided };

std::string to_string(SystemKind kind);
SystemKind parse_system_kind(const std::string& text);

/// Thrown when a normalizing constant does not exist (no reneging and the
/// stability conditions fail).
class DivergenceError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Parsimonious one-sided state: `m` revealed inflexible supplies at the head
/// of the queue followed by `n` supplies of unknown type.
struct OneSidedState {
  int m = 0;
  int n = 0;

  auto operator<=>(const OneSidedState&) const = default;
};

enum class Regime : std::uint8_t { empty = 0, left = 1, right = 2, both = 3 };

/// State of the two-sided system. Left and right carry a parsimonious (m, n)
/// pair for the queued side; both carries (i inflexible supplies, j type-1
/// demands). Construction goes through the named factories, which reject
/// states that would alias the empty system.
class TwoSidedState {
 public:
  TwoSidedState() = default;

  static TwoSidedState empty() { return {}; }
  static TwoSidedState left(int m, int n);
  static TwoSidedState right(int m, int n);
  static TwoSidedState both(int i, int j);

  Regime regime() const { return regime_; }
  /// m for left/right, i for both.
  int first() const { return first_; }
  /// n for left/right, j for both.
  int second() const { return second_; }

  int supply_count() const;
  int demand_count() const;

  auto operator<=>(const TwoSidedState&) const = default;

 private:
  TwoSidedState(Regime regime, int first, int second)
      : regime_(regime), first_(first), second_(second) {}

  Regime regime_ = Regime::empty;
  int first_ = 0;
  int second_ = 0;
};

std::string to_string(Regime regime);
std::string to_string(const OneSidedState& s);
std::string to_string(const TwoSidedState& s);

/// Box bounds of a truncated state space. One-sided distributions use only
/// max_m and max_n; two-sided ones apply (max_m, max_n) to both the left and
/// right regimes and (max_i, max_j) to the both-queues regime.
struct Truncation {
  int max_m = 0;
  int max_n = 0;
  int max_i = 0;
  int max_j = 0;

  bool operator==(const Truncation&) const = default;
};

template <class State>
struct StationaryDistribution {
  std::map<State, double> probabilities;
  Truncation truncation;
  /// Probability of the empty state.
  double normalizer = 0.0;
  /// Upper bound on the probability mass outside the truncation box.
  double tail_mass_bound = 0.0;

  double probability(const State& s) const {
    auto it = probabilities.find(s);
    return it == probabilities.end() ? 0.0 : it->second;
  }

  std::optional<double> find(const State& s) const {
    auto it = probabilities.find(s);
    if (it == probabilities.end()) return std::nullopt;
    return it->second;
  }

  double total() const {
    double sum = 0.0;
    for (const auto& [s, p] : probabilities) sum += p;
    return sum;
  }
};

using OneSidedDistribution = StationaryDistribution<OneSidedState>;
using TwoSidedDistribution = StationaryDistribution<TwoSidedState>;

inline OneSidedState empty_state(const OneSidedDistribution&) { return {}; }
inline TwoSidedState empty_state(const TwoSidedDistribution&) {
  return TwoSidedState::empty();
}

}  // namespace nsq
