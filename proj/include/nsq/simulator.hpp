#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <map>
#include <span>
#include <variant>
#include <vector>

#include "nsq/model.hpp"

namespace nsq {

enum class SimMode { parsimonious, physical };

std::string to_string(SimMode mode);
SimMode parse_sim_mode(const std::string& text);

struct SimConfig {
  /// Number of events (arrivals and abandonments) to simulate. Ignored when
  /// horizon_time is positive.
  std::int64_t horizon_events = 1'000'000;
  /// Simulated-time budget; 0 means "use horizon_events".
  double horizon_time = 0.0;
  std::uint64_t seed = 1;
  /// Leading share of the horizon (events or time, matching the budget kind)
  /// excluded from occupancy and observed tallies.
  double warmup_fraction = 0.2;
  SimMode mode = SimMode::parsimonious;
  SystemKind system = SystemKind::one_sided;
};

/// Throws std::invalid_argument for a non-positive horizon or a warmup
/// fraction outside [0, 1).
void validate(const SimConfig& cfg);

/// Supply and demand head counts, the occupancy key of the physical system.
struct CountPair {
  std::int64_t supply = 0;
  std::int64_t demand = 0;

  auto operator<=>(const CountPair&) const = default;
};

struct StateVisits {
  double time = 0.0;      ///< simulated time spent in the state after warmup
  double fraction = 0.0;  ///< time / observed_time
  std::int64_t departures = 0;
};

/// Index 0 is flexible supply / type-1 demand, index 1 inflexible supply /
/// type-2 demand. In parsimonious mode the type of a consumed or abandoning
/// supply of unknown type is drawn with its conditional probability, so only
/// the per-side totals satisfy exact conservation there.
struct EventTallies {
  std::array<std::int64_t, 2> supply_arrivals{};
  std::array<std::int64_t, 2> demand_arrivals{};
  /// [supply type][demand type]
  std::array<std::array<std::int64_t, 2>, 2> matches{};
  std::array<std::int64_t, 2> supply_abandonments{};
  std::array<std::int64_t, 2> demand_abandonments{};
  /// Demand turned away on arrival (one-sided system only).
  std::array<std::int64_t, 2> demand_lost{};
  std::int64_t final_supply = 0;
  std::int64_t final_demand = 0;

  std::int64_t total_supply_arrivals() const { return supply_arrivals[0] + supply_arrivals[1]; }
  std::int64_t total_demand_arrivals() const { return demand_arrivals[0] + demand_arrivals[1]; }
  std::int64_t total_matches() const;
  std::int64_t total_supply_abandonments() const {
    return supply_abandonments[0] + supply_abandonments[1];
  }
  std::int64_t total_demand_abandonments() const {
    return demand_abandonments[0] + demand_abandonments[1];
  }
  std::int64_t total_demand_lost() const { return demand_lost[0] + demand_lost[1]; }

  /// arrivals = matches + abandonments + final count, per side. Only
  /// meaningful for a run that starts empty.
  bool supply_conserved() const;
  bool demand_conserved() const;

  bool operator==(const EventTallies&) const = default;
};

template <class Key>
using Occupancy = std::map<Key, StateVisits>;

struct SimulationSummary {
  SimConfig config;
  /// Parsimonious one-sided, parsimonious two-sided, or physical counts.
  std::variant<Occupancy<OneSidedState>, Occupancy<TwoSidedState>, Occupancy<CountPair>> occupancy;
  EventTallies events;    ///< whole run, starting from the empty system
  EventTallies observed;  ///< events after warmup; final counts are end-of-run
  double elapsed = 0.0;
  double observed_time = 0.0;
  std::int64_t event_count = 0;
};

/// Exact simulation of the parsimonious Markov chain. One-sided runs need
/// theta_s > 0 or a stable no-reneging system; two-sided runs need
/// theta_s > 0 and theta_d > 0.
SimulationSummary simulate_parsimonious(const NSystemParams& params, const SimConfig& cfg);

/// Agent-level FCFS simulation with individual exponential patience.
SimulationSummary simulate_physical(const NSystemParams& params, const SimConfig& cfg);

SimulationSummary simulate(const NSystemParams& params, const SimConfig& cfg);

/// Seed of replication `r`: splitmix64 of `seed + r * 0x9E3779B97F4A7C15`.
std::uint64_t replication_seed(std::uint64_t seed, int replication);

/// Runs independent replications (seeded by replication_seed) and returns
/// them in replication order.
std::vector<SimulationSummary> replicate(const NSystemParams& params, const SimConfig& cfg,
                                         int replications);

/// Occupancy fractions keyed by state.
template <class Key>
std::map<Key, double> occupancy_fractions(const SimulationSummary& summary) {
  std::map<Key, double> out;
  for (const auto& [k, v] : std::get<Occupancy<Key>>(summary.occupancy)) out.emplace(k, v.fraction);
  return out;
}

/// Time-weighted pooling of replications of the same kind.
SimulationSummary pool(std::span<const SimulationSummary> runs);

struct MeanAndError {
  double mean = 0.0;
  double standard_error = 0.0;
};

/// Sample mean and standard error of independent replicate values.
MeanAndError mean_and_standard_error(std::span<const double> values);

}  // namespace nsq
