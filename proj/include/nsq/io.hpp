#pragma once

#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>

#include <json.hpp>

#include "nsq/balance_oracle.hpp"
#include "nsq/metrics.hpp"
#include "nsq/model.hpp"
#include "nsq/simulator.hpp"

namespace nsq {

using Json = nlohmann::json;

Json to_json(const NSystemParams& params);
Json to_json(const OneSidedState& s);
Json to_json(const TwoSidedState& s);
Json to_json(const CountPair& c);
Json to_json(const Truncation& t, SystemKind system);
Json to_json(const MetricsReport& report);
Json to_json(const EventTallies& tallies);
Json to_json(const SimConfig& cfg);
Json to_json(const SimulationSummary& summary);

/// {"system", "params", "truncation", "normalizer", "tail_mass_bound",
///  "tolerance", "states": [{"state": [...], "p": x}, ...]}, states in
/// lexicographic order.
template <class State>
Json distribution_json(const StationaryDistribution<State>& dist, const NSystemParams& params,
                       double tolerance);
Json distribution_json(const AnyDistribution& dist, const NSystemParams& params, double tolerance);

/// Pretty-printed JSON followed by a newline.
std::string dump(const Json& json);

/// One row per state with 17 significant digits.
void write_distribution_csv(std::ostream& out, const AnyDistribution& dist);
void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows);

/// Index-to-state table accompanying a generator CSV dump.
template <class State>
Json generator_header(const TruncatedGenerator<State>& gen, const NSystemParams& params);

/// Parses `key = value` lines; `#` starts a comment. Throws
/// std::invalid_argument on malformed lines, unknown keys or bad numbers.
std::map<std::string, double> parse_config(std::istream& in);

/// Overwrites the fields named in `values`.
void apply_config(NSystemParams& params, const std::map<std::string, double>& values);

/// %.17g formatting.
std::string format_double(double value);

}  // namespace nsq
