#include "nsq/io.hpp"

#include <cmath>
#include <cstdio>
#include <set>
#include <sstream>
#include <stdexcept>

namespace nsq {

std::string format_double(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

Json to_json(const NSystemParams& p) {
  return Json{{"lambda1", p.lambda1}, {"lambda2", p.lambda2}, {"mu1", p.mu1},
              {"mu2", p.mu2},         {"theta_s", p.theta_s}, {"theta_d", p.theta_d}};
}

Json to_json(const OneSidedState& s) { return Json::array({s.m, s.n}); }

Json to_json(const TwoSidedState& s) {
  if (s.regime() == Regime::empty) return Json::array({"empty"});
  return Json::array({to_string(s.regime()), s.first(), s.second()});
}

Json to_json(const CountPair& c) { return Json::array({c.supply, c.demand}); }

Json to_json(const Truncation& t, SystemKind system) {
  Json j{{"max_m", t.max_m}, {"max_n", t.max_n}};
  if (system == SystemKind::two_sided) {
    j["max_i"] = t.max_i;
    j["max_j"] = t.max_j;
  }
  return j;
}

Json to_json(const MetricsReport& r) {
  auto optional = [](const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); };
  return Json{{"system", to_string(r.system)},
              {"p_empty", r.p_empty},
              {"mean_supply", r.mean_supply},
              {"mean_demand", r.mean_demand},
              {"abandonment_rate_supply", r.abandonment_rate_supply},
              {"abandonment_rate_demand", r.abandonment_rate_demand},
              {"match_throughput", r.match_throughput},
              {"loss_prob_type1_demand", optional(r.loss_prob_type1_demand)},
              {"loss_prob_type2_demand", optional(r.loss_prob_type2_demand)}};
}

Json to_json(const EventTallies& e) {
  return Json{{"supply_arrivals", e.supply_arrivals},
              {"demand_arrivals", e.demand_arrivals},
              {"matches", e.matches},
              {"supply_abandonments", e.supply_abandonments},
              {"demand_abandonments", e.demand_abandonments},
              {"demand_lost", e.demand_lost},
              {"final_supply", e.final_supply},
              {"final_demand", e.final_demand}};
}

Json to_json(const SimConfig& c) {
  return Json{{"horizon_events", c.horizon_events}, {"horizon_time", c.horizon_time},
              {"seed", c.seed},                     {"warmup_fraction", c.warmup_fraction},
              {"mode", to_string(c.mode)},          {"system", to_string(c.system)}};
}

Json to_json(const SimulationSummary& s) {
  Json occupancy = Json::array();
  std::visit(
      [&](const auto& occ) {
        for (const auto& [key, v] : occ)
          occupancy.push_back(Json{{"state", to_json(key)},
                                   {"fraction", v.fraction},
                                   {"time", v.time},
                                   {"departures", v.departures}});
      },
      s.occupancy);
  return Json{{"config", to_json(s.config)},
              {"occupancy", std::move(occupancy)},
              {"events", to_json(s.events)},
              {"observed_events", to_json(s.observed)},
              {"elapsed", s.elapsed},
              {"observed_time", s.observed_time},
              {"event_count", s.event_count}};
}

template <class State>
Json distribution_json(const StationaryDistribution<State>& dist, const NSystemParams& params,
                       double tolerance) {
  constexpr SystemKind system =
      std::is_same_v<State, OneSidedState> ? SystemKind::one_sided : SystemKind::two_sided;
  Json states = Json::array();
  for (const auto& [s, p] : dist.probabilities) states.push_back(Json{{"state", to_json(s)}, {"p", p}});
  return Json{{"system", to_string(system)},
              {"params", to_json(params)},
              {"truncation", to_json(dist.truncation, system)},
              {"normalizer", dist.normalizer},
              {"tail_mass_bound", dist.tail_mass_bound},
              {"tolerance", tolerance},
              {"states", std::move(states)}};
}

template Json distribution_json(const OneSidedDistribution&, const NSystemParams&, double);
template Json distribution_json(const TwoSidedDistribution&, const NSystemParams&, double);

Json distribution_json(const AnyDistribution& dist, const NSystemParams& params, double tolerance) {
  return std::visit([&](const auto& d) { return distribution_json(d, params, tolerance); }, dist);
}

std::string dump(const Json& json) { return json.dump(2) + "\n"; }

void write_distribution_csv(std::ostream& out, const AnyDistribution& dist) {
  if (const auto* one = std::get_if<OneSidedDistribution>(&dist)) {
    out << "m,n,p\n";
    for (const auto& [s, p] : one->probabilities)
      out << s.m << ',' << s.n << ',' << format_double(p) << '\n';
    return;
  }
  out << "regime,first,second,p\n";
  for (const auto& [s, p] : std::get<TwoSidedDistribution>(dist).probabilities)
    out << to_string(s.regime()) << ',' << s.first() << ',' << s.second() << ',' << format_double(p)
        << '\n';
}

void write_sweep_csv(std::ostream& out, std::span<const SweepRow> rows) {
  out << "gamma,lambda1,lambda2,p_empty,mean_supply,mean_demand,abandonment_rate_supply,"
         "abandonment_rate_demand,match_throughput,loss_prob_type1_demand,loss_prob_type2_demand\n";
  auto optional = [](const std::optional<double>& v) { return v ? format_double(*v) : std::string(); };
  for (const auto& row : rows) {
    const auto& m = row.metrics;
    out << format_double(row.gamma) << ',' << format_double(row.params.lambda1) << ','
        << format_double(row.params.lambda2) << ',' << format_double(m.p_empty) << ','
        << format_double(m.mean_supply) << ',' << format_double(m.mean_demand) << ','
        << format_double(m.abandonment_rate_supply) << ',' << format_double(m.abandonment_rate_demand)
        << ',' << format_double(m.match_throughput) << ',' << optional(m.loss_prob_type1_demand) << ','
        << optional(m.loss_prob_type2_demand) << '\n';
  }
}

template <class State>
Json generator_header(const TruncatedGenerator<State>& gen, const NSystemParams& params) {
  constexpr SystemKind system =
      std::is_same_v<State, OneSidedState> ? SystemKind::one_sided : SystemKind::two_sided;
  Json states = Json::array();
  for (const auto& s : gen.states) states.push_back(to_json(s));
  return Json{{"system", to_string(system)},
              {"params", to_json(params)},
              {"truncation", to_json(gen.truncation, system)},
              {"transitions", gen.rates.size()},
              {"states", std::move(states)}};
}

template Json generator_header(const OneSidedGenerator&, const NSystemParams&);
template Json generator_header(const TwoSidedGenerator&, const NSystemParams&);

namespace {

std::string trim(const std::string& s) {
  auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

const std::set<std::string> kConfigKeys{"lambda1", "lambda2", "mu1", "mu2", "theta_s", "theta_d"};

}  // namespace

std::map<std::string, double> parse_config(std::istream& in) {
  std::map<std::string, double> values;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": expected key=value");
    std::string key = trim(line.substr(0, eq));
    std::string text = trim(line.substr(eq + 1));
    if (!kConfigKeys.count(key))
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    std::size_t used = 0;
    double value = 0.0;
    try {
      value = std::stod(text, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != text.size())
      throw std::invalid_argument("config line " + std::to_string(line_no) + ": bad number '" + text + "'");
    values[key] = value;
  }
  return values;
}

void apply_config(NSystemParams& p, const std::map<std::string, double>& values) {
  for (const auto& [key, value] : values) {
    if (key == "lambda1") p.lambda1 = value;
    else if (key == "lambda2") p.lambda2 = value;
    else if (key == "mu1") p.mu1 = value;
    else if (key == "mu2") p.mu2 = value;
    else if (key == "theta_s") p.theta_s = value;
    else if (key == "theta_d") p.theta_d = value;
    else throw std::invalid_argument("unknown parameter '" + key + "'");
  }
}

}  // namespace nsq
