#include "nsq/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <future>
#include <limits>
#include <optional>
#include <queue>
#include <random>
#include <stdexcept>
#include <thread>
#include <utility>

namespace nsq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// mt19937_64 with explicitly derived 53-bit uniforms so a seed reproduces the
// same trajectory regardless of the standard library's distribution classes.
class Random {
 public:
  explicit Random(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on (0, 1].
  double uniform() { return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53; }

  double exponential(double rate) { return -std::log(uniform()) / rate; }

  bool bernoulli(double p) { return uniform() <= p; }

  /// Number of failed trials before the first success, by inverse CDF.
  std::int64_t failures_before_success(double p) {
    if (p >= 1.0) return 0;
    double k = std::floor(std::log(uniform()) / std::log1p(-p));
    return k >= 9e18 ? std::numeric_limits<std::int64_t>::max() : static_cast<std::int64_t>(k);
  }

 private:
  std::mt19937_64 engine_;
};

// Tracks the event budget and the start of the observation window.
class RunClock {
 public:
  explicit RunClock(const SimConfig& cfg) {
    if (cfg.horizon_time > 0.0) {
      time_budget_ = cfg.horizon_time;
      window_start_ = cfg.warmup_fraction * cfg.horizon_time;
    } else {
      event_budget_ = cfg.horizon_events;
      warmup_events_ = static_cast<std::int64_t>(std::floor(cfg.warmup_fraction * cfg.horizon_events));
      if (warmup_events_ == 0) window_start_ = 0.0;
    }
  }

  /// False when an event at `t` would fall past the time budget.
  bool admit(double t) const { return t <= time_budget_; }
  double time_budget() const { return time_budget_; }

  void after_event(double t) {
    ++events_;
    if (events_ == warmup_events_ && window_start_ == kInf) window_start_ = t;
  }

  bool finished() const { return events_ >= event_budget_; }
  bool observing(double t) const { return t >= window_start_; }
  double window_start() const { return window_start_; }
  std::int64_t events() const { return events_; }

 private:
  double time_budget_ = kInf;
  std::int64_t event_budget_ = std::numeric_limits<std::int64_t>::max();
  std::int64_t warmup_events_ = 0;
  double window_start_ = kInf;
  std::int64_t events_ = 0;
};

template <class Key>
class Recorder {
 public:
  void hold(const Key& key, double from, double to, double window_start) {
    double start = std::max(from, window_start);
    if (to > start) visits_[key].time += to - start;
  }

  void depart(const Key& key, bool observing) {
    if (observing) ++visits_[key].departures;
  }

  Occupancy<Key> finish(double& observed_time) {
    observed_time = 0.0;
    for (const auto& [k, v] : visits_) observed_time += v.time;
    for (auto& [k, v] : visits_) v.fraction = observed_time > 0.0 ? v.time / observed_time : 0.0;
    return std::move(visits_);
  }

 private:
  Occupancy<Key> visits_;
};

// Applies a tally update to the whole-run counters and, after warmup, to the
// observed counters.
class Tallies {
 public:
  template <class F>
  void record(bool observing, F&& update) {
    update(all);
    if (observing) update(observed);
  }

  EventTallies all;
  EventTallies observed;
};

// Parsimonious state shared by both systems; the one-sided chain only visits
// empty and left.
struct ChainState {
  Regime regime = Regime::empty;
  int a = 0;
  int b = 0;

  static ChainState left(int m, int n) { return m + n == 0 ? ChainState{} : ChainState{Regime::left, m, n}; }
  static ChainState right(int m, int n) { return m + n == 0 ? ChainState{} : ChainState{Regime::right, m, n}; }
  static ChainState both(int i, int j) {
    if (i == 0) return right(j, 0);
    if (j == 0) return left(i, 0);
    return {Regime::both, i, j};
  }

  int supply() const {
    return regime == Regime::left ? a + b : regime == Regime::both ? a : 0;
  }
  int demand() const {
    return regime == Regime::right ? a + b : regime == Regime::both ? b : 0;
  }

  bool operator==(const ChainState&) const = default;
};

OneSidedState one_sided_key(const ChainState& s) {
  return s.regime == Regime::left ? OneSidedState{s.a, s.b} : OneSidedState{};
}

TwoSidedState two_sided_key(const ChainState& s) {
  switch (s.regime) {
    case Regime::left:
      return TwoSidedState::left(s.a, s.b);
    case Regime::right:
      return TwoSidedState::right(s.a, s.b);
    case Regime::both:
      return TwoSidedState::both(s.a, s.b);
    default:
      return TwoSidedState::empty();
  }
}

int clamp_count(std::int64_t k, int limit) {
  return k >= limit ? limit : static_cast<int>(k);
}

class ParsimoniousChain {
 public:
  ParsimoniousChain(const NSystemParams& p, bool two_sided, Random& rng)
      : p_(p), two_sided_(two_sided), rng_(rng) {}

  ChainState state;

  double total_rate() const {
    return p_.supply_rate() + p_.demand_rate() + p_.theta_s * state.supply() +
           (two_sided_ ? p_.theta_d * state.demand() : 0.0);
  }

  void fire(Tallies& t, bool observing) {
    const std::array<double, 6> rates{
        p_.lambda1, p_.lambda2, p_.mu1, p_.mu2, p_.theta_s * state.supply(),
        two_sided_ ? p_.theta_d * state.demand() : 0.0};
    double u = rng_.uniform() * total_rate();
    int pick = 0;
    for (int k = 0; k < 6; ++k) {
      if (rates[k] <= 0.0) continue;
      pick = k;  // rounding leftovers fall to the last active event
      if ((u -= rates[k]) <= 0.0) break;
    }
    switch (pick) {
      case 0:
      case 1:
        return supply_arrival(pick, t, observing);
      case 2:
      case 3:
        return demand_arrival(pick - 2, t, observing);
      case 4:
        return supply_abandonment(t, observing);
      default:
        return demand_abandonment(t, observing);
    }
  }

 private:
  int sampled_supply_type() { return rng_.bernoulli(p_.gamma_s()) ? 0 : 1; }
  int sampled_demand_type() { return rng_.bernoulli(p_.gamma_d()) ? 1 : 0; }

  void supply_arrival(int type, Tallies& t, bool obs) {
    t.record(obs, [&](EventTallies& e) { ++e.supply_arrivals[type]; });
    const int a = state.a;
    const int b = state.b;
    switch (state.regime) {
      case Regime::empty:
        state = ChainState::left(0, 1);
        return;
      case Regime::left:
        state = ChainState::left(a, b + 1);
        return;
      case Regime::right:
        if (type == 0) {
          int demand_type = a >= 1 ? 0 : sampled_demand_type();
          t.record(obs, [&](EventTallies& e) { ++e.matches[0][demand_type]; });
          state = a >= 1 ? ChainState::right(a - 1, b) : ChainState::right(0, b - 1);
        } else {
          int k = clamp_count(rng_.failures_before_success(p_.gamma_d()), b);
          if (k < b) {
            t.record(obs, [&](EventTallies& e) { ++e.matches[1][1]; });
            state = ChainState::right(a + k, b - k - 1);
          } else {
            state = ChainState::both(1, a + b);
          }
        }
        return;
      case Regime::both:
        if (type == 0) {
          t.record(obs, [&](EventTallies& e) { ++e.matches[0][0]; });
          state = ChainState::both(a, b - 1);
        } else {
          state = ChainState::both(a + 1, b);
        }
        return;
    }
  }

  void demand_arrival(int type, Tallies& t, bool obs) {
    t.record(obs, [&](EventTallies& e) { ++e.demand_arrivals[type]; });
    const int a = state.a;
    const int b = state.b;
    switch (state.regime) {
      case Regime::empty:
        if (two_sided_) {
          state = ChainState::right(0, 1);
        } else {
          t.record(obs, [&](EventTallies& e) { ++e.demand_lost[type]; });
        }
        return;
      case Regime::left:
        if (type == 1) {
          int supply_type = a >= 1 ? 1 : sampled_supply_type();
          t.record(obs, [&](EventTallies& e) { ++e.matches[supply_type][1]; });
          state = a >= 1 ? ChainState::left(a - 1, b) : ChainState::left(0, b - 1);
          return;
        }
        {
          int k = clamp_count(rng_.failures_before_success(p_.gamma_s()), b);
          if (k < b) {
            t.record(obs, [&](EventTallies& e) { ++e.matches[0][0]; });
            state = ChainState::left(a + k, b - k - 1);
          } else if (two_sided_) {
            state = ChainState::both(a + b, 1);
          } else {
            t.record(obs, [&](EventTallies& e) { ++e.demand_lost[0]; });
            state = ChainState::left(a + b, 0);
          }
        }
        return;
      case Regime::right:
        state = ChainState::right(a, b + 1);
        return;
      case Regime::both:
        if (type == 1) {
          t.record(obs, [&](EventTallies& e) { ++e.matches[1][1]; });
          state = ChainState::both(a - 1, b);
        } else {
          state = ChainState::both(a, b + 1);
        }
        return;
    }
  }

  void supply_abandonment(Tallies& t, bool obs) {
    int type = 1;
    if (state.regime == Regime::left) {
      const int a = state.a;
      const int b = state.b;
      if (rng_.uniform() * (a + b) <= a) {
        state = ChainState::left(a - 1, b);
      } else {
        type = sampled_supply_type();
        state = ChainState::left(a, b - 1);
      }
    } else {
      state = ChainState::both(state.a - 1, state.b);
    }
    t.record(obs, [&](EventTallies& e) { ++e.supply_abandonments[type]; });
  }

  void demand_abandonment(Tallies& t, bool obs) {
    int type = 0;
    if (state.regime == Regime::right) {
      const int a = state.a;
      const int b = state.b;
      if (rng_.uniform() * (a + b) <= a) {
        state = ChainState::right(a - 1, b);
      } else {
        type = sampled_demand_type();
        state = ChainState::right(a, b - 1);
      }
    } else {
      state = ChainState::both(state.a, state.b - 1);
    }
    t.record(obs, [&](EventTallies& e) { ++e.demand_abandonments[type]; });
  }

  const NSystemParams& p_;
  bool two_sided_;
  Random& rng_;
};

template <class Key, class KeyOf>
SimulationSummary run_chain(const NSystemParams& params, const SimConfig& cfg, KeyOf key_of) {
  Random rng(cfg.seed);
  RunClock clock(cfg);
  Recorder<Key> rec;
  Tallies tallies;
  ParsimoniousChain chain(params, cfg.system == SystemKind::two_sided, rng);
  double t = 0.0;
  while (!clock.finished()) {
    const Key key = key_of(chain.state);
    double next = t + rng.exponential(chain.total_rate());
    if (!clock.admit(next)) {
      rec.hold(key, t, clock.time_budget(), clock.window_start());
      t = clock.time_budget();
      break;
    }
    rec.hold(key, t, next, clock.window_start());
    t = next;
    const ChainState before = chain.state;
    const bool observing = clock.observing(t);
    chain.fire(tallies, observing);
    if (!(chain.state == before)) rec.depart(key, observing);
    clock.after_event(t);
  }

  SimulationSummary out;
  out.config = cfg;
  out.occupancy = rec.finish(out.observed_time);
  tallies.all.final_supply = tallies.observed.final_supply = chain.state.supply();
  tallies.all.final_demand = tallies.observed.final_demand = chain.state.demand();
  out.events = tallies.all;
  out.observed = tallies.observed;
  out.elapsed = t;
  out.event_count = clock.events();
  return out;
}

// Agent-level FCFS system. Waiting agents live in per-type FIFO queues of ids
// (ids increase with arrival time); abandonment deadlines are drawn on arrival
// and kept in a min-heap. Matched or abandoned agents are marked dead and
// skipped lazily.
class PhysicalSystem {
 public:
  PhysicalSystem(const NSystemParams& p, bool two_sided, Random& rng)
      : p_(p), two_sided_(two_sided), rng_(rng) {}

  double next_deadline() {
    while (!deadlines_.empty() && !alive_[deadlines_.top().second]) deadlines_.pop();
    return deadlines_.empty() ? kInf : deadlines_.top().first;
  }

  void abandon(Tallies& t, bool obs) {
    auto id = deadlines_.top().second;
    deadlines_.pop();
    alive_[id] = 0;
    int kind = kind_[id];
    if (kind < 2) {
      --supply_[kind];
      t.record(obs, [&](EventTallies& e) { ++e.supply_abandonments[kind]; });
    } else {
      --demand_[kind - 2];
      t.record(obs, [&](EventTallies& e) { ++e.demand_abandonments[kind - 2]; });
    }
  }

  void arrive(double now, Tallies& t, bool obs) {
    double u = rng_.uniform() * (p_.supply_rate() + p_.demand_rate());
    if ((u -= p_.lambda1) <= 0.0) return supply_arrival(0, now, t, obs);
    if ((u -= p_.lambda2) <= 0.0) return supply_arrival(1, now, t, obs);
    if ((u -= p_.mu1) <= 0.0) return demand_arrival(0, now, t, obs);
    demand_arrival(1, now, t, obs);
  }

  CountPair counts() const { return {supply_[0] + supply_[1], demand_[0] + demand_[1]}; }

  /// FCFS matching leaves no compatible pair waiting, and when both sides
  /// queue only inflexible supply and type-1 demand remain.
  void check_invariants() const {
    const auto c = counts();
    if (!two_sided_ && c.demand != 0) throw std::logic_error("one-sided system queued demand");
    if (supply_[0] > 0 && c.demand > 0) throw std::logic_error("flexible supply waits beside demand");
    if (supply_[1] > 0 && demand_[1] > 0)
      throw std::logic_error("inflexible supply waits beside type-2 demand");
    if (c.supply > 0 && c.demand > 0 && (supply_[0] != 0 || demand_[1] != 0))
      throw std::logic_error("both-queues period holds a compatible agent");
  }

 private:
  std::optional<std::int64_t> head(std::deque<std::int64_t>& q) {
    while (!q.empty() && !alive_[q.front()]) q.pop_front();
    if (q.empty()) return std::nullopt;
    return q.front();
  }

  // Removes and returns the older head of the two queues (either may be null).
  std::optional<int> take_oldest(std::deque<std::int64_t>* first, std::deque<std::int64_t>* second) {
    auto h1 = first ? head(*first) : std::nullopt;
    auto h2 = second ? head(*second) : std::nullopt;
    if (!h1 && !h2) return std::nullopt;
    std::deque<std::int64_t>& q = (h1 && (!h2 || *h1 < *h2)) ? *first : *second;
    auto id = q.front();
    q.pop_front();
    alive_[id] = 0;
    return kind_[id];
  }

  void enqueue(int kind, double now, double patience_rate, std::deque<std::int64_t>& q) {
    auto id = static_cast<std::int64_t>(alive_.size());
    alive_.push_back(1);
    kind_.push_back(static_cast<std::uint8_t>(kind));
    q.push_back(id);
    if (patience_rate > 0.0) deadlines_.push({now + rng_.exponential(patience_rate), id});
  }

  void supply_arrival(int type, double now, Tallies& t, bool obs) {
    t.record(obs, [&](EventTallies& e) { ++e.supply_arrivals[type]; });
    if (two_sided_) {
      auto matched = type == 0 ? take_oldest(&demand_q_[0], &demand_q_[1])
                               : take_oldest(nullptr, &demand_q_[1]);
      if (matched) {
        int demand_type = *matched - 2;
        --demand_[demand_type];
        t.record(obs, [&](EventTallies& e) { ++e.matches[type][demand_type]; });
        return;
      }
    }
    ++supply_[type];
    enqueue(type, now, p_.theta_s, supply_q_[type]);
  }

  void demand_arrival(int type, double now, Tallies& t, bool obs) {
    t.record(obs, [&](EventTallies& e) { ++e.demand_arrivals[type]; });
    auto matched = type == 0 ? take_oldest(&supply_q_[0], nullptr)
                             : take_oldest(&supply_q_[0], &supply_q_[1]);
    if (matched) {
      int supply_type = *matched;
      --supply_[supply_type];
      t.record(obs, [&](EventTallies& e) { ++e.matches[supply_type][type]; });
      return;
    }
    if (!two_sided_) {
      t.record(obs, [&](EventTallies& e) { ++e.demand_lost[type]; });
      return;
    }
    ++demand_[type];
    enqueue(2 + type, now, p_.theta_d, demand_q_[type]);
  }

  const NSystemParams& p_;
  bool two_sided_;
  Random& rng_;
  std::array<std::int64_t, 2> supply_{};
  std::array<std::int64_t, 2> demand_{};
  std::array<std::deque<std::int64_t>, 2> supply_q_;
  std::array<std::deque<std::int64_t>, 2> demand_q_;
  std::vector<char> alive_;
  std::vector<std::uint8_t> kind_;  // 0/1 supply type, 2/3 demand type + 2
  std::priority_queue<std::pair<double, std::int64_t>, std::vector<std::pair<double, std::int64_t>>,
                      std::greater<>>
      deadlines_;
};

}  // namespace

std::string to_string(SimMode mode) {
  return mode == SimMode::parsimonious ? "parsimonious" : "physical";
}

SimMode parse_sim_mode(const std::string& text) {
  if (text == "parsimonious") return SimMode::parsimonious;
  if (text == "physical") return SimMode::physical;
  throw std::invalid_argument("unknown mode '" + text + "' (expected parsimonious or physical)");
}

void validate(const SimConfig& cfg) {
  if (!(cfg.horizon_time >= 0.0) || !std::isfinite(cfg.horizon_time))
    throw std::invalid_argument("horizon_time must be finite and non-negative");
  if (cfg.horizon_time == 0.0 && cfg.horizon_events <= 0)
    throw std::invalid_argument("horizon must be positive");
  if (!(cfg.warmup_fraction >= 0.0 && cfg.warmup_fraction < 1.0))
    throw std::invalid_argument("warmup fraction must lie in [0, 1)");
}

std::int64_t EventTallies::total_matches() const {
  return matches[0][0] + matches[0][1] + matches[1][0] + matches[1][1];
}

bool EventTallies::supply_conserved() const {
  return total_supply_arrivals() == total_matches() + total_supply_abandonments() + final_supply;
}

bool EventTallies::demand_conserved() const {
  return total_demand_arrivals() ==
         total_matches() + total_demand_abandonments() + total_demand_lost() + final_demand;
}

SimulationSummary simulate_parsimonious(const NSystemParams& params, const SimConfig& cfg) {
  validate(params);
  validate(cfg);
  if (cfg.system == SystemKind::one_sided) {
    if (params.theta_s == 0.0 && !stability_check(params))
      throw std::invalid_argument("parsimonious simulation needs theta_s > 0 or a stable system");
    return run_chain<OneSidedState>(params, cfg, one_sided_key);
  }
  if (!(params.theta_s > 0.0) || !(params.theta_d > 0.0))
    throw std::invalid_argument("two-sided simulation requires theta_s > 0 and theta_d > 0");
  return run_chain<TwoSidedState>(params, cfg, two_sided_key);
}

SimulationSummary simulate_physical(const NSystemParams& params, const SimConfig& cfg) {
  validate(params);
  validate(cfg);
  Random rng(cfg.seed);
  RunClock clock(cfg);
  Recorder<CountPair> rec;
  Tallies tallies;
  const bool two_sided = cfg.system == SystemKind::two_sided;
  PhysicalSystem sys(params, two_sided, rng);
  const double arrival_rate = params.supply_rate() + params.demand_rate();
  double t = 0.0;
  double next_arrival = rng.exponential(arrival_rate);
  while (!clock.finished()) {
    const CountPair key = sys.counts();
    const double deadline = sys.next_deadline();
    const double next = std::min(next_arrival, deadline);
    if (!clock.admit(next)) {
      rec.hold(key, t, clock.time_budget(), clock.window_start());
      t = clock.time_budget();
      break;
    }
    rec.hold(key, t, next, clock.window_start());
    t = next;
    const bool observing = clock.observing(t);
    if (deadline < next_arrival) {
      sys.abandon(tallies, observing);
    } else {
      sys.arrive(t, tallies, observing);
      next_arrival = t + rng.exponential(arrival_rate);
    }
    if (sys.counts() != key) rec.depart(key, observing);
    sys.check_invariants();
    clock.after_event(t);
  }

  SimulationSummary out;
  out.config = cfg;
  out.occupancy = rec.finish(out.observed_time);
  const auto final_counts = sys.counts();
  tallies.all.final_supply = tallies.observed.final_supply = final_counts.supply;
  tallies.all.final_demand = tallies.observed.final_demand = final_counts.demand;
  out.events = tallies.all;
  out.observed = tallies.observed;
  out.elapsed = t;
  out.event_count = clock.events();
  return out;
}

SimulationSummary simulate(const NSystemParams& params, const SimConfig& cfg) {
  return cfg.mode == SimMode::parsimonious ? simulate_parsimonious(params, cfg)
                                           : simulate_physical(params, cfg);
}

std::uint64_t replication_seed(std::uint64_t seed, int replication) {
  std::uint64_t z = seed + static_cast<std::uint64_t>(replication) * 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::vector<SimulationSummary> replicate(const NSystemParams& params, const SimConfig& cfg,
                                         int replications) {
  if (replications < 1) throw std::invalid_argument("replications must be at least 1");
  validate(params);
  validate(cfg);
  const int workers = std::max(1u, std::thread::hardware_concurrency());
  std::vector<SimulationSummary> out;
  out.reserve(replications);
  for (int start = 0; start < replications; start += workers) {
    std::vector<std::future<SimulationSummary>> batch;
    for (int r = start; r < std::min(replications, start + workers); ++r) {
      SimConfig c = cfg;
      c.seed = replication_seed(cfg.seed, r);
      batch.push_back(std::async(std::launch::async, [&params, c] { return simulate(params, c); }));
    }
    for (auto& f : batch) out.push_back(f.get());
  }
  return out;
}

namespace {

void add_tallies(EventTallies& into, const EventTallies& from) {
  for (int k = 0; k < 2; ++k) {
    into.supply_arrivals[k] += from.supply_arrivals[k];
    into.demand_arrivals[k] += from.demand_arrivals[k];
    into.supply_abandonments[k] += from.supply_abandonments[k];
    into.demand_abandonments[k] += from.demand_abandonments[k];
    into.demand_lost[k] += from.demand_lost[k];
    for (int d = 0; d < 2; ++d) into.matches[k][d] += from.matches[k][d];
  }
  into.final_supply += from.final_supply;
  into.final_demand += from.final_demand;
}

}  // namespace

SimulationSummary pool(std::span<const SimulationSummary> runs) {
  if (runs.empty()) throw std::invalid_argument("nothing to pool");
  SimulationSummary out;
  out.config = runs.front().config;
  out.occupancy = std::visit(
      [&](const auto& first) -> decltype(out.occupancy) {
        std::decay_t<decltype(first)> merged;
        for (const auto& run : runs) {
          for (const auto& [k, v] : std::get<std::decay_t<decltype(first)>>(run.occupancy)) {
            merged[k].time += v.time;
            merged[k].departures += v.departures;
          }
        }
        double total = 0.0;
        for (const auto& [k, v] : merged) total += v.time;
        for (auto& [k, v] : merged) v.fraction = total > 0.0 ? v.time / total : 0.0;
        return merged;
      },
      runs.front().occupancy);
  for (const auto& run : runs) {
    add_tallies(out.events, run.events);
    add_tallies(out.observed, run.observed);
    out.elapsed += run.elapsed;
    out.observed_time += run.observed_time;
    out.event_count += run.event_count;
  }
  return out;
}

MeanAndError mean_and_standard_error(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("no values");
  MeanAndError r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  if (values.size() < 2) return r;
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.standard_error = std::sqrt(ss / static_cast<double>(values.size() - 1) /
                               static_cast<double>(values.size()));
  return r;
}

}  // namespace nsq
