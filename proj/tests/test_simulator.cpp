#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "nsq/balance_oracle.hpp"
#include "nsq/product_form.hpp"
#include "nsq/simulator.hpp"

using namespace nsq;
using doctest::Approx;

namespace {

const NSystemParams kRef{1.0, 1.0, 2.0, 2.0, 1.0, 1.0};

SimConfig config(SystemKind system, SimMode mode, std::int64_t events, std::uint64_t seed = 7) {
  SimConfig c;
  c.system = system;
  c.mode = mode;
  c.horizon_events = events;
  c.seed = seed;
  return c;
}

std::map<CountPair, double> lumped(const AnyDistribution& dist) {
  std::map<CountPair, double> out;
  if (const auto* one = std::get_if<OneSidedDistribution>(&dist)) {
    for (const auto& [s, p] : one->probabilities) out[CountPair{s.m + s.n, 0}] += p;
  } else {
    for (const auto& [s, p] : std::get<TwoSidedDistribution>(dist).probabilities)
      out[CountPair{s.supply_count(), s.demand_count()}] += p;
  }
  return out;
}

}  // namespace

TEST_CASE("config validation") {
  SimConfig c;
  CHECK_NOTHROW(validate(c));
  c.horizon_events = 0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.horizon_time = 10.0;
  CHECK_NOTHROW(validate(c));
  c.warmup_fraction = 1.0;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  c.warmup_fraction = -0.1;
  CHECK_THROWS_AS(validate(c), std::invalid_argument);
  CHECK(parse_sim_mode("physical") == SimMode::physical);
  CHECK_THROWS_AS(parse_sim_mode("exact"), std::invalid_argument);
}

TEST_CASE("simulations that have no stationary regime are refused") {
  auto c = config(SystemKind::one_sided, SimMode::parsimonious, 1000);
  CHECK_THROWS_AS(simulate({3, 1, 2, 2, 0, 0}, c), std::invalid_argument);
  CHECK_NOTHROW(simulate({1, 1, 2, 2, 0, 0}, c));
  c.system = SystemKind::two_sided;
  CHECK_THROWS_AS(simulate({1, 1, 2, 2, 1, 0}, c), std::invalid_argument);
}

TEST_CASE("fixed seed reproduces the run") {
  for (auto mode : {SimMode::parsimonious, SimMode::physical})
    for (auto system : {SystemKind::one_sided, SystemKind::two_sided}) {
      auto c = config(system, mode, 20000, 11);
      auto a = simulate(kRef, c);
      auto b = simulate(kRef, c);
      CHECK(a.events == b.events);
      CHECK(a.elapsed == b.elapsed);
      CHECK(a.occupancy.index() == b.occupancy.index());
      c.seed = 12;
      CHECK_FALSE(simulate(kRef, c).events == a.events);
    }
}

TEST_CASE("event and time budgets") {
  auto c = config(SystemKind::one_sided, SimMode::parsimonious, 5000);
  auto run = simulate(kRef, c);
  CHECK(run.event_count == 5000);
  c.horizon_time = 200.0;
  run = simulate(kRef, c);
  CHECK(run.elapsed <= 200.0);
  CHECK(run.observed_time == Approx(160.0).epsilon(1e-9));
}

TEST_CASE("flow conservation") {
  for (auto system : {SystemKind::one_sided, SystemKind::two_sided}) {
    auto phys = simulate(kRef, config(system, SimMode::physical, 200000));
    CHECK(phys.events.supply_conserved());
    CHECK(phys.events.demand_conserved());
    auto pars = simulate(kRef, config(system, SimMode::parsimonious, 200000));
    const auto& e = pars.events;
    CHECK(e.total_supply_arrivals() == e.total_matches() + e.total_supply_abandonments() + e.final_supply);
    CHECK(e.total_demand_arrivals() ==
          e.total_matches() + e.total_demand_abandonments() + e.total_demand_lost() + e.final_demand);
  }
}

TEST_CASE("physical one-sided matches respect compatibility") {
  auto run = simulate(kRef, config(SystemKind::one_sided, SimMode::physical, 100000));
  CHECK(run.events.matches[1][0] == 0);
  CHECK(run.events.total_demand_abandonments() == 0);
  CHECK(run.events.final_demand == 0);
}

TEST_CASE("parsimonious occupancy converges to the product form") {
  auto formula = normalize_one_sided(kRef);
  auto run = simulate(kRef, config(SystemKind::one_sided, SimMode::parsimonious, 2'000'000));
  CHECK(total_variation(occupancy_fractions<OneSidedState>(run), formula.probabilities) < 0.01);

  NSystemParams p{2, 0.5, 1, 3, 0.3, 0.5};
  auto two = normalize_two_sided(p);
  auto run2 = simulate(p, config(SystemKind::two_sided, SimMode::parsimonious, 2'000'000));
  CHECK(total_variation(occupancy_fractions<TwoSidedState>(run2), two.probabilities) < 0.01);
}

TEST_CASE("physical head counts converge to the lumped product form") {
  for (auto system : {SystemKind::one_sided, SystemKind::two_sided}) {
    auto run = simulate(kRef, config(system, SimMode::physical, 2'000'000));
    CHECK(total_variation(occupancy_fractions<CountPair>(run), lumped(normalize(kRef, system))) < 0.01);
  }
}

TEST_CASE("empty-system probability within three standard errors") {
  auto runs = replicate(kRef, config(SystemKind::one_sided, SimMode::parsimonious, 400000, 3), 8);
  std::vector<double> empty;
  for (const auto& r : runs) empty.push_back(occupancy_fractions<OneSidedState>(r)[OneSidedState{}]);
  auto stats = mean_and_standard_error(empty);
  CHECK(stats.standard_error > 0.0);
  CHECK(std::abs(stats.mean - normalize_one_sided(kRef).normalizer) < 3.0 * stats.standard_error);
}

TEST_CASE("empirical exit rates of the most visited states") {
  auto run = simulate(kRef, config(SystemKind::one_sided, SimMode::parsimonious, 2'000'000));
  auto gen = build_generator_one_sided(kRef, 60, 60);
  const auto& occ = std::get<Occupancy<OneSidedState>>(run.occupancy);
  std::vector<std::pair<double, OneSidedState>> ranked;
  for (const auto& [s, v] : occ) ranked.emplace_back(v.time, s);
  std::sort(ranked.rbegin(), ranked.rend());
  for (int k = 0; k < 10; ++k) {
    const auto& s = ranked[k].second;
    double empirical = occ.at(s).departures / occ.at(s).time;
    CHECK(empirical == Approx(gen.exit_rates[gen.index_of(s)]).epsilon(0.05));
  }
}

TEST_CASE("replications use derived seeds") {
  auto c = config(SystemKind::one_sided, SimMode::parsimonious, 5000, 42);
  auto runs = replicate(kRef, c, 3);
  REQUIRE(runs.size() == 3);
  for (int r = 0; r < 3; ++r) {
    CHECK(runs[r].config.seed == replication_seed(42, r));
    SimConfig single = c;
    single.seed = replication_seed(42, r);
    CHECK(simulate(kRef, single).events == runs[r].events);
  }
  CHECK(replication_seed(42, 0) != replication_seed(42, 1));
  CHECK(replication_seed(42, 1) != replication_seed(43, 1));
  CHECK_THROWS_AS(replicate(kRef, c, 0), std::invalid_argument);
}

TEST_CASE("pooling weights by time") {
  auto runs = replicate(kRef, config(SystemKind::one_sided, SimMode::parsimonious, 10000), 2);
  auto pooled = pool(runs);
  CHECK(pooled.event_count == 20000);
  CHECK(pooled.observed_time == Approx(runs[0].observed_time + runs[1].observed_time));
  double total = 0.0;
  for (const auto& [s, f] : occupancy_fractions<OneSidedState>(pooled)) total += f;
  CHECK(total == Approx(1.0));
  CHECK(pooled.events.total_supply_arrivals() ==
        runs[0].events.total_supply_arrivals() + runs[1].events.total_supply_arrivals());
}

TEST_CASE("mean and standard error") {
  std::vector<double> v{1.0, 2.0, 3.0, 4.0};
  auto s = mean_and_standard_error(v);
  CHECK(s.mean == Approx(2.5));
  CHECK(s.standard_error == Approx(std::sqrt(5.0 / 3.0 / 4.0)));
  std::vector<double> one{7.0};
  CHECK(mean_and_standard_error(one).standard_error == 0.0);
}
