#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "nsq/balance_oracle.hpp"
#include "nsq/metrics.hpp"
#include "nsq/simulator.hpp"
#include "test_support.hpp"

using namespace nsq;
using doctest::Approx;

namespace {

const NSystemParams kRef{1.0, 1.0, 2.0, 2.0, 1.0, 1.0};

void check_close(const MetricsReport& a, const MetricsReport& b, double tol) {
  CHECK(std::abs(a.p_empty - b.p_empty) < tol);
  CHECK(std::abs(a.mean_supply - b.mean_supply) < tol);
  CHECK(std::abs(a.mean_demand - b.mean_demand) < tol);
  CHECK(std::abs(a.abandonment_rate_supply - b.abandonment_rate_supply) < tol);
  CHECK(std::abs(a.abandonment_rate_demand - b.abandonment_rate_demand) < tol);
  CHECK(std::abs(a.match_throughput - b.match_throughput) < tol);
  CHECK(a.loss_prob_type1_demand.has_value() == b.loss_prob_type1_demand.has_value());
  if (a.loss_prob_type1_demand) {
    CHECK(std::abs(*a.loss_prob_type1_demand - *b.loss_prob_type1_demand) < tol);
    CHECK(std::abs(*a.loss_prob_type2_demand - *b.loss_prob_type2_demand) < tol);
  }
}

}  // namespace

TEST_CASE("formula and oracle metrics agree") {
  for (const auto& p : testing::reference_params()) {
    auto one = normalize_one_sided(p);
    auto t = one.truncation;
    auto oracle = solve_stationary(build_generator_one_sided(p, t.max_m, t.max_n));
    check_close(compute_metrics(p, one), compute_metrics(p, oracle), 1e-6);

    auto two = normalize_two_sided(p);
    auto oracle2 = solve_stationary(build_generator_two_sided(p, two.truncation));
    check_close(compute_metrics(p, two), compute_metrics(p, oracle2), 1e-6);
  }
}

TEST_CASE("flow balance") {
  for (const auto& p : testing::random_params(8)) {
    auto one = compute_metrics(p, normalize_one_sided(p));
    CHECK(supply_flow_residual(p, one) < 1e-6);
    CHECK(one.mean_demand == 0.0);
    CHECK(one.loss_prob_type2_demand == one.p_empty);

    auto two = compute_metrics(p, normalize_two_sided(p));
    CHECK(supply_flow_residual(p, two) < 1e-6);
    CHECK(demand_flow_residual(p, two) < 1e-6);
    CHECK_FALSE(two.loss_prob_type1_demand.has_value());
  }
}

TEST_CASE("no reneging: every supply unit is matched") {
  NSystemParams p{1, 1, 2, 2, 0, 0};
  auto r = compute_metrics(p, normalize_one_sided(p));
  CHECK(r.p_empty == Approx(1.0 / 3.0).epsilon(1e-9));
  CHECK(r.abandonment_rate_supply == 0.0);
  CHECK(r.match_throughput == Approx(2.0).epsilon(1e-9));
}

TEST_CASE("metrics against simulated rates") {
  SimConfig c;
  c.horizon_events = 2'000'000;
  c.seed = 5;
  auto run = simulate(kRef, c);
  auto r = compute_metrics(kRef, normalize_one_sided(kRef));
  double matches = static_cast<double>(run.observed.total_matches()) / run.observed_time;
  double lost1 = static_cast<double>(run.observed.demand_lost[0]) / run.observed.demand_arrivals[0];
  CHECK(matches == Approx(r.match_throughput).epsilon(0.02));
  CHECK(lost1 == Approx(*r.loss_prob_type1_demand).epsilon(0.02));
}

TEST_CASE("loose distributions are rejected") {
  CHECK_THROWS_AS(compute_metrics(kRef, product_form_one_sided(kRef, 2, 2)), std::invalid_argument);
}

TEST_CASE("flexibility sweep") {
  std::vector<double> grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  auto rows = sweep_flexibility(kRef, grid, 2.0, SystemKind::one_sided);
  REQUIRE(rows.size() == grid.size());
  for (std::size_t k = 1; k < rows.size(); ++k)
    CHECK(*rows[k].metrics.loss_prob_type1_demand <= *rows[k - 1].metrics.loss_prob_type1_demand);
  CHECK(rows[4].params == kRef);
  CHECK(rows[4].metrics == compute_metrics(kRef, normalize_one_sided(kRef)));
  for (const auto& row : rows) CHECK(row.params.supply_rate() == Approx(2.0));

  auto two = sweep_flexibility(kRef, grid, 2.0, SystemKind::two_sided);
  CHECK(two.size() == grid.size());

  std::vector<double> bad{0.0};
  CHECK_THROWS_AS(sweep_flexibility(kRef, bad, 2.0, SystemKind::one_sided), std::invalid_argument);
  CHECK_THROWS_AS(sweep_flexibility(kRef, grid, -1.0, SystemKind::one_sided), std::invalid_argument);
}
