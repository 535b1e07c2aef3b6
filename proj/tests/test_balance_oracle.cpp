#include <doctest.h>

#include <map>
#include <sstream>
#include <stdexcept>
#include <string>

#include "nsq/balance_oracle.hpp"
#include "nsq/product_form.hpp"
#include "test_support.hpp"

using namespace nsq;
using doctest::Approx;

namespace {

const NSystemParams kRef{1.0, 1.0, 2.0, 2.0, 1.0, 1.0};

template <class State>
std::map<State, double> outgoing(const TruncatedGenerator<State>& gen, const State& from) {
  std::map<State, double> out;
  const auto i = gen.index_of(from);
  for (const auto& t : gen.rates)
    if (t.from == i) out[gen.states[t.to]] += t.rate;
  return out;
}

OneSidedGenerator two_state_chain(double up, double down) {
  OneSidedGenerator g;
  g.states = {{0, 0}, {0, 1}};
  g.index = {{{0, 0}, 0}, {{0, 1}, 1}};
  g.rates = {{0, 1, up}, {1, 0, down}};
  g.exit_rates = {up, down};
  g.truncation = {0, 1, 0, 0};
  return g;
}

}  // namespace

TEST_CASE("one-sided transitions out of (0, 1)") {
  auto gen = build_generator_one_sided(kRef, 5, 5);
  auto out = outgoing(gen, OneSidedState{0, 1});
  CHECK(out.size() == 3);
  CHECK(out[OneSidedState{0, 2}] == Approx(2.0));
  CHECK(out[OneSidedState{0, 0}] == Approx(4.0));
  CHECK(out[OneSidedState{1, 0}] == Approx(1.0));
  CHECK(gen.exit_rates[gen.index_of(OneSidedState{0, 1})] == Approx(7.0));
}

TEST_CASE("one-sided transitions out of (1, 2)") {
  auto gen = build_generator_one_sided(kRef, 5, 5);
  auto out = outgoing(gen, OneSidedState{1, 2});
  // arrival; reneging of an unknown (2) and of the known unit (1); type-2 demand
  // takes the head; type-1 demand finds a flexible unit at depth 0 or 1, or fails
  CHECK(out[OneSidedState{1, 3}] == Approx(2.0));
  CHECK(out[OneSidedState{1, 1}] == Approx(2.0 + 1.0));
  CHECK(out[OneSidedState{0, 2}] == Approx(1.0 + 2.0));
  CHECK(out[OneSidedState{2, 0}] == Approx(0.5));
  CHECK(out[OneSidedState{3, 0}] == Approx(0.5));
  CHECK(gen.exit_rates[gen.index_of(OneSidedState{1, 2})] == Approx(2 + 3 + 3 + 0.5 + 0.5));
}

TEST_CASE("transitions leaving the box are dropped") {
  auto gen = build_generator_one_sided(kRef, 3, 3);
  CHECK(gen.size() == 16);
  auto out = outgoing(gen, OneSidedState{0, 3});
  CHECK(out.count(OneSidedState{0, 4}) == 0);
  CHECK(gen.exit_rates[gen.index_of(OneSidedState{0, 3})] == Approx(7.0 - 2.0 + 2.0));
  CHECK_THROWS_AS(gen.index_of(OneSidedState{4, 0}), std::out_of_range);
  CHECK_THROWS_AS(build_generator_one_sided(kRef, 1, 5), std::invalid_argument);
}

TEST_CASE("two-sided transitions") {
  using S = TwoSidedState;
  auto gen = build_generator_two_sided(kRef, {4, 4, 4, 4});
  auto empty = outgoing(gen, S::empty());
  CHECK(empty.size() == 2);
  CHECK(empty[S::left(0, 1)] == Approx(2.0));
  CHECK(empty[S::right(0, 1)] == Approx(4.0));

  auto left = outgoing(gen, S::left(0, 1));
  CHECK(left.size() == 3);
  CHECK(left[S::left(0, 2)] == Approx(2.0));
  CHECK(left[S::empty()] == Approx(4.0));
  CHECK(left[S::both(1, 1)] == Approx(1.0));

  auto right = outgoing(gen, S::right(0, 1));
  // supply arrivals: flexible supply or a successful inflexible scan empties
  // the queue, a failed scan leaves one of each side waiting
  CHECK(right[S::right(0, 2)] == Approx(4.0));
  CHECK(right[S::empty()] == Approx(1.0 + 0.5 + 1.0));
  CHECK(right[S::both(1, 1)] == Approx(0.5));

  auto both = outgoing(gen, S::both(1, 1));
  CHECK(both.size() == 4);
  CHECK(both[S::both(2, 1)] == Approx(1.0));
  CHECK(both[S::right(1, 0)] == Approx(3.0));
  CHECK(both[S::both(1, 2)] == Approx(2.0));
  CHECK(both[S::left(1, 0)] == Approx(2.0));

  CHECK_THROWS_AS(build_generator_two_sided({1, 1, 2, 2, 1, 0}, {4, 4, 4, 4}), std::invalid_argument);
}

TEST_CASE("two-state chain") {
  for (auto method : {SolveMethod::direct, SolveMethod::power}) {
    SolverOptions opt;
    opt.method = method;
    auto d = solve_stationary(two_state_chain(3.0, 1.0), opt);
    CHECK(d.probability({0, 0}) == Approx(0.25).epsilon(1e-10));
    CHECK(d.probability({0, 1}) == Approx(0.75).epsilon(1e-10));
    CHECK(d.tail_mass_bound == 0.0);
  }
}

TEST_CASE("reducible generator is rejected") {
  auto g = two_state_chain(3.0, 1.0);
  g.rates.pop_back();
  g.exit_rates[1] = 0.0;
  CHECK_FALSE(is_irreducible(g));
  CHECK_THROWS_AS(solve_stationary(g), std::runtime_error);
  CHECK(is_irreducible(build_generator_one_sided(kRef, 4, 4)));
  CHECK(is_irreducible(build_generator_two_sided(kRef, {3, 3, 3, 3})));
}

TEST_CASE("oracle matches the product form, one-sided") {
  for (const auto& p : testing::reference_params()) {
    auto t = normalize_one_sided(p, 1e-10).truncation;
    auto gen = build_generator_one_sided(p, t.max_m, t.max_n);
    auto oracle = solve_stationary(gen);
    CHECK(stationary_residual(gen, oracle) < 1e-12);
    CHECK(total_variation(oracle, product_form_one_sided(p, t.max_m, t.max_n)) < 1e-8);
  }
}

TEST_CASE("power iteration agrees with the direct solve") {
  auto gen = build_generator_one_sided(kRef, 12, 12);
  SolverOptions direct{SolveMethod::direct};
  SolverOptions power{SolveMethod::power};
  power.tol = 1e-14;
  CHECK(total_variation(solve_stationary(gen, direct), solve_stationary(gen, power)) < 1e-9);
}

TEST_CASE("power iteration reports non-convergence") {
  SolverOptions opt{SolveMethod::power};
  opt.max_iterations = 3;
  CHECK_THROWS_AS(solve_stationary(build_generator_one_sided(kRef, 10, 10), opt), std::runtime_error);
}

TEST_CASE("oracle matches the product form, two-sided") {
  for (const auto& base : testing::reference_params())
    for (double theta_d : {0.5, 1.0}) {
      NSystemParams p = base;
      p.theta_d = theta_d;
      auto t = normalize_two_sided(p, 1e-10).truncation;
      auto gen = build_generator_two_sided(p, t);
      auto oracle = solve_stationary(gen);
      CHECK(total_variation(oracle, product_form_two_sided(p, t)) < 1e-8);
    }
}

TEST_CASE("truncated chain approaches the product form as the box grows") {
  NSystemParams p{1, 1, 2, 2, 1, 0.5};
  double previous = 1.0;
  for (int bound : {5, 10, 20, 40}) {
    Truncation t{bound, bound, bound, bound};
    double tv = total_variation(solve_stationary(build_generator_two_sided(p, t)), product_form_two_sided(p, t));
    CHECK(tv < previous);
    previous = tv;
  }
  CHECK(previous < 1e-10);
}

TEST_CASE("generator csv") {
  auto gen = build_generator_one_sided(kRef, 2, 2);
  std::ostringstream out;
  write_generator_csv(out, gen);
  std::istringstream in(out.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "from,to,rate");
  std::size_t rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == gen.rates.size());
}

TEST_CASE("total variation counts missing keys") {
  std::map<int, double> a{{0, 0.5}, {1, 0.5}};
  std::map<int, double> b{{1, 0.5}, {2, 0.5}};
  CHECK(total_variation(a, b) == Approx(0.5));
  CHECK(total_variation(a, a) == 0.0);
}
