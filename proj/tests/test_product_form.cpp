#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "nsq/product_form.hpp"
#include "test_support.hpp"

using namespace nsq;
using doctest::Approx;

namespace {

const NSystemParams kRef{1.0, 1.0, 2.0, 2.0, 1.0, 1.0};

double rel(double a, double b) { return a == b ? 0.0 : std::abs(a - b) / std::max(std::abs(a), std::abs(b)); }

// Right-queue weight written out directly, independent of the mirror mapping.
double right_weight(const NSystemParams& p, int m, int n) {
  double w = 1.0;
  if (m >= 1) {
    w = p.lambda2 / (p.lambda1 + p.lambda2 + m * p.theta_d);
    for (int i = 1; i <= m; ++i) w *= p.mu1 / (p.lambda1 + i * p.theta_d);
  }
  for (int i = 1; i <= n; ++i) w *= (p.mu1 + p.mu2) / (p.lambda1 + p.lambda2 + (m + i) * p.theta_d);
  return w;
}

}  // namespace

TEST_CASE("one-sided weights on the reference set") {
  CHECK(unnormalized_weight_one_sided(kRef, {0, 0}) == 1.0);
  CHECK(unnormalized_weight_one_sided(kRef, {0, 1}) == Approx(2.0 / 5.0).epsilon(1e-14));
  CHECK(unnormalized_weight_one_sided(kRef, {0, 2}) == Approx(2.0 / 15.0).epsilon(1e-14));
  CHECK(unnormalized_weight_one_sided(kRef, {1, 0}) == Approx(2.0 / 15.0).epsilon(1e-14));
  CHECK(unnormalized_weight_one_sided(kRef, {1, 1}) == Approx(2.0 / 45.0).epsilon(1e-14));
  CHECK(f_known(kRef, 1) == Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(g_total(kRef, 1) == Approx(2.0 / 5.0).epsilon(1e-14));
  CHECK(g_first_from_balance(kRef) == Approx(2.0 / 5.0).epsilon(1e-14));
}

TEST_CASE("weights factor into f and g") {
  for (const auto& p : testing::random_params(5)) {
    auto fg = fg_decomposition(p, 20, 40);
    CHECK(fg.a == Approx(p.mu2 / p.mu1));
    CHECK(fg.b == Approx(p.theta_s / p.mu1));
    for (int m = 0; m <= 20; ++m)
      for (int n = 0; n <= 20; ++n)
        CHECK(rel(fg.f_values[m] * fg.g_values[m + n], unnormalized_weight_one_sided(p, {m, n})) < 1e-12);
  }
}

TEST_CASE("f sum identity and g recursion") {
  for (const auto& p : testing::random_params(12)) {
    for (int m = 1; m <= 100; ++m) CHECK(f_sum_identity_residual(p, m) < 1e-10);
    for (int m = 2; m <= 100; ++m) CHECK(g_recursion_residual(p, m) < 1e-10);
    CHECK(rel(g_first_from_balance(p), g_total(p, 1)) < 1e-12);
  }
}

TEST_CASE("partial balance") {
  for (const auto& p : testing::random_params(12))
    for (int m = 1; m <= 50; ++m) CHECK(partial_balance_residual(p, m) < 1e-10);
}

TEST_CASE("alternative form agrees") {
  for (const auto& p : testing::random_params(4))
    for (int m = 0; m <= 30; ++m)
      for (int n = 0; n <= 30; ++n)
        CHECK(rel(alternative_form_weight(p, {m, n}), unnormalized_weight_one_sided(p, {m, n})) < 1e-12);
}

TEST_CASE("one-sided global balance") {
  for (const auto& p : testing::reference_params())
    CHECK(global_balance_residual(p, product_form_one_sided(p, 31, 62)) < 1e-10);
  for (const auto& p : testing::random_params(6))
    CHECK(global_balance_residual(p, product_form_one_sided(p, 31, 62)) < 1e-10);
}

TEST_CASE("global balance detects a perturbed distribution") {
  auto dist = product_form_one_sided(kRef, 20, 20);
  dist.probabilities[{0, 1}] *= 1.01;
  CHECK(global_balance_residual(kRef, dist) > 1e-3);

  auto two = product_form_two_sided(kRef, {15, 15, 15, 15});
  two.probabilities[TwoSidedState::both(2, 2)] *= 1.01;
  CHECK(global_balance_residual(kRef, two) > 1e-3);
}

TEST_CASE("normalization meets the tolerance") {
  for (const auto& p : testing::reference_params()) {
    auto d = normalize_one_sided(p, 1e-10);
    CHECK(d.tail_mass_bound <= 1e-10);
    CHECK(d.total() == Approx(1.0).epsilon(1e-12));
    CHECK(d.normalizer == d.probability({0, 0}));
    // doubling the box moves probabilities by no more than the tail bound allows
    auto wider = product_form_one_sided(p, 2 * d.truncation.max_m, 2 * d.truncation.max_n);
    CHECK(std::abs(wider.normalizer - d.normalizer) < 2e-10);
  }
  CHECK_THROWS_AS(normalize_one_sided(kRef, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(normalize_one_sided(kRef, 0.1), std::invalid_argument);
}

TEST_CASE("no-reneging closed form") {
  NSystemParams p{1, 1, 2, 2, 0, 0};
  CHECK(no_reneging_normalizer(p) == Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(no_reneging_normalizer({1, 1, 3, 2, 0, 0}) == Approx(3.0 / 8.0).epsilon(1e-14));
  double mass = 0.0;
  for (int m = 0; m <= 50; ++m)
    for (int n = 0; n <= 50; ++n) {
      double exact = no_reneging_distribution(p, {m, n});
      CHECK(rel(exact, unnormalized_weight_one_sided(p, {m, n}) / 3.0) < 1e-12);
      mass += exact;
    }
  CHECK(std::abs(mass - 1.0) < 1e-10);
  CHECK(normalize_one_sided(p).normalizer == Approx(1.0 / 3.0).epsilon(1e-10));
  CHECK_THROWS_AS(no_reneging_normalizer(kRef), std::invalid_argument);
}

TEST_CASE("small reneging approaches the no-reneging solution") {
  NSystemParams p{1, 1, 2, 2, 1e-7, 0};
  CHECK(normalize_one_sided(p).normalizer == Approx(1.0 / 3.0).epsilon(1e-5));
}

TEST_CASE("unstable system without reneging diverges") {
  NSystemParams p{3, 1, 2, 2, 0, 0};
  CHECK_THROWS_AS(unnormalized_weight_one_sided(p, {1, 1}), DivergenceError);
  CHECK_THROWS_AS(normalize_one_sided(p), DivergenceError);
  CHECK_THROWS_AS(normalize_one_sided({0.5, 2.5, 3, 2, 0, 0}), DivergenceError);
}

TEST_CASE("two-sided weights on the reference set") {
  using S = TwoSidedState;
  CHECK(unnormalized_weight_two_sided(kRef, S::empty()) == 1.0);
  CHECK(unnormalized_weight_two_sided(kRef, S::both(1, 1)) == Approx(1.0 / 3.0).epsilon(1e-14));
  CHECK(unnormalized_weight_two_sided(kRef, S::both(2, 1)) == Approx(1.0 / 12.0).epsilon(1e-14));
  CHECK(unnormalized_weight_two_sided(kRef, S::right(0, 1)) == Approx(4.0 / 3.0).epsilon(1e-14));
  CHECK(unnormalized_weight_two_sided(kRef, S::right(1, 0)) == Approx(1.0 / 3.0).epsilon(1e-14));
  for (int m = 0; m <= 10; ++m)
    for (int n = 0; n <= 10; ++n) {
      if (m + n == 0) continue;
      CHECK(rel(unnormalized_weight_two_sided(kRef, S::left(m, n)), unnormalized_weight_one_sided(kRef, {m, n})) <
            1e-13);
    }
}

TEST_CASE("right-queue weights match the direct formula") {
  for (const auto& p : testing::random_params(6))
    for (int m = 0; m <= 25; ++m)
      for (int n = 0; n <= 25; ++n) {
        if (m + n == 0) continue;
        CHECK(rel(unnormalized_weight_two_sided(p, TwoSidedState::right(m, n)), right_weight(p, m, n)) < 1e-12);
      }
}

TEST_CASE("two-sided global balance") {
  for (const auto& base : testing::reference_params())
    for (double theta_d : {0.5, 1.0}) {
      NSystemParams p = base;
      p.theta_d = theta_d;
      CHECK(global_balance_residual(p, product_form_two_sided(p, {21, 42, 21, 21})) < 1e-10);
    }
  for (const auto& p : testing::random_params(4))
    CHECK(global_balance_residual(p, product_form_two_sided(p, {21, 42, 21, 21})) < 1e-10);
}

TEST_CASE("two-sided normalization") {
  NSystemParams p{1, 1, 2, 2, 1, 0.5};
  auto d = normalize_two_sided(p, 1e-10);
  CHECK(d.tail_mass_bound <= 1e-10);
  CHECK(d.total() == Approx(1.0).epsilon(1e-12));
  CHECK(d.normalizer == d.probability(TwoSidedState::empty()));
}

TEST_CASE("two-sided system needs reneging on both sides") {
  CHECK_THROWS_AS(unnormalized_weight_two_sided({1, 1, 2, 2, 1, 0}, TwoSidedState::both(1, 1)),
                  std::invalid_argument);
  CHECK_THROWS_AS(normalize_two_sided({1, 1, 2, 2, 0, 1}), std::invalid_argument);
}

TEST_CASE("normalize dispatches on the system kind") {
  CHECK(std::holds_alternative<OneSidedDistribution>(normalize(kRef, SystemKind::one_sided)));
  CHECK(std::holds_alternative<TwoSidedDistribution>(normalize(kRef, SystemKind::two_sided)));
}
