#pragma once

#include <variant>
#include <vector>

#include "nsq/model.hpp"

namespace nsq {

/// Default normalization tolerance on the certified relative tail mass.
inline constexpr double kDefaultTolerance = 1e-10;

/// Tables of the two factors of the one-sided weight w(m, n) = f(m) g(m + n).
struct FGDecomposition {
  std::vector<double> f_values;  ///< f(0..max_m), f(0) = 1
  std::vector<double> g_values;  ///< g(0..max_k), g(0) = 1
  double a = 0.0;                ///< mu2 / mu1
  double b = 0.0;                ///< theta_s / mu1
};

FGDecomposition fg_decomposition(const NSystemParams& params, int max_m, int max_k);

/// Known-part factor f(m), evaluated from its closed form in log space.
double f_known(const NSystemParams& params, int m);

/// Total-count factor g(k): birth-death weights with birth rate
/// lambda1 + lambda2 and death rate mu1 + mu2 + i * theta_s.
double g_total(const NSystemParams& params, int k);

/// g(1) obtained from the balance equation of the empty state together with
/// f(1), written in terms of a = mu2/mu1 and b = theta_s/mu1.
double g_first_from_balance(const NSystemParams& params);

/// Relative error of sum_{k=1..m} f(m-k)(1-gamma_s)^k = f(m)(a + m b).
double f_sum_identity_residual(const NSystemParams& params, int m);

/// Relative error of g(m) against the second-order recursion derived from
/// the balance equations of the (0, n) states, for m >= 2.
double g_recursion_residual(const NSystemParams& params, int m);

double log_weight_one_sided(const NSystemParams& params, const OneSidedState& s);

/// pi(m, n) / pi(0, 0) for the one-sided system.
///
/// Throws DivergenceError when theta_s = 0 and the no-reneging stability
/// conditions fail.
double unnormalized_weight_one_sided(const NSystemParams& params, const OneSidedState& s);

/// The same weight written as g(m + n) * prod_{i<=m} s_i.
double alternative_form_weight(const NSystemParams& params, const OneSidedState& s);

/// Closed-form empty-system probability without reneging.
double no_reneging_normalizer(const NSystemParams& params);

/// Exact stationary probability without reneging. Requires theta_s = 0 and a
/// stable parameter set.
double no_reneging_distribution(const NSystemParams& params, const OneSidedState& s);

/// log of pi(state) / pi(empty) for the two-sided system.
double log_weight_two_sided(const NSystemParams& params, const TwoSidedState& s);

/// pi(state) / pi(empty). Requires theta_s > 0 and theta_d > 0.
double unnormalized_weight_two_sided(const NSystemParams& params, const TwoSidedState& s);

/// Product-form distribution normalized over a fixed box, with the certified
/// bound on the mass outside it (capped at 1 when no geometric bound applies).
OneSidedDistribution product_form_one_sided(const NSystemParams& params, int max_m, int max_n);
TwoSidedDistribution product_form_two_sided(const NSystemParams& params,
                                            const Truncation& bounds);

/// Grows the truncation box until the certified tail bound drops below `tol`.
OneSidedDistribution normalize_one_sided(const NSystemParams& params,
                                         double tol = kDefaultTolerance);
TwoSidedDistribution normalize_two_sided(const NSystemParams& params,
                                         double tol = kDefaultTolerance);

using AnyDistribution = std::variant<OneSidedDistribution, TwoSidedDistribution>;

AnyDistribution normalize(const NSystemParams& params, SystemKind system,
                          double tol = kDefaultTolerance);

/// Relative mismatch between the flow into (m, 0) from scans that reveal every
/// unknown supply as inflexible and the flow out of (m, 0) through the known
/// part. m >= 1.
double partial_balance_residual(const NSystemParams& params, int m);

/// Substitutes `dist` into the equilibrium equations and returns the largest
/// relative imbalance |out - in| / out over states whose equation only refers
/// to states present in `dist`.
double global_balance_residual(const NSystemParams& params, const OneSidedDistribution& dist);
double global_balance_residual(const NSystemParams& params, const TwoSidedDistribution& dist);

}  // namespace nsq
