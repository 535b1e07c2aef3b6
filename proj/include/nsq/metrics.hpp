#pragma once

#include <optional>
#include <span>
#include <vector>

#include "nsq/model.hpp"
#include "nsq/product_form.hpp"

namespace nsq {

struct MetricsReport {
  SystemKind system = SystemKind::one_sided;
  double p_empty = 0.0;
  double mean_supply = 0.0;
  double mean_demand = 0.0;
  double abandonment_rate_supply = 0.0;
  double abandonment_rate_demand = 0.0;
  /// Matches per unit time, counted from the arrivals that find a partner.
  double match_throughput = 0.0;
  /// One-sided only: an arriving demand of the given type is turned away.
  std::optional<double> loss_prob_type1_demand;
  std::optional<double> loss_prob_type2_demand;

  bool operator==(const MetricsReport&) const = default;
};

/// Largest tail mass a distribution may carry to be summarized.
inline constexpr double kMetricsTailLimit = 1e-6;

/// Throws std::invalid_argument when dist.tail_mass_bound >= 1e-6.
MetricsReport compute_metrics(const NSystemParams& params, const OneSidedDistribution& dist);
MetricsReport compute_metrics(const NSystemParams& params, const TwoSidedDistribution& dist);
MetricsReport compute_metrics(const NSystemParams& params, const AnyDistribution& dist);

/// Relative supply-side flow imbalance
/// |lambda1 + lambda2 - throughput - supply abandonment| / (lambda1 + lambda2).
double supply_flow_residual(const NSystemParams& params, const MetricsReport& report);
/// Demand-side counterpart for the two-sided system.
double demand_flow_residual(const NSystemParams& params, const MetricsReport& report);

struct SweepRow {
  double gamma = 0.0;
  NSystemParams params;
  MetricsReport metrics;
};

/// For each gamma sets lambda1 = gamma * total and lambda2 = (1 - gamma) *
/// total, normalizes at `tol` and summarizes.
std::vector<SweepRow> sweep_flexibility(const NSystemParams& base, std::span<const double> gamma_grid,
                                        double fixed_total_supply_rate, SystemKind system,
                                        double tol = kDefaultTolerance);

}  // namespace nsq
