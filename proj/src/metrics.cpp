#include "nsq/metrics.hpp"

#include <cmath>
#include <stdexcept>

namespace nsq {

namespace {

template <class State>
void require_small_tail(const StationaryDistribution<State>& dist) {
  if (!(dist.tail_mass_bound < kMetricsTailLimit))
    throw std::invalid_argument("distribution tail mass bound exceeds 1e-6; tighten the tolerance");
}

}  // namespace

MetricsReport compute_metrics(const NSystemParams& p, const OneSidedDistribution& dist) {
  require_small_tail(dist);
  const double miss = 1.0 - p.gamma_s();
  MetricsReport r;
  r.system = SystemKind::one_sided;
  r.p_empty = dist.probability(OneSidedState{});
  double loss1 = 0.0;
  for (const auto& [s, prob] : dist.probabilities) {
    r.mean_supply += (s.m + s.n) * prob;
    // type-1 demand needs a flexible unit among the n unknowns
    loss1 += prob * std::pow(miss, s.n);
  }
  r.abandonment_rate_supply = p.theta_s * r.mean_supply;
  r.loss_prob_type1_demand = loss1;
  r.loss_prob_type2_demand = r.p_empty;
  r.match_throughput = p.mu1 * (1.0 - loss1) + p.mu2 * (1.0 - r.p_empty);
  return r;
}

MetricsReport compute_metrics(const NSystemParams& p, const TwoSidedDistribution& dist) {
  require_small_tail(dist);
  const double supply_miss = 1.0 - p.gamma_s();
  const double demand_miss = 1.0 - p.gamma_d();
  MetricsReport r;
  r.system = SystemKind::two_sided;
  r.p_empty = dist.probability(TwoSidedState::empty());
  for (const auto& [s, prob] : dist.probabilities) {
    r.mean_supply += s.supply_count() * prob;
    r.mean_demand += s.demand_count() * prob;
    switch (s.regime()) {
      case Regime::left:
        r.match_throughput += prob * (p.mu2 + p.mu1 * (1.0 - std::pow(supply_miss, s.second())));
        break;
      case Regime::right:
        r.match_throughput += prob * (p.lambda1 + p.lambda2 * (1.0 - std::pow(demand_miss, s.second())));
        break;
      case Regime::both:
        r.match_throughput += prob * (p.lambda1 + p.mu2);
        break;
      case Regime::empty:
        break;
    }
  }
  r.abandonment_rate_supply = p.theta_s * r.mean_supply;
  r.abandonment_rate_demand = p.theta_d * r.mean_demand;
  return r;
}

MetricsReport compute_metrics(const NSystemParams& params, const AnyDistribution& dist) {
  return std::visit([&](const auto& d) { return compute_metrics(params, d); }, dist);
}

double supply_flow_residual(const NSystemParams& p, const MetricsReport& r) {
  return std::abs(p.supply_rate() - r.match_throughput - r.abandonment_rate_supply) / p.supply_rate();
}

double demand_flow_residual(const NSystemParams& p, const MetricsReport& r) {
  if (r.system == SystemKind::one_sided) {
    double lost = p.mu1 * r.loss_prob_type1_demand.value() + p.mu2 * r.loss_prob_type2_demand.value();
    return std::abs(p.demand_rate() - r.match_throughput - lost) / p.demand_rate();
  }
  return std::abs(p.demand_rate() - r.match_throughput - r.abandonment_rate_demand) / p.demand_rate();
}

std::vector<SweepRow> sweep_flexibility(const NSystemParams& base, std::span<const double> gamma_grid,
                                        double fixed_total_supply_rate, SystemKind system,
                                        double tol) {
  if (!(fixed_total_supply_rate > 0.0) || !std::isfinite(fixed_total_supply_rate))
    throw std::invalid_argument("total supply rate must be positive");
  std::vector<SweepRow> rows;
  rows.reserve(gamma_grid.size());
  for (double gamma : gamma_grid) {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma grid values must lie in (0, 1)");
    NSystemParams p = base;
    p.lambda1 = gamma * fixed_total_supply_rate;
    p.lambda2 = (1.0 - gamma) * fixed_total_supply_rate;
    validate(p);
    rows.push_back({gamma, p, compute_metrics(p, normalize(p, system, tol))});
  }
  return rows;
}

}  // namespace nsq
