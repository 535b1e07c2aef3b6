#include "nsq/product_form.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace nsq {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
// Largest truncation box the adaptive normalizer will try before giving up.
constexpr double kMaxBoxStates = 1 << 24;

void require_summable_one_sided(const NSystemParams& p) {
  if (p.theta_s == 0.0 && !stability_check(p)) {
    throw DivergenceError(
        "normalizer diverges; no-reneging stability conditions violated "
        "(need lambda1 + lambda2 < mu1 + mu2 and lambda2 < mu2)");
  }
}

void require_two_sided_reneging(const NSystemParams& p) {
  if (!(p.theta_s > 0.0) || !(p.theta_d > 0.0)) {
    throw std::invalid_argument("two-sided system requires theta_s > 0 and theta_d > 0");
  }
}

// log(1 - gamma_s) without forming gamma_s.
double log_inflexible_fraction(const NSystemParams& p) {
  return std::log(p.lambda2) - std::log(p.supply_rate());
}

// log of sum(exp(x)) over the values, ignoring -inf entries.
double log_sum_exp(const std::vector<double>& xs) {
  double hi = -kInf;
  for (double x : xs) hi = std::max(hi, x);
  if (hi == -kInf) return -kInf;
  double sum = 0.0;
  for (double x : xs) sum += std::exp(x - hi);
  return hi + std::log(sum);
}

// log(r / (1 - r)), the geometric tail sum_{t>=1} r^t; +inf when r >= 1.
double log_geometric_tail(double ratio) {
  if (!(ratio < 1.0)) return kInf;
  return std::log(ratio) - std::log1p(-ratio);
}

// Log weights of the one-sided product form on [0, max_m] x [0, max_n],
// row-major by m. Each row starts from the m-dependent prefactor and extends
// along n with ratio (l1 + l2) / (mu1 + mu2 + (m + i) theta_s).
std::vector<double> one_sided_log_box(const NSystemParams& p, int max_m, int max_n) {
  const double log_supply = std::log(p.supply_rate());
  const double demand = p.demand_rate();
  std::vector<double> lw(static_cast<std::size_t>(max_m + 1) * (max_n + 1));
  double known_product = 0.0;  // sum_{i<=m} log(l2 / (mu2 + i theta_s))
  for (int m = 0; m <= max_m; ++m) {
    double row = 0.0;
    if (m >= 1) {
      known_product += std::log(p.lambda2) - std::log(p.mu2 + m * p.theta_s);
      row = std::log(p.mu1) - std::log(demand + m * p.theta_s) + known_product;
    }
    auto* out = &lw[static_cast<std::size_t>(m) * (max_n + 1)];
    out[0] = row;
    for (int n = 1; n <= max_n; ++n) {
      row += log_supply - std::log(demand + (m + n) * p.theta_s);
      out[n] = row;
    }
  }
  return lw;
}

struct OneSidedTails {
  double log_n_tail = -kInf;  // mass with m <= max_m, n > max_n
  double log_m_tail = -kInf;  // mass with m > max_m
};

// Certified tail bounds for a one-sided box. For fixed m the weight ratio along
// n is decreasing, so the omitted part of row m is at most w(m, N) r / (1 - r)
// with r = (l1 + l2) / (mu1 + mu2 + (m + N + 1) theta_s). Whole rows satisfy
// R(m + 1) <= l2 / (mu2 + (m + 1) theta_s) * R(m), which bounds rows past M.
OneSidedTails one_sided_tails(const NSystemParams& p, const std::vector<double>& lw, int max_m,
                              int max_n) {
  OneSidedTails tails;
  std::vector<double> row_tails;
  row_tails.reserve(max_m + 1);
  for (int m = 0; m <= max_m; ++m) {
    double r = p.supply_rate() / (p.demand_rate() + (m + max_n + 1) * p.theta_s);
    row_tails.push_back(lw[static_cast<std::size_t>(m) * (max_n + 1) + max_n] +
                        log_geometric_tail(r));
  }
  tails.log_n_tail = log_sum_exp(row_tails);

  std::vector<double> last_row(lw.end() - (max_n + 1), lw.end());
  last_row.push_back(row_tails.back());
  double rho = p.lambda2 / (p.mu2 + (max_m + 1) * p.theta_s);
  tails.log_m_tail = log_sum_exp(last_row) + log_geometric_tail(rho);
  return tails;
}

// sum_{k=1..K} of log(numerator / (offset + k * step)), with the prefix sums.
std::vector<double> log_mm1_prefix(double numerator, double offset, double step, int count) {
  std::vector<double> out(count + 1, 0.0);
  for (int k = 1; k <= count; ++k)
    out[k] = out[k - 1] + std::log(numerator) - std::log(offset + k * step);
  return out;
}

std::optional<double> flow_residual_impl(double p_state, double out_rate, double in_flow) {
  double out = p_state * out_rate;
  if (out == 0.0) return in_flow == 0.0 ? 0.0 : kInf;
  return std::abs(out - in_flow) / out;
}

template <class State>
class ResidualAccumulator {
 public:
  explicit ResidualAccumulator(const StationaryDistribution<State>& dist) : dist_(dist) {}

  void add(const State& target, double out_rate,
           const std::vector<std::pair<State, double>>& inflow) {
    auto p = dist_.find(target);
    if (!p) return;
    double in_flow = 0.0;
    for (const auto& [source, rate] : inflow) {
      auto q = dist_.find(source);
      if (!q) return;
      in_flow += *q * rate;
    }
    if (auto r = flow_residual_impl(*p, out_rate, in_flow)) worst_ = std::max(worst_, *r);
  }

  double worst() const { return worst_; }

 private:
  const StationaryDistribution<State>& dist_;
  double worst_ = 0.0;
};

}  // namespace

FGDecomposition fg_decomposition(const NSystemParams& params, int max_m, int max_k) {
  if (max_m < 0 || max_k < 0) throw std::invalid_argument("table sizes must be non-negative");
  const NSystemParams& p = params;
  FGDecomposition fg;
  fg.a = p.mu2 / p.mu1;
  fg.b = p.theta_s / p.mu1;
  const double q = p.lambda2 / p.supply_rate();
  fg.f_values.assign(max_m + 1, 1.0);
  double log_f = 0.0;
  for (int m = 1; m <= max_m; ++m) {
    double step = m == 1 ? q / (fg.a + fg.b) : q * (1.0 + fg.a + (m - 1) * fg.b) / (fg.a + m * fg.b);
    log_f += std::log(step);
    fg.f_values[m] = std::exp(log_f);
  }
  fg.g_values.assign(max_k + 1, 1.0);
  double log_g = 0.0;
  for (int k = 1; k <= max_k; ++k) {
    log_g += std::log(p.supply_rate()) - std::log(p.demand_rate() + k * p.theta_s);
    fg.g_values[k] = std::exp(log_g);
  }
  return fg;
}

double f_known(const NSystemParams& p, int m) {
  if (m < 0) throw std::invalid_argument("m must be non-negative");
  if (m == 0) return 1.0;
  const double a = p.mu2 / p.mu1;
  const double b = p.theta_s / p.mu1;
  double log_f = m * log_inflexible_fraction(p) - std::log(a + b);
  for (int i = 2; i <= m; ++i) log_f += std::log(1.0 + a + (i - 1) * b) - std::log(a + i * b);
  return std::exp(log_f);
}

double g_total(const NSystemParams& p, int k) {
  if (k < 0) throw std::invalid_argument("k must be non-negative");
  double log_g = 0.0;
  for (int i = 1; i <= k; ++i)
    log_g += std::log(p.supply_rate()) - std::log(p.demand_rate() + i * p.theta_s);
  return std::exp(log_g);
}

double g_first_from_balance(const NSystemParams& p) {
  const double a = p.mu2 / p.mu1;
  const double b = p.theta_s / p.mu1;
  const double gs = p.gamma_s();
  return p.supply_rate() /
         ((p.theta_s + p.mu1 * gs + p.mu2) + (1.0 - gs) / (a + b) * (p.mu2 + p.theta_s));
}

double f_sum_identity_residual(const NSystemParams& p, int m) {
  if (m < 1) throw std::invalid_argument("m must be at least 1");
  const double a = p.mu2 / p.mu1;
  const double b = p.theta_s / p.mu1;
  const double q = p.lambda2 / p.supply_rate();
  double lhs = 0.0;
  double qk = 1.0;
  for (int k = 1; k <= m; ++k) {
    qk *= q;
    lhs += f_known(p, m - k) * qk;
  }
  double rhs = f_known(p, m) * (a + m * b);
  return std::abs(lhs - rhs) / std::abs(rhs);
}

double g_recursion_residual(const NSystemParams& p, int m) {
  if (m < 2) throw std::invalid_argument("m must be at least 2");
  const double a = p.mu2 / p.mu1;
  const double b = p.theta_s / p.mu1;
  const double gs = p.gamma_s();
  const double g1 = g_total(p, m - 1);
  const double g2 = g_total(p, m - 2);
  double numer = g1 * (p.demand_rate() + p.supply_rate() + (m - 1) * p.theta_s) - g2 * p.supply_rate();
  double denom = (m * p.theta_s + p.mu1 * gs + p.mu2) + (1.0 - gs) / (a + b) * (p.mu2 + p.theta_s);
  double expected = g_total(p, m);
  return std::abs(numer / denom - expected) / expected;
}

double log_weight_one_sided(const NSystemParams& p, const OneSidedState& s) {
  if (s.m < 0 || s.n < 0) throw std::invalid_argument("state counts must be non-negative");
  require_summable_one_sided(p);
  const double supply = p.supply_rate();
  const double demand = p.demand_rate();
  double lw = 0.0;
  if (s.m >= 1) {
    lw += std::log(p.mu1) - std::log(demand + s.m * p.theta_s);
    for (int i = 1; i <= s.m; ++i) lw += std::log(p.lambda2) - std::log(p.mu2 + i * p.theta_s);
  }
  for (int i = 1; i <= s.n; ++i)
    lw += std::log(supply) - std::log(demand + (s.m + i) * p.theta_s);
  return lw;
}

double unnormalized_weight_one_sided(const NSystemParams& p, const OneSidedState& s) {
  return std::exp(log_weight_one_sided(p, s));
}

double alternative_form_weight(const NSystemParams& p, const OneSidedState& s) {
  if (s.m < 0 || s.n < 0) throw std::invalid_argument("state counts must be non-negative");
  require_summable_one_sided(p);
  const double log_q = log_inflexible_fraction(p);
  double lw = 0.0;
  for (int i = 1; i <= s.m + s.n; ++i)
    lw += std::log(p.supply_rate()) - std::log(p.demand_rate() + i * p.theta_s);
  for (int i = 1; i <= s.m; ++i) {
    double head = p.mu1 + (i > 1 ? p.mu2 : 0.0) + (i - 1) * p.theta_s;
    lw += std::log(head) + log_q - std::log(p.mu2 + i * p.theta_s);
  }
  return std::exp(lw);
}

double no_reneging_normalizer(const NSystemParams& p) {
  if (p.theta_s != 0.0) throw std::invalid_argument("closed-form normalizer requires theta_s = 0");
  require_summable_one_sided(p);
  const double supply = p.supply_rate();
  const double demand = p.demand_rate();
  return (demand - supply) * (p.mu2 - p.lambda2) / ((demand - p.lambda2) * p.mu2);
}

double no_reneging_distribution(const NSystemParams& p, const OneSidedState& s) {
  if (s.m < 0 || s.n < 0) throw std::invalid_argument("state counts must be non-negative");
  const double B = no_reneging_normalizer(p);
  const double x = p.lambda2 / p.mu2;
  const double y = p.supply_rate() / p.demand_rate();
  double value = std::pow(y, s.n) * B;
  if (s.m >= 1) value *= p.mu1 / p.demand_rate() * std::pow(x, s.m);
  return value;
}

double log_weight_two_sided(const NSystemParams& p, const TwoSidedState& s) {
  require_two_sided_reneging(p);
  switch (s.regime()) {
    case Regime::empty:
      return 0.0;
    case Regime::left:
      return log_weight_one_sided(p, {s.first(), s.second()});
    case Regime::right:
      return log_weight_one_sided(mirror(p), {s.first(), s.second()});
    case Regime::both: {
      double lw = 0.0;
      for (int k = 1; k <= s.first(); ++k) lw += std::log(p.lambda2) - std::log(p.mu2 + k * p.theta_s);
      for (int k = 1; k <= s.second(); ++k) lw += std::log(p.mu1) - std::log(p.lambda1 + k * p.theta_d);
      return lw;
    }
  }
  throw std::logic_error("unreachable regime");
}

double unnormalized_weight_two_sided(const NSystemParams& p, const TwoSidedState& s) {
  return std::exp(log_weight_two_sided(p, s));
}

namespace {

struct OneSidedBox {
  OneSidedDistribution dist;
  double log_n_tail_rel = kInf;  // log of n-tail / included mass
  double log_m_tail_rel = kInf;
};

OneSidedBox one_sided_box(const NSystemParams& p, int max_m, int max_n) {
  if (max_m < 0 || max_n < 0) throw std::invalid_argument("truncation bounds must be non-negative");
  require_summable_one_sided(p);
  auto lw = one_sided_log_box(p, max_m, max_n);
  auto tails = one_sided_tails(p, lw, max_m, max_n);
  const double log_total = log_sum_exp(lw);

  OneSidedBox box;
  box.dist.truncation = {max_m, max_n, 0, 0};
  for (int m = 0; m <= max_m; ++m)
    for (int n = 0; n <= max_n; ++n)
      box.dist.probabilities.emplace_hint(
          box.dist.probabilities.end(), OneSidedState{m, n},
          std::exp(lw[static_cast<std::size_t>(m) * (max_n + 1) + n] - log_total));
  box.dist.normalizer = std::exp(-log_total);
  box.log_n_tail_rel = tails.log_n_tail - log_total;
  box.log_m_tail_rel = tails.log_m_tail - log_total;
  box.dist.tail_mass_bound =
      std::min(1.0, std::exp(box.log_n_tail_rel) + std::exp(box.log_m_tail_rel));
  return box;
}

struct TwoSidedBox {
  TwoSidedDistribution dist;
  double left_n = kInf, left_m = kInf, right_n = kInf, right_m = kInf, both_i = kInf,
         both_j = kInf;  // relative tails, linear scale
};

TwoSidedBox two_sided_box(const NSystemParams& p, const Truncation& t) {
  require_two_sided_reneging(p);
  if (t.max_m < 0 || t.max_n < 0 || t.max_i < 1 || t.max_j < 1)
    throw std::invalid_argument("two-sided truncation needs max_i, max_j >= 1");
  const NSystemParams q = mirror(p);
  auto left = one_sided_log_box(p, t.max_m, t.max_n);
  auto right = one_sided_log_box(q, t.max_m, t.max_n);
  auto left_tails = one_sided_tails(p, left, t.max_m, t.max_n);
  auto right_tails = one_sided_tails(q, right, t.max_m, t.max_n);
  auto supply_part = log_mm1_prefix(p.lambda2, p.mu2, p.theta_s, t.max_i);
  auto demand_part = log_mm1_prefix(p.mu1, p.lambda1, p.theta_d, t.max_j);

  // Empty state shares index 0 of both one-sided boxes; count it once.
  std::vector<double> all(left.begin(), left.end());
  all.insert(all.end(), right.begin() + 1, right.end());
  std::vector<double> supply_terms(supply_part.begin() + 1, supply_part.end());
  std::vector<double> demand_terms(demand_part.begin() + 1, demand_part.end());
  const double log_supply_sum = log_sum_exp(supply_terms);
  const double log_demand_sum = log_sum_exp(demand_terms);
  all.push_back(log_supply_sum + log_demand_sum);
  const double log_total = log_sum_exp(all);

  // Both-queues weights factor as A(i) C(j); each factor is an M/M/1+M chain
  // whose tail past the box is geometric.
  const double log_supply_tail =
      supply_part[t.max_i] + log_geometric_tail(p.lambda2 / (p.mu2 + (t.max_i + 1) * p.theta_s));
  const double log_demand_tail =
      demand_part[t.max_j] + log_geometric_tail(p.mu1 / (p.lambda1 + (t.max_j + 1) * p.theta_d));

  TwoSidedBox box;
  box.dist.truncation = t;
  auto& probs = box.dist.probabilities;
  probs.emplace(TwoSidedState::empty(), std::exp(-log_total));
  for (int m = 0; m <= t.max_m; ++m)
    for (int n = 0; n <= t.max_n; ++n) {
      if (m + n == 0) continue;
      std::size_t idx = static_cast<std::size_t>(m) * (t.max_n + 1) + n;
      probs.emplace(TwoSidedState::left(m, n), std::exp(left[idx] - log_total));
      probs.emplace(TwoSidedState::right(m, n), std::exp(right[idx] - log_total));
    }
  for (int i = 1; i <= t.max_i; ++i)
    for (int j = 1; j <= t.max_j; ++j)
      probs.emplace(TwoSidedState::both(i, j),
                    std::exp(supply_part[i] + demand_part[j] - log_total));

  box.dist.normalizer = std::exp(-log_total);
  box.left_n = std::exp(left_tails.log_n_tail - log_total);
  box.left_m = std::exp(left_tails.log_m_tail - log_total);
  box.right_n = std::exp(right_tails.log_n_tail - log_total);
  box.right_m = std::exp(right_tails.log_m_tail - log_total);
  // (S_A + T_A)(S_C + T_C) - S_A S_C, split by which factor overflows.
  box.both_i = std::exp(log_supply_tail + log_sum_exp({log_demand_sum, log_demand_tail}) - log_total);
  box.both_j = std::exp(log_demand_tail + log_supply_sum - log_total);
  double tail = box.left_n + box.left_m + box.right_n + box.right_m + box.both_i + box.both_j;
  box.dist.tail_mass_bound = std::min(1.0, tail);
  return box;
}

void check_tolerance(double tol) {
  if (!(tol > 0.0) || tol > 1e-3) throw std::invalid_argument("tolerance must lie in (0, 1e-3]");
}

void check_box_size(double states) {
  if (states > kMaxBoxStates)
    throw std::runtime_error("truncation box exceeds " + std::to_string(kMaxBoxStates) +
                             " states before the tail bound met the tolerance");
}

}  // namespace

OneSidedDistribution product_form_one_sided(const NSystemParams& params, int max_m, int max_n) {
  return one_sided_box(params, max_m, max_n).dist;
}

TwoSidedDistribution product_form_two_sided(const NSystemParams& params, const Truncation& bounds) {
  return two_sided_box(params, bounds).dist;
}

OneSidedDistribution normalize_one_sided(const NSystemParams& params, double tol) {
  check_tolerance(tol);
  int max_m = 8;
  int max_n = 8;
  for (;;) {
    check_box_size(static_cast<double>(max_m + 1) * (max_n + 1));
    auto box = one_sided_box(params, max_m, max_n);
    double n_tail = std::exp(box.log_n_tail_rel);
    double m_tail = std::exp(box.log_m_tail_rel);
    if (n_tail + m_tail < tol) return std::move(box.dist);
    if (n_tail >= tol / 2) max_n *= 2;
    if (m_tail >= tol / 2) max_m *= 2;
  }
}

TwoSidedDistribution normalize_two_sided(const NSystemParams& params, double tol) {
  check_tolerance(tol);
  Truncation t{8, 8, 8, 8};
  const double share = tol / 6;
  for (;;) {
    check_box_size(2.0 * (t.max_m + 1) * (t.max_n + 1) + static_cast<double>(t.max_i) * t.max_j);
    auto box = two_sided_box(params, t);
    if (box.dist.tail_mass_bound < tol) return std::move(box.dist);
    if (box.left_n >= share || box.right_n >= share) t.max_n *= 2;
    if (box.left_m >= share || box.right_m >= share) t.max_m *= 2;
    if (box.both_i >= share) t.max_i *= 2;
    if (box.both_j >= share) t.max_j *= 2;
  }
}

AnyDistribution normalize(const NSystemParams& params, SystemKind system, double tol) {
  if (system == SystemKind::one_sided) return normalize_one_sided(params, tol);
  return normalize_two_sided(params, tol);
}

double partial_balance_residual(const NSystemParams& p, int m) {
  if (m < 1) throw std::invalid_argument("m must be at least 1");
  const double log_q = log_inflexible_fraction(p);
  const double log_out = log_weight_one_sided(p, {m, 0}) + std::log(p.mu2 + p.theta_s * m);
  double in_rel = 0.0;  // inflow / outflow
  for (int k = 1; k <= m; ++k)
    in_rel += std::exp(log_weight_one_sided(p, {m - k, k}) + std::log(p.mu1) + k * log_q - log_out);
  return std::abs(in_rel - 1.0);
}

double global_balance_residual(const NSystemParams& p, const OneSidedDistribution& dist) {
  const double L = p.supply_rate();
  const double M = p.demand_rate();
  const double ts = p.theta_s;
  const double gs = p.gamma_s();
  const double q = 1.0 - gs;
  ResidualAccumulator<OneSidedState> acc(dist);
  std::vector<std::pair<OneSidedState, double>> in;
  for (const auto& [s, prob] : dist.probabilities) {
    const int m = s.m;
    const int n = s.n;
    in.clear();
    double out = 0.0;
    if (m >= 1 && n >= 1) {
      out = M + L + (m + n) * ts;
      in.push_back({{m, n + 1}, (n + 1) * ts});
      in.push_back({{m + 1, n}, p.mu2 + (m + 1) * ts});
      in.push_back({{m, n - 1}, L});
      for (int k = 0; k <= m; ++k) in.push_back({{m - k, n + k + 1}, p.mu1 * gs * std::pow(q, k)});
    } else if (m >= 1) {
      out = p.mu2 + L + m * ts;
      in.push_back({{m, 1}, ts});
      in.push_back({{m + 1, 0}, p.mu2 + (m + 1) * ts});
      for (int k = 0; k <= m; ++k) in.push_back({{m - k, k + 1}, p.mu1 * gs * std::pow(q, k)});
      for (int k = 1; k <= m; ++k) in.push_back({{m - k, k}, p.mu1 * std::pow(q, k)});
    } else if (n >= 1) {
      out = M + L + n * ts;
      in.push_back({{0, n + 1}, (n + 1) * ts + p.mu1 * gs + p.mu2});
      in.push_back({{1, n}, p.mu2 + ts});
      in.push_back({{0, n - 1}, L});
    } else {
      out = L;
      in.push_back({{0, 1}, ts + p.mu1 * gs + p.mu2});
      in.push_back({{1, 0}, p.mu2 + ts});
    }
    acc.add(s, out, in);
  }
  return acc.worst();
}

double global_balance_residual(const NSystemParams& p, const TwoSidedDistribution& dist) {
  using S = TwoSidedState;
  const double L = p.supply_rate();
  const double M = p.demand_rate();
  const double ts = p.theta_s;
  const double td = p.theta_d;
  const double gs = p.gamma_s();
  const double gd = p.gamma_d();
  auto left = [](int m, int n) { return m + n == 0 ? S::empty() : S::left(m, n); };
  auto right = [](int m, int n) { return m + n == 0 ? S::empty() : S::right(m, n); };

  ResidualAccumulator<S> acc(dist);
  std::vector<std::pair<S, double>> in;
  for (const auto& [s, prob] : dist.probabilities) {
    in.clear();
    double out = 0.0;
    const int a = s.first();
    const int b = s.second();
    switch (s.regime()) {
      case Regime::empty:
        out = L + M;
        in.push_back({S::left(0, 1), ts + p.mu1 * gs + p.mu2});
        in.push_back({S::left(1, 0), p.mu2 + ts});
        in.push_back({S::right(1, 0), td + p.lambda1});
        in.push_back({S::right(0, 1), td + p.lambda1 + p.lambda2 * gd});
        break;
      case Regime::left: {
        const int m = a, n = b;
        out = M + L + (m + n) * ts;
        if (m >= 1 && n >= 1) {
          in.push_back({left(m, n + 1), (n + 1) * ts});
          in.push_back({left(m + 1, n), p.mu2 + (m + 1) * ts});
          in.push_back({left(m, n - 1), L});
          for (int k = 0; k <= m; ++k)
            in.push_back({left(m - k, n + k + 1), p.mu1 * gs * std::pow(1 - gs, k)});
        } else if (m >= 1) {
          in.push_back({left(m, 1), ts});
          in.push_back({left(m + 1, 0), p.mu2 + (m + 1) * ts});
          in.push_back({S::both(m, 1), p.lambda1 + td});
          for (int k = 0; k <= m; ++k)
            in.push_back({left(m - k, k + 1), p.mu1 * gs * std::pow(1 - gs, k)});
        } else {
          in.push_back({left(0, n + 1), (n + 1) * ts + p.mu1 * gs + p.mu2});
          in.push_back({left(1, n), p.mu2 + ts});
          in.push_back({left(0, n - 1), L});
        }
        break;
      }
      case Regime::right: {
        const int m = a, n = b;
        out = M + L + (m + n) * td;
        if (m >= 1 && n >= 1) {
          in.push_back({right(m, n + 1), (n + 1) * td});
          in.push_back({right(m + 1, n), p.lambda1 + (m + 1) * td});
          in.push_back({right(m, n - 1), M});
          for (int k = 0; k <= m; ++k)
            in.push_back({right(m - k, n + k + 1), p.lambda2 * gd * std::pow(1 - gd, k)});
        } else if (m >= 1) {
          in.push_back({right(m, 1), td});
          in.push_back({right(m + 1, 0), p.lambda1 + (m + 1) * td});
          in.push_back({S::both(1, m), p.mu2 + ts});
          for (int k = 0; k <= m; ++k)
            in.push_back({right(m - k, k + 1), p.lambda2 * gd * std::pow(1 - gd, k)});
        } else {
          in.push_back({right(0, n + 1), (n + 1) * td + p.lambda2 * gd + p.lambda1});
          in.push_back({right(1, n), p.lambda1 + td});
          in.push_back({right(0, n - 1), M});
        }
        break;
      }
      case Regime::both: {
        const int i = a, j = b;
        out = i * ts + j * td + M + L;
        in.push_back({S::both(i + 1, j), (i + 1) * ts + p.mu2});
        in.push_back({S::both(i, j + 1), (j + 1) * td + p.lambda1});
        if (i >= 2) {
          in.push_back({S::both(i - 1, j), p.lambda2});
        } else {
          // inflexible supply arriving to a right queue whose unknowns are all type 1
          for (int k = 0; k <= j; ++k)
            in.push_back({right(j - k, k), p.lambda2 * std::pow(1 - gd, k)});
        }
        if (j >= 2) {
          in.push_back({S::both(i, j - 1), p.mu1});
        } else {
          for (int k = 0; k <= i; ++k)
            in.push_back({left(i - k, k), p.mu1 * std::pow(1 - gs, k)});
        }
        break;
      }
    }
    acc.add(s, out, in);
  }
  return acc.worst();
}

}  // namespace nsq
