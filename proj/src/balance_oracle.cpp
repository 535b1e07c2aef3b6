#include "nsq/balance_oracle.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <iomanip>
#include <limits>
#include <stdexcept>
#include <string>

namespace nsq {

template <class State>
std::size_t TruncatedGenerator<State>::index_of(const State& s) const {
  auto it = index.find(s);
  if (it == index.end()) throw std::out_of_range("state " + to_string(s) + " is outside the truncation");
  return it->second;
}

namespace {

// Collects the outgoing rates of one state at a time, merging parallel edges
// and dropping targets outside the box.
template <class State>
class GeneratorBuilder {
 public:
  GeneratorBuilder(std::vector<State> states, const Truncation& bounds) {
    gen_.states = std::move(states);
    gen_.truncation = bounds;
    for (std::size_t i = 0; i < gen_.states.size(); ++i) gen_.index.emplace(gen_.states[i], i);
    gen_.exit_rates.assign(gen_.states.size(), 0.0);
  }

  void begin(const State& s) {
    row_.clear();
    current_ = gen_.index.at(s);
  }

  void add(const State& target, double rate) {
    if (!(rate > 0.0)) return;
    auto it = gen_.index.find(target);
    if (it == gen_.index.end()) return;
    if (it->second == current_) throw std::logic_error("self-loop in generator");
    row_[it->second] += rate;
  }

  void end() {
    double exit = 0.0;
    for (const auto& [to, rate] : row_) {
      gen_.rates.push_back({current_, to, rate});
      exit += rate;
    }
    gen_.exit_rates[current_] = exit;
  }

  TruncatedGenerator<State> finish() { return std::move(gen_); }

 private:
  TruncatedGenerator<State> gen_;
  std::map<std::size_t, double> row_;
  std::size_t current_ = 0;
};

// Rates driving one queued side: for the left side these are the supply
// arrival rate, the type-2 demand that takes the head of the queue, the type-1
// demand that scans for flexible supply, and supply patience. The right side
// uses the same shape with the roles mirrored.
struct SideRates {
  double arrival;
  double head;
  double scan;
  double scan_success;
  double reneging;
};

// Adds every transition of a parsimonious (m, n) queue state. `make(m, n)`
// builds the in-regime state (the empty state when m + n = 0) and
// `scan_failure(total)` the target when all unknowns fail the scan.
template <class State, class Make, class Fail>
void add_side_transitions(GeneratorBuilder<State>& b, const SideRates& r, int m, int n, Make make,
                          Fail scan_failure) {
  b.add(make(m, n + 1), r.arrival);
  if (n >= 1) b.add(make(m, n - 1), n * r.reneging);
  if (m >= 1) b.add(make(m - 1, n), m * r.reneging);
  if (m >= 1) {
    b.add(make(m - 1, n), r.head);
  } else if (n >= 1) {
    b.add(make(0, n - 1), r.head);
  }
  if (n >= 1) {
    double fail = 1.0;
    for (int k = 0; k < n; ++k) {
      b.add(make(m + k, n - k - 1), r.scan * r.scan_success * fail);
      fail *= 1.0 - r.scan_success;
    }
    scan_failure(m + n, r.scan * fail);
  } else if (m >= 1) {
    scan_failure(m, r.scan);
  }
}

void check_bound(int value, const char* name) {
  if (value < 2) throw std::invalid_argument(std::string(name) + " must be at least 2");
}

}  // namespace

OneSidedGenerator build_generator_one_sided(const NSystemParams& p, int max_m, int max_n) {
  check_bound(max_m, "max_m");
  check_bound(max_n, "max_n");
  std::vector<OneSidedState> states;
  for (int m = 0; m <= max_m; ++m)
    for (int n = 0; n <= max_n; ++n) states.push_back({m, n});
  GeneratorBuilder<OneSidedState> b(states, {max_m, max_n, 0, 0});

  const SideRates side{p.supply_rate(), p.mu2, p.mu1, p.gamma_s(), p.theta_s};
  auto make = [](int m, int n) { return OneSidedState{m, n}; };
  for (const auto& s : states) {
    b.begin(s);
    // A type-1 demand that finds no flexible supply leaves; every scanned
    // unknown joins the known part.
    add_side_transitions(b, side, s.m, s.n, make,
                         [&](int total, double rate) {
                           if (s.n >= 1) b.add(OneSidedState{total, 0}, rate);
                         });
    b.end();
  }
  return b.finish();
}

TwoSidedGenerator build_generator_two_sided(const NSystemParams& p, const Truncation& t) {
  check_bound(t.max_m, "max_m");
  check_bound(t.max_n, "max_n");
  check_bound(t.max_i, "max_i");
  check_bound(t.max_j, "max_j");
  if (!(p.theta_s > 0.0) || !(p.theta_d > 0.0))
    throw std::invalid_argument("two-sided system requires theta_s > 0 and theta_d > 0");

  using S = TwoSidedState;
  std::vector<S> states{S::empty()};
  for (int m = 0; m <= t.max_m; ++m)
    for (int n = 0; n <= t.max_n; ++n)
      if (m + n > 0) states.push_back(S::left(m, n));
  for (int m = 0; m <= t.max_m; ++m)
    for (int n = 0; n <= t.max_n; ++n)
      if (m + n > 0) states.push_back(S::right(m, n));
  for (int i = 1; i <= t.max_i; ++i)
    for (int j = 1; j <= t.max_j; ++j) states.push_back(S::both(i, j));
  std::sort(states.begin(), states.end());
  GeneratorBuilder<S> b(states, t);

  auto left = [](int m, int n) { return m + n == 0 ? S::empty() : S::left(m, n); };
  auto right = [](int m, int n) { return m + n == 0 ? S::empty() : S::right(m, n); };
  auto both = [&](int i, int j) -> S {
    if (i == 0) return right(j, 0);
    if (j == 0) return left(i, 0);
    return S::both(i, j);
  };
  const SideRates left_side{p.supply_rate(), p.mu2, p.mu1, p.gamma_s(), p.theta_s};
  const SideRates right_side{p.demand_rate(), p.lambda1, p.lambda2, p.gamma_d(), p.theta_d};

  for (const auto& s : states) {
    b.begin(s);
    const int a = s.first();
    const int c = s.second();
    switch (s.regime()) {
      case Regime::empty:
        b.add(S::left(0, 1), p.supply_rate());
        b.add(S::right(0, 1), p.demand_rate());
        break;
      case Regime::left:
        // type-1 demand that finds only inflexible supply queues up
        add_side_transitions(b, left_side, a, c, left,
                             [&](int total, double rate) { b.add(S::both(total, 1), rate); });
        break;
      case Regime::right:
        add_side_transitions(b, right_side, a, c, right,
                             [&](int total, double rate) { b.add(S::both(1, total), rate); });
        break;
      case Regime::both:
        b.add(both(a + 1, c), p.lambda2);
        b.add(both(a - 1, c), p.mu2 + a * p.theta_s);
        b.add(both(a, c + 1), p.mu1);
        b.add(both(a, c - 1), p.lambda1 + c * p.theta_d);
        break;
    }
    b.end();
  }
  return b.finish();
}

template <class State>
bool is_irreducible(const TruncatedGenerator<State>& gen) {
  const std::size_t n = gen.size();
  if (n == 0) return false;
  std::vector<std::vector<std::size_t>> fwd(n), bwd(n);
  for (const auto& tr : gen.rates) {
    fwd[tr.from].push_back(tr.to);
    bwd[tr.to].push_back(tr.from);
  }
  auto reaches_all = [&](const std::vector<std::vector<std::size_t>>& adj) {
    std::vector<char> seen(n, 0);
    std::deque<std::size_t> todo{gen.index_of(State{})};
    seen[todo.front()] = 1;
    std::size_t count = 1;
    while (!todo.empty()) {
      auto u = todo.front();
      todo.pop_front();
      for (auto v : adj[u])
        if (!seen[v]) {
          seen[v] = 1;
          ++count;
          todo.push_back(v);
        }
    }
    return count == n;
  };
  return reaches_all(fwd) && reaches_all(bwd);
}

namespace {

template <class State>
StationaryDistribution<State> to_distribution(const TruncatedGenerator<State>& gen,
                                              std::vector<double> pi) {
  double total = 0.0;
  for (double& x : pi) {
    x = std::max(x, 0.0);
    total += x;
  }
  StationaryDistribution<State> dist;
  dist.truncation = gen.truncation;
  for (std::size_t i = 0; i < gen.size(); ++i)
    dist.probabilities.emplace_hint(dist.probabilities.end(), gen.states[i], pi[i] / total);
  dist.normalizer = dist.probability(State{});
  dist.tail_mass_bound = 0.0;
  return dist;
}

template <class State>
std::vector<double> solve_direct(const TruncatedGenerator<State>& gen) {
  const auto n = static_cast<Eigen::Index>(gen.size());
  const auto pinned = static_cast<Eigen::Index>(gen.index_of(State{}));
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(gen.rates.size() + 2 * gen.size());
  // Rows of Q^T; the row of the empty state becomes sum(pi) = 1.
  for (const auto& tr : gen.rates)
    if (static_cast<Eigen::Index>(tr.to) != pinned)
      triplets.emplace_back(static_cast<Eigen::Index>(tr.to), static_cast<Eigen::Index>(tr.from),
                            tr.rate);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (i != pinned) triplets.emplace_back(i, i, -gen.exit_rates[i]);
    triplets.emplace_back(pinned, i, 1.0);
  }
  Eigen::SparseMatrix<double> A(n, n);
  A.setFromTriplets(triplets.begin(), triplets.end());
  A.makeCompressed();

  Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) throw std::runtime_error("sparse LU factorization failed");
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(n);
  rhs[pinned] = 1.0;
  Eigen::VectorXd x = lu.solve(rhs);
  if (lu.info() != Eigen::Success) throw std::runtime_error("sparse LU solve failed");
  return {x.data(), x.data() + n};
}

template <class State>
std::vector<double> solve_power(const TruncatedGenerator<State>& gen, const SolverOptions& opt) {
  const std::size_t n = gen.size();
  const double uniform = 1.01 * *std::max_element(gen.exit_rates.begin(), gen.exit_rates.end());
  std::vector<double> pi(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  for (std::int64_t it = 0; it < opt.max_iterations; ++it) {
    for (std::size_t i = 0; i < n; ++i) next[i] = pi[i] * (1.0 - gen.exit_rates[i] / uniform);
    for (const auto& tr : gen.rates) next[tr.to] += pi[tr.from] * tr.rate / uniform;
    double total = 0.0;
    for (double x : next) total += x;
    double diff = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      next[i] /= total;
      diff = std::max(diff, std::abs(next[i] - pi[i]));
    }
    pi.swap(next);
    if (diff < opt.tol) return pi;
  }
  throw std::runtime_error("power iteration did not converge within " +
                           std::to_string(opt.max_iterations) + " iterations");
}

}  // namespace

template <class State>
StationaryDistribution<State> solve_stationary(const TruncatedGenerator<State>& gen,
                                               const SolverOptions& options) {
  if (!(options.tol > 0.0)) throw std::invalid_argument("solver tolerance must be positive");
  if (!is_irreducible(gen)) throw std::runtime_error("generator is not irreducible");
  SolveMethod method = options.method;
  if (method == SolveMethod::automatic)
    method = gen.size() <= options.direct_limit ? SolveMethod::direct : SolveMethod::power;
  if (method == SolveMethod::direct) {
    if (gen.size() > 200'000) throw std::runtime_error("direct solve limited to 200000 states");
    return to_distribution(gen, solve_direct(gen));
  }
  return to_distribution(gen, solve_power(gen, options));
}

template <class State>
double stationary_residual(const TruncatedGenerator<State>& gen,
                           const StationaryDistribution<State>& dist) {
  std::vector<double> pi(gen.size());
  for (std::size_t i = 0; i < gen.size(); ++i) pi[i] = dist.probability(gen.states[i]);
  std::vector<double> flow(gen.size());
  for (std::size_t i = 0; i < gen.size(); ++i) flow[i] = -pi[i] * gen.exit_rates[i];
  for (const auto& tr : gen.rates) flow[tr.to] += pi[tr.from] * tr.rate;
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    num = std::max(num, std::abs(flow[i]));
    den = std::max(den, std::abs(pi[i]));
  }
  return den == 0.0 ? std::numeric_limits<double>::infinity() : num / den;
}

template <class State>
void write_generator_csv(std::ostream& out, const TruncatedGenerator<State>& gen) {
  auto old = out.precision(17);
  out << "from,to,rate\n";
  for (const auto& tr : gen.rates) out << tr.from << ',' << tr.to << ',' << tr.rate << '\n';
  out.precision(old);
}

#define NSQ_INSTANTIATE(State)                                                                  \
  template struct TruncatedGenerator<State>;                                                    \
  template bool is_irreducible(const TruncatedGenerator<State>&);                               \
  template StationaryDistribution<State> solve_stationary(const TruncatedGenerator<State>&,     \
                                                          const SolverOptions&);                \
  template double stationary_residual(const TruncatedGenerator<State>&,                         \
                                      const StationaryDistribution<State>&);                    \
  template void write_generator_csv(std::ostream&, const TruncatedGenerator<State>&);

NSQ_INSTANTIATE(OneSidedState)
NSQ_INSTANTIATE(TwoSidedState)

#undef NSQ_INSTANTIATE

}  // namespace nsq
