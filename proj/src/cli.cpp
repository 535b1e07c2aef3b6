#include "nsq/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include <CLI11.hpp>

#include "nsq/balance_oracle.hpp"
#include "nsq/io.hpp"
#include "nsq/metrics.hpp"
#include "nsq/product_form.hpp"
#include "nsq/simulator.hpp"

namespace nsq {

namespace {

/// Raised for invalid flag combinations detected after parsing.
struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

struct Options {
  // parameter values from flags; applied over the config file
  std::map<std::string, double> flag_params;
  std::string config_path;
  std::string system = "one-sided";
  double tol = kDefaultTolerance;
  std::optional<int> max_m, max_n, max_i, max_j;
  std::string out_path;
  std::string format;

  std::string method = "auto";
  std::string dump_generator;

  std::uint64_t seed = 1;
  std::int64_t horizon_events = 1'000'000;
  double horizon_time = 0.0;
  double warmup = 0.2;
  std::string mode = "parsimonious";
  int replications = 1;

  std::vector<double> gamma_grid{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9};
  std::optional<double> total_supply_rate;
};

// Reference parameter set used when neither flags nor a config file name a value.
constexpr NSystemParams kDefaultParams{1.0, 1.0, 2.0, 2.0, 1.0, 1.0};

NSystemParams resolve_params(const Options& o) {
  NSystemParams p = kDefaultParams;
  if (!o.config_path.empty()) {
    std::ifstream in(o.config_path);
    if (!in) throw UsageError("cannot open config file '" + o.config_path + "'");
    apply_config(p, parse_config(in));
  }
  apply_config(p, o.flag_params);
  return validate(p);
}

SystemKind resolve_system(const Options& o) {
  try {
    return parse_system_kind(o.system);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
}

void require_format(const Options& o, std::initializer_list<const char*> allowed) {
  for (const char* f : allowed)
    if (o.format == f) return;
  throw UsageError("format '" + o.format + "' is not available for this command");
}

/// Box requested on the command line, or nullopt when no bound was given.
std::optional<Truncation> requested_box(const Options& o, SystemKind system) {
  if (!o.max_m && !o.max_n && !o.max_i && !o.max_j) return std::nullopt;
  if (!o.max_m || !o.max_n) throw UsageError("--max-m and --max-n must be given together");
  Truncation t{*o.max_m, *o.max_n, o.max_i.value_or(*o.max_m), o.max_j.value_or(*o.max_n)};
  if (system == SystemKind::one_sided) t.max_i = t.max_j = 0;
  return t;
}

AnyDistribution product_form_on_box(const NSystemParams& p, SystemKind system, const Truncation& t) {
  if (system == SystemKind::one_sided) return product_form_one_sided(p, t.max_m, t.max_n);
  return product_form_two_sided(p, t);
}

Truncation truncation_of(const AnyDistribution& d) {
  return std::visit([](const auto& dist) { return dist.truncation; }, d);
}

double tail_of(const AnyDistribution& d) {
  return std::visit([](const auto& dist) { return dist.tail_mass_bound; }, d);
}

class Sink {
 public:
  Sink(const Options& o, std::ostream& fallback) : target_(&fallback) {
    if (!o.out_path.empty()) {
      file_.open(o.out_path, std::ios::binary);
      if (!file_) throw std::runtime_error("cannot open output file '" + o.out_path + "'");
      target_ = &file_;
    }
  }
  std::ostream& stream() { return *target_; }

 private:
  std::ofstream file_;
  std::ostream* target_;
};

void csv_metadata(std::ostream& out, double tol) { out << "# tolerance=" << format_double(tol) << '\n'; }

int cmd_exact(const Options& o, std::ostream& out) {
  require_format(o, {"json", "csv"});
  const SystemKind system = resolve_system(o);
  const NSystemParams p = resolve_params(o);
  auto box = requested_box(o, system);
  AnyDistribution dist = box ? product_form_on_box(p, system, *box) : normalize(p, system, o.tol);
  Sink sink(o, out);
  if (o.format == "csv") {
    csv_metadata(sink.stream(), o.tol);
    write_distribution_csv(sink.stream(), dist);
  } else {
    sink.stream() << dump(distribution_json(dist, p, o.tol));
  }
  return kExitOk;
}

SolveMethod parse_method(const std::string& text) {
  if (text == "auto") return SolveMethod::automatic;
  if (text == "direct") return SolveMethod::direct;
  if (text == "power") return SolveMethod::power;
  throw UsageError("unknown method '" + text + "' (expected auto, direct or power)");
}

template <class State>
void dump_generator(const std::string& path, const TruncatedGenerator<State>& gen, const NSystemParams& p) {
  std::ofstream csv(path, std::ios::binary);
  std::ofstream header(path + ".states.json", std::ios::binary);
  if (!csv || !header) throw std::runtime_error("cannot write generator dump '" + path + "'");
  write_generator_csv(csv, gen);
  header << dump(generator_header(gen, p));
}

int cmd_oracle(const Options& o, std::ostream& out) {
  require_format(o, {"json", "csv"});
  const SystemKind system = resolve_system(o);
  const NSystemParams p = resolve_params(o);
  SolverOptions solver;
  solver.method = parse_method(o.method);

  Truncation box;
  if (auto requested = requested_box(o, system)) {
    box = *requested;
  } else {
    box = truncation_of(normalize(p, system, o.tol));
    box.max_m = std::max(box.max_m, 2);
    box.max_n = std::max(box.max_n, 2);
    if (system == SystemKind::two_sided) {
      box.max_i = std::max(box.max_i, 2);
      box.max_j = std::max(box.max_j, 2);
    }
  }

  AnyDistribution solved;
  double residual = 0.0;
  if (system == SystemKind::one_sided) {
    auto gen = build_generator_one_sided(p, box.max_m, box.max_n);
    if (!o.dump_generator.empty()) dump_generator(o.dump_generator, gen, p);
    auto dist = solve_stationary(gen, solver);
    residual = stationary_residual(gen, dist);
    solved = std::move(dist);
  } else {
    auto gen = build_generator_two_sided(p, box);
    if (!o.dump_generator.empty()) dump_generator(o.dump_generator, gen, p);
    auto dist = solve_stationary(gen, solver);
    residual = stationary_residual(gen, dist);
    solved = std::move(dist);
  }

  const AnyDistribution formula = product_form_on_box(p, system, box);
  const double tv = std::visit(
      [&](const auto& d) {
        using D = std::decay_t<decltype(d)>;
        return total_variation(d, std::get<D>(formula));
      },
      solved);

  Sink sink(o, out);
  if (o.format == "csv") {
    sink.stream() << "# tolerance=" << format_double(o.tol) << " tv_to_product_form=" << format_double(tv)
                  << '\n';
    write_distribution_csv(sink.stream(), solved);
    return kExitOk;
  }
  Json j = distribution_json(solved, p, o.tol);
  j["method"] = o.method;
  j["solver_tolerance"] = solver.tol;
  j["stationary_residual"] = residual;
  j["tv_to_product_form"] = tv;
  j["product_form_tail_mass_bound"] = tail_of(formula);
  sink.stream() << dump(j);
  return kExitOk;
}

std::map<CountPair, double> lump_counts(const AnyDistribution& dist) {
  std::map<CountPair, double> out;
  if (const auto* one = std::get_if<OneSidedDistribution>(&dist)) {
    for (const auto& [s, p] : one->probabilities) out[CountPair{s.m + s.n, 0}] += p;
  } else {
    for (const auto& [s, p] : std::get<TwoSidedDistribution>(dist).probabilities)
      out[CountPair{s.supply_count(), s.demand_count()}] += p;
  }
  return out;
}

/// TV between simulated occupancy and the product form on the matching state
/// space (lumped to head counts in physical mode).
double simulated_tv(const SimulationSummary& run, const AnyDistribution& formula) {
  if (run.config.mode == SimMode::physical)
    return total_variation(occupancy_fractions<CountPair>(run), lump_counts(formula));
  if (const auto* one = std::get_if<OneSidedDistribution>(&formula))
    return total_variation(occupancy_fractions<OneSidedState>(run), one->probabilities);
  return total_variation(occupancy_fractions<TwoSidedState>(run),
                         std::get<TwoSidedDistribution>(formula).probabilities);
}

int cmd_simulate(const Options& o, std::ostream& out) {
  require_format(o, {"json"});
  const NSystemParams p = resolve_params(o);
  SimConfig cfg;
  cfg.system = resolve_system(o);
  try {
    cfg.mode = parse_sim_mode(o.mode);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  cfg.seed = o.seed;
  cfg.horizon_events = o.horizon_events;
  cfg.horizon_time = o.horizon_time;
  cfg.warmup_fraction = o.warmup;
  if (o.replications < 1) throw UsageError("--replications must be at least 1");
  try {
    validate(cfg);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::vector<SimulationSummary> runs =
      o.replications == 1 ? std::vector<SimulationSummary>{simulate(p, cfg)} : replicate(p, cfg, o.replications);
  SimulationSummary pooled = runs.size() == 1 ? runs.front() : pool(runs);
  pooled.config = cfg;

  std::optional<AnyDistribution> formula;
  try {
    formula = normalize(p, cfg.system, o.tol);
  } catch (const DivergenceError&) {
    // physical runs of an unstable system have no stationary target
  }

  Json j{{"tolerance", o.tol}, {"params", to_json(p)}, {"replications", o.replications}};
  Json seeds = Json::array();
  Json tvs = Json::array();
  for (int r = 0; r < static_cast<int>(runs.size()); ++r) {
    seeds.push_back(runs[r].config.seed);
    tvs.push_back(formula ? Json(simulated_tv(runs[r], *formula)) : Json(nullptr));
  }
  j["replication_seeds"] = std::move(seeds);
  j["replication_tv_to_product_form"] = std::move(tvs);
  j["tv_to_product_form"] = formula ? Json(simulated_tv(pooled, *formula)) : Json(nullptr);
  j["summary"] = to_json(pooled);

  Sink sink(o, out);
  sink.stream() << dump(j);
  return kExitOk;
}

int cmd_metrics(const Options& o, std::ostream& out) {
  require_format(o, {"json"});
  const SystemKind system = resolve_system(o);
  const NSystemParams p = resolve_params(o);
  const AnyDistribution dist = normalize(p, system, o.tol);
  const MetricsReport report = compute_metrics(p, dist);
  Json j{{"tolerance", o.tol},
         {"params", to_json(p)},
         {"truncation", to_json(truncation_of(dist), system)},
         {"tail_mass_bound", tail_of(dist)},
         {"metrics", to_json(report)},
         {"supply_flow_residual", supply_flow_residual(p, report)},
         {"demand_flow_residual", demand_flow_residual(p, report)}};
  Sink sink(o, out);
  sink.stream() << dump(j);
  return kExitOk;
}

int cmd_sweep(const Options& o, std::ostream& out) {
  require_format(o, {"json", "csv"});
  const SystemKind system = resolve_system(o);
  const NSystemParams p = resolve_params(o);
  const double total = o.total_supply_rate.value_or(p.supply_rate());
  std::vector<SweepRow> rows;
  try {
    rows = sweep_flexibility(p, o.gamma_grid, total, system, o.tol);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  Sink sink(o, out);
  if (o.format == "csv") {
    csv_metadata(sink.stream(), o.tol);
    write_sweep_csv(sink.stream(), rows);
    return kExitOk;
  }
  Json table = Json::array();
  for (const auto& row : rows)
    table.push_back(Json{{"gamma", row.gamma}, {"params", to_json(row.params)}, {"metrics", to_json(row.metrics)}});
  sink.stream() << dump(Json{{"tolerance", o.tol}, {"total_supply_rate", total}, {"rows", std::move(table)}});
  return kExitOk;
}

class Report {
 public:
  void add(const std::string& name, double residual, double threshold) {
    const bool pass = std::isfinite(residual) && residual < threshold;
    all_pass_ = all_pass_ && pass;
    checks_.push_back(Json{{"name", name}, {"residual", residual}, {"threshold", threshold}, {"pass", pass}});
  }
  void skip(const std::string& name, const std::string& reason) {
    checks_.push_back(Json{{"name", name}, {"skipped", reason}});
  }
  bool pass() const { return all_pass_; }
  Json checks() const { return checks_; }

 private:
  Json checks_ = Json::array();
  bool all_pass_ = true;
};

double relative_error(double value, double reference) {
  if (value == reference) return 0.0;
  return std::abs(value - reference) / std::max(std::abs(reference), std::abs(value));
}

void one_sided_identities(Report& report, const NSystemParams& p, const std::string& prefix) {
  double worst = 0.0;
  if (p.theta_s > 0.0 || stability_check(p)) {
    for (int m = 1; m <= 50; ++m) worst = std::max(worst, partial_balance_residual(p, m));
    report.add(prefix + "partial_balance", worst, 1e-10);
  } else {
    report.skip(prefix + "partial_balance", "no reneging and unstable");
  }

  worst = 0.0;
  for (int m = 1; m <= 100; ++m) worst = std::max(worst, f_sum_identity_residual(p, m));
  report.add(prefix + "f_sum_identity", worst, 1e-10);

  worst = 0.0;
  for (int m = 2; m <= 100; ++m) worst = std::max(worst, g_recursion_residual(p, m));
  report.add(prefix + "g_recursion", worst, 1e-10);

  report.add(prefix + "g_first_from_balance", relative_error(g_first_from_balance(p), g_total(p, 1)), 1e-12);

  if (p.theta_s > 0.0 || stability_check(p)) {
    worst = 0.0;
    for (int m = 0; m <= 30; ++m)
      for (int n = 0; n <= 30; ++n) {
        const OneSidedState s{m, n};
        worst = std::max(worst, relative_error(alternative_form_weight(p, s), unnormalized_weight_one_sided(p, s)));
      }
    report.add(prefix + "alternative_form", worst, 1e-12);
  } else {
    report.skip(prefix + "alternative_form", "no reneging and unstable");
  }
}

void no_reneging_reduction(Report& report, NSystemParams p) {
  p.theta_s = 0.0;
  if (!stability_check(p)) {
    report.skip("no_reneging_reduction", "parameters unstable without reneging");
    report.skip("no_reneging_mass", "parameters unstable without reneging");
    return;
  }
  const double b = no_reneging_normalizer(p);
  double worst = 0.0;
  double mass = 0.0;
  for (int m = 0; m <= 50; ++m)
    for (int n = 0; n <= 50; ++n) {
      const OneSidedState s{m, n};
      const double exact = no_reneging_distribution(p, s);
      worst = std::max(worst, relative_error(b * unnormalized_weight_one_sided(p, s), exact));
      mass += exact;
    }
  report.add("no_reneging_reduction", worst, 1e-12);
  report.add("no_reneging_mass", std::abs(1.0 - mass), 1e-10);
}

int cmd_validate(const Options& o, std::ostream& out) {
  require_format(o, {"json"});
  const SystemKind system = resolve_system(o);
  const NSystemParams p = resolve_params(o);
  if (!(o.tol > 0.0 && o.tol <= 1e-3)) throw UsageError("--tol must lie in (0, 1e-3]");
  Report report;

  one_sided_identities(report, p, "");
  if (system == SystemKind::one_sided) {
    if (p.theta_s > 0.0 || stability_check(p)) {
      report.add("global_balance", global_balance_residual(p, product_form_one_sided(p, 31, 62)), 1e-10);
      const auto dist = normalize_one_sided(p, o.tol);
      report.add("normalization_tail", dist.tail_mass_bound, o.tol);
    } else {
      report.skip("global_balance", "no reneging and unstable");
      report.skip("normalization_tail", "no reneging and unstable");
    }
    no_reneging_reduction(report, p);
  } else {
    if (!(p.theta_s > 0.0 && p.theta_d > 0.0))
      throw std::invalid_argument("two-sided system requires theta_s > 0 and theta_d > 0");
    one_sided_identities(report, mirror(p), "mirror.");
    report.add("global_balance", global_balance_residual(p, product_form_two_sided(p, {21, 42, 21, 21})), 1e-10);
    const auto dist = normalize_two_sided(p, o.tol);
    report.add("normalization_tail", dist.tail_mass_bound, o.tol);
  }

  Json j{{"system", to_string(system)},
         {"params", to_json(p)},
         {"tolerance", o.tol},
         {"checks", report.checks()},
         {"pass", report.pass()}};
  Sink sink(o, out);
  sink.stream() << dump(j);
  return report.pass() ? kExitOk : kExitFailure;
}

void write_error(std::ostream& err, const std::string& kind, const std::string& message) {
  err << Json{{"error", message}, {"kind", kind}}.dump() << '\n';
}

void add_param_options(CLI::App& cmd, Options& o) {
  static const std::pair<const char*, const char*> kFlags[] = {
      {"--lambda1", "lambda1"}, {"--lambda2", "lambda2"}, {"--mu1", "mu1"},
      {"--mu2", "mu2"},         {"--theta-s", "theta_s"}, {"--theta-d", "theta_d"}};
  for (const auto& [flag, key] : kFlags) {
    std::string name = key;
    cmd.add_option_function<double>(
        flag, [&o, name](double v) { o.flag_params[name] = v; }, "rate " + name);
  }
  cmd.add_option("--config", o.config_path, "key=value parameter file; flags take precedence");
  cmd.add_option("--system", o.system, "one-sided or two-sided")->capture_default_str();
  cmd.add_option("--tol", o.tol, "normalization tolerance on the tail mass")->capture_default_str();
  cmd.add_option("--out", o.out_path, "output file (default: standard output)");
}

void add_box_options(CLI::App& cmd, Options& o) {
  cmd.add_option_function<int>("--max-m", [&o](int v) { o.max_m = v; }, "truncation bound on m");
  cmd.add_option_function<int>("--max-n", [&o](int v) { o.max_n = v; }, "truncation bound on n");
  cmd.add_option_function<int>("--max-i", [&o](int v) { o.max_i = v; }, "two-sided bound on i (default max-m)");
  cmd.add_option_function<int>("--max-j", [&o](int v) { o.max_j = v; }, "two-sided bound on j (default max-n)");
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  Options o;
  CLI::App app{"Stationary distributions of N-system matching queues with reneging"};
  app.name("nsq");
  app.require_subcommand(1);

  auto* exact = app.add_subcommand("exact", "product-form stationary distribution");
  auto* oracle = app.add_subcommand("oracle", "truncated-generator solution and its TV to the product form");
  auto* sim = app.add_subcommand("simulate", "discrete-event simulation");
  auto* metrics = app.add_subcommand("metrics", "performance measures");
  auto* sweep = app.add_subcommand("sweep", "flexibility sweep at a fixed total supply rate");
  auto* check = app.add_subcommand("validate", "property and balance-equation checks");

  for (auto* cmd : {exact, oracle, sim, metrics, sweep, check}) add_param_options(*cmd, o);
  add_box_options(*exact, o);
  add_box_options(*oracle, o);
  for (auto* cmd : {exact, oracle, sweep})
    cmd->add_option("--format", o.format, "json or csv");
  for (auto* cmd : {sim, metrics, check})
    cmd->add_option("--format", o.format, "json");

  oracle->add_option("--method", o.method, "auto, direct or power")->capture_default_str();
  oracle->add_option("--dump-generator", o.dump_generator, "write the generator as CSV to this path");

  sim->add_option("--seed", o.seed)->capture_default_str();
  sim->add_option("--horizon-events", o.horizon_events)->capture_default_str();
  sim->add_option("--horizon-time", o.horizon_time, "simulated-time budget (overrides events)");
  sim->add_option("--warmup", o.warmup, "discarded leading fraction of the horizon")->capture_default_str();
  sim->add_option("--mode", o.mode, "parsimonious or physical")->capture_default_str();
  sim->add_option("--replications", o.replications)->capture_default_str();

  sweep->add_option("--gamma-grid", o.gamma_grid, "flexible share of supply")->delimiter(',');
  sweep->add_option_function<double>(
      "--total-supply-rate", [&o](double v) { o.total_supply_rate = v; },
      "lambda1 + lambda2 held fixed (default: from params)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    write_error(err, "usage", e.what());
    return kExitUsage;
  }

  if (o.format.empty()) o.format = sweep->parsed() ? "csv" : "json";

  try {
    if (exact->parsed()) return cmd_exact(o, out);
    if (oracle->parsed()) return cmd_oracle(o, out);
    if (sim->parsed()) return cmd_simulate(o, out);
    if (metrics->parsed()) return cmd_metrics(o, out);
    if (sweep->parsed()) return cmd_sweep(o, out);
    return cmd_validate(o, out);
  } catch (const UsageError& e) {
    write_error(err, "usage", e.what());
    return kExitUsage;
  } catch (const DivergenceError& e) {
    write_error(err, "divergence", e.what());
    return kExitFailure;
  } catch (const std::invalid_argument& e) {
    write_error(err, "invalid_parameters", e.what());
    return kExitUsage;
  } catch (const std::exception& e) {
    write_error(err, "computation", e.what());
    return kExitFailure;
  }
}

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::vector<const char*> argv{"nsq"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

}  // namespace nsq
