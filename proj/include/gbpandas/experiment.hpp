#pragma once

// Experiment harness: config parsing and validation, capacity-normalized load
// sweeps, replicated runs, and the CSV/JSON outputs.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "gbpandas/analysis.hpp"
#include "gbpandas/capacity.hpp"
#include "gbpandas/engine.hpp"
#include "gbpandas/errors.hpp"
#include "gbpandas/policies.hpp"
#include "gbpandas/rng.hpp"
#include "gbpandas/stochastic.hpp"
#include "gbpandas/topology.hpp"

namespace gbp {

using Json = nlohmann::json;

struct ExperimentConfig {
  struct Topology {
    std::vector<std::size_t> branching{2, 2, 3};
    int levels = 4;
    std::size_t replicas = 3;
  };
  struct Service {
    ServiceFamily family = ServiceFamily::lognormal;
    std::vector<double> means{1.0, 10.0 / 9.0, 5.0 / 3.0, 4.0};
  };
  struct Arrival {
    bool zipf = false;
    double zipf_exponent = 1.0;
    std::size_t cap = 100;
  };
  enum class SweepMode { rho, total_rate };

  Topology topology;
  Service service;
  Arrival arrival;
  SweepMode sweep_mode = SweepMode::rho;
  std::vector<double> sweep{0.5, 0.7, 0.8, 0.9, 0.95, 1.05};
  std::vector<std::string> policies{"gb-pandas", "jsq-maxweight", "jsq-priority", "fcfs"};
  std::int64_t horizon = 100'000;
  std::int64_t warmup = 10'000;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::string rng{kRngName};
  bool trace = false;
  std::size_t fcfs_scan_depth = 0;
  std::size_t drift_window = 100;
  double small_state_threshold = 50.0;
  StabilityOptions stability;

  // Problems that make the config unusable; empty when valid.
  std::vector<std::string> validate() const {
    std::vector<std::string> errors;
    const std::size_t servers = [&] {
      std::size_t m = 1;
      for (auto b : topology.branching) m *= std::max<std::size_t>(b, 1);
      return m;
    }();
    if (std::any_of(topology.branching.begin(), topology.branching.end(), [](auto b) { return b == 0; })) {
      errors.push_back("topology.branching entries must be positive");
    }
    if (topology.levels != static_cast<int>(topology.branching.size()) + 1) {
      errors.push_back("topology.levels must equal the number of branching tiers + 1");
    }
    if (topology.replicas < 1 || topology.replicas > servers) {
      errors.push_back("topology.replicas must lie in [1, number of servers]");
    } else {
      // C(M, d) guards the size of the type table.
      double types = 1.0;
      for (std::size_t i = 0; i < topology.replicas; ++i) {
        types = types * static_cast<double>(servers - i) / static_cast<double>(i + 1);
      }
      if (types * static_cast<double>(servers) > 5e7) errors.push_back("too many task types for this topology");
    }
    if (service.means.size() != static_cast<std::size_t>(topology.levels)) {
      errors.push_back("service.means needs one entry per locality level");
    }
    for (std::size_t i = 0; i < service.means.size(); ++i) {
      if (!(service.means[i] > 0.0)) errors.push_back("service.means must be positive");
      if (i > 0 && !(service.means[i - 1] < service.means[i])) {
        errors.push_back("service.means must be strictly increasing");
      }
    }
    if (service.family == ServiceFamily::geometric && !service.means.empty() && service.means.front() < 1.0) {
      errors.push_back("geometric service needs means >= 1");
    }
    if (arrival.cap < 1) errors.push_back("arrival.cap must be >= 1");
    if (arrival.zipf && !(arrival.zipf_exponent >= 0.0)) errors.push_back("arrival.zipf_exponent must be >= 0");
    if (sweep.empty()) errors.push_back("sweep needs at least one value");
    for (double v : sweep) {
      if (!(v > 0.0) || !std::isfinite(v)) errors.push_back("sweep values must be positive");
    }
    if (policies.empty()) errors.push_back("policies must not be empty");
    for (const auto& p : policies) {
      if (std::find(kPolicyNames.begin(), kPolicyNames.end(), p) == kPolicyNames.end()) {
        errors.push_back("unknown policy '" + p + "'");
      }
    }
    if (warmup < 0) errors.push_back("warmup must be >= 0");
    if (horizon <= warmup) errors.push_back("horizon must exceed warmup");
    if (seeds.empty()) errors.push_back("seeds must not be empty");
    if (rng != kRngName) errors.push_back("rng must be '" + std::string(kRngName) + "'");
    if (drift_window < 1 || static_cast<std::int64_t>(drift_window) >= horizon - warmup) {
      errors.push_back("drift.window must lie in [1, horizon - warmup)");
    }
    return errors;
  }

  static double parse_number(const Json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
      const auto s = v.get<std::string>();
      const auto slash = s.find('/');
      try {
        std::size_t used = 0;
        if (slash == std::string::npos) {
          const double x = std::stod(s, &used);
          if (used == s.size()) return x;
        } else {
          const double num = std::stod(s.substr(0, slash), &used);
          const double den = std::stod(s.substr(slash + 1));
          return num / den;
        }
      } catch (const std::exception&) {
      }
    }
    throw ConfigError(where + ": expected a number or a 'p/q' fraction");
  }

  static ExperimentConfig from_json(const Json& j) {
    ExperimentConfig c;
    try {
      if (j.contains("topology")) {
        const auto& t = j.at("topology");
        if (t.contains("branching")) c.topology.branching = t.at("branching").get<std::vector<std::size_t>>();
        c.topology.levels = t.value("levels", static_cast<int>(c.topology.branching.size()) + 1);
        c.topology.replicas = t.value("replicas", c.topology.replicas);
      }
      if (j.contains("service")) {
        const auto& s = j.at("service");
        if (s.contains("family")) c.service.family = parse_service_family(s.at("family").get<std::string>());
        if (s.contains("means")) {
          c.service.means.clear();
          for (const auto& v : s.at("means")) c.service.means.push_back(parse_number(v, "service.means"));
        }
      }
      if (j.contains("arrival")) {
        const auto& a = j.at("arrival");
        const auto pop = a.value("popularity", std::string("uniform"));
        if (pop == "zipf") {
          c.arrival.zipf = true;
        } else if (pop != "uniform") {
          throw ConfigError("arrival.popularity must be 'uniform' or 'zipf'");
        }
        c.arrival.zipf_exponent = a.value("zipf_exponent", c.arrival.zipf_exponent);
        c.arrival.cap = a.value("cap", c.arrival.cap);
      }
      if (j.contains("sweep")) {
        const auto& s = j.at("sweep");
        if (s.contains("rho") == s.contains("total_rate")) {
          throw ConfigError("sweep needs exactly one of 'rho' or 'total_rate'");
        }
        c.sweep_mode = s.contains("rho") ? SweepMode::rho : SweepMode::total_rate;
        c.sweep.clear();
        for (const auto& v : s.contains("rho") ? s.at("rho") : s.at("total_rate")) {
          c.sweep.push_back(parse_number(v, "sweep"));
        }
      }
      if (j.contains("policies")) c.policies = j.at("policies").get<std::vector<std::string>>();
      c.horizon = j.value("horizon", c.horizon);
      c.warmup = j.contains("warmup") ? j.at("warmup").get<std::int64_t>() : c.horizon / 10;
      if (j.contains("seeds")) c.seeds = j.at("seeds").get<std::vector<std::uint64_t>>();
      c.rng = j.value("rng", c.rng);
      c.trace = j.value("trace", c.trace);
      c.fcfs_scan_depth = j.value("fcfs_scan_depth", c.fcfs_scan_depth);
      if (j.contains("drift")) {
        c.drift_window = j.at("drift").value("window", c.drift_window);
        c.small_state_threshold = j.at("drift").value("small_state_threshold", c.small_state_threshold);
      }
      if (j.contains("stability")) {
        c.stability.slope_threshold = j.at("stability").value("slope_threshold", c.stability.slope_threshold);
        c.stability.growth_ratio = j.at("stability").value("growth_ratio", c.stability.growth_ratio);
      }
    } catch (const Json::exception& e) {
      throw ConfigError(std::string("malformed config: ") + e.what());
    }
    return c;
  }

  static ExperimentConfig load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config " + path.string());
    Json j;
    try {
      in >> j;
    } catch (const Json::exception& e) {
      throw ConfigError("config is not valid JSON: " + std::string(e.what()));
    }
    return from_json(j);
  }
};

// Immutable pieces shared by every cell of an experiment.
struct ExperimentModel {
  LocalityTable table;
  ServiceModel service;
  Popularity popularity;
  // rho* of the popularity vector scaled to one arrival per slot.
  double unit_rho;

  static ExperimentModel build(const ExperimentConfig& c) {
    auto table = LocalityTable::all_types(ClusterTopology(c.topology.branching), c.topology.replicas);
    ServiceModel service(c.service.family, c.service.means);
    Popularity pop = c.arrival.zipf ? Popularity::zipf(table.type_count(), c.arrival.zipf_exponent)
                                    : Popularity::uniform(table.type_count());
    RateVector unit{std::vector<double>(pop.probabilities().begin(), pop.probabilities().end())};
    const double rho = capacity_membership(table, service.effective_means(), unit).rho_star;
    return ExperimentModel{std::move(table), std::move(service), std::move(pop), rho};
  }
};

struct ResultRow {
  std::string policy;
  double rho = 0.0;
  double total_rate = 0.0;
  std::uint64_t seed = 0;
  double mean_completion = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
  double time_avg_queue = 0.0;
  bool unstable = false;
  double max_orthogonality_residual = 0.0;
  double max_recursion_residual = 0.0;
  std::uint64_t completed = 0;
  std::uint64_t stranded = 0;
  bool failed = false;
};

struct CellResult {
  ResultRow row;
  RunMetrics metrics;
  DiagnosticsReport diagnostics;
  std::string error;
};

struct CellSpec {
  std::string policy;
  double sweep_value = 0.0;
  std::uint64_t seed = 0;
};

// Mean arrivals per slot and rho for a sweep value.
inline std::pair<double, double> cell_load(const ExperimentConfig& c, const ExperimentModel& model, double value) {
  if (c.sweep_mode == ExperimentConfig::SweepMode::rho) return {value / model.unit_rho, value};
  return {value, value * model.unit_rho};
}

inline CellResult run_cell(const ExperimentConfig& c, const ExperimentModel& model, const CellSpec& spec,
                           TraceWriter* trace = nullptr) {
  CellResult out;
  const auto [total_rate, rho] = cell_load(c, model, spec.sweep_value);
  out.row.policy = spec.policy;
  out.row.rho = rho;
  out.row.total_rate = total_rate;
  out.row.seed = spec.seed;
  try {
    const ArrivalModel arrivals = ArrivalModel::with_mean(total_rate, model.popularity, c.arrival.cap);
    out.row.total_rate = arrivals.mean_count();
    const auto policy = make_policy(spec.policy, PolicyOptions{c.fcfs_scan_depth});
    Engine engine(model.table, model.service);
    SimState state = engine.initial_state();
    Rng arrival_rng(derive_seed(spec.seed, 1));
    Rng sim_rng(derive_seed(spec.seed, 2));
    InvariantMonitor monitor(state);
    RenewalMeter renewal;
    CompletionStats completions;
    const auto horizon = static_cast<std::size_t>(c.horizon);
    const auto warmup = static_cast<std::size_t>(c.warmup);
    std::vector<double> queue_series;
    queue_series.reserve(horizon);
    std::vector<double> v_series;
    std::vector<double> size_series;
    v_series.reserve(horizon - warmup);
    size_series.reserve(horizon - warmup);
    std::vector<double> workload_sum(engine.table().servers(), 0.0);
    double queue_sum = 0.0;
    std::vector<TypeIndex> batch;
    StepOutcome step;

    for (std::size_t t = 0; t < horizon; ++t) {
      arrivals.sample(arrival_rng, batch);
      engine.step(state, *policy, batch, sim_rng, step, trace);
      monitor.observe(step, state);
      const auto waiting = static_cast<double>(state.total_waiting());
      queue_series.push_back(waiting);
      if (t < warmup) continue;
      queue_sum += waiting;
      renewal.add(step.ledger);
      for (ServerIndex m = 0; m < workload_sum.size(); ++m) workload_sum[m] += step.ledger.workload_after[m];
      v_series.push_back(lyapunov(state, engine.means()));
      size_series.push_back(state_size(state));
      for (const Task& task : step.completed) {
        if (task.arrival_slot >= static_cast<std::int64_t>(warmup)) {
          completions.add(task.completion_slot - task.arrival_slot);
        }
      }
    }

    const double kept = static_cast<double>(horizon - warmup);
    RunMetrics& metrics = out.metrics;
    metrics.mean_completion_time = completions.mean();
    metrics.p95_completion = completions.quantile(0.95);
    metrics.p99_completion = completions.quantile(0.99);
    metrics.time_avg_total_queue = queue_sum / kept;
    for (double& w : workload_sum) w /= kept;
    metrics.time_avg_workload = std::move(workload_sum);
    metrics.unstable = stability_verdict(queue_series, warmup, c.stability) == Stability::unstable;
    metrics.arrived_count = state.arrived;
    metrics.completed_count = state.completed;
    metrics.stranded_count = state.arrived - state.completed;

    DiagnosticsReport& diag = out.diagnostics;
    diag.invariants = monitor.summary();
    diag.renewal_rate = renewal.rates();
    diag.drift_window = c.drift_window;
    diag.restricted_drift = restricted_mean_drift(v_series, size_series, c.drift_window, c.small_state_threshold);
    double vsum = 0.0;
    for (double v : v_series) vsum += v;
    diag.mean_lyapunov = vsum / kept;
    diag.final_lyapunov = v_series.back();

    out.row.mean_completion = metrics.mean_completion_time;
    out.row.p95 = metrics.p95_completion;
    out.row.p99 = metrics.p99_completion;
    out.row.time_avg_queue = metrics.time_avg_total_queue;
    out.row.unstable = metrics.unstable;
    out.row.max_orthogonality_residual = diag.invariants.max_orthogonality;
    out.row.max_recursion_residual = diag.invariants.max_recursion_residual;
    out.row.completed = metrics.completed_count;
    out.row.stranded = metrics.stranded_count;
  } catch (const std::exception& e) {
    out.row.failed = true;
    out.error = e.what();
  }
  return out;
}

struct RunOptions {
  std::size_t parallel = 1;
  std::uint64_t seed_offset = 0;
  std::ostream* trace = nullptr;  // receives the trace of the first cell
};

// Cells in (policy, sweep value, seed) order.
inline std::vector<CellSpec> enumerate_cells(const ExperimentConfig& c, std::uint64_t seed_offset = 0) {
  std::vector<CellSpec> cells;
  for (const auto& p : c.policies) {
    for (double v : c.sweep) {
      for (auto s : c.seeds) cells.push_back({p, v, s + seed_offset});
    }
  }
  return cells;
}

inline std::vector<CellResult> run_experiment(const ExperimentConfig& c, const ExperimentModel& model,
                                              const RunOptions& opt = {}) {
  if (auto errors = c.validate(); !errors.empty()) throw ConfigError(errors.front());
  const auto cells = enumerate_cells(c, opt.seed_offset);
  std::vector<CellResult> results(cells.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    while (true) {
      const std::size_t i = next.fetch_add(1);
      if (i >= cells.size()) return;
      std::optional<TraceWriter> trace;
      if (i == 0 && opt.trace && c.trace) trace.emplace(*opt.trace);
      results[i] = run_cell(c, model, cells[i], trace ? &*trace : nullptr);
    }
  };
  const std::size_t threads = std::clamp<std::size_t>(opt.parallel, 1, std::max<std::size_t>(1, cells.size()));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < threads; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  return results;
}

// ---- serialization -------------------------------------------------------

inline std::string format_real(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", x);
  return buf;
}

inline constexpr const char* kResultsHeader =
    "policy,rho,total_rate,seed,mean_completion,p95,p99,time_avg_queue,unstable,"
    "max_orthogonality_residual,max_recursion_residual,completed,stranded,status";

inline void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
  out << kResultsHeader << '\n';
  for (const auto& r : rows) {
    out << r.policy << ',' << format_real(r.rho) << ',' << format_real(r.total_rate) << ',' << r.seed << ','
        << format_real(r.mean_completion) << ',' << format_real(r.p95) << ',' << format_real(r.p99) << ','
        << format_real(r.time_avg_queue) << ',' << (r.unstable ? 1 : 0) << ','
        << format_real(r.max_orthogonality_residual) << ',' << format_real(r.max_recursion_residual) << ','
        << r.completed << ',' << r.stranded << ',' << (r.failed ? "failed" : "ok") << '\n';
  }
}

inline double parse_real(const std::string& s) {
  if (s == "nan") return std::nan("");
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  return std::stod(s);
}

inline std::vector<ResultRow> read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kResultsHeader) throw ConfigError("results file has an unexpected header");
  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) f.push_back(cell);
    if (f.size() != 14) throw ConfigError("results row has " + std::to_string(f.size()) + " fields: " + line);
    ResultRow r;
    try {
      r.policy = f[0];
      r.rho = parse_real(f[1]);
      r.total_rate = parse_real(f[2]);
      r.seed = std::stoull(f[3]);
      r.mean_completion = parse_real(f[4]);
      r.p95 = parse_real(f[5]);
      r.p99 = parse_real(f[6]);
      r.time_avg_queue = parse_real(f[7]);
      r.unstable = f[8] == "1";
      r.max_orthogonality_residual = parse_real(f[9]);
      r.max_recursion_residual = parse_real(f[10]);
      r.completed = std::stoull(f[11]);
      r.stranded = std::stoull(f[12]);
      r.failed = f[13] == "failed";
    } catch (const std::exception&) {
      throw ConfigError("malformed results row: " + line);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

struct CurvePoint {
  double rho = 0.0;
  double total_rate = 0.0;
  double mean_completion = 0.0;
  double stderr_completion = 0.0;  // NaN with fewer than two seeds
  std::size_t seeds = 0;
  std::size_t unstable_seeds = 0;
};

struct PolicyCurve {
  std::string policy;
  std::vector<CurvePoint> points;  // ascending rho
  // Smallest swept rho at which every seed was judged unstable.
  std::optional<double> onset;
};

struct SweepReport {
  std::vector<PolicyCurve> curves;
  std::vector<std::string> missing;  // "(policy, rho)" cells without a usable row
};

inline SweepReport sweep_report(const std::vector<ResultRow>& rows) {
  std::vector<std::string> order;
  std::vector<double> rhos;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.policy) == order.end()) order.push_back(r.policy);
    if (std::find(rhos.begin(), rhos.end(), r.rho) == rhos.end()) rhos.push_back(r.rho);
  }
  std::sort(rhos.begin(), rhos.end());
  SweepReport report;
  for (const auto& p : order) {
    PolicyCurve curve;
    curve.policy = p;
    for (double rho : rhos) {
      std::vector<const ResultRow*> cell;
      for (const auto& r : rows) {
        if (r.policy == p && r.rho == rho && !r.failed) cell.push_back(&r);
      }
      if (cell.empty()) {
        report.missing.push_back("(" + p + ", " + format_real(rho) + ")");
        continue;
      }
      CurvePoint pt;
      pt.rho = rho;
      pt.seeds = cell.size();
      double sum = 0.0;
      double rate = 0.0;
      for (const auto* r : cell) {
        sum += r->mean_completion;
        rate += r->total_rate;
        pt.unstable_seeds += r->unstable ? 1 : 0;
      }
      const double n = static_cast<double>(cell.size());
      pt.mean_completion = sum / n;
      pt.total_rate = rate / n;
      if (cell.size() >= 2) {
        double ss = 0.0;
        for (const auto* r : cell) ss += (r->mean_completion - pt.mean_completion) * (r->mean_completion - pt.mean_completion);
        pt.stderr_completion = std::sqrt(ss / (n - 1.0)) / std::sqrt(n);
      } else {
        pt.stderr_completion = std::nan("");
      }
      if (!curve.onset && pt.unstable_seeds == pt.seeds) curve.onset = rho;
      curve.points.push_back(pt);
    }
    report.curves.push_back(std::move(curve));
  }
  return report;
}

inline void write_curve_csv(std::ostream& out, const PolicyCurve& curve) {
  out << "rho,total_rate,mean_completion,stderr,seeds,unstable_seeds\n";
  for (const auto& p : curve.points) {
    out << format_real(p.rho) << ',' << format_real(p.total_rate) << ',' << format_real(p.mean_completion) << ','
        << format_real(p.stderr_completion) << ',' << p.seeds << ',' << p.unstable_seeds << '\n';
  }
}

inline Json json_real(double x) {
  if (!std::isfinite(x)) return Json(format_real(x));
  return Json(x);
}

inline Json diagnostics_json(const ExperimentConfig& c, const ExperimentModel& model,
                             const std::vector<CellResult>& results, const SweepReport& report) {
  Json j;
  j["rng"] = c.rng;
  j["unit_rho"] = model.unit_rho;
  j["effective_means"] = std::vector<double>(model.service.effective_means().begin(),
                                              model.service.effective_means().end());
  Json onset = Json::object();
  for (const auto& curve : report.curves) onset[curve.policy] = curve.onset ? Json(*curve.onset) : Json(nullptr);
  j["onset"] = onset;
  j["missing"] = report.missing;
  Json cells = Json::array();
  for (const auto& r : results) {
    Json cell;
    cell["policy"] = r.row.policy;
    cell["rho"] = r.row.rho;
    cell["seed"] = r.row.seed;
    if (r.row.failed) {
      cell["error"] = r.error;
      cells.push_back(cell);
      continue;
    }
    const auto& inv = r.diagnostics.invariants;
    cell["invariants"] = {
        {"slots", inv.slots},
        {"max_orthogonality", inv.max_orthogonality},
        {"max_recursion_residual", inv.max_recursion_residual},
        {"queue_balance_violations", inv.queue_balance_violations},
        {"psi_violations", inv.psi_violations},
        {"status_violations", inv.status_violations},
        {"preemption_violations", inv.preemption_violations},
        {"conservation_violations", inv.conservation_violations},
        {"completion_violations", inv.completion_violations},
    };
    Json renewal = Json::array();
    for (double x : r.diagnostics.renewal_rate) renewal.push_back(json_real(x));
    cell["renewal_rate"] = renewal;
    cell["drift_window"] = r.diagnostics.drift_window;
    cell["restricted_drift"] =
        r.diagnostics.restricted_drift ? json_real(*r.diagnostics.restricted_drift) : Json(nullptr);
    cell["mean_lyapunov"] = json_real(r.diagnostics.mean_lyapunov);
    cell["final_lyapunov"] = json_real(r.diagnostics.final_lyapunov);
    Json workload = Json::array();
    for (double x : r.metrics.time_avg_workload) workload.push_back(json_real(x));
    cell["time_avg_workload"] = workload;
    cell["arrived"] = r.metrics.arrived_count;
    cells.push_back(cell);
  }
  j["cells"] = cells;
  return j;
}

// Writes results.csv, curves/<policy>.csv and diagnostics.json under `dir`.
inline SweepReport write_outputs(const std::filesystem::path& dir, const ExperimentConfig& c,
                                 const ExperimentModel& model, const std::vector<CellResult>& results) {
  std::filesystem::create_directories(dir / "curves");
  std::vector<ResultRow> rows;
  rows.reserve(results.size());
  for (const auto& r : results) rows.push_back(r.row);
  {
    std::ofstream out(dir / "results.csv");
    write_results_csv(out, rows);
  }
  const SweepReport report = sweep_report(rows);
  for (const auto& curve : report.curves) {
    std::ofstream out(dir / "curves" / (curve.policy + ".csv"));
    write_curve_csv(out, curve);
  }
  std::ofstream diag(dir / "diagnostics.json");
  diag << diagnostics_json(c, model, results, report).dump(2) << '\n';
  return report;
}

}  // namespace gbp
