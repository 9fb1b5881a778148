// Command-line front end: run sweeps, query the capacity region, rebuild
// sweep reports from an existing results.csv.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "gbpandas/gbpandas.hpp"

namespace fs = std::filesystem;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitPartial = 2;

void print_onsets(const gbp::SweepReport& report) {
  for (const auto& curve : report.curves) {
    std::cout << curve.policy << ": onset "
              << (curve.onset ? gbp::format_real(*curve.onset) : std::string("none in sweep")) << '\n';
  }
  for (const auto& m : report.missing) std::cout << "missing cell " << m << '\n';
}

int cmd_run(const std::string& config_path, const std::string& out_dir, std::uint64_t seed_offset,
            std::size_t parallel) {
  const auto config = gbp::ExperimentConfig::load(config_path);
  if (const auto errors = config.validate(); !errors.empty()) {
    for (const auto& e : errors) std::cerr << "config error: " << e << '\n';
    return kExitInvalid;
  }
  const auto model = gbp::ExperimentModel::build(config);
  fs::create_directories(out_dir);
  std::ofstream trace;
  gbp::RunOptions opt;
  opt.parallel = parallel;
  opt.seed_offset = seed_offset;
  if (config.trace) {
    trace.open(fs::path(out_dir) / "trace.jsonl");
    opt.trace = &trace;
  }
  const auto results = gbp::run_experiment(config, model, opt);
  const auto report = gbp::write_outputs(out_dir, config, model, results);
  print_onsets(report);
  int failed = 0;
  for (const auto& r : results) {
    if (r.row.failed) {
      ++failed;
      std::cerr << "cell failed: " << r.row.policy << " rho=" << gbp::format_real(r.row.rho)
                << " seed=" << r.row.seed << ": " << r.error << '\n';
    }
  }
  return failed > 0 ? kExitPartial : kExitOk;
}

gbp::RateVector read_rates(const std::string& path, std::vector<gbp::TaskType>& types) {
  std::ifstream in(path);
  if (!in) throw gbp::ConfigError("cannot open rates file " + path);
  gbp::Json j;
  try {
    in >> j;
  } catch (const gbp::Json::exception& e) {
    throw gbp::ConfigError("rates file is not valid JSON: " + std::string(e.what()));
  }
  gbp::RateVector lambda;
  try {
    for (const auto& entry : j.at("rates")) {
      std::vector<gbp::ServerIndex> locals;
      for (const auto& s : entry.at("type")) {
        const auto k = s.get<long long>();
        if (k < 1) throw gbp::ConfigError("server numbers in a type are 1-based");
        locals.push_back(static_cast<gbp::ServerIndex>(k - 1));
      }
      types.emplace_back(std::move(locals));
      lambda.rates.push_back(gbp::ExperimentConfig::parse_number(entry.at("rate"), "rates[].rate"));
    }
  } catch (const gbp::Json::exception& e) {
    throw gbp::ConfigError("malformed rates file: " + std::string(e.what()));
  }
  return lambda;
}

int cmd_capacity(const std::string& config_path, const std::string& rates_path) {
  const auto config = gbp::ExperimentConfig::load(config_path);
  gbp::ClusterTopology topology(config.topology.branching);
  gbp::ServiceModel service(config.service.family, config.service.means);
  std::vector<gbp::TaskType> types;
  const gbp::RateVector lambda = read_rates(rates_path, types);
  const gbp::LocalityTable table(topology, types);
  const auto result = gbp::capacity_membership(table, service.effective_means(), lambda);

  gbp::Json out;
  out["rho_star"] = result.rho_star;
  out["feasible"] = result.feasible;
  out["delta"] = gbp::json_real(result.delta);
  gbp::Json witness = gbp::Json::array();
  for (gbp::TypeIndex l = 0; l < table.type_count(); ++l) {
    for (gbp::ServerIndex m = 0; m < table.servers(); ++m) {
      const double x = result.witness.at(l, m);
      if (x == 0.0) continue;
      std::vector<std::size_t> type;
      for (auto s : table.type(l).locals()) type.push_back(s + 1);
      witness.push_back({{"type", type}, {"server", m + 1}, {"rate", x}});
    }
  }
  out["witness"] = witness;
  out["server_loads"] = gbp::server_loads(table, service.effective_means(), result.witness);
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

int cmd_report(const std::string& results_path, const std::string& out_dir) {
  std::ifstream in(results_path);
  if (!in) throw gbp::ConfigError("cannot open results file " + results_path);
  const auto rows = gbp::read_results_csv(in);
  const auto report = gbp::sweep_report(rows);
  fs::create_directories(fs::path(out_dir) / "curves");
  for (const auto& curve : report.curves) {
    std::ofstream out(fs::path(out_dir) / "curves" / (curve.policy + ".csv"));
    gbp::write_curve_csv(out, curve);
  }
  print_onsets(report);
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"GB-PANDAS affinity-scheduling simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out_dir = "out";
  std::uint64_t seed_offset = 0;
  std::size_t parallel = 1;
  auto* run = app.add_subcommand("run", "Run the configured sweep and write results under --out");
  run->add_option("--config", config_path, "Experiment config (JSON)")->required();
  run->add_option("--out", out_dir, "Output directory");
  run->add_option("--seed-offset", seed_offset, "Added to every configured seed");
  run->add_option("--parallel", parallel, "Cells run concurrently")->check(CLI::PositiveNumber);

  std::string rates_path;
  auto* capacity = app.add_subcommand("capacity", "Report rho*, feasibility and a witness decomposition");
  capacity->add_option("--config", config_path, "Config providing topology and service means")->required();
  capacity->add_option("--rates", rates_path, "Rate vector file (JSON)")->required();

  std::string results_path;
  auto* report = app.add_subcommand("report", "Rebuild per-policy curves from a results.csv");
  report->add_option("--results", results_path, "results.csv from a previous run")->required();
  report->add_option("--out", out_dir, "Output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitInvalid;
  }

  try {
    if (*run) return cmd_run(config_path, out_dir, seed_offset, parallel);
    if (*capacity) return cmd_capacity(config_path, rates_path);
    return cmd_report(results_path, out_dir);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitInvalid;
  } catch (const std::exception& e) {
    std::cerr << "failure: " << e.what() << '\n';
    return kExitPartial;
  }
}
