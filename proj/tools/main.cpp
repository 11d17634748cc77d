#include <cstdio>
#include <exception>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "dssync/analysis.hpp"
#include "dssync/config.hpp"
#include "dssync/errors.hpp"
#include "dssync/metrics.hpp"
#include "dssync/sync.hpp"

namespace {

using dssync::CheckReport;
using dssync::RunConfig;
using json = nlohmann::ordered_json;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitDiverged = 2;
constexpr int kExitCheckFailed = 3;

struct RunArgs {
  std::string config_path;
  std::string out_dir = "out";
  int parallel = -1;  // -1 = follow the config
};

int cmd_run(const RunArgs& args) {
  RunConfig cfg = dssync::load_run_config(args.config_path);
  if (args.parallel >= 0) {
    cfg.execution = dssync::ExecutionMode::Parallel;
    cfg.threads = args.parallel;
  }
  std::unique_ptr<dssync::Problem> problem = dssync::make_problem(cfg.problem);

  std::vector<dssync::SeedOutcome> outcomes;
  for (uint64_t seed : cfg.seeds) {
    const dssync::RunOptions opts = dssync::build_run_options(cfg, *problem, seed);
    const dssync::RunResult result = dssync::run_training(*problem, cfg.strategy, opts);
    const dssync::IterationTrace& last = result.traces.back();
    outcomes.push_back({seed, last.mean_post_sync_loss, last.suboptimality});
    dssync::atomic_write_file(args.out_dir + "/metrics_seed" + std::to_string(seed) + ".csv",
                              dssync::metrics_csv(result.traces));
  }
  dssync::atomic_write_file(args.out_dir + "/summary.json", dssync::summary_json(cfg, outcomes));
  std::cout << "wrote " << cfg.seeds.size() << " metrics file(s) and summary.json to "
            << args.out_dir << "\n";
  return kExitOk;
}

struct ScaleArgs {
  std::string topology;
  long world = 0;
  bool ds = false;
  bool compare = false;
  double data_size = 1.0;
  double bandwidth = 1.0;
  int servers = 1;
};

int cmd_scale(const ScaleArgs& args) {
  const dssync::Topology topo = dssync::topology_from_string(args.topology);
  const dssync::CostModel cm{args.data_size, args.bandwidth, args.servers};

  json out;
  out["topology"] = args.topology;
  out["world_size"] = args.world;
  if (args.compare) {
    const long flat = dssync::sync_scale(topo, args.world, dssync::ScaleMode::Flat);
    const long ds = dssync::sync_scale(topo, args.world, dssync::ScaleMode::DivideShuffle);
    out["flat"] = {{"sync_scale", flat},
                   {"time", dssync::overall_cost(topo, args.world, dssync::ScaleMode::Flat, cm)}};
    out["divide_and_shuffle"] = {
        {"sync_scale", ds},
        {"time", dssync::overall_cost(topo, args.world, dssync::ScaleMode::DivideShuffle, cm)}};
    out["scale_ratio"] = ds == 0 ? nullptr
                                 : json(static_cast<double>(flat) / static_cast<double>(ds));
  } else {
    const dssync::ScaleMode mode =
        args.ds ? dssync::ScaleMode::DivideShuffle : dssync::ScaleMode::Flat;
    out["mode"] = args.ds ? "divide-and-shuffle" : "flat";
    out["sync_scale"] = dssync::sync_scale(topo, args.world, mode);
    out["cost"] = {{"data_size", args.data_size},
                   {"bandwidth", args.bandwidth},
                   {"servers", args.servers},
                   {"time", dssync::overall_cost(topo, args.world, mode, cm)}};
  }
  std::cout << out.dump(2) << "\n";
  return kExitOk;
}

struct CheckArgs {
  std::string name;
  std::string config_path;
  std::string out_path;
};

int cmd_check(const CheckArgs& args) {
  RunConfig cfg = dssync::load_run_config(args.config_path);
  std::unique_ptr<dssync::Problem> problem = dssync::make_problem(cfg.problem);
  const dssync::RunOptions opts = dssync::build_run_options(cfg, *problem, cfg.seeds[0]);

  CheckReport report;
  if (args.name == "variance") {
    report = dssync::check_variance_lemma(*problem, cfg.strategy.world.group_size,
                                          cfg.check.samples, cfg.seeds[0]);
  } else if (args.name == "divergence") {
    report = dssync::check_divergence_lemma(*problem, cfg.strategy, opts, cfg.seeds);
  } else if (args.name == "theorem") {
    report = dssync::check_theorem(*problem, cfg.strategy, opts, cfg.seeds);
  } else if (args.name == "mixing") {
    report = dssync::check_mixing_property(cfg.strategy.world, cfg.check.t_max);
  } else if (args.name == "eq2") {
    report = dssync::check_eq2_reconstruction(*problem, cfg.strategy.world, cfg.lr.alpha,
                                              cfg.iterations);
  } else if (args.name == "bsp-equiv") {
    report = dssync::check_bsp_equivalence(*problem, cfg.strategy.topology,
                                           cfg.strategy.world.world_size, opts);
  } else {
    throw dssync::ConfigError(
        "unknown check '" + args.name +
        "'; expected variance, divergence, theorem, mixing, eq2 or bsp-equiv");
  }

  const std::string text = dssync::report_json(report);
  std::cout << text;
  if (!args.out_path.empty()) dssync::atomic_write_file(args.out_path, text);
  return report.pass ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Deterministic simulator for divide-and-shuffle synchronization of "
               "distributed SGD"};
  app.require_subcommand(1);

  RunArgs run_args;
  CLI::App* run = app.add_subcommand("run", "Train per the config and write metrics");
  run->add_option("--config", run_args.config_path, "JSON run configuration")->required();
  run->add_option("--out", run_args.out_dir, "Output directory (default: out)");
  run->add_option("--parallel", run_args.parallel,
                  "Run workers on threads, capped at this count (0 = one per worker)")
      ->check(CLI::NonNegativeNumber);

  ScaleArgs scale_args;
  CLI::App* scale = app.add_subcommand("scale", "Print synchronization scale and cost");
  scale->add_option("--topology", scale_args.topology, "ring, tree or ps")->required();
  scale->add_option("--world", scale_args.world, "Number of workers")->required();
  scale->add_flag("--ds", scale_args.ds, "Divide-and-shuffle groups instead of one flat group");
  scale->add_flag("--compare", scale_args.compare, "Print flat and divide-and-shuffle side "
                                                   "by side");
  scale->add_option("--data-size", scale_args.data_size, "Payload bytes (default 1)");
  scale->add_option("--bandwidth", scale_args.bandwidth, "Link bytes per time unit (default 1)");
  scale->add_option("--servers", scale_args.servers, "Parameter server count (ps only)");

  CheckArgs check_args;
  CLI::App* check = app.add_subcommand("check", "Run an empirical verification");
  check->add_option("name", check_args.name,
                    "variance | divergence | theorem | mixing | eq2 | bsp-equiv")
      ->required();
  check->add_option("--config", check_args.config_path, "JSON run configuration")->required();
  check->add_option("--out", check_args.out_path, "Also write the report JSON here");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (run->parsed()) return cmd_run(run_args);
    if (scale->parsed()) return cmd_scale(scale_args);
    return cmd_check(check_args);
  } catch (const dssync::DivergenceError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const dssync::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  }
}
