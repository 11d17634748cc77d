#pragma once

#include <string>
#include <vector>

#include "dssync/analysis.hpp"
#include "dssync/optim.hpp"
#include "dssync/problems.hpp"
#include "dssync/sync.hpp"

namespace dssync {

// Declarative learning-rate schedule; resolved against the problem because
// the "theorem" kind derives its constants from it.
struct LrSpec {
  std::string kind = "constant";  // constant | step-decay | theorem
  double alpha = 0.1;
  double factor = 0.5;
  long every = 100;
};

// Knobs consumed only by `check` subcommands.
struct CheckKnobs {
  int samples = 10000;  // variance: number of Monte-Carlo draws
  long t_max = 11;      // mixing: iterations to examine
};

struct RunConfig {
  SyncStrategy strategy;
  DatasetSpec problem;
  OptimizerState optimizer;
  LrSpec lr;
  long iterations = 100;
  int batch_size = 1;
  std::vector<uint64_t> seeds = {1};
  ExecutionMode execution = ExecutionMode::Lockstep;
  int threads = 0;
  SamplingMode sampling = SamplingMode::Replacement;
  CostModel cost{0.0, 1.0, 1};  // data_size 0 means "size of the real payload"
  CheckKnobs check;
};

// Parses and validates a config.  Every rejection names the violated rule
// and the offending field; unknown fields are rejected.  Throws ConfigError.
RunConfig load_run_config(const std::string& path);
RunConfig parse_run_config(const std::string& json_text);

// Resolves the declarative schedule, deriving theorem constants from the
// problem when asked for.
LrSchedule build_lr(const LrSpec& spec, const Problem& problem);

// Assembles the options for one seeded run.
RunOptions build_run_options(const RunConfig& cfg, const Problem& problem, uint64_t seed);

}  // namespace dssync
