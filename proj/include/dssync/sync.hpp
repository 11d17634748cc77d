#pragma once

#include <functional>
#include <string>
#include <vector>

#include "dssync/optim.hpp"
#include "dssync/param.hpp"
#include "dssync/problems.hpp"
#include "dssync/schedule.hpp"

namespace dssync {

enum class StrategyKind { Bsp, DsSync };
enum class Topology { Ring, Tree, Ps };
enum class ExecutionMode { Lockstep, Parallel };
enum class SamplingMode { Replacement, Epoch };

StrategyKind strategy_kind_from_string(const std::string& name);
Topology topology_from_string(const std::string& name);
std::string to_string(StrategyKind kind);
std::string to_string(Topology topo);

// How workers synchronize.
//
//   bsp:      every iteration, all workers average their gradients over one
//             collective spanning the whole world, then take the same step.
//   ds-sync:  every worker steps locally first, then averages parameters and
//             running statistics inside its scheduled group (see schedule.hpp
//             for the alternating block/strided pattern).
//
// Optimizer statistical state (momentum and adam moments, step counts) is
// never synchronized under either strategy; it stays private to the worker.
struct SyncStrategy {
  StrategyKind kind = StrategyKind::Bsp;
  Topology topology = Topology::Ring;
  WorldConfig world;
  int num_servers = 1;  // ps only
};

// Throws std::invalid_argument naming the violated rule: tree groups must be
// a power of two, ds-sync has no parameter-server variant, etc.
void validate(const SyncStrategy& strategy);

struct LrSchedule {
  std::string descriptor;             // human-readable, e.g. "constant(0.1)"
  std::function<double(long)> alpha;  // iteration -> learning rate
};

LrSchedule constant_lr(double alpha);
LrSchedule step_decay_lr(double alpha0, double factor, long every);
// alpha_t = 2 / (mu * (gamma + t)); the schedule the convergence bound assumes.
LrSchedule theorem_lr(double mu, double gamma);

struct WorkerState {
  int rank = 0;
  ParamVector params;
  ParamVector running_stats;  // exponential moving average, synchronized with params
  OptimizerState opt;
  Shard shard;                // empty when the problem has no dataset
};

struct IterationTrace {
  long t = 0;
  std::vector<double> batch_loss;     // per worker, on its sampled batch
  std::vector<double> pre_sync_loss;  // full loss at each worker's locally stepped params
  std::vector<double> post_sync_loss; // full loss after the synchronization round
  double mean_post_sync_loss = 0.0;
  double suboptimality = 0.0;         // at the global mean; NaN when no optimum is known
  long critical_path_steps = 0;       // max over groups that sync concurrently
  long total_messages = 0;            // sum over groups
  double simulated_comm_time = 0.0;   // critical_path_steps * data_size / effective bandwidth
  ParamVector global_mean_params;
};

// Per-iteration internals for the reconstruction and bound checks.
struct IterationDetail {
  double alpha = 0.0;
  GroupPartition partition;
  std::vector<ParamVector> params_before;  // entering the iteration, per worker
  std::vector<ParamVector> update;         // realised update direction, per worker
  std::vector<double> grad_norm;           // raw stochastic gradient norm, per worker
};

struct RunOptions {
  long iterations = 1;
  int batch_size = 1;
  uint64_t seed = 1;
  OptimizerState optimizer;  // kind and hyperparameters; moments must be empty
  LrSchedule lr = constant_lr(0.1);
  ExecutionMode mode = ExecutionMode::Lockstep;
  int threads = 0;  // parallel mode thread cap; 0 means one per worker
  SamplingMode sampling = SamplingMode::Replacement;
  double data_size = 0.0;   // bytes per synchronized payload; 0 = 8 bytes per element
  double bandwidth = 1.0;   // bytes per simulated time unit
  bool record_detail = false;
};

struct RunResult {
  std::vector<IterationTrace> traces;
  std::vector<IterationDetail> detail;  // empty unless record_detail
  std::vector<WorkerState> final_workers;
};

struct LocalStepOutcome {
  WorkerState worker;
  double batch_loss = 0.0;
  double grad_norm = 0.0;
  ParamVector update;
};

// One local step: sample a batch, compute the stochastic gradient, apply the
// optimizer at rate alpha, fold the batch observation into running_stats.
// Pure in (problem, worker, t, alpha, options); throws DivergenceError when
// the result is non-finite.
LocalStepOutcome local_iteration(const Problem& problem, const WorkerState& worker, long t,
                                 double alpha, const RunOptions& options);

struct SyncRoundOutcome {
  long critical_path_steps = 0;
  long total_messages = 0;
};

// One parameter-averaging round at iteration t: workers are grouped by the
// strategy's schedule (one all-world group under bsp) and each group's
// params and running_stats are averaged over the configured topology.
// Optimizer state is left untouched.
SyncRoundOutcome sync_round(std::vector<WorkerState>& workers, const SyncStrategy& strategy,
                            long t);

// Full training run.  Lockstep and parallel modes produce identical traces;
// metrics written from them are byte-identical.
RunResult run_training(const Problem& problem, const SyncStrategy& strategy,
                       const RunOptions& options);

}  // namespace dssync
