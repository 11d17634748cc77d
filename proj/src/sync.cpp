#include "dssync/sync.hpp"

#include <cmath>
#include <exception>
#include <functional>
#include <stdexcept>
#include <thread>
#include <utility>

#include "dssync/comm.hpp"
#include "dssync/errors.hpp"

namespace dssync {

StrategyKind strategy_kind_from_string(const std::string& name) {
  if (name == "bsp") return StrategyKind::Bsp;
  if (name == "ds-sync") return StrategyKind::DsSync;
  throw std::invalid_argument("unknown strategy: " + name);
}

Topology topology_from_string(const std::string& name) {
  if (name == "ring") return Topology::Ring;
  if (name == "tree") return Topology::Tree;
  if (name == "ps") return Topology::Ps;
  throw std::invalid_argument("unknown topology: " + name);
}

std::string to_string(StrategyKind kind) {
  return kind == StrategyKind::Bsp ? "bsp" : "ds-sync";
}

std::string to_string(Topology topo) {
  switch (topo) {
    case Topology::Ring: return "ring";
    case Topology::Tree: return "tree";
    case Topology::Ps: return "ps";
  }
  throw std::invalid_argument("unknown topology");
}

namespace {

bool is_power_of_two(long n) { return n > 0 && (n & (n - 1)) == 0; }

}  // namespace

void validate(const SyncStrategy& strategy) {
  validate(strategy.world);
  if (strategy.kind == StrategyKind::Bsp &&
      strategy.world.group_size != strategy.world.world_size) {
    throw std::invalid_argument("bsp runs one group spanning the world; set group_size equal to "
                                "world_size");
  }
  if (strategy.kind == StrategyKind::DsSync && strategy.topology == Topology::Ps) {
    throw std::invalid_argument(
        "ds-sync has no parameter-server variant; use topology ring or tree");
  }
  if (strategy.topology == Topology::Tree && !is_power_of_two(strategy.world.group_size)) {
    throw std::invalid_argument("tree topology requires power-of-two groups (group_size=" +
                                std::to_string(strategy.world.group_size) + ")");
  }
  if (strategy.topology == Topology::Ps && strategy.num_servers < 1) {
    throw std::invalid_argument("ps topology needs num_servers >= 1 (got " +
                                std::to_string(strategy.num_servers) + ")");
  }
}

LrSchedule constant_lr(double alpha) {
  if (!(alpha >= 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("constant_lr: alpha must be finite and >= 0");
  }
  return {"constant(" + std::to_string(alpha) + ")", [alpha](long) { return alpha; }};
}

LrSchedule step_decay_lr(double alpha0, double factor, long every) {
  if (!(alpha0 >= 0.0) || !std::isfinite(alpha0)) {
    throw std::invalid_argument("step_decay_lr: alpha0 must be finite and >= 0");
  }
  if (!(factor > 0.0) || !(factor <= 1.0)) {
    throw std::invalid_argument("step_decay_lr: factor must be in (0, 1]");
  }
  if (every < 1) throw std::invalid_argument("step_decay_lr: every must be >= 1");
  return {"step-decay(" + std::to_string(alpha0) + ",x" + std::to_string(factor) + "/" +
              std::to_string(every) + ")",
          [alpha0, factor, every](long t) {
            return alpha0 * std::pow(factor, static_cast<double>(t / every));
          }};
}

LrSchedule theorem_lr(double mu, double gamma) {
  if (!(mu > 0.0)) throw std::invalid_argument("theorem_lr: mu must be > 0");
  if (!(gamma >= 1.0)) throw std::invalid_argument("theorem_lr: gamma must be >= 1");
  return {"theorem(mu=" + std::to_string(mu) + ",gamma=" + std::to_string(gamma) + ")",
          [mu, gamma](long t) { return 2.0 / (mu * (gamma + static_cast<double>(t))); }};
}

namespace {

// Runs fn(i) for i in [0, count).  Lockstep executes in order on this
// thread; parallel spreads indices over worker threads.  Either way each
// index sees identical inputs, so results match bit for bit.  If several
// indices throw, the lowest index wins, matching lockstep behaviour.
void for_each_index(size_t count, ExecutionMode mode, int thread_cap,
                    const std::function<void(size_t)>& fn) {
  if (mode == ExecutionMode::Lockstep || count <= 1) {
    for (size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  size_t threads = thread_cap > 0 ? static_cast<size_t>(thread_cap) : count;
  if (threads > count) threads = count;
  std::vector<std::exception_ptr> errors(count);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (size_t j = 0; j < threads; ++j) {
    pool.emplace_back([&, j]() {
      for (size_t i = j; i < count; i += threads) {
        try {
          fn(i);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

GroupPartition partition_for(const SyncStrategy& strategy, long t) {
  if (strategy.kind == StrategyKind::Bsp) {
    GroupPartition part;
    part.iteration = t;
    std::vector<int> all(static_cast<size_t>(strategy.world.world_size));
    for (int x = 0; x < strategy.world.world_size; ++x) all[static_cast<size_t>(x)] = x;
    part.groups.push_back(std::move(all));
    return part;
  }
  return make_partition(strategy.world, t);
}

AllReduceResult run_collective(const SyncStrategy& strategy, std::span<const int> members,
                               std::span<const ParamVector> inputs) {
  switch (strategy.topology) {
    case Topology::Ring: return ring_allreduce_avg(members, inputs);
    case Topology::Tree: return tree_allreduce_avg(members, inputs);
    case Topology::Ps: return ps_allreduce_avg(members, inputs, strategy.num_servers);
  }
  throw std::invalid_argument("unknown topology");
}

std::vector<int> sample_batch(const Problem& problem, const WorkerState& worker, long t,
                              const RunOptions& options) {
  if (problem.dataset_size() == 0) return {};
  if (worker.shard.indices.empty()) {
    throw std::invalid_argument("worker " + std::to_string(worker.rank) + " has an empty shard");
  }
  std::vector<int> batch(static_cast<size_t>(options.batch_size));
  if (options.sampling == SamplingMode::Replacement) {
    Rng rng = Rng::for_stream(options.seed, streams::kBatch, static_cast<uint64_t>(worker.rank),
                              static_cast<uint64_t>(t));
    for (auto& idx : batch) {
      idx = worker.shard.indices[rng.uniform_below(worker.shard.indices.size())];
    }
    return batch;
  }
  // Epoch mode: walk a per-epoch permutation of the shard; a batch that hits
  // the end continues into the next epoch's order.
  const long size = static_cast<long>(worker.shard.indices.size());
  long pos = static_cast<long>(t) * options.batch_size;
  for (auto& idx : batch) {
    const long epoch = pos / size;
    const long offset = pos % size;
    idx = epoch_order(worker.shard, options.seed, worker.rank, epoch)[static_cast<size_t>(offset)];
    ++pos;
  }
  return batch;
}

GradSample checked_gradient(const Problem& problem, const WorkerState& worker, long t,
                            const RunOptions& options) {
  const std::vector<int> batch = sample_batch(problem, worker, t, options);
  Rng noise = Rng::for_stream(options.seed, streams::kGradientNoise,
                              static_cast<uint64_t>(worker.rank), static_cast<uint64_t>(t));
  GradSample sample = problem.stochastic_gradient(worker.params, batch, noise);
  if (!std::isfinite(sample.loss) || !all_finite(sample.grad)) {
    throw DivergenceError(worker.rank, t, "non-finite stochastic gradient");
  }
  return sample;
}

void fold_running_stats(const Problem& problem, WorkerState& worker, const ParamVector& obs) {
  if (problem.stats_dim() == 0 || obs.empty()) return;
  if (worker.running_stats.empty()) {
    worker.running_stats.assign(static_cast<size_t>(problem.stats_dim()), 0.0);
  }
  for (size_t i = 0; i < worker.running_stats.size(); ++i) {
    worker.running_stats[i] = 0.9 * worker.running_stats[i] + 0.1 * obs[i];
  }
}

ParamVector concat_payload(const WorkerState& worker) {
  ParamVector payload = worker.params;
  payload.insert(payload.end(), worker.running_stats.begin(), worker.running_stats.end());
  return payload;
}

void split_payload(WorkerState& worker, const ParamVector& payload) {
  const size_t d = worker.params.size();
  worker.params.assign(payload.begin(), payload.begin() + static_cast<long>(d));
  worker.running_stats.assign(payload.begin() + static_cast<long>(d), payload.end());
}

double effective_bandwidth(const SyncStrategy& strategy, const RunOptions& options) {
  if (strategy.topology == Topology::Ps) {
    return options.bandwidth * static_cast<double>(strategy.num_servers) /
           static_cast<double>(strategy.world.world_size);
  }
  return options.bandwidth;
}

// Averages params and running_stats across one group, writing the result
// back into the member workers.
SyncRoundOutcome sync_one_group(std::vector<WorkerState>& workers, const SyncStrategy& strategy,
                                const std::vector<int>& members, long t) {
  std::vector<ParamVector> inputs;
  inputs.reserve(members.size());
  for (int rank : members) inputs.push_back(concat_payload(workers[static_cast<size_t>(rank)]));
  AllReduceResult reduced;
  try {
    reduced = run_collective(strategy, members, inputs);
  } catch (const std::runtime_error& e) {
    throw DivergenceError(members[0], t, e.what());
  }
  for (size_t i = 0; i < members.size(); ++i) {
    split_payload(workers[static_cast<size_t>(members[i])], reduced.values[i]);
  }
  return {reduced.steps.serial_steps, reduced.steps.total_messages};
}

}  // namespace

LocalStepOutcome local_iteration(const Problem& problem, const WorkerState& worker, long t,
                                 double alpha, const RunOptions& options) {
  GradSample sample = checked_gradient(problem, worker, t, options);

  LocalStepOutcome out;
  out.worker = worker;
  out.batch_loss = sample.loss;
  out.grad_norm = norm(sample.grad);
  out.worker.opt.hp.alpha = alpha;
  try {
    StepResult step = apply_step(out.worker.opt, worker.params, sample.grad);
    out.worker.params = std::move(step.params);
    out.worker.opt = std::move(step.state);
  } catch (const DivergenceError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw DivergenceError(worker.rank, t, e.what());
  }
  out.update = alpha > 0.0 ? extract_update(worker.params, out.worker.params, alpha)
                           : ParamVector(worker.params.size(), 0.0);
  fold_running_stats(problem, out.worker, sample.stats_observation);
  return out;
}

SyncRoundOutcome sync_round(std::vector<WorkerState>& workers, const SyncStrategy& strategy,
                            long t) {
  validate(strategy);
  if (workers.size() != static_cast<size_t>(strategy.world.world_size)) {
    throw std::invalid_argument("sync_round: worker count does not match world_size");
  }
  const GroupPartition part = partition_for(strategy, t);
  SyncRoundOutcome outcome;
  for (const auto& members : part.groups) {
    const SyncRoundOutcome one = sync_one_group(workers, strategy, members, t);
    outcome.critical_path_steps = std::max(outcome.critical_path_steps, one.critical_path_steps);
    outcome.total_messages += one.total_messages;
  }
  return outcome;
}

RunResult run_training(const Problem& problem, const SyncStrategy& strategy,
                       const RunOptions& options) {
  validate(strategy);
  if (options.iterations < 1) throw std::invalid_argument("iterations must be >= 1");
  if (options.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (!(options.bandwidth > 0.0)) throw std::invalid_argument("bandwidth must be > 0");
  if (options.data_size < 0.0) throw std::invalid_argument("data_size must be >= 0");

  const int world = strategy.world.world_size;
  const size_t w = static_cast<size_t>(world);

  std::vector<WorkerState> workers(w);
  {
    const ParamVector w0 = problem.initial_params();
    std::vector<Shard> shards;
    if (problem.dataset_size() > 0) {
      shards = make_shards(problem.dataset_size(), world, options.seed);
    }
    for (int rank = 0; rank < world; ++rank) {
      WorkerState& ws = workers[static_cast<size_t>(rank)];
      ws.rank = rank;
      ws.params = w0;
      ws.opt = options.optimizer;
      if (problem.stats_dim() > 0) {
        ws.running_stats.assign(static_cast<size_t>(problem.stats_dim()), 0.0);
      }
      if (!shards.empty()) ws.shard = shards[static_cast<size_t>(rank)];
    }
  }

  const double payload_bytes =
      options.data_size > 0.0
          ? options.data_size
          : 8.0 * static_cast<double>(problem.dim() + problem.stats_dim());
  const double bandwidth = effective_bandwidth(strategy, options);

  RunResult result;
  result.traces.reserve(static_cast<size_t>(options.iterations));

  for (long t = 0; t < options.iterations; ++t) {
    const double alpha = options.lr.alpha(t);
    if (!std::isfinite(alpha) || alpha < 0.0) {
      throw std::invalid_argument("learning rate at t=" + std::to_string(t) +
                                  " must be finite and >= 0");
    }

    IterationTrace trace;
    trace.t = t;
    trace.batch_loss.resize(w);
    trace.pre_sync_loss.resize(w);
    trace.post_sync_loss.resize(w);

    IterationDetail detail;
    if (options.record_detail) {
      detail.alpha = alpha;
      detail.partition = partition_for(strategy, t);
      detail.params_before.resize(w);
      detail.update.resize(w);
      detail.grad_norm.resize(w);
    }

    SyncRoundOutcome round;

    if (strategy.kind == StrategyKind::DsSync) {
      for_each_index(w, options.mode, options.threads, [&](size_t k) {
        const WorkerState& ws = workers[k];
        if (options.record_detail) detail.params_before[k] = ws.params;
        LocalStepOutcome step = local_iteration(problem, ws, t, alpha, options);
        trace.batch_loss[k] = step.batch_loss;
        trace.pre_sync_loss[k] = problem.full_loss(step.worker.params);
        if (!std::isfinite(trace.pre_sync_loss[k])) {
          throw DivergenceError(ws.rank, t, "non-finite loss after local step");
        }
        if (options.record_detail) {
          detail.update[k] = step.update;
          detail.grad_norm[k] = step.grad_norm;
        }
        workers[k] = std::move(step.worker);
      });

      // Groups synchronize independently; in parallel mode each group's
      // collective runs on its own thread.
      const GroupPartition part = partition_for(strategy, t);
      std::vector<SyncRoundOutcome> per_group(part.groups.size());
      for_each_index(part.groups.size(), options.mode, options.threads, [&](size_t g) {
        per_group[g] = sync_one_group(workers, strategy, part.groups[g], t);
      });
      for (const auto& pg : per_group) {
        round.critical_path_steps = std::max(round.critical_path_steps, pg.critical_path_steps);
        round.total_messages += pg.total_messages;
      }
    } else {
      // bsp: gradients (plus running statistics) are averaged over one
      // all-world collective, then every worker applies the same step.
      std::vector<GradSample> samples(w);
      for_each_index(w, options.mode, options.threads, [&](size_t k) {
        WorkerState& ws = workers[k];
        if (options.record_detail) detail.params_before[k] = ws.params;
        samples[k] = checked_gradient(problem, ws, t, options);
        trace.batch_loss[k] = samples[k].loss;
        trace.pre_sync_loss[k] = problem.full_loss(ws.params);
        if (options.record_detail) detail.grad_norm[k] = norm(samples[k].grad);
        fold_running_stats(problem, ws, samples[k].stats_observation);
      });

      std::vector<int> members(w);
      std::vector<ParamVector> inputs(w);
      for (size_t k = 0; k < w; ++k) {
        members[k] = static_cast<int>(k);
        inputs[k] = samples[k].grad;
        inputs[k].insert(inputs[k].end(), workers[k].running_stats.begin(),
                         workers[k].running_stats.end());
      }
      AllReduceResult reduced;
      try {
        reduced = run_collective(strategy, members, inputs);
      } catch (const std::runtime_error& e) {
        throw DivergenceError(0, t, e.what());
      }
      round.critical_path_steps = reduced.steps.serial_steps;
      round.total_messages = reduced.steps.total_messages;

      for_each_index(w, options.mode, options.threads, [&](size_t k) {
        WorkerState& ws = workers[k];
        const ParamVector& payload = reduced.values[k];
        const size_t d = ws.params.size();
        ParamVector mean_grad(payload.begin(), payload.begin() + static_cast<long>(d));
        ws.running_stats.assign(payload.begin() + static_cast<long>(d), payload.end());
        ws.opt.hp.alpha = alpha;
        const ParamVector before = ws.params;
        try {
          StepResult step = apply_step(ws.opt, ws.params, mean_grad);
          ws.params = std::move(step.params);
          ws.opt = std::move(step.state);
        } catch (const DivergenceError&) {
          throw;
        } catch (const std::runtime_error& e) {
          throw DivergenceError(ws.rank, t, e.what());
        }
        if (options.record_detail) {
          detail.update[k] = alpha > 0.0 ? extract_update(before, ws.params, alpha)
                                         : ParamVector(d, 0.0);
        }
      });
    }

    // Post-round bookkeeping, identical for both strategies.
    for_each_index(w, options.mode, options.threads, [&](size_t k) {
      if (!all_finite(workers[k].params)) {
        throw DivergenceError(workers[k].rank, t, "non-finite parameters after sync");
      }
      trace.post_sync_loss[k] = problem.full_loss(workers[k].params);
      if (!std::isfinite(trace.post_sync_loss[k])) {
        throw DivergenceError(workers[k].rank, t, "non-finite loss after sync");
      }
    });

    {
      std::vector<const ParamVector*> ptrs(w);
      for (size_t k = 0; k < w; ++k) ptrs[k] = &workers[k].params;
      trace.global_mean_params = mean_of_ptrs(ptrs);
    }
    double loss_acc = 0.0;
    for (size_t k = 0; k < w; ++k) loss_acc += trace.post_sync_loss[k];
    trace.mean_post_sync_loss = loss_acc / static_cast<double>(w);
    trace.suboptimality = problem.has_optimum()
                              ? problem.true_suboptimality(trace.global_mean_params)
                              : std::nan("");
    trace.critical_path_steps = round.critical_path_steps;
    trace.total_messages = round.total_messages;
    trace.simulated_comm_time =
        static_cast<double>(round.critical_path_steps) * payload_bytes / bandwidth;

    result.traces.push_back(std::move(trace));
    if (options.record_detail) result.detail.push_back(std::move(detail));
  }

  result.final_workers = std::move(workers);
  return result;
}

}  // namespace dssync
