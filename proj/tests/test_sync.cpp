#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "dssync/errors.hpp"
#include "dssync/problems.hpp"
#include "dssync/rng.hpp"
#include "dssync/sync.hpp"

using namespace dssync;

namespace {

DatasetSpec quad_spec(int d, double sigma, uint64_t seed) {
  DatasetSpec s;
  s.kind = "quadratic";
  s.d = d;
  s.mu = 1.0;
  s.L = 2.0;
  s.sigma = sigma;
  s.delta0 = 1.0;
  s.seed = seed;
  return s;
}

SyncStrategy ds_ring(int world, int group) {
  SyncStrategy s;
  s.kind = StrategyKind::DsSync;
  s.topology = Topology::Ring;
  s.world = {world, group};
  return s;
}

SyncStrategy bsp_ring(int world) {
  SyncStrategy s;
  s.kind = StrategyKind::Bsp;
  s.topology = Topology::Ring;
  s.world = {world, world};
  return s;
}

RunOptions base_options(long iterations, double alpha, uint64_t seed) {
  RunOptions o;
  o.iterations = iterations;
  o.seed = seed;
  o.lr = constant_lr(alpha);
  return o;
}

bool traces_identical(const RunResult& a, const RunResult& b) {
  if (a.traces.size() != b.traces.size()) return false;
  for (size_t t = 0; t < a.traces.size(); ++t) {
    const IterationTrace& x = a.traces[t];
    const IterationTrace& y = b.traces[t];
    if (x.global_mean_params != y.global_mean_params) return false;
    if (x.mean_post_sync_loss != y.mean_post_sync_loss) return false;
    if (x.post_sync_loss != y.post_sync_loss) return false;
    if (x.critical_path_steps != y.critical_path_steps) return false;
  }
  if (a.final_workers.size() != b.final_workers.size()) return false;
  for (size_t k = 0; k < a.final_workers.size(); ++k) {
    if (a.final_workers[k].params != b.final_workers[k].params) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("strategy validation catches unusable combinations") {
  SyncStrategy s = ds_ring(4, 2);
  s.topology = Topology::Ps;
  CHECK_THROWS_AS(validate(s), std::invalid_argument);

  SyncStrategy tree = ds_ring(9, 3);
  tree.topology = Topology::Tree;
  CHECK_THROWS_AS(validate(tree), std::invalid_argument);

  SyncStrategy bsp = bsp_ring(4);
  bsp.world.group_size = 2;
  CHECK_THROWS_AS(validate(bsp), std::invalid_argument);

  SyncStrategy ps = bsp_ring(4);
  ps.topology = Topology::Ps;
  ps.num_servers = 0;
  CHECK_THROWS_AS(validate(ps), std::invalid_argument);

  validate(ds_ring(16, 4));
  validate(bsp_ring(3));
}

TEST_CASE("strategy and topology names round-trip") {
  CHECK(to_string(strategy_kind_from_string("bsp")) == "bsp");
  CHECK(to_string(strategy_kind_from_string("ds-sync")) == "ds-sync");
  for (const char* name : {"ring", "tree", "ps"}) {
    CHECK(to_string(topology_from_string(name)) == name);
  }
  CHECK_THROWS_AS(strategy_kind_from_string("async"), std::invalid_argument);
  CHECK_THROWS_AS(topology_from_string("mesh"), std::invalid_argument);
}

TEST_CASE("learning rate schedules evaluate as documented") {
  const LrSchedule c = constant_lr(0.25);
  CHECK(c.alpha(0) == 0.25);
  CHECK(c.alpha(1000) == 0.25);

  const LrSchedule d = step_decay_lr(1.0, 0.5, 10);
  CHECK(d.alpha(0) == 1.0);
  CHECK(d.alpha(9) == 1.0);
  CHECK(d.alpha(10) == 0.5);
  CHECK(d.alpha(25) == 0.25);

  const LrSchedule th = theorem_lr(1.0, 16.0);
  CHECK(th.alpha(0) == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(th.alpha(4) == doctest::Approx(0.1).epsilon(1e-15));

  CHECK_THROWS_AS(constant_lr(-0.1), std::invalid_argument);
  CHECK_THROWS_AS(step_decay_lr(1.0, 0.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(step_decay_lr(1.0, 0.5, 0), std::invalid_argument);
  CHECK_THROWS_AS(theorem_lr(0.0, 16.0), std::invalid_argument);
}

TEST_CASE("group members hold identical state after each sync round") {
  const auto problem = make_problem(quad_spec(6, 0.5, 5));
  RunOptions opts = base_options(4, 0.05, 7);
  opts.record_detail = true;
  const RunResult r = run_training(*problem, ds_ring(4, 2), opts);

  REQUIRE(r.traces.size() == 4);
  // last iteration is t=3 (odd): strided groups {0,2} and {1,3}
  CHECK(r.final_workers[0].params == r.final_workers[2].params);
  CHECK(r.final_workers[1].params == r.final_workers[3].params);
  CHECK(r.final_workers[0].params != r.final_workers[1].params);

  // entering t=1 the workers carry t=0's block pairing
  const auto& before_t1 = r.detail[1].params_before;
  CHECK(before_t1[0] == before_t1[1]);
  CHECK(before_t1[2] == before_t1[3]);
}

TEST_CASE("ring critical path is three steps for pairs, seven for a bsp world of four") {
  const auto problem = make_problem(quad_spec(4, 0.5, 9));
  const RunOptions opts = base_options(2, 0.05, 3);

  const RunResult ds = run_training(*problem, ds_ring(4, 2), opts);
  CHECK(ds.traces[0].critical_path_steps == 3);
  CHECK(ds.traces[0].total_messages == 6);

  const RunResult bsp = run_training(*problem, bsp_ring(4), opts);
  CHECK(bsp.traces[0].critical_path_steps == 7);
  CHECK(bsp.traces[0].total_messages == 7);
}

TEST_CASE("simulated comm time scales the critical path by payload over bandwidth") {
  const auto problem = make_problem(quad_spec(8, 0.0, 2));
  RunOptions opts = base_options(1, 0.05, 3);
  opts.data_size = 100.0;
  opts.bandwidth = 4.0;
  const RunResult r = run_training(*problem, ds_ring(4, 2), opts);
  CHECK(r.traces[0].simulated_comm_time == doctest::Approx(3 * 100.0 / 4.0).epsilon(1e-15));

  // default payload is 8 bytes per synchronized element
  RunOptions def = base_options(1, 0.05, 3);
  const RunResult rd = run_training(*problem, ds_ring(4, 2), def);
  CHECK(rd.traces[0].simulated_comm_time == doctest::Approx(3 * 64.0).epsilon(1e-15));
}

TEST_CASE("bsp keeps every worker bit-identical") {
  const auto problem = make_problem(quad_spec(5, 0.5, 13));
  const RunOptions opts = base_options(5, 0.05, 11);
  const RunResult r = run_training(*problem, bsp_ring(4), opts);
  for (int k = 1; k < 4; ++k) {
    CHECK(r.final_workers[static_cast<size_t>(k)].params == r.final_workers[0].params);
  }
}

TEST_CASE("sync_round averages groups and leaves optimizer state alone") {
  const auto problem = make_problem(quad_spec(3, 0.0, 1));
  std::vector<WorkerState> workers(4);
  Rng rng(19);
  for (int k = 0; k < 4; ++k) {
    workers[static_cast<size_t>(k)].rank = k;
    workers[static_cast<size_t>(k)].params = {rng.gaussian(), rng.gaussian(), rng.gaussian()};
    workers[static_cast<size_t>(k)].opt.kind = OptimizerKind::Adam;
    workers[static_cast<size_t>(k)].opt.first_moment = {0.1 * k, 0.0, 0.0};
    workers[static_cast<size_t>(k)].opt.second_moment = {0.2 * k, 0.0, 0.0};
    workers[static_cast<size_t>(k)].opt.step_count = k;
  }
  std::vector<ParamVector> before_params;
  std::vector<std::vector<std::byte>> before_opt;
  for (const WorkerState& ws : workers) {
    before_params.push_back(ws.params);
    before_opt.push_back(serialize(ws.opt));
  }

  const SyncRoundOutcome out = sync_round(workers, ds_ring(4, 2), 0);
  CHECK(out.critical_path_steps == 3);
  CHECK(out.total_messages == 6);

  const ParamVector pair01 = mean_of(std::vector<ParamVector>{before_params[0], before_params[1]});
  const ParamVector pair23 = mean_of(std::vector<ParamVector>{before_params[2], before_params[3]});
  CHECK(workers[0].params == pair01);
  CHECK(workers[1].params == pair01);
  CHECK(workers[2].params == pair23);
  CHECK(workers[3].params == pair23);
  for (int k = 0; k < 4; ++k) {
    CHECK(serialize(workers[static_cast<size_t>(k)].opt) == before_opt[static_cast<size_t>(k)]);
  }

  CHECK_THROWS_AS(sync_round(workers, ds_ring(9, 3), 0), std::invalid_argument);
}

TEST_CASE("group averaging preserves the global parameter mean") {
  std::vector<WorkerState> workers(9);
  Rng rng(23);
  for (int k = 0; k < 9; ++k) {
    workers[static_cast<size_t>(k)].rank = k;
    workers[static_cast<size_t>(k)].params.resize(5);
    for (double& x : workers[static_cast<size_t>(k)].params) x = rng.gaussian();
  }
  std::vector<const ParamVector*> ptrs;
  for (const WorkerState& ws : workers) ptrs.push_back(&ws.params);
  const ParamVector before = mean_of_ptrs(ptrs);

  for (long t = 0; t < 4; ++t) {
    sync_round(workers, ds_ring(9, 3), t);
    const ParamVector after = mean_of_ptrs(ptrs);
    for (size_t i = 0; i < before.size(); ++i) {
      CHECK(after[i] == doctest::Approx(before[i]).epsilon(1e-13));
    }
  }
}

TEST_CASE("local_iteration is pure in its inputs") {
  const auto problem = make_problem(quad_spec(4, 0.5, 3));
  WorkerState ws;
  ws.rank = 1;
  ws.params = problem->initial_params();
  const RunOptions opts = base_options(1, 0.05, 9);
  const LocalStepOutcome a = local_iteration(*problem, ws, 0, 0.05, opts);
  const LocalStepOutcome b = local_iteration(*problem, ws, 0, 0.05, opts);
  CHECK(a.worker.params == b.worker.params);
  CHECK(a.update == b.update);
  CHECK(a.batch_loss == b.batch_loss);

  // a different iteration draws different noise
  const LocalStepOutcome c = local_iteration(*problem, ws, 1, 0.05, opts);
  CHECK(a.worker.params != c.worker.params);
}

TEST_CASE("running statistics ema folds the batch observation") {
  DatasetSpec mlp;
  mlp.kind = "tiny-mlp";
  mlp.d = 3;
  mlp.M = 12;
  mlp.hidden = 4;
  mlp.seed = 21;
  const auto problem = make_problem(mlp);

  SyncStrategy solo = bsp_ring(1);
  RunOptions opts = base_options(1, 0.05, 33);
  opts.batch_size = 2;
  const RunResult r = run_training(*problem, solo, opts);

  // replay the worker's batch draw and recompute the expected first ema step
  const Shard shard = make_shards(12, 1, 33)[0];
  Rng draw = Rng::for_stream(33, streams::kBatch, 0, 0);
  std::vector<int> batch(2);
  for (int& idx : batch) {
    idx = shard.indices[draw.uniform_below(shard.indices.size())];
  }
  Rng unused(0);
  const GradSample s = problem->stochastic_gradient(problem->initial_params(), batch, unused);
  REQUIRE(r.final_workers[0].running_stats.size() == s.stats_observation.size());
  for (size_t i = 0; i < s.stats_observation.size(); ++i) {
    CHECK(r.final_workers[0].running_stats[i] ==
          doctest::Approx(0.1 * s.stats_observation[i]).epsilon(1e-15));
  }
}

TEST_CASE("group members share running statistics after sync") {
  DatasetSpec mlp;
  mlp.kind = "tiny-mlp";
  mlp.d = 3;
  mlp.M = 16;
  mlp.hidden = 4;
  mlp.seed = 5;
  const auto problem = make_problem(mlp);

  RunOptions opts = base_options(3, 0.05, 17);
  const RunResult r = run_training(*problem, ds_ring(4, 2), opts);
  // t=2 is even: block pairing {0,1}, {2,3}
  CHECK(r.final_workers[0].running_stats == r.final_workers[1].running_stats);
  CHECK(r.final_workers[2].running_stats == r.final_workers[3].running_stats);
  CHECK(std::isnan(r.traces.back().suboptimality));
}

TEST_CASE("a runaway learning rate raises a divergence error with coordinates") {
  const auto problem = make_problem(quad_spec(4, 0.0, 3));
  const RunOptions opts = [] {
    RunOptions o;
    o.iterations = 400;
    o.seed = 3;
    o.lr = constant_lr(10.0);
    return o;
  }();
  try {
    run_training(*problem, ds_ring(4, 2), opts);
    FAIL("expected a divergence error");
  } catch (const DivergenceError& e) {
    CHECK(e.rank >= 0);
    CHECK(e.rank < 4);
    CHECK(e.iteration >= 0);
    CHECK(e.iteration < 400);
    CHECK(std::string(e.what()).find("diverged") != std::string::npos);
  }
}

TEST_CASE("lockstep and parallel execution match bit for bit") {
  const auto quad = make_problem(quad_spec(6, 0.5, 29));
  RunOptions lockstep = base_options(20, 0.05, 31);
  RunOptions parallel = lockstep;
  parallel.mode = ExecutionMode::Parallel;
  CHECK(traces_identical(run_training(*quad, ds_ring(4, 2), lockstep),
                         run_training(*quad, ds_ring(4, 2), parallel)));

  parallel.threads = 3;
  CHECK(traces_identical(run_training(*quad, ds_ring(16, 4), lockstep),
                         run_training(*quad, ds_ring(16, 4), parallel)));
  CHECK(traces_identical(run_training(*quad, bsp_ring(4), lockstep),
                         run_training(*quad, bsp_ring(4), parallel)));

  DatasetSpec mlp;
  mlp.kind = "tiny-mlp";
  mlp.d = 3;
  mlp.M = 20;
  mlp.hidden = 4;
  mlp.seed = 2;
  const auto net = make_problem(mlp);
  RunOptions mlp_lock = base_options(10, 0.05, 41);
  mlp_lock.batch_size = 2;
  RunOptions mlp_par = mlp_lock;
  mlp_par.mode = ExecutionMode::Parallel;
  mlp_par.threads = 2;
  CHECK(traces_identical(run_training(*net, ds_ring(4, 2), mlp_lock),
                         run_training(*net, ds_ring(4, 2), mlp_par)));
}

TEST_CASE("repeated runs with one seed are identical, different seeds differ") {
  const auto problem = make_problem(quad_spec(5, 0.5, 37));
  const RunOptions a = base_options(10, 0.05, 1);
  CHECK(traces_identical(run_training(*problem, ds_ring(4, 2), a),
                         run_training(*problem, ds_ring(4, 2), a)));
  const RunOptions b = base_options(10, 0.05, 2);
  CHECK_FALSE(traces_identical(run_training(*problem, ds_ring(4, 2), a),
                               run_training(*problem, ds_ring(4, 2), b)));
}

TEST_CASE("epoch sampling reshuffles shards instead of redrawing them") {
  DatasetSpec logi;
  logi.kind = "logistic";
  logi.d = 4;
  logi.M = 16;
  logi.mu = 0.1;
  logi.seed = 43;
  const auto problem = make_problem(logi);

  RunOptions epoch = base_options(8, 0.1, 3);
  epoch.sampling = SamplingMode::Epoch;
  epoch.batch_size = 2;
  RunOptions replacement = epoch;
  replacement.sampling = SamplingMode::Replacement;

  const RunResult re = run_training(*problem, ds_ring(4, 2), epoch);
  const RunResult rr = run_training(*problem, ds_ring(4, 2), replacement);
  CHECK_FALSE(traces_identical(re, rr));
  CHECK(traces_identical(re, run_training(*problem, ds_ring(4, 2), epoch)));
}

TEST_CASE("training loop validates its options") {
  const auto problem = make_problem(quad_spec(4, 0.0, 3));
  RunOptions opts = base_options(0, 0.05, 1);
  CHECK_THROWS_AS(run_training(*problem, ds_ring(4, 2), opts), std::invalid_argument);
  opts = base_options(1, 0.05, 1);
  opts.batch_size = 0;
  CHECK_THROWS_AS(run_training(*problem, ds_ring(4, 2), opts), std::invalid_argument);
  opts = base_options(1, 0.05, 1);
  opts.bandwidth = 0.0;
  CHECK_THROWS_AS(run_training(*problem, ds_ring(4, 2), opts), std::invalid_argument);
  opts = base_options(1, 0.05, 1);
  opts.lr = LrSchedule{"bad", [](long) { return std::nan(""); }};
  CHECK_THROWS_AS(run_training(*problem, ds_ring(4, 2), opts), std::invalid_argument);
}
