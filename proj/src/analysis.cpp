#include "dssync/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace dssync {

namespace {

bool is_power_of_two(long n) { return n > 0 && (n & (n - 1)) == 0; }

long log2_exact(long n) {
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("tree size must be a power of two (got " + std::to_string(n) +
                                ")");
  }
  long k = 0;
  while ((1L << k) < n) ++k;
  return k;
}

long exact_sqrt(long n) {
  const long r = static_cast<long>(std::lround(std::sqrt(static_cast<double>(n))));
  if (r * r != n) {
    throw std::invalid_argument("divide-and-shuffle needs a square world size (got " +
                                std::to_string(n) + ")");
  }
  return r;
}

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

}  // namespace

long sync_scale(Topology topo, long world, ScaleMode mode) {
  if (world < 1) {
    throw std::invalid_argument("world size must be >= 1 (got " + std::to_string(world) + ")");
  }
  long m = world;
  if (mode == ScaleMode::DivideShuffle) {
    if (topo == Topology::Ps) {
      throw std::invalid_argument("ps has no divide-and-shuffle variant; use ring or tree");
    }
    m = exact_sqrt(world);
  }
  switch (topo) {
    case Topology::Ring: return m == 1 ? 0 : 2 * m - 1;
    case Topology::Tree: return 3 * log2_exact(m);
    case Topology::Ps: return 2 * m;
  }
  throw std::invalid_argument("unknown topology");
}

double overall_cost(Topology topo, long world, ScaleMode mode, const CostModel& cm) {
  if (!(cm.data_size > 0.0)) throw std::invalid_argument("cost model data_size must be > 0");
  if (!(cm.bandwidth > 0.0)) throw std::invalid_argument("cost model bandwidth must be > 0");
  if (cm.servers < 1) throw std::invalid_argument("cost model servers must be >= 1");
  const long scale = sync_scale(topo, world, mode);
  const double bandwidth =
      topo == Topology::Ps
          ? cm.bandwidth * static_cast<double>(cm.servers) / static_cast<double>(world)
          : cm.bandwidth;
  return static_cast<double>(scale) * cm.data_size / bandwidth;
}

ConvexityConstants ConvexityConstants::make(double mu, double L, double sigma, double G) {
  if (!(mu > 0.0)) throw std::invalid_argument("mu must be > 0");
  if (!(L >= mu)) throw std::invalid_argument("L must be >= mu");
  if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be >= 0");
  if (!(G >= 0.0)) throw std::invalid_argument("G must be >= 0");
  ConvexityConstants c;
  c.mu = mu;
  c.L = L;
  c.sigma = sigma;
  c.G = G;
  c.gamma = std::max(8.0 * L / mu, 2.0);
  c.kappa = L / mu;
  return c;
}

double theorem_bound(const ConvexityConstants& c, int group_size, double delta0, long t) {
  if (group_size < 1) throw std::invalid_argument("group_size must be >= 1");
  if (!(delta0 >= 0.0)) throw std::invalid_argument("delta0 must be >= 0");
  if (t < 0) throw std::invalid_argument("t must be >= 0");
  const double b = c.sigma * c.sigma / static_cast<double>(group_size) + 8.0 * c.G * c.G;
  return 2.0 * c.kappa / (c.gamma + static_cast<double>(t)) * (b / c.mu + 2.0 * c.L * delta0);
}

double mc_slack(int n) {
  if (n < 1) throw std::invalid_argument("sample count must be >= 1");
  return 1.0 + 3.0 / std::sqrt(static_cast<double>(n));
}

CheckReport check_variance_lemma(const Problem& problem, int group_size, int samples,
                                 uint64_t seed) {
  if (group_size < 1) throw std::invalid_argument("group_size must be >= 1");
  if (samples < 2) throw std::invalid_argument("need at least 2 samples");
  if (problem.dataset_size() != 0) {
    throw std::invalid_argument("variance check needs the additive-noise quadratic problem");
  }

  const ParamVector w = problem.initial_params();
  const ParamVector true_grad = problem.full_gradient(w);
  const size_t n = static_cast<size_t>(group_size);

  double sum = 0.0;
  double sumsq = 0.0;
  std::vector<ParamVector> grads(n);
  for (int s = 0; s < samples; ++s) {
    for (size_t k = 0; k < n; ++k) {
      Rng rng = Rng::for_stream(seed, streams::kGradientNoise, k, static_cast<uint64_t>(s));
      grads[k] = problem.stochastic_gradient(w, {}, rng).grad;
    }
    const double d2 = sq_dist(mean_of(grads), true_grad);
    sum += d2;
    sumsq += d2 * d2;
  }

  const double count = static_cast<double>(samples);
  const double mean = sum / count;
  const double var = std::max(0.0, (sumsq - count * mean * mean) / (count - 1.0));
  const double se = std::sqrt(var / count);
  const double sigma = problem.spec().sigma;
  const double predicted = sigma * sigma / static_cast<double>(group_size);

  CheckReport report;
  report.check_name = "variance-lemma";
  report.seeds = {seed};
  report.bound_values = {predicted, 3.0 * se};
  report.observed_values = {mean};
  report.pass = std::isfinite(mean) && std::abs(mean - predicted) <= 3.0 * se;
  report.notes = "E|avg grad - true grad|^2 over " + std::to_string(samples) +
                 " draws of " + std::to_string(group_size) + " workers; predicted sigma^2/N = " +
                 fmt(predicted) + ", estimate " + fmt(mean) + " +- " + fmt(se) +
                 " (must sit within 3 standard errors)";
  return report;
}

double calibrate_grad_bound(const Problem& problem, const SyncStrategy& strategy,
                            const RunOptions& base, std::span<const uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("calibration needs at least one seed");
  double g_max = 0.0;
  for (uint64_t seed : seeds) {
    RunOptions opts = base;
    opts.seed = seed;
    opts.record_detail = true;
    const RunResult run = run_training(problem, strategy, opts);
    for (const auto& detail : run.detail) {
      for (double gn : detail.grad_norm) g_max = std::max(g_max, gn);
    }
  }
  return g_max;
}

CheckReport check_divergence_lemma(const Problem& problem, const SyncStrategy& strategy,
                                   const RunOptions& base, std::span<const uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("check needs at least one seed");
  const double g_bound = calibrate_grad_bound(problem, strategy, base, seeds);
  const size_t world = static_cast<size_t>(strategy.world.world_size);
  const size_t horizon = static_cast<size_t>(base.iterations);

  // observed[t] accumulates the mean squared deviation of workers from the
  // global mean after iteration t, averaged over seeds.
  std::vector<double> observed(horizon, 0.0);
  for (uint64_t seed : seeds) {
    RunOptions opts = base;
    opts.seed = seed;
    opts.record_detail = true;
    const RunResult run = run_training(problem, strategy, opts);
    for (size_t t = 0; t < horizon; ++t) {
      const ParamVector& mean = run.traces[t].global_mean_params;
      double acc = 0.0;
      for (size_t k = 0; k < world; ++k) {
        // Post-sync parameters of iteration t live in the next iteration's
        // entry snapshot; the last round's live in the final worker states.
        const ParamVector& wk = t + 1 < horizon ? run.detail[t + 1].params_before[k]
                                                : run.final_workers[k].params;
        acc += sq_dist(mean, wk);
      }
      observed[t] += acc / static_cast<double>(world);
    }
  }
  for (double& v : observed) v /= static_cast<double>(seeds.size());

  const double slack = mc_slack(static_cast<int>(seeds.size()));
  std::vector<double> bounds(horizon);
  bool pass = true;
  long first_fail = -1;
  for (size_t t = 0; t < horizon; ++t) {
    const double eta = base.lr.alpha(static_cast<long>(t));
    bounds[t] = 4.0 * eta * eta * g_bound * g_bound;
    if (!(observed[t] <= bounds[t] * slack)) {
      pass = false;
      if (first_fail < 0) first_fail = static_cast<long>(t);
    }
  }

  CheckReport report;
  report.check_name = "divergence-lemma";
  report.seeds.assign(seeds.begin(), seeds.end());
  report.bound_values = std::move(bounds);
  report.observed_values = std::move(observed);
  report.slack_factor = slack;
  report.pass = pass;
  report.notes = "mean squared worker deviation vs 4 eta^2 G^2 with measured G = " + fmt(g_bound) +
                 " over " + std::to_string(seeds.size()) + " seeds";
  if (first_fail >= 0) report.notes += "; first failure at t=" + std::to_string(first_fail);
  return report;
}

CheckReport check_theorem(const Problem& problem, const SyncStrategy& strategy,
                          const RunOptions& base, std::span<const uint64_t> seeds) {
  if (seeds.empty()) throw std::invalid_argument("check needs at least one seed");
  if (!problem.has_optimum()) {
    throw std::invalid_argument("theorem check needs a problem with a known optimum");
  }
  const double mu = problem.strong_convexity();
  const double L = problem.smoothness();
  if (!(mu > 0.0) || !std::isfinite(L)) {
    throw std::invalid_argument("theorem check needs a strongly convex, smooth problem");
  }

  // The bound assumes the 2 / (mu (gamma + t)) schedule; install it here so
  // a mismatched config cannot silently test the wrong thing.
  ConvexityConstants c = ConvexityConstants::make(mu, L, problem.spec().sigma, 1.0);
  RunOptions opts = base;
  opts.lr = theorem_lr(mu, c.gamma);

  const double g_bound = calibrate_grad_bound(problem, strategy, opts, seeds);
  c = ConvexityConstants::make(mu, L, problem.spec().sigma, g_bound);

  const ParamVector w0 = problem.initial_params();
  const double delta0 = sq_dist(w0, problem.optimum());
  const size_t horizon = static_cast<size_t>(base.iterations);

  // observed[t] is the mean suboptimality of the averaged iterate after t
  // optimizer steps; index 0 is the shared starting point.
  std::vector<double> observed(horizon + 1, 0.0);
  observed[0] = problem.true_suboptimality(w0);
  for (uint64_t seed : seeds) {
    opts.seed = seed;
    opts.record_detail = false;
    const RunResult run = run_training(problem, strategy, opts);
    for (size_t t = 0; t < horizon; ++t) {
      observed[t + 1] += run.traces[t].suboptimality;
    }
  }
  for (size_t t = 1; t <= horizon; ++t) observed[t] /= static_cast<double>(seeds.size());

  const double slack = mc_slack(static_cast<int>(seeds.size()));
  const int group = strategy.world.group_size;
  std::vector<double> bounds(horizon + 1);
  bool within_bound = true;
  long first_fail = -1;
  for (size_t t = 0; t <= horizon; ++t) {
    bounds[t] = theorem_bound(c, group, delta0, static_cast<long>(t));
    if (!(observed[t] <= bounds[t] * slack)) {
      within_bound = false;
      if (first_fail < 0) first_fail = static_cast<long>(t);
    }
  }
  const bool decayed = observed[horizon] <= observed[0] / 10.0;

  CheckReport report;
  report.check_name = "theorem-bound";
  report.seeds.assign(seeds.begin(), seeds.end());
  report.bound_values = std::move(bounds);
  report.observed_values = std::move(observed);
  report.slack_factor = slack;
  report.pass = within_bound && decayed;
  report.notes = "mean suboptimality of the averaged iterate vs the convergence bound; mu=" +
                 fmt(mu) + " L=" + fmt(L) + " sigma=" + fmt(c.sigma) + " measured G=" +
                 fmt(g_bound) + " gamma=" + fmt(c.gamma) + " delta0=" + fmt(delta0) +
                 " group=" + std::to_string(group) + "; final/initial=" +
                 fmt(report.observed_values[horizon] / report.observed_values[0]) +
                 " (needs <= 0.1)";
  if (first_fail >= 0) report.notes += "; first bound failure at t=" + std::to_string(first_fail);
  return report;
}

CheckReport check_mixing_property(const WorldConfig& world, long t_max) {
  validate(world);
  if (!is_square_mode(world)) {
    throw std::invalid_argument("mixing check needs a square world (world_size = group_size^2)");
  }
  if (t_max < 1) throw std::invalid_argument("t_max must be >= 1");

  CheckReport report;
  report.check_name = "mixing-property";
  report.bound_values = {1.0};
  report.pass = true;
  for (long t = 0; t < t_max; ++t) {
    if (!check_mixing(world, t)) {
      report.pass = false;
      report.observed_values.push_back(static_cast<double>(t));
    }
  }
  report.notes = "every pair of groups from consecutive iterations must share exactly one "
                 "worker, t in [0, " +
                 std::to_string(t_max) + ")";
  if (!report.pass) {
    report.notes += "; failing iterations listed in observed_values";
  }
  return report;
}

CheckReport check_eq2_reconstruction(const Problem& problem, const WorldConfig& world,
                                     double alpha, long iterations) {
  if (problem.dataset_size() != 0 || problem.spec().sigma != 0.0) {
    throw std::invalid_argument("reconstruction check needs a deterministic quadratic problem");
  }
  if (iterations < 3) throw std::invalid_argument("reconstruction needs at least 3 iterations");
  if (!is_square_mode(world)) {
    throw std::invalid_argument("reconstruction check needs a square world");
  }

  SyncStrategy strategy;
  strategy.kind = StrategyKind::DsSync;
  strategy.topology = Topology::Ring;
  strategy.world = world;

  RunOptions opts;
  opts.iterations = iterations;
  opts.seed = 1;
  opts.optimizer.kind = OptimizerKind::VanillaSgd;
  opts.lr = constant_lr(alpha);
  opts.record_detail = true;
  const RunResult run = run_training(problem, strategy, opts);

  const size_t w = static_cast<size_t>(world.world_size);
  const size_t n = static_cast<size_t>(world.group_size);
  double worst = 0.0;

  // Two-round expansion: the state after iteration t equals the global
  // average of the previous round's locally stepped parameters, minus this
  // round's group-local update term.  The shuffle guarantees the groups
  // touched at t-1 tile the whole world, which is what makes the first term
  // a plain global mean.
  for (long t = 1; t + 1 <= iterations; ++t) {
    const IterationDetail& prev = run.detail[static_cast<size_t>(t - 1)];
    const IterationDetail& cur = run.detail[static_cast<size_t>(t)];
    ParamVector global(problem.dim(), 0.0);
    for (size_t k = 0; k < w; ++k) {
      for (size_t i = 0; i < global.size(); ++i) {
        global[i] += prev.params_before[k][i] - prev.alpha * prev.update[k][i];
      }
    }
    for (double& x : global) x /= static_cast<double>(w);

    for (size_t k = 0; k < w; ++k) {
      ParamVector predicted = global;
      const std::vector<int> members = group_of(world, t, static_cast<int>(k));
      for (int j : members) {
        const ParamVector& dj = cur.update[static_cast<size_t>(j)];
        for (size_t i = 0; i < predicted.size(); ++i) {
          predicted[i] -= cur.alpha * dj[i] / static_cast<double>(n);
        }
      }
      const ParamVector& actual = t + 1 < iterations
                                      ? run.detail[static_cast<size_t>(t + 1)].params_before[k]
                                      : run.final_workers[k].params;
      for (size_t i = 0; i < predicted.size(); ++i) {
        worst = std::max(worst, std::abs(predicted[i] - actual[i]));
      }
    }
  }

  CheckReport report;
  report.check_name = "two-round-reconstruction";
  report.seeds = {opts.seed};
  report.bound_values = {1e-10};
  report.observed_values = {worst};
  report.pass = worst <= 1e-10;
  report.notes = "max |predicted - actual| over iterations 1.." + std::to_string(iterations - 1) +
                 " and all " + std::to_string(w) + " workers: " + fmt(worst);
  return report;
}

CheckReport check_bsp_equivalence(const Problem& problem, Topology topo, int world_size,
                                  const RunOptions& base) {
  if (base.optimizer.kind != OptimizerKind::VanillaSgd) {
    throw std::invalid_argument("equivalence only holds for vanilla sgd");
  }
  if (problem.stats_dim() != 0) {
    throw std::invalid_argument("equivalence check needs a problem without running statistics");
  }

  SyncStrategy single_group;
  single_group.kind = StrategyKind::DsSync;
  single_group.topology = topo;
  single_group.world = {world_size, world_size};

  SyncStrategy bsp;
  bsp.kind = StrategyKind::Bsp;
  bsp.topology = topo;
  bsp.world = {world_size, world_size};

  RunOptions opts = base;
  opts.record_detail = true;
  const RunResult ds_run = run_training(problem, single_group, opts);
  const RunResult bsp_run = run_training(problem, bsp, opts);

  double worst = 0.0;
  const size_t w = static_cast<size_t>(world_size);
  const size_t horizon = static_cast<size_t>(opts.iterations);
  for (size_t t = 1; t <= horizon; ++t) {
    for (size_t k = 0; k < w; ++k) {
      const ParamVector& a = t < horizon ? ds_run.detail[t].params_before[k]
                                         : ds_run.final_workers[k].params;
      const ParamVector& b = t < horizon ? bsp_run.detail[t].params_before[k]
                                         : bsp_run.final_workers[k].params;
      for (size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(a[i] - b[i]));
      }
    }
  }

  CheckReport report;
  report.check_name = "bsp-equivalence";
  report.seeds = {opts.seed};
  report.bound_values = {1e-12};
  report.observed_values = {worst};
  report.pass = worst <= 1e-12;
  report.notes = "single-group divide-and-shuffle vs bsp gradient averaging, vanilla sgd, " +
                 std::to_string(opts.iterations) + " iterations, " + std::to_string(world_size) +
                 " workers: max parameter gap " + fmt(worst);
  return report;
}

}  // namespace dssync
