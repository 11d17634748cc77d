#pragma once

#include <span>
#include <string>
#include <vector>

#include "dssync/problems.hpp"
#include "dssync/sync.hpp"

namespace dssync {

// Link parameters for the simulated cost of one synchronization pass.
struct CostModel {
  double data_size = 1.0;  // bytes moved per payload
  double bandwidth = 1.0;  // bytes per time unit on one link
  int servers = 1;         // ps only
};

enum class ScaleMode { Flat, DivideShuffle };

// Synchronization scale: the serial communication count of one round.
//
//   flat ring  2W - 1      ds ring  2 sqrt(W) - 1
//   flat tree  3 log2 W    ds tree  3 log2 sqrt(W)
//   flat ps    2W          (no ds variant is defined for ps)
//
// Divide-and-shuffle scales count one group of sqrt(W) members; groups run
// concurrently, so the group scale is the round's critical path.  W = 1
// needs no ring or tree traffic and scores 0; a lone ps worker still pushes
// and pulls, scoring 2.  Tree worlds (groups) must be powers of two.
long sync_scale(Topology topo, long world, ScaleMode mode);

// Simulated wall time of one round: scale * data_size / bandwidth, with the
// ps bandwidth scaled by servers / world (each server serves a 1/servers
// slice to all W workers over its own link).
double overall_cost(Topology topo, long world, ScaleMode mode, const CostModel& cm);

// Constants describing an L-smooth, mu-strongly-convex objective with
// bounded gradient noise (E|noise|^2 <= sigma^2) and bounded stochastic
// gradients (E|g|^2 <= G^2).
struct ConvexityConstants {
  double mu = 1.0;
  double L = 1.0;
  double sigma = 0.0;
  double G = 1.0;
  double gamma = 2.0;  // max(8 L / mu, 2)
  double kappa = 1.0;  // L / mu

  static ConvexityConstants make(double mu, double L, double sigma, double G);
};

// Expected suboptimality bound after t steps at learning rate
// 2 / (mu (gamma + t)), for groups of N workers:
//
//   (2 kappa / (gamma + t)) * (B / mu + 2 L delta0),  B = sigma^2 / N + 8 G^2
//
// delta0 is the squared distance from the start point to the optimum.
double theorem_bound(const ConvexityConstants& c, int group_size, double delta0, long t);

// Pinned Monte-Carlo slack for bounds checked from n sampled runs.
double mc_slack(int n);

// Outcome of one empirical check, serializable via metrics.hpp.
struct CheckReport {
  std::string check_name;
  bool pass = false;
  double slack_factor = 1.0;
  std::vector<uint64_t> seeds;
  std::vector<double> bound_values;
  std::vector<double> observed_values;
  std::string notes;
};

// E|mean of N stochastic gradients - true gradient|^2 against sigma^2 / N,
// estimated from `samples` draws at the problem's start point.  Passes when
// the estimate sits within three standard errors of the predicted value.
CheckReport check_variance_lemma(const Problem& problem, int group_size, int samples,
                                 uint64_t seed);

// Mean squared worker deviation from the global mean after every iteration,
// against 4 eta_t^2 G^2.  G comes from a calibration pre-run over the same
// seeds (max observed stochastic gradient norm, recorded in the report).
CheckReport check_divergence_lemma(const Problem& problem, const SyncStrategy& strategy,
                                   const RunOptions& base, std::span<const uint64_t> seeds);

// Mean suboptimality of the averaged iterate at every t against the
// convergence bound, plus a sanity requirement that suboptimality fell by
// 10x over the run.
CheckReport check_theorem(const Problem& problem, const SyncStrategy& strategy,
                          const RunOptions& base, std::span<const uint64_t> seeds);

// Consecutive-iteration group overlap (every pair of groups from t and t+1
// shares exactly one worker) for all t < t_max.
CheckReport check_mixing_property(const WorldConfig& world, long t_max);

// Reconstructs every worker's parameters from the two-round expansion
// (global average of the previous round's stepped parameters plus the
// current group's update term) on a deterministic quadratic, and compares
// against the actual trajectory.  Tolerance 1e-10.
CheckReport check_eq2_reconstruction(const Problem& problem, const WorldConfig& world,
                                     double alpha, long iterations);

// Single-group divide-and-shuffle against bsp gradient averaging with
// vanilla SGD: trajectories must agree within 1e-12 at every iteration.
CheckReport check_bsp_equivalence(const Problem& problem, Topology topo, int world_size,
                                  const RunOptions& base);

// Max stochastic gradient norm over full runs with the given seeds; the
// measured stand-in for the bounded-gradient constant G.
double calibrate_grad_bound(const Problem& problem, const SyncStrategy& strategy,
                            const RunOptions& base, std::span<const uint64_t> seeds);

}  // namespace dssync
