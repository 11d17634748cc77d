#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dssync/param.hpp"
#include "dssync/rng.hpp"

namespace dssync {

// Declarative description of a training problem.  Every dataset is generated
// deterministically from `seed`, so a spec is enough to reproduce a run.
struct DatasetSpec {
  std::string kind;    // "quadratic", "logistic" or "tiny-mlp"
  int d = 2;           // parameter dimension (input features for mlp)
  int M = 0;           // number of examples; quadratic has none
  double mu = 1.0;     // quadratic: smallest eigenvalue; logistic: l2 strength
  double L = 1.0;      // quadratic: largest eigenvalue
  double sigma = 0.0;  // quadratic: gradient noise scale, E|noise|^2 = sigma^2
  double delta0 = 1.0; // quadratic: squared distance from start to optimum
  int hidden = 16;     // tiny-mlp hidden width, at most 32
  uint64_t seed = 1;
  std::string csv;     // logistic only: load examples from this file instead
};

struct GradSample {
  double loss = 0.0;
  ParamVector grad;
  ParamVector stats_observation;  // empty unless the problem tracks running stats
};

class Problem {
 public:
  virtual ~Problem() = default;

  virtual const DatasetSpec& spec() const = 0;
  virtual int dim() const = 0;
  virtual int dataset_size() const = 0;  // 0 when sampling draws noise instead of examples
  virtual int stats_dim() const { return 0; }

  // Starting point shared by all workers; fixed by the problem seed.
  virtual ParamVector initial_params() const = 0;

  // Unbiased stochastic gradient at w.  Problems with a dataset take a
  // non-empty batch of example indices and ignore rng; the quadratic ignores
  // the batch and draws its additive noise from rng.
  virtual GradSample stochastic_gradient(const ParamVector& w, std::span<const int> batch,
                                         Rng& rng) const = 0;

  // Deterministic objective and gradient over the full data.
  virtual double full_loss(const ParamVector& w) const = 0;
  virtual ParamVector full_gradient(const ParamVector& w) const = 0;

  virtual bool has_optimum() const = 0;
  virtual const ParamVector& optimum() const = 0;  // throws when has_optimum() is false
  virtual double true_suboptimality(const ParamVector& w) const = 0;

  virtual double smoothness() const = 0;        // L; NaN when unknown
  virtual double strong_convexity() const = 0;  // mu; 0 when not strongly convex
};

// Throws ConfigError naming the violated rule for a bad spec.
std::unique_ptr<Problem> make_problem(const DatasetSpec& spec);

// Logistic regression from a CSV file: one example per row, features first,
// label last (-1/+1, or 0/1 which maps 0 to -1).
std::unique_ptr<Problem> load_logistic_csv(const std::string& path, double l2);

struct Shard {
  int owner = 0;
  std::vector<int> indices;
};

// Deals a seeded permutation of 0..dataset_size-1 round-robin across
// workers.  Shards are disjoint, cover everything, and differ in size by at
// most one.
std::vector<Shard> make_shards(int dataset_size, int workers, uint64_t seed);

// Seeded per-epoch order of one shard, for epoch (without-replacement)
// sampling.  Depends only on (seed, rank, epoch), never on call history.
std::vector<int> epoch_order(const Shard& shard, uint64_t seed, int rank, long epoch);

}  // namespace dssync
