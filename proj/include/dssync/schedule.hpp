#pragma once

#include <vector>

namespace dssync {

// World layout for divide-and-shuffle runs.  Two shapes are accepted:
//
//   square mode:  world_size == group_size^2.  The schedule alternates
//                 between block groups and strided groups with period 2,
//                 and any two groups from consecutive iterations share
//                 exactly one worker.
//   single group: group_size == world_size.  Degenerate layout with one
//                 group holding everyone at every iteration; used to run
//                 the divide-and-shuffle machinery as a full synchronous
//                 step (no shuffle happens, and none is claimed).
struct WorldConfig {
  int world_size = 1;
  int group_size = 1;
};

// Throws std::invalid_argument naming the violated rule.
void validate(const WorldConfig& cfg);

bool is_square_mode(const WorldConfig& cfg);

// Disjoint groups covering ranks 0..W-1, each sorted ascending.
struct GroupPartition {
  long iteration = 0;
  std::vector<std::vector<int>> groups;
};

// Partition for iteration t.  Square mode, N = group_size:
//   t even: group g is { x : x / N == g }          (contiguous blocks)
//   t odd:  group g is { x : x % N == g }          (stride-N combs)
// Single-group mode returns { 0..W-1 } for every t.
GroupPartition make_partition(const WorldConfig& cfg, long t);

// Members of the group containing `rank` at iteration t, sorted ascending.
std::vector<int> group_of(const WorldConfig& cfg, long t, int rank);

// True iff every group at iteration t intersects every group at t+1 in
// exactly one worker.  Holds for all t in square mode; the single-group
// layout has no shuffle, so this reports false there for W > 1.
bool check_mixing(const WorldConfig& cfg, long t);

}  // namespace dssync
