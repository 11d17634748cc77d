#include "dssync/schedule.hpp"

#include <stdexcept>
#include <string>

namespace dssync {

void validate(const WorldConfig& cfg) {
  if (cfg.world_size < 1) {
    throw std::invalid_argument("world_size must be >= 1 (got " +
                                std::to_string(cfg.world_size) + ")");
  }
  if (cfg.group_size < 1) {
    throw std::invalid_argument("group_size must be >= 1 (got " +
                                std::to_string(cfg.group_size) + ")");
  }
  const long n = cfg.group_size;
  if (cfg.world_size != n * n && cfg.world_size != cfg.group_size) {
    throw std::invalid_argument(
        "world_size must equal group_size^2, or group_size for a single full group (got "
        "world_size=" +
        std::to_string(cfg.world_size) + ", group_size=" + std::to_string(cfg.group_size) + ")");
  }
}

bool is_square_mode(const WorldConfig& cfg) {
  const long n = cfg.group_size;
  return cfg.world_size == n * n && cfg.world_size != cfg.group_size;
}

GroupPartition make_partition(const WorldConfig& cfg, long t) {
  validate(cfg);
  if (t < 0) throw std::invalid_argument("iteration must be >= 0");

  GroupPartition part;
  part.iteration = t;

  if (!is_square_mode(cfg)) {
    std::vector<int> all(cfg.world_size);
    for (int x = 0; x < cfg.world_size; ++x) all[x] = x;
    part.groups.push_back(std::move(all));
    return part;
  }

  const int n = cfg.group_size;
  part.groups.assign(n, {});
  for (auto& g : part.groups) g.reserve(n);
  for (int x = 0; x < cfg.world_size; ++x) {
    const int g = (t % 2 == 0) ? x / n : x % n;
    part.groups[g].push_back(x);
  }
  // Both patterns emit ranks in ascending order per group by construction.
  return part;
}

std::vector<int> group_of(const WorldConfig& cfg, long t, int rank) {
  if (rank < 0 || rank >= cfg.world_size) {
    throw std::invalid_argument("rank out of range: " + std::to_string(rank));
  }
  GroupPartition part = make_partition(cfg, t);
  if (!is_square_mode(cfg)) return part.groups[0];
  const int n = cfg.group_size;
  const int g = (t % 2 == 0) ? rank / n : rank % n;
  return part.groups[g];
}

bool check_mixing(const WorldConfig& cfg, long t) {
  GroupPartition now = make_partition(cfg, t);
  GroupPartition next = make_partition(cfg, t + 1);
  for (const auto& a : now.groups) {
    for (const auto& b : next.groups) {
      int common = 0;
      // Both sides are sorted, a linear merge counts the intersection.
      size_t i = 0, j = 0;
      while (i < a.size() && j < b.size()) {
        if (a[i] == b[j]) {
          ++common;
          ++i;
          ++j;
        } else if (a[i] < b[j]) {
          ++i;
        } else {
          ++j;
        }
      }
      if (common != 1) return false;
    }
  }
  return true;
}

}  // namespace dssync
