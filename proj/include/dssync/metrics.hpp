#pragma once

#include <string>
#include <vector>

#include "dssync/analysis.hpp"
#include "dssync/config.hpp"
#include "dssync/sync.hpp"

namespace dssync {

// Shortest round-trip decimal form, locale independent.  All metric files go
// through this so identical runs produce identical bytes.
std::string format_double(double v);

// One row per iteration:
//   t,mean_post_sync_loss,suboptimality,critical_path_steps,total_messages,simulated_comm_time
// The suboptimality field is empty when the problem has no known optimum.
std::string metrics_csv(const std::vector<IterationTrace>& traces);

// Write-then-rename so readers never observe a partial file.
void atomic_write_file(const std::string& path, const std::string& content);

struct SeedOutcome {
  uint64_t seed = 0;
  double final_loss = 0.0;
  double final_suboptimality = 0.0;  // NaN when unknown
};

// Cross-seed summary (mean and standard deviation of the final losses) plus
// enough of the config to identify the run.
std::string summary_json(const RunConfig& cfg, const std::vector<SeedOutcome>& outcomes);

std::string report_json(const CheckReport& report);

}  // namespace dssync
