#include "dssync/metrics.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace dssync {

std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

double mean_of_values(const std::vector<double>& xs) {
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

double sample_std(const std::vector<double>& xs, double mean) {
  if (xs.size() < 2) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += (x - mean) * (x - mean);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

}  // namespace

std::string metrics_csv(const std::vector<IterationTrace>& traces) {
  std::string out =
      "t,mean_post_sync_loss,suboptimality,critical_path_steps,total_messages,"
      "simulated_comm_time\n";
  for (const auto& tr : traces) {
    out += std::to_string(tr.t);
    out += ',';
    out += format_double(tr.mean_post_sync_loss);
    out += ',';
    if (std::isfinite(tr.suboptimality)) out += format_double(tr.suboptimality);
    out += ',';
    out += std::to_string(tr.critical_path_steps);
    out += ',';
    out += std::to_string(tr.total_messages);
    out += ',';
    out += format_double(tr.simulated_comm_time);
    out += '\n';
  }
  return out;
}

void atomic_write_file(const std::string& path, const std::string& content) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) fs::create_directories(target.parent_path());
  const fs::path tmp = target.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write file: " + tmp.string());
    out << content;
    out.flush();
    if (!out) throw std::runtime_error("write failed: " + tmp.string());
  }
  fs::rename(tmp, target);
}

std::string summary_json(const RunConfig& cfg, const std::vector<SeedOutcome>& outcomes) {
  using json = nlohmann::ordered_json;
  if (outcomes.empty()) throw std::invalid_argument("summary needs at least one seed outcome");

  std::vector<double> losses;
  std::vector<double> subopts;
  json per_seed = json::array();
  for (const auto& o : outcomes) {
    losses.push_back(o.final_loss);
    json row;
    row["seed"] = o.seed;
    row["final_loss"] = o.final_loss;
    if (std::isfinite(o.final_suboptimality)) {
      row["final_suboptimality"] = o.final_suboptimality;
      subopts.push_back(o.final_suboptimality);
    } else {
      row["final_suboptimality"] = nullptr;
    }
    per_seed.push_back(std::move(row));
  }

  json j;
  j["strategy"] = to_string(cfg.strategy.kind);
  j["topology"] = to_string(cfg.strategy.topology);
  j["world_size"] = cfg.strategy.world.world_size;
  j["group_size"] = cfg.strategy.world.group_size;
  j["problem"] = cfg.problem.kind;
  j["optimizer"] = to_string(cfg.optimizer.kind);
  j["iterations"] = cfg.iterations;
  j["seeds"] = json::array();
  for (uint64_t s : cfg.seeds) j["seeds"].push_back(s);

  const double loss_mean = mean_of_values(losses);
  j["final_loss"] = {{"mean", loss_mean}, {"std", sample_std(losses, loss_mean)}};
  if (subopts.size() == outcomes.size()) {
    const double sub_mean = mean_of_values(subopts);
    j["final_suboptimality"] = {{"mean", sub_mean}, {"std", sample_std(subopts, sub_mean)}};
  } else {
    j["final_suboptimality"] = nullptr;
  }
  j["per_seed"] = std::move(per_seed);
  return j.dump(2) + "\n";
}

std::string report_json(const CheckReport& report) {
  using json = nlohmann::ordered_json;
  json j;
  j["check_name"] = report.check_name;
  j["pass"] = report.pass;
  j["slack_factor"] = report.slack_factor;
  j["seeds"] = json::array();
  for (uint64_t s : report.seeds) j["seeds"].push_back(s);
  j["bound_values"] = report.bound_values;
  j["observed_values"] = report.observed_values;
  j["notes"] = report.notes;
  return j.dump(2) + "\n";
}

}  // namespace dssync
