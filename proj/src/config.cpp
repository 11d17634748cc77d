#include "dssync/config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "dssync/errors.hpp"

namespace dssync {

namespace {

using nlohmann::json;

// Strict object view: every access marks its key, unknown keys are reported
// with their full path so typos never pass silently.
class Fields {
 public:
  Fields(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_ + " must be a JSON object");
  }

  ~Fields() = default;

  void finish() const {
    for (const auto& item : j_.items()) {
      if (!seen_.count(item.key())) {
        throw ConfigError("unknown field: " + key_path(item.key()));
      }
    }
  }

  bool has(const char* key) const { return j_.contains(key); }

  const json& raw(const char* key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string str(const char* key, const std::string& def) {
    if (!has(key)) return def;
    return expect_string(key);
  }

  std::string require_str(const char* key) {
    if (!has(key)) throw ConfigError("missing required field: " + key_path(key));
    return expect_string(key);
  }

  double num(const char* key, double def) {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_number()) throw ConfigError(key_path(key) + " must be a number");
    return v.get<double>();
  }

  long integer(const char* key, long def) {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_number_integer()) throw ConfigError(key_path(key) + " must be an integer");
    return v.get<long>();
  }

  uint64_t uinteger(const char* key, uint64_t def) {
    if (!has(key)) return def;
    const json& v = raw(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
      throw ConfigError(key_path(key) + " must be a non-negative integer");
    }
    return v.get<uint64_t>();
  }

  std::string key_path(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

 private:
  std::string expect_string(const char* key) {
    const json& v = raw(key);
    if (!v.is_string()) throw ConfigError(key_path(key) + " must be a string");
    return v.get<std::string>();
  }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

DatasetSpec parse_problem(const json& j) {
  Fields f(j, "problem");
  DatasetSpec spec;
  spec.kind = f.require_str("kind");
  if (spec.kind != "quadratic" && spec.kind != "logistic" && spec.kind != "tiny-mlp") {
    throw ConfigError("problem.kind must be quadratic, logistic or tiny-mlp (got '" + spec.kind +
                      "')");
  }
  spec.csv = f.str("csv", "");
  if (!spec.csv.empty() && spec.kind != "logistic") {
    throw ConfigError("problem.csv is only supported for logistic");
  }
  spec.d = static_cast<int>(f.integer("d", spec.d));
  spec.M = static_cast<int>(f.integer("M", spec.M));
  spec.mu = f.num("mu", spec.mu);
  spec.L = f.num("L", spec.L);
  spec.sigma = f.num("sigma", spec.sigma);
  spec.delta0 = f.num("delta0", spec.delta0);
  spec.hidden = static_cast<int>(f.integer("hidden", spec.hidden));
  spec.seed = f.uinteger("seed", spec.seed);
  f.finish();
  return spec;
}

OptimizerState parse_optimizer(const json& j) {
  Fields f(j, "optimizer");
  OptimizerState opt;
  const std::string kind = f.str("kind", "vanilla-sgd");
  try {
    opt.kind = optimizer_kind_from_string(kind);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("optimizer.kind: ") + e.what());
  }
  opt.hp.momentum = f.num("momentum", opt.hp.momentum);
  opt.hp.beta1 = f.num("beta1", opt.hp.beta1);
  opt.hp.beta2 = f.num("beta2", opt.hp.beta2);
  opt.hp.epsilon = f.num("epsilon", opt.hp.epsilon);
  opt.hp.weight_decay = f.num("weight_decay", opt.hp.weight_decay);
  f.finish();
  if (!(opt.hp.momentum >= 0.0 && opt.hp.momentum < 1.0)) {
    throw ConfigError("optimizer.momentum must be in [0, 1)");
  }
  if (!(opt.hp.beta1 >= 0.0 && opt.hp.beta1 < 1.0)) {
    throw ConfigError("optimizer.beta1 must be in [0, 1)");
  }
  if (!(opt.hp.beta2 >= 0.0 && opt.hp.beta2 < 1.0)) {
    throw ConfigError("optimizer.beta2 must be in [0, 1)");
  }
  if (!(opt.hp.epsilon > 0.0)) throw ConfigError("optimizer.epsilon must be > 0");
  if (!(opt.hp.weight_decay >= 0.0)) throw ConfigError("optimizer.weight_decay must be >= 0");
  return opt;
}

LrSpec parse_lr(const json& j) {
  Fields f(j, "lr");
  LrSpec lr;
  lr.kind = f.str("kind", lr.kind);
  if (lr.kind != "constant" && lr.kind != "step-decay" && lr.kind != "theorem") {
    throw ConfigError("lr.kind must be constant, step-decay or theorem (got '" + lr.kind + "')");
  }
  lr.alpha = f.num("alpha", lr.alpha);
  lr.factor = f.num("factor", lr.factor);
  lr.every = f.integer("every", lr.every);
  f.finish();
  if (lr.kind != "theorem" && !(lr.alpha >= 0.0)) throw ConfigError("lr.alpha must be >= 0");
  if (lr.kind == "step-decay") {
    if (!(lr.factor > 0.0 && lr.factor <= 1.0)) {
      throw ConfigError("lr.factor must be in (0, 1]");
    }
    if (lr.every < 1) throw ConfigError("lr.every must be >= 1");
  }
  return lr;
}

int integer_sqrt(int n) {
  int r = static_cast<int>(std::lround(std::sqrt(static_cast<double>(n))));
  while (r * r > n) --r;
  while ((r + 1) * (r + 1) <= n) ++r;
  return r;
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }

  Fields f(j, "");
  RunConfig cfg;

  const std::string strategy = f.require_str("strategy");
  try {
    cfg.strategy.kind = strategy_kind_from_string(strategy);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("strategy: ") + e.what());
  }
  const std::string topology = f.str("topology", "ring");
  try {
    cfg.strategy.topology = topology_from_string(topology);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("topology: ") + e.what());
  }

  const long world = f.integer("world_size", 0);
  if (world < 1) throw ConfigError("world_size must be a positive integer");
  cfg.strategy.world.world_size = static_cast<int>(world);

  if (f.has("group_size")) {
    cfg.strategy.world.group_size = static_cast<int>(f.integer("group_size", 0));
  } else if (cfg.strategy.kind == StrategyKind::Bsp) {
    cfg.strategy.world.group_size = cfg.strategy.world.world_size;
  } else {
    const int n = integer_sqrt(cfg.strategy.world.world_size);
    if (n * n != cfg.strategy.world.world_size) {
      throw ConfigError("ds-sync requires world_size to be a perfect square (got world_size=" +
                        std::to_string(world) + "); set group_size explicitly for a single "
                        "full group");
    }
    cfg.strategy.world.group_size = n;
  }
  cfg.strategy.num_servers = static_cast<int>(f.integer("servers", 1));

  cfg.iterations = f.integer("iterations", cfg.iterations);
  if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");
  cfg.batch_size = static_cast<int>(f.integer("batch_size", cfg.batch_size));
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be >= 1");

  if (f.has("seeds")) {
    const json& seeds = f.raw("seeds");
    if (!seeds.is_array() || seeds.empty()) {
      throw ConfigError("seeds must be a non-empty array of non-negative integers");
    }
    cfg.seeds.clear();
    for (const auto& s : seeds) {
      if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
        throw ConfigError("seeds must be a non-empty array of non-negative integers");
      }
      cfg.seeds.push_back(s.get<uint64_t>());
    }
  }

  const std::string execution = f.str("execution", "lockstep");
  if (execution == "lockstep") {
    cfg.execution = ExecutionMode::Lockstep;
  } else if (execution == "parallel") {
    cfg.execution = ExecutionMode::Parallel;
  } else {
    throw ConfigError("execution must be lockstep or parallel (got '" + execution + "')");
  }
  cfg.threads = static_cast<int>(f.integer("threads", 0));
  if (cfg.threads < 0) throw ConfigError("threads must be >= 0");

  const std::string sampling = f.str("sampling", "replacement");
  if (sampling == "replacement") {
    cfg.sampling = SamplingMode::Replacement;
  } else if (sampling == "epoch") {
    cfg.sampling = SamplingMode::Epoch;
  } else {
    throw ConfigError("sampling must be replacement or epoch (got '" + sampling + "')");
  }

  if (!f.has("problem")) throw ConfigError("missing required field: problem");
  cfg.problem = parse_problem(f.raw("problem"));
  cfg.optimizer = f.has("optimizer") ? parse_optimizer(f.raw("optimizer")) : OptimizerState{};
  cfg.lr = f.has("lr") ? parse_lr(f.raw("lr")) : LrSpec{};

  if (f.has("cost_model")) {
    Fields c(f.raw("cost_model"), "cost_model");
    cfg.cost.data_size = c.num("data_size", 0.0);
    cfg.cost.bandwidth = c.num("bandwidth", 1.0);
    c.finish();
    if (cfg.cost.data_size < 0.0) throw ConfigError("cost_model.data_size must be >= 0");
    if (!(cfg.cost.bandwidth > 0.0)) throw ConfigError("cost_model.bandwidth must be > 0");
  }
  cfg.cost.servers = cfg.strategy.num_servers;

  if (f.has("check")) {
    Fields c(f.raw("check"), "check");
    cfg.check.samples = static_cast<int>(c.integer("samples", cfg.check.samples));
    cfg.check.t_max = c.integer("t_max", cfg.check.t_max);
    c.finish();
    if (cfg.check.samples < 2) throw ConfigError("check.samples must be >= 2");
    if (cfg.check.t_max < 1) throw ConfigError("check.t_max must be >= 1");
  }

  f.finish();

  try {
    validate(cfg.strategy);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  // Dataset problems shard M examples across W workers.
  if (cfg.problem.kind != "quadratic" && cfg.problem.csv.empty() &&
      cfg.problem.M < cfg.strategy.world.world_size) {
    throw ConfigError("problem.M must be >= world_size so every worker gets a shard");
  }
  return cfg;
}

RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str());
}

LrSchedule build_lr(const LrSpec& spec, const Problem& problem) {
  if (spec.kind == "constant") return constant_lr(spec.alpha);
  if (spec.kind == "step-decay") return step_decay_lr(spec.alpha, spec.factor, spec.every);
  const double mu = problem.strong_convexity();
  const double L = problem.smoothness();
  if (!(mu > 0.0) || !std::isfinite(L)) {
    throw ConfigError("lr.kind 'theorem' needs a strongly convex problem with known mu and L");
  }
  const double gamma = std::max(8.0 * L / mu, 2.0);
  return theorem_lr(mu, gamma);
}

RunOptions build_run_options(const RunConfig& cfg, const Problem& problem, uint64_t seed) {
  RunOptions opts;
  opts.iterations = cfg.iterations;
  opts.batch_size = cfg.batch_size;
  opts.seed = seed;
  opts.optimizer = cfg.optimizer;
  opts.lr = build_lr(cfg.lr, problem);
  opts.mode = cfg.execution;
  opts.threads = cfg.threads;
  opts.sampling = cfg.sampling;
  opts.data_size = cfg.cost.data_size;
  opts.bandwidth = cfg.cost.bandwidth;
  return opts;
}

}  // namespace dssync
