#include "dssync/optim.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace dssync {

OptimizerKind optimizer_kind_from_string(const std::string& name) {
  if (name == "vanilla-sgd") return OptimizerKind::VanillaSgd;
  if (name == "sgd-momentum") return OptimizerKind::SgdMomentum;
  if (name == "adam") return OptimizerKind::Adam;
  if (name == "adamw") return OptimizerKind::AdamW;
  throw std::invalid_argument("unknown optimizer kind: " + name);
}

std::string to_string(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::VanillaSgd: return "vanilla-sgd";
    case OptimizerKind::SgdMomentum: return "sgd-momentum";
    case OptimizerKind::Adam: return "adam";
    case OptimizerKind::AdamW: return "adamw";
  }
  throw std::invalid_argument("unknown optimizer kind");
}

namespace {

void check_step_args(const OptimizerState& s, const ParamVector& w, const ParamVector& g) {
  if (w.size() != g.size()) {
    throw std::invalid_argument("apply_step: params and grad length mismatch");
  }
  if (!(s.hp.alpha >= 0.0) || !std::isfinite(s.hp.alpha)) {
    throw std::invalid_argument("apply_step: alpha must be finite and >= 0");
  }
  if (!s.first_moment.empty() && s.first_moment.size() != w.size()) {
    throw std::invalid_argument("apply_step: moment buffer length mismatch");
  }
  if (!s.second_moment.empty() && s.second_moment.size() != w.size()) {
    throw std::invalid_argument("apply_step: moment buffer length mismatch");
  }
}

}  // namespace

StepResult apply_step(const OptimizerState& state, const ParamVector& params,
                      const ParamVector& grad) {
  check_step_args(state, params, grad);

  StepResult r{params, state};
  const OptimizerHyperparams& hp = state.hp;
  const double a = hp.alpha;
  const size_t n = params.size();

  switch (state.kind) {
    case OptimizerKind::VanillaSgd: {
      for (size_t i = 0; i < n; ++i) {
        const double g = grad[i] + hp.weight_decay * params[i];
        r.params[i] -= a * g;
      }
      break;
    }
    case OptimizerKind::SgdMomentum: {
      if (r.state.first_moment.empty()) r.state.first_moment.assign(n, 0.0);
      for (size_t i = 0; i < n; ++i) {
        const double g = grad[i] + hp.weight_decay * params[i];
        r.state.first_moment[i] = hp.momentum * r.state.first_moment[i] + g;
        r.params[i] -= a * r.state.first_moment[i];
      }
      break;
    }
    case OptimizerKind::Adam:
    case OptimizerKind::AdamW: {
      if (r.state.first_moment.empty()) r.state.first_moment.assign(n, 0.0);
      if (r.state.second_moment.empty()) r.state.second_moment.assign(n, 0.0);
      const long t = state.step_count + 1;
      const double bc1 = 1.0 - std::pow(hp.beta1, static_cast<double>(t));
      const double bc2 = 1.0 - std::pow(hp.beta2, static_cast<double>(t));
      const bool coupled = state.kind == OptimizerKind::Adam;
      for (size_t i = 0; i < n; ++i) {
        const double g = coupled ? grad[i] + hp.weight_decay * params[i] : grad[i];
        double& m = r.state.first_moment[i];
        double& v = r.state.second_moment[i];
        m = hp.beta1 * m + (1.0 - hp.beta1) * g;
        v = hp.beta2 * v + (1.0 - hp.beta2) * g * g;
        const double mhat = m / bc1;
        const double vhat = v / bc2;
        r.params[i] -= a * mhat / (std::sqrt(vhat) + hp.epsilon);
        if (!coupled) r.params[i] -= a * hp.weight_decay * params[i];
      }
      break;
    }
  }

  r.state.step_count = state.step_count + 1;
  require_finite(r.params, "apply_step");
  return r;
}

ParamVector extract_update(const ParamVector& before, const ParamVector& after, double alpha) {
  if (before.size() != after.size()) {
    throw std::invalid_argument("extract_update: length mismatch");
  }
  if (alpha == 0.0 || !std::isfinite(alpha)) {
    throw std::invalid_argument("extract_update: alpha must be finite and nonzero");
  }
  ParamVector out(before.size());
  for (size_t i = 0; i < before.size(); ++i) out[i] = (before[i] - after[i]) / alpha;
  require_finite(out, "extract_update");
  return out;
}

namespace {

void append_bytes(std::vector<std::byte>& out, const void* p, size_t n) {
  const auto* b = static_cast<const std::byte*>(p);
  out.insert(out.end(), b, b + n);
}

void append_u64(std::vector<std::byte>& out, uint64_t v) { append_bytes(out, &v, sizeof v); }

void append_f64(std::vector<std::byte>& out, double v) { append_bytes(out, &v, sizeof v); }

void append_vec(std::vector<std::byte>& out, const ParamVector& v) {
  append_u64(out, v.size());
  for (double x : v) append_f64(out, x);
}

}  // namespace

std::vector<std::byte> serialize(const OptimizerState& state) {
  std::vector<std::byte> out;
  append_u64(out, static_cast<uint64_t>(state.kind));
  append_f64(out, state.hp.alpha);
  append_f64(out, state.hp.momentum);
  append_f64(out, state.hp.beta1);
  append_f64(out, state.hp.beta2);
  append_f64(out, state.hp.epsilon);
  append_f64(out, state.hp.weight_decay);
  append_vec(out, state.first_moment);
  append_vec(out, state.second_moment);
  append_u64(out, static_cast<uint64_t>(state.step_count));
  return out;
}

}  // namespace dssync
