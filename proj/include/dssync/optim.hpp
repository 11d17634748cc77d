#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "dssync/param.hpp"

namespace dssync {

enum class OptimizerKind { VanillaSgd, SgdMomentum, Adam, AdamW };

OptimizerKind optimizer_kind_from_string(const std::string& name);
std::string to_string(OptimizerKind kind);

struct OptimizerHyperparams {
  double alpha = 0.1;         // learning rate; the training loop rewrites this per iteration
  double momentum = 0.9;      // heavy-ball coefficient (sgd-momentum)
  double beta1 = 0.9;         // adam / adamw first-moment decay
  double beta2 = 0.999;       // adam / adamw second-moment decay
  double epsilon = 1e-8;      // adam / adamw denominator guard
  double weight_decay = 0.0;  // L2 for sgd variants and adam, decoupled decay for adamw
};

// Statistical state of one worker's optimizer.  Moment buffers start empty
// and are allocated lazily on the first step.  This state is private to the
// worker: the synchronization layer must never average or overwrite it.
struct OptimizerState {
  OptimizerKind kind = OptimizerKind::VanillaSgd;
  OptimizerHyperparams hp;
  ParamVector first_moment;   // momentum buffer, or adam m
  ParamVector second_moment;  // adam v
  long step_count = 0;
};

struct StepResult {
  ParamVector params;
  OptimizerState state;
};

// One optimizer step at learning rate state.hp.alpha.
//
//   vanilla-sgd:   w' = w - a * g
//   sgd-momentum:  buf = mu * buf + g;  w' = w - a * buf      (no dampening)
//   adam:          bias-corrected m/v, w' = w - a * m^ / (sqrt(v^) + eps)
//   adamw:         adam on the raw gradient, then w' -= a * lambda * w
//
// weight_decay > 0 adds lambda * w to the gradient for vanilla, momentum and
// adam; adamw applies it decoupled as shown.  step_count increments by one
// for every kind, including vanilla.
StepResult apply_step(const OptimizerState& state, const ParamVector& params,
                      const ParamVector& grad);

// Effective update direction Delta with w_after = w_before - alpha * Delta,
// recovered as (before - after) / alpha.  Exact for vanilla SGD; for stateful
// optimizers it is the realised direction, not the raw gradient.
ParamVector extract_update(const ParamVector& before, const ParamVector& after, double alpha);

// Canonical byte image of the full state (kind, hyperparameters, moments,
// step count).  Two states compare equal iff their images match; used to
// verify that synchronization never touches optimizer internals.
std::vector<std::byte> serialize(const OptimizerState& state);

}  // namespace dssync
