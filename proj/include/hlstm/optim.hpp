#pragma once

#include "hlstm/types.hpp"

namespace hlstm {

/// Plain gradient descent, w <- w - eta * g.
void sgd_step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grads, double eta);

/// Adam moments. `eps_stab` is the denominator stabilizer, not the
/// empirical-model mismatch.
struct AdamState {
  Vector m1;
  Vector m2;
  long step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps_stab = 1e-8;

  static AdamState zeros(Index n, double beta1 = 0.9, double beta2 = 0.999, double eps_stab = 1e-8);

  bool operator==(const AdamState& other) const;
};

/// One bias-corrected Adam update. The step count is incremented first, so
/// the corrections use 1 - beta^t with t the new count.
void adam_step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grads, AdamState& state, double eta);

struct LrSchedule {
  double eta = 1e-3;
  double gamma_decay = 1.0;

  void validate() const;
};

/// eta <- gamma_decay * eta; call once per epoch.
LrSchedule decay_lr(LrSchedule s);

}  // namespace hlstm
