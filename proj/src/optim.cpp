#include "hlstm/optim.hpp"

#include <cmath>

#include <fmt/format.h>

#include "hlstm/error.hpp"

namespace hlstm {

void sgd_step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grads, double eta) {
  if (params.size() != grads.size()) throw PreconditionError("sgd_step: parameter/gradient size mismatch");
  params -= eta * grads;
}

AdamState AdamState::zeros(Index n, double beta1, double beta2, double eps_stab) {
  AdamState s;
  s.m1 = Vector::Zero(n);
  s.m2 = Vector::Zero(n);
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps_stab = eps_stab;
  return s;
}

bool AdamState::operator==(const AdamState& other) const {
  return step_count == other.step_count && beta1 == other.beta1 && beta2 == other.beta2 &&
         eps_stab == other.eps_stab && m1.size() == other.m1.size() && m2.size() == other.m2.size() &&
         m1 == other.m1 && m2 == other.m2;
}

void adam_step(Eigen::Ref<Vector> params, const Eigen::Ref<const Vector>& grads, AdamState& state, double eta) {
  if (params.size() != grads.size() || state.m1.size() != params.size() || state.m2.size() != params.size()) {
    throw PreconditionError(fmt::format("adam_step: size mismatch (params {}, grads {}, moments {}/{})",
                                        params.size(), grads.size(), state.m1.size(), state.m2.size()));
  }
  ++state.step_count;
  const double t = static_cast<double>(state.step_count);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  state.m1 = state.beta1 * state.m1 + (1.0 - state.beta1) * grads;
  state.m2 = state.beta2 * state.m2 + (1.0 - state.beta2) * grads.cwiseAbs2();
  const auto m1_hat = state.m1.array() / c1;
  const auto m2_hat = state.m2.array() / c2;
  params.array() -= eta * m1_hat / (m2_hat.sqrt() + state.eps_stab);
}

void LrSchedule::validate() const {
  if (!(eta > 0.0)) throw ConfigError(fmt::format("learning rate must be positive, got {}", eta));
  if (!(gamma_decay > 0.0 && gamma_decay <= 1.0)) {
    throw ConfigError(fmt::format("learning-rate decay must lie in (0, 1], got {}", gamma_decay));
  }
}

LrSchedule decay_lr(LrSchedule s) {
  s.eta *= s.gamma_decay;
  return s;
}

}  // namespace hlstm
