// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <vector>

#include "fwqa/common.hpp"
#include "fwqa/config.hpp"
#include "fwqa/params.hpp"

namespace fwqa {

/// Adam moment estimates, aligned with a ParamRegistry by index.
template <typename Scalar>
struct AdamState {
  std::vector<Mat<Scalar>> m;
  std::vector<Mat<Scalar>> v;
  long step = 0;
  AdamConfig cfg;

  AdamState(const ParamRegistry<Scalar>& params, AdamConfig config) : cfg(config) {
    m.reserve(params.size());
    v.reserve(params.size());
    for (const auto* p : params) {
      m.push_back(Mat<Scalar>::Zero(p->value.rows(), p->value.cols()));
      v.push_back(Mat<Scalar>::Zero(p->value.rows(), p->value.cols()));
    }
  }
};

/// One Adam update from the gradients currently held in Parameter::grad:
///   m <- b1 m + (1-b1) g;  v <- b2 v + (1-b2) g^2
///   theta <- theta - lr * m^ / (sqrt(v^) + eps)   (bias-corrected m^, v^)
template <typename Scalar>
void adam_step(ParamRegistry<Scalar>& params, AdamState<Scalar>& state) {
  if (state.m.size() != params.size())
    throw ShapeError("adam_step: state tracks " + std::to_string(state.m.size()) +
                     " parameters, registry has " + std::to_string(params.size()));
  state.step += 1;
  const Scalar b1 = static_cast<Scalar>(state.cfg.beta1);
  const Scalar b2 = static_cast<Scalar>(state.cfg.beta2);
  const Scalar lr = static_cast<Scalar>(state.cfg.learning_rate);
  const Scalar eps = static_cast<Scalar>(state.cfg.epsilon);
  const Scalar corr1 = Scalar(1) - static_cast<Scalar>(std::pow(state.cfg.beta1, state.step));
  const Scalar corr2 = Scalar(1) - static_cast<Scalar>(std::pow(state.cfg.beta2, state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    Parameter<Scalar>& p = params[i];
    if (p.grad.size() != p.value.size())
      throw ShapeError("adam_step: gradient of " + p.name + " is " +
                       shape_str(p.grad) + ", parameter is " + shape_str(p.value));
    state.m[i] = b1 * state.m[i] + (Scalar(1) - b1) * p.grad;
    state.v[i] = b2 * state.v[i] + (Scalar(1) - b2) * p.grad.cwiseProduct(p.grad);
    p.value.array() -= lr * (state.m[i].array() / corr1) /
                       ((state.v[i].array() / corr2).sqrt() + eps);
  }
}

/// Global L2 norm over all gradients jointly.
template <typename Scalar>
double gradient_norm(const ParamRegistry<Scalar>& params) {
  double sq = 0;
  for (const auto* p : params) sq += static_cast<double>(p->grad.squaredNorm());
  return std::sqrt(sq);
}

/// Scale every gradient by maxNorm / norm when the global norm exceeds
/// maxNorm; no-op otherwise. Idempotent.
template <typename Scalar>
double clip_gradients(ParamRegistry<Scalar>& params, double max_norm) {
  if (max_norm <= 0) throw ArgumentError("clip_gradients: max norm must be positive");
  double n = gradient_norm(params);
  if (n > max_norm) {
    const Scalar s = static_cast<Scalar>(max_norm / n);
    for (auto* p : params) p->grad *= s;
  }
  return n;
}

}  // namespace fwqa
