// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/params.hpp"

#include <cmath>

namespace pdanet {

bool clip_global_norm(const std::vector<Param*>& params, double max_norm) {
  if (max_norm <= 0.0) return false;
  double sq = 0.0;
  for (const Param* p : params)
    for (double g : p->grad.data) sq += g * g;
  double norm = std::sqrt(sq);
  if (norm <= max_norm) return false;
  double scale = max_norm / norm;
  for (Param* p : params)
    for (double& g : p->grad.data) g *= scale;
  return true;
}

void adam_step(AdamState& state, const std::vector<Param*>& params, double lr) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.t));
  for (Param* p : params) {
    if (!p->trainable) continue;
    Tensor& m = state.m.try_emplace(p->name, Tensor::zeros(p->value.shape)).first->second;
    Tensor& v = state.v.try_emplace(p->name, Tensor::zeros(p->value.shape)).first->second;
    for (int64_t i = 0; i < p->value.numel(); ++i) {
      double g = p->grad.data[i];
      m.data[i] = state.beta1 * m.data[i] + (1.0 - state.beta1) * g;
      v.data[i] = state.beta2 * v.data[i] + (1.0 - state.beta2) * g * g;
      double mhat = m.data[i] / bc1;
      double vhat = v.data[i] / bc2;
      p->value.data[i] -= lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

}  // namespace pdanet
