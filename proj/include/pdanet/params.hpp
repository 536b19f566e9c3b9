// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <map>
#include <string>
#include <vector>

#include "pdanet/tensor.hpp"

namespace pdanet {

// One named trainable tensor with its gradient accumulator.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;            // same shape as value, zero-initialized
  bool trainable = true;  // false for buffers (e.g. spectral-norm u vectors)
};

// Insertion-ordered collection of parameters belonging to one network.
// Deque storage keeps Param* stable while layers are being wired up.
class ParamGroup {
 public:
  explicit ParamGroup(std::string name = "") : name_(std::move(name)) {}

  Param* add(const std::string& local_name, Tensor value, bool trainable = true) {
    std::string full = name_.empty() ? local_name : name_ + "." + local_name;
    if (index_.count(full)) throw std::invalid_argument("duplicate param name: " + full);
    params_.push_back(Param{full, std::move(value), Tensor(), trainable});
    Param* p = &params_.back();
    p->grad = Tensor::zeros(p->value.shape);
    index_[full] = p;
    return p;
  }

  Param* find(const std::string& full_name) {
    auto it = index_.find(full_name);
    return it == index_.end() ? nullptr : it->second;
  }
  const Param* find(const std::string& full_name) const {
    auto it = index_.find(full_name);
    return it == index_.end() ? nullptr : it->second;
  }

  const std::string& name() const { return name_; }

  std::vector<Param*> all() {
    std::vector<Param*> v;
    for (Param& p : params_) v.push_back(&p);
    return v;
  }
  std::vector<const Param*> all() const {
    std::vector<const Param*> v;
    for (const Param& p : params_) v.push_back(&p);
    return v;
  }

  std::vector<Param*> trainable() {
    std::vector<Param*> v;
    for (Param& p : params_)
      if (p.trainable) v.push_back(&p);
    return v;
  }

  void zero_grad() {
    for (Param& p : params_) p.grad.fill(0.0);
  }

  int64_t num_scalars() const {
    int64_t n = 0;
    for (const Param& p : params_) n += p.value.numel();
    return n;
  }

  bool all_finite() const {
    for (const Param& p : params_)
      if (!p.value.all_finite()) return false;
    return true;
  }

  size_t size() const { return params_.size(); }

 private:
  std::string name_;
  std::deque<Param> params_;
  std::map<std::string, Param*> index_;
};

// Adam state for one optimizer instance. Parameters are keyed by full name
// so the state survives serialization and model rebuilds.
struct AdamState {
  double beta1 = 0.5;
  double beta2 = 0.999;
  double eps = 1e-8;
  int64_t t = 0;
  std::map<std::string, Tensor> m;
  std::map<std::string, Tensor> v;
};

// Scales gradients of `params` in place so the global L2 norm is at most
// `max_norm`. Returns true when clipping fired.
bool clip_global_norm(const std::vector<Param*>& params, double max_norm);

// One Adam step at learning rate `lr` over `params`, consuming their
// accumulated gradients. Gradients are not zeroed here.
void adam_step(AdamState& state, const std::vector<Param*>& params, double lr);

}  // namespace pdanet
