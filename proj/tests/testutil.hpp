// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "pdanet/graph.hpp"
#include "pdanet/params.hpp"
#include "pdanet/rng.hpp"

namespace testutil {

using pdanet::Graph;
using pdanet::Node;
using pdanet::Param;
using pdanet::Rng;

// Scratch directory under the system temp root, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0; i < 10000; ++i) {
      auto p = base / (tag + "_" + std::to_string(counter_++));
      std::error_code ec;
      if (std::filesystem::create_directory(p, ec)) {
        path_ = p.string();
        return;
      }
    }
    throw std::runtime_error("TempDir: cannot create scratch directory");
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::string& path() const { return path_; }
  std::string sub(const std::string& name) const {
    return (std::filesystem::path(path_) / name).string();
  }

 private:
  static inline int counter_ = 0;
  std::string path_;
};

struct GradCheckReport {
  double max_rel_err = 0.0;
  int checked = 0;
};

// Central finite differences on sampled parameter entries against the
// analytic gradient of `build`'s scalar output. `build` must construct a
// fresh graph evaluation of the loss at the parameters' current values.
inline GradCheckReport check_param_grads(const std::function<Node*(Graph&)>& build,
                                         const std::vector<Param*>& params,
                                         int samples_per_param, Rng& pick, double h = 1e-5) {
  GradCheckReport rep;

  // Analytic pass.
  for (Param* p : params) p->grad.fill(0.0);
  std::vector<pdanet::Tensor> analytic;
  {
    Graph g;
    Node* loss = build(g);
    g.backward(loss);
    for (Param* p : params) analytic.push_back(p->grad);
    for (Param* p : params) p->grad.fill(0.0);
  }

  auto eval = [&build]() {
    Graph g;
    return build(g)->scalar();
  };

  for (size_t pi = 0; pi < params.size(); ++pi) {
    Param* p = params[pi];
    if (p->value.numel() == 0) continue;
    for (int s = 0; s < samples_per_param; ++s) {
      int64_t idx = static_cast<int64_t>(pick.randint(static_cast<uint64_t>(p->value.numel())));
      double orig = p->value.data[idx];
      double step = h * std::max(1.0, std::abs(orig));
      p->value.data[idx] = orig + step;
      double fp = eval();
      p->value.data[idx] = orig - step;
      double fm = eval();
      p->value.data[idx] = orig;
      double numeric = (fp - fm) / (2.0 * step);
      double a = analytic[pi].data[idx];
      double denom = std::max({std::abs(a), std::abs(numeric), 1e-4});
      double rel = std::abs(a - numeric) / denom;
      if (std::abs(a - numeric) < 1e-9) rel = 0.0;
      rep.max_rel_err = std::max(rep.max_rel_err, rel);
      ++rep.checked;
    }
  }
  return rep;
}

}  // namespace testutil
