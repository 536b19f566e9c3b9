// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "pdanet/graph.hpp"
#include "pdanet/params.hpp"
#include "pdanet/rng.hpp"

namespace pdanet {

// Weight reparameterization W / sigma_max(W), one power iteration per
// training forward; `u` is a persistent non-trainable buffer.
Node* spectral_norm_weight(Graph& g, Node* w, Param* u, bool update_u);

struct Conv2dLayer {
  Param* w = nullptr;
  Param* b = nullptr;
  Param* sn_u = nullptr;
  int stride = 1;
  int pad = 1;

  static Conv2dLayer create(ParamGroup& pg, const std::string& name, int cin, int cout,
                            int kernel, int stride, int pad, Rng& rng,
                            bool spectral_norm = false, double init_gain = 2.0);
  Node* operator()(Graph& g, Node* x, bool training = true) const;
};

struct LinearLayer {
  Param* w = nullptr;
  Param* b = nullptr;

  static LinearLayer create(ParamGroup& pg, const std::string& name, int in, int out, Rng& rng,
                            double init_gain = 2.0);
  Node* operator()(Graph& g, Node* x) const;
};

struct InstanceNormLayer {
  Param* gamma = nullptr;
  Param* beta = nullptr;

  static InstanceNormLayer create(ParamGroup& pg, const std::string& name, int channels);
  Node* operator()(Graph& g, Node* x) const;
};

// conv-norm-relu-conv-norm + projected skip, post-activation.
struct ResBlock {
  Conv2dLayer c1, c2, proj;
  InstanceNormLayer n1, n2;
  bool has_proj = false;
  bool use_norm = true;

  static ResBlock create(ParamGroup& pg, const std::string& name, int cin, int cout, int stride,
                         bool use_norm, Rng& rng);
  Node* operator()(Graph& g, Node* x, bool training = true) const;
};

}  // namespace pdanet
