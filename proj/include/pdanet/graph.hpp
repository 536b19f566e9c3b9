// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <deque>
#include <functional>
#include <vector>

#include "pdanet/params.hpp"
#include "pdanet/tensor.hpp"

namespace pdanet {

// Reverse-mode autodiff over a dynamically built tape. Nodes are created in
// topological order, so backward is a reverse sweep over the tape. A graph is
// built per training phase and discarded afterwards.
class Graph;

struct Node {
  Graph* graph = nullptr;
  Tensor val;
  Tensor grad;  // allocated lazily during backward
  bool needs_grad = false;
  std::function<void(Node&)> back;  // pushes this node's grad into parents

  void ensure_grad() {
    if (grad.empty()) grad = Tensor::zeros(val.shape);
  }
  bool has_grad() const { return !grad.empty(); }
  double scalar() const { return val.data.at(0); }
};

class Graph {
 public:
  Node* make(Tensor val, bool needs_grad, std::function<void(Node&)> back) {
    nodes_.push_back(Node{this, std::move(val), Tensor(), needs_grad, std::move(back)});
    return &nodes_.back();
  }

  // Leaf wrapping a persistent parameter; backward accumulates into p->grad.
  Node* param(Param* p) {
    return make(p->value, true, [p](Node& n) {
      for (int64_t i = 0; i < n.grad.numel(); ++i) p->grad.data[i] += n.grad.data[i];
    });
  }

  // Leaf constant; no gradient flows into it.
  Node* constant(Tensor t) { return make(std::move(t), false, nullptr); }

  // Backpropagate from a scalar root. Accumulates into Param::grad of every
  // param leaf reachable from the root. Node grads are freshly allocated, so
  // repeated backward calls on one graph require zero_node_grads() between.
  void backward(Node* root) {
    require(root->val.numel() == 1, "backward: root must be scalar");
    root->ensure_grad();
    root->grad.data[0] = 1.0;
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
      Node& n = *it;
      if (!n.needs_grad || !n.has_grad() || !n.back) continue;
      n.back(n);
    }
  }

  void zero_node_grads() {
    for (Node& n : nodes_) n.grad = Tensor();
  }

  size_t size() const { return nodes_.size(); }

 private:
  std::deque<Node> nodes_;
};

// ---- elementwise and shape ops -------------------------------------------

Node* add(Node* a, Node* b);
Node* sub(Node* a, Node* b);
Node* mul(Node* a, Node* b);
// alpha * a + beta, elementwise.
Node* affine(Node* a, double alpha, double beta);
Node* relu(Node* a);
Node* leaky_relu(Node* a, double slope);
Node* tanh_op(Node* a);
Node* sigmoid_op(Node* a);
// log(max(x, eps)); gradient is zero where the clamp is active.
Node* log_clamped(Node* a, double eps = 1e-12);
Node* reshape(Node* a, Shape s);
Node* concat_cols(Node* a, Node* b);      // [N,D1] + [N,D2] -> [N,D1+D2]
Node* concat_channels(Node* a, Node* b);  // [N,C1,H,W] + [N,C2,H,W]

// ---- neural-net ops --------------------------------------------------------

// x:[N,In], w:[Out,In], b:[Out] -> [N,Out]
Node* linear(Node* x, Node* w, Node* b);
// x:[N,C,H,W], w:[Cout,Cin,kh,kw], b:[Cout]
Node* conv2d(Node* x, Node* w, Node* b, int stride, int pad);
// Per-(sample, channel) normalization over spatial dims with affine params
// gamma,beta:[C].
Node* instance_norm(Node* x, Node* gamma, Node* beta, double eps = 1e-5);
Node* avg_pool2(Node* x);          // 2x2 stride-2 mean pool, even dims required
Node* upsample_nearest2(Node* x);  // 2x nearest-neighbor upsample
Node* pixel_shuffle2(Node* x);     // [N,4C,H,W] -> [N,C,2H,2W]
Node* global_avg_pool(Node* x);    // [N,C,H,W] -> [N,C]
Node* spatial_mean(Node* x);       // [N,C,H,W] -> [N], mean over C,H,W
// [N,D] -> [N,D,H,W], value replicated over the spatial grid.
Node* broadcast_spatial(Node* v, int h, int w);

// ---- reductions and loss building blocks ----------------------------------

Node* mean_all(Node* a);              // -> [1]
Node* l1_mean(Node* a, Node* b);      // mean |a-b| -> [1]
Node* row_l2_diff(Node* a, Node* b);  // [N,D] x2 -> [N], Euclidean row norms

}  // namespace pdanet
