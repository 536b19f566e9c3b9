// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pdanet/graph.hpp"
#include "pdanet/networks.hpp"

namespace pdanet::losses {

// Radial-basis kernel mixture, k(x,y) = mean_b exp(-|x-y|^2 / (2 b^2)).
struct KernelSpec {
  std::vector<double> bandwidths = {1.0};
  enum class Estimator { kBiased, kUnbiased };
  Estimator estimator = Estimator::kBiased;
};

// Median pairwise Euclidean distance over the union of the two batches;
// falls back to 1.0 on degenerate inputs.
double median_pairwise_distance(const Tensor& a, const Tensor& b);

// {m/4, m/2, m, 2m, 4m} around the median distance m.
KernelSpec median_kernel(const Tensor& fs, const Tensor& ft,
                         KernelSpec::Estimator est = KernelSpec::Estimator::kBiased);

// Squared-MMD between feature batches [Ns,D] and [Nt,D], averaged over the
// kernel mixture. The biased (V-statistic) estimator is non-negative.
Node* mmd_loss(Node* feats_s, Node* feats_t, const KernelSpec& kernel);

// mean over rows of max(0, margin + |v-v_pos| - |v-v_neg|).
Node* triplet_loss(Node* v, Node* v_pos, Node* v_neg, double margin);

// Mean-L1 self-recovery plus mean-L1 pose-guided recovery.
Node* reconstruction_loss_source(Node* x_ss, Node* x_s, Node* x_pose_guided, Node* x_s_ref);
Node* reconstruction_loss_target(Node* x_tt, Node* x_t);

struct AdvObjectives {
  Node* d_objective = nullptr;  // the discriminator maximizes this
  Node* g_objective = nullptr;  // non-saturating generator term, minimized
};

// d = E[log D(real)] + E[log(1-D(recon))] + E[log(1-D(translated))]
// g = -E[log D(recon)] - E[log D(translated)]
AdvObjectives domain_adversarial_loss(Graph& g, Model& model, Domain domain, Node* real_images,
                                      Node* recon_images, Node* translated_images,
                                      bool training = true);

// Inputs for the pose-matching adversary. Source side needs the identity
// pair: the mismatched pose p' and the pose-transferred recovery.
struct PoseTuple {
  Node* x_s = nullptr;
  Node* p_s = nullptr;
  Node* p_s_prime = nullptr;
  Node* x_ss = nullptr;
  Node* x_ss_pose_guided = nullptr;
  Node* x_t = nullptr;
  Node* p_t = nullptr;
  Node* x_tt = nullptr;
};

struct PoseObjectives {
  Node* d_objective = nullptr;  // source + target terms
  Node* d_source = nullptr;
  Node* d_target = nullptr;
  Node* g_objective = nullptr;  // over generated images only, never translations
};

PoseObjectives pose_adversarial_loss(Graph& g, Model& model, const PoseTuple& t,
                                     bool training = true);

// Per-step scalars; absent fields correspond to ablated terms.
struct LossReport {
  int64_t step = 0;
  std::optional<double> mmd, triplet, rec_s, rec_t;
  std::optional<double> domain_s, domain_t, pose_s, pose_t;
  std::optional<double> g_domain_s, g_domain_t, g_pose;
  std::optional<double> enc_total, gen_s_total, gen_t_total, disc_total;
  int clip_events = 0;

  std::string to_jsonl() const;
  // Returns false and names the first non-finite field.
  bool all_finite(std::string* offending = nullptr) const;
};

}  // namespace pdanet::losses
