// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdanet/datagen.hpp"
#include "pdanet/layers.hpp"

namespace pdanet {

using datagen::Domain;

struct ModelConfig {
  int height = 64;
  int width = 32;
  int content_dim = 128;  // retrieval feature size
  int pose_dim = 32;      // encoded pose feature size

  // Channel widths. Block counts are fixed by the architecture: a stem plus
  // 4 residual blocks for the content encoder, 4 conv blocks for the pose
  // encoder, 6 residual blocks for each generator, 5 conv blocks for the
  // pose discriminator.
  int ec_stem = 8;
  std::vector<int> ec_blocks = {12, 16, 24, 32};
  std::vector<int> ep_channels = {10, 14, 18, 24};
  std::vector<int> gen_stage = {20, 14, 8};  // at 1x, 2x, 4x of the seed resolution
  std::vector<int> ds_channels = {8, 12, 16, 24};
  std::vector<int> dp_channels = {12, 16, 20};

  enum class Fusion { kConcatProject, kSpatialBroadcast };
  Fusion fusion = Fusion::kConcatProject;
  bool spectral_norm = false;
  bool share_dp = true;
  uint64_t init_seed = 1;

  // Small configuration for finite-difference tests.
  static ModelConfig tiny();

  void validate() const;
  int seed_h() const { return height / 8; }
  int seed_w() const { return width / 8; }
};

nlohmann::json model_config_to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j);

// The five networks of the pose-disentanglement model, owned as explicit
// parameter groups so the trainer can update them selectively.
class Model {
 public:
  explicit Model(ModelConfig cfg);

  // Non-copyable: layers hold pointers into the parameter groups.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = delete;

  const ModelConfig& config() const { return cfg_; }

  // Graph-building forwards. Images are [N,3,H,W], pose maps [N,18,H,W],
  // features [N,d] / [N,h]. All throw invalid_argument on shape mismatch.
  Node* encode_content(Graph& g, Node* images, bool training = true);
  Node* encode_pose(Graph& g, Node* pose_maps, bool training = true);
  Node* generate(Graph& g, Domain out_domain, Node* v_p, Node* v_c, bool training = true);
  // Returns per-image probability of "real in this domain", [N] in (0,1).
  Node* discriminate_domain(Graph& g, Domain domain, Node* images, bool training = true);
  // PatchGAN image-pose matching confidence map, [N,1,H/8,W/8] in (0,1).
  Node* discriminate_pose(Graph& g, Domain domain, Node* images, Node* pose_maps,
                          bool training = true);

  // Tensor-level inference (no gradients, deterministic).
  Tensor encode_content(const Tensor& images) const;
  Tensor encode_pose(const Tensor& pose_maps) const;
  Tensor generate(Domain out_domain, const Tensor& v_p, const Tensor& v_c) const;
  Tensor discriminate_domain(Domain domain, const Tensor& images) const;
  Tensor discriminate_pose(Domain domain, const Tensor& images, const Tensor& pose_maps) const;

  ParamGroup& group_ec() { return ec_; }
  ParamGroup& group_ep() { return ep_; }
  ParamGroup& group_gen(Domain d) { return d == Domain::kSource ? gs_ : gt_; }
  ParamGroup& group_disc(Domain d) { return d == Domain::kSource ? ds_ : dt_; }
  // The pose-discriminator group serving `domain`; with share_dp both
  // domains resolve to the same group.
  ParamGroup& group_dp(Domain d) {
    return (cfg_.share_dp || d == Domain::kSource) ? dp_ : dp2_;
  }
  bool has_separate_dp() const { return !cfg_.share_dp; }

  std::vector<ParamGroup*> groups();
  int64_t num_scalars();

 private:
  struct ContentEncoder {
    Conv2dLayer stem;
    InstanceNormLayer stem_n;
    std::vector<ResBlock> blocks;
    LinearLayer head;
  };
  struct PoseEncoder {
    std::vector<Conv2dLayer> convs;
    std::vector<InstanceNormLayer> norms;
    LinearLayer head;
  };
  struct Generator {
    LinearLayer fuse_lin;   // concat-project fusion
    Conv2dLayer fuse_conv;  // spatial-broadcast fusion
    std::vector<ResBlock> blocks;
    Conv2dLayer up1, up2;
    InstanceNormLayer up1_n, up2_n;
    Conv2dLayer to_rgb;  // emits 12 channels, pixel-shuffled to RGB at full res
  };
  struct DomainDisc {
    std::vector<Conv2dLayer> convs;
    LinearLayer head;
  };
  struct PoseDisc {
    std::vector<Conv2dLayer> convs;
  };

  ContentEncoder build_content_encoder(Rng& rng);
  PoseEncoder build_pose_encoder(Rng& rng);
  Generator build_generator(ParamGroup& pg, Rng& rng);
  DomainDisc build_domain_disc(ParamGroup& pg, Rng& rng);
  PoseDisc build_pose_disc(ParamGroup& pg, Rng& rng);

  Node* run_generator(Graph& g, const Generator& net, Node* v_p, Node* v_c, bool training);
  Node* run_pose_disc(Graph& g, const PoseDisc& net, Node* images, Node* maps, bool training);

  ModelConfig cfg_;
  ParamGroup ec_{"ec"}, ep_{"ep"}, gs_{"gs"}, gt_{"gt"}, ds_{"ds"}, dt_{"dt"}, dp_{"dp"},
      dp2_{"dp2"};
  ContentEncoder enc_c_;
  PoseEncoder enc_p_;
  Generator gen_s_, gen_t_;
  DomainDisc disc_s_, disc_t_;
  PoseDisc disc_p_, disc_p2_;
};

}  // namespace pdanet
