// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/networks.hpp"

#include "pdanet/json_util.hpp"

using nlohmann::json;

namespace pdanet {

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.height = 16;
  c.width = 8;
  c.content_dim = 8;
  c.pose_dim = 4;
  c.ec_stem = 4;
  c.ec_blocks = {4, 6, 6, 8};
  c.ep_channels = {4, 4, 6, 6};
  c.gen_stage = {8, 6, 4};
  c.ds_channels = {4, 4, 6, 6};
  c.dp_channels = {4, 6, 6};
  return c;
}

void ModelConfig::validate() const {
  require(height % 8 == 0 && width % 8 == 0 && height >= 16 && width >= 8,
          "ModelConfig: height/width must be multiples of 8 (height >= 16, width >= 8)");
  require(content_dim >= 1 && pose_dim >= 1, "ModelConfig: feature dims must be positive");
  require(ec_blocks.size() == 4, "ModelConfig: content encoder takes 4 block widths");
  require(ep_channels.size() == 4, "ModelConfig: pose encoder takes 4 conv widths");
  require(gen_stage.size() == 3, "ModelConfig: generator takes 3 stage widths");
  require(ds_channels.size() == 4, "ModelConfig: domain discriminator takes 4 conv widths");
  require(dp_channels.size() == 3, "ModelConfig: pose discriminator takes 3 conv widths");
  for (const std::vector<int>* v : {&ec_blocks, &ep_channels, &gen_stage, &ds_channels, &dp_channels})
    for (int c : *v) require(c >= 1, "ModelConfig: channel widths must be positive");
}

json model_config_to_json(const ModelConfig& c) {
  return json{{"height", c.height},
              {"width", c.width},
              {"content_dim", c.content_dim},
              {"pose_dim", c.pose_dim},
              {"ec_stem", c.ec_stem},
              {"ec_blocks", c.ec_blocks},
              {"ep_channels", c.ep_channels},
              {"gen_stage", c.gen_stage},
              {"ds_channels", c.ds_channels},
              {"dp_channels", c.dp_channels},
              {"fusion", c.fusion == ModelConfig::Fusion::kConcatProject ? "concat_project"
                                                                         : "spatial_broadcast"},
              {"spectral_norm", c.spectral_norm},
              {"share_dp", c.share_dp},
              {"init_seed", c.init_seed}};
}

ModelConfig model_config_from_json(const json& j) {
  check_json_keys(j,
                  {"height", "width", "content_dim", "pose_dim", "ec_stem", "ec_blocks",
                   "ep_channels", "gen_stage", "ds_channels", "dp_channels", "fusion",
                   "spectral_norm", "share_dp", "init_seed"},
                  "model config");
  ModelConfig c;
  c.height = j.value("height", c.height);
  c.width = j.value("width", c.width);
  c.content_dim = j.value("content_dim", c.content_dim);
  c.pose_dim = j.value("pose_dim", c.pose_dim);
  c.ec_stem = j.value("ec_stem", c.ec_stem);
  c.ec_blocks = j.value("ec_blocks", c.ec_blocks);
  c.ep_channels = j.value("ep_channels", c.ep_channels);
  c.gen_stage = j.value("gen_stage", c.gen_stage);
  c.ds_channels = j.value("ds_channels", c.ds_channels);
  c.dp_channels = j.value("dp_channels", c.dp_channels);
  if (j.contains("fusion")) {
    std::string f = j["fusion"].get<std::string>();
    if (f == "concat_project")
      c.fusion = ModelConfig::Fusion::kConcatProject;
    else if (f == "spatial_broadcast")
      c.fusion = ModelConfig::Fusion::kSpatialBroadcast;
    else
      throw std::invalid_argument("model config: unknown fusion mode \"" + f + "\"");
  }
  c.spectral_norm = j.value("spectral_norm", c.spectral_norm);
  c.share_dp = j.value("share_dp", c.share_dp);
  c.init_seed = j.value("init_seed", c.init_seed);
  return c;
}

// ---- construction ----------------------------------------------------------

Model::Model(ModelConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  Rng rng(cfg_.init_seed);
  enc_c_ = build_content_encoder(rng);
  enc_p_ = build_pose_encoder(rng);
  gen_s_ = build_generator(gs_, rng);
  gen_t_ = build_generator(gt_, rng);
  disc_s_ = build_domain_disc(ds_, rng);
  disc_t_ = build_domain_disc(dt_, rng);
  disc_p_ = build_pose_disc(dp_, rng);
  if (!cfg_.share_dp) disc_p2_ = build_pose_disc(dp2_, rng);
}

Model::ContentEncoder Model::build_content_encoder(Rng& rng) {
  ContentEncoder e;
  e.stem = Conv2dLayer::create(ec_, "stem", 3, cfg_.ec_stem, 3, 2, 1, rng);
  e.stem_n = InstanceNormLayer::create(ec_, "stem_n", cfg_.ec_stem);
  int cin = cfg_.ec_stem;
  for (size_t i = 0; i < cfg_.ec_blocks.size(); ++i) {
    e.blocks.push_back(
        ResBlock::create(ec_, "block" + std::to_string(i), cin, cfg_.ec_blocks[i], 2, true, rng));
    cin = cfg_.ec_blocks[i];
  }
  e.head = LinearLayer::create(ec_, "head", cin, cfg_.content_dim, rng, 1.0);
  return e;
}

Model::PoseEncoder Model::build_pose_encoder(Rng& rng) {
  PoseEncoder e;
  int cin = datagen::kNumLandmarks;
  for (size_t i = 0; i < cfg_.ep_channels.size(); ++i) {
    e.convs.push_back(Conv2dLayer::create(ep_, "conv" + std::to_string(i), cin,
                                          cfg_.ep_channels[i], 3, 2, 1, rng));
    e.norms.push_back(
        InstanceNormLayer::create(ep_, "norm" + std::to_string(i), cfg_.ep_channels[i]));
    cin = cfg_.ep_channels[i];
  }
  e.head = LinearLayer::create(ep_, "head", cin, cfg_.pose_dim, rng, 1.0);
  return e;
}

Model::Generator Model::build_generator(ParamGroup& pg, Rng& rng) {
  Generator gnet;
  const int c0 = cfg_.gen_stage[0], c1 = cfg_.gen_stage[1], c2 = cfg_.gen_stage[2];
  const int fused = cfg_.pose_dim + cfg_.content_dim;
  if (cfg_.fusion == ModelConfig::Fusion::kConcatProject) {
    gnet.fuse_lin =
        LinearLayer::create(pg, "fuse", fused, c0 * cfg_.seed_h() * cfg_.seed_w(), rng, 1.0);
  } else {
    gnet.fuse_conv = Conv2dLayer::create(pg, "fuse", fused, c0, 1, 1, 0, rng);
  }
  gnet.blocks.push_back(ResBlock::create(pg, "res0", c0, c0, 1, true, rng));
  gnet.blocks.push_back(ResBlock::create(pg, "res1", c0, c0, 1, true, rng));
  gnet.up1 = Conv2dLayer::create(pg, "up1", c0, c1, 3, 1, 1, rng);
  gnet.up1_n = InstanceNormLayer::create(pg, "up1_n", c1);
  gnet.blocks.push_back(ResBlock::create(pg, "res2", c1, c1, 1, true, rng));
  gnet.blocks.push_back(ResBlock::create(pg, "res3", c1, c1, 1, true, rng));
  gnet.up2 = Conv2dLayer::create(pg, "up2", c1, c2, 3, 1, 1, rng);
  gnet.up2_n = InstanceNormLayer::create(pg, "up2_n", c2);
  gnet.blocks.push_back(ResBlock::create(pg, "res4", c2, c2, 1, true, rng));
  gnet.blocks.push_back(ResBlock::create(pg, "res5", c2, c2, 1, true, rng));
  gnet.to_rgb = Conv2dLayer::create(pg, "to_rgb", c2, 12, 3, 1, 1, rng, false, 1.0);
  return gnet;
}

Model::DomainDisc Model::build_domain_disc(ParamGroup& pg, Rng& rng) {
  DomainDisc d;
  int cin = 3;
  for (size_t i = 0; i < cfg_.ds_channels.size(); ++i) {
    d.convs.push_back(Conv2dLayer::create(pg, "conv" + std::to_string(i), cin,
                                          cfg_.ds_channels[i], 3, 2, 1, rng,
                                          cfg_.spectral_norm));
    cin = cfg_.ds_channels[i];
  }
  d.head = LinearLayer::create(pg, "head", cin, 1, rng, 1.0);
  return d;
}

Model::PoseDisc Model::build_pose_disc(ParamGroup& pg, Rng& rng) {
  PoseDisc d;
  const int c0 = cfg_.dp_channels[0], c1 = cfg_.dp_channels[1], c2 = cfg_.dp_channels[2];
  const int cin = 3 + datagen::kNumLandmarks;
  const bool sn = cfg_.spectral_norm;
  d.convs.push_back(Conv2dLayer::create(pg, "conv0", cin, c0, 3, 2, 1, rng, sn));
  d.convs.push_back(Conv2dLayer::create(pg, "conv1", c0, c1, 3, 2, 1, rng, sn));
  d.convs.push_back(Conv2dLayer::create(pg, "conv2", c1, c2, 3, 1, 1, rng, sn));
  d.convs.push_back(Conv2dLayer::create(pg, "conv3", c2, c2, 3, 1, 1, rng, sn));
  d.convs.push_back(Conv2dLayer::create(pg, "out", c2, 1, 3, 1, 1, rng, sn, 1.0));
  return d;
}

// ---- graph forwards --------------------------------------------------------

namespace {

void check_images(const Tensor& t, const ModelConfig& cfg, const char* who) {
  require(t.ndim() == 4 && t.dim(1) == 3 && t.dim(2) == cfg.height && t.dim(3) == cfg.width,
          std::string(who) + ": expected [N,3," + std::to_string(cfg.height) + "," +
              std::to_string(cfg.width) + "], got " + shape_str(t.shape));
  require(t.dim(0) >= 1, std::string(who) + ": empty batch");
}

void check_maps(const Tensor& t, const ModelConfig& cfg, const char* who) {
  require(t.ndim() == 4 && t.dim(1) == datagen::kNumLandmarks && t.dim(2) == cfg.height &&
              t.dim(3) == cfg.width,
          std::string(who) + ": expected [N,18,H,W] pose maps, got " + shape_str(t.shape));
  require(t.dim(0) >= 1, std::string(who) + ": empty batch");
}

}  // namespace

Node* Model::encode_content(Graph& g, Node* images, bool training) {
  check_images(images->val, cfg_, "encode_content");
  Node* h = enc_c_.stem(g, images, training);
  h = enc_c_.stem_n(g, h);
  h = relu(h);
  for (const ResBlock& b : enc_c_.blocks) h = b(g, h, training);
  h = global_avg_pool(h);
  return enc_c_.head(g, h);
}

Node* Model::encode_pose(Graph& g, Node* pose_maps, bool training) {
  check_maps(pose_maps->val, cfg_, "encode_pose");
  Node* h = avg_pool2(pose_maps);
  for (size_t i = 0; i < enc_p_.convs.size(); ++i) {
    h = enc_p_.convs[i](g, h, training);
    h = enc_p_.norms[i](g, h);
    h = relu(h);
  }
  h = global_avg_pool(h);
  return enc_p_.head(g, h);
}

Node* Model::run_generator(Graph& g, const Generator& net, Node* v_p, Node* v_c, bool training) {
  require(v_p->val.ndim() == 2 && v_p->val.dim(1) == cfg_.pose_dim,
          "generate: pose feature dim mismatch, got " + shape_str(v_p->val.shape));
  require(v_c->val.ndim() == 2 && v_c->val.dim(1) == cfg_.content_dim,
          "generate: content feature dim mismatch, got " + shape_str(v_c->val.shape));
  require(v_p->val.dim(0) == v_c->val.dim(0), "generate: batch size mismatch");
  const int n = v_p->val.dim(0);
  const int c0 = cfg_.gen_stage[0];

  Node* z = concat_cols(v_p, v_c);
  Node* h = nullptr;
  if (cfg_.fusion == ModelConfig::Fusion::kConcatProject) {
    h = net.fuse_lin(g, z);
    h = reshape(h, {n, c0, cfg_.seed_h(), cfg_.seed_w()});
  } else {
    h = broadcast_spatial(z, cfg_.seed_h(), cfg_.seed_w());
    h = net.fuse_conv(g, h, training);
  }
  h = net.blocks[0](g, h, training);
  h = net.blocks[1](g, h, training);
  h = upsample_nearest2(h);
  h = relu(net.up1_n(g, net.up1(g, h, training)));
  h = net.blocks[2](g, h, training);
  h = net.blocks[3](g, h, training);
  h = upsample_nearest2(h);
  h = relu(net.up2_n(g, net.up2(g, h, training)));
  h = net.blocks[4](g, h, training);
  h = net.blocks[5](g, h, training);
  h = net.to_rgb(g, h, training);
  h = pixel_shuffle2(h);
  return tanh_op(h);
}

Node* Model::generate(Graph& g, Domain out_domain, Node* v_p, Node* v_c, bool training) {
  return run_generator(g, out_domain == Domain::kSource ? gen_s_ : gen_t_, v_p, v_c, training);
}

Node* Model::discriminate_domain(Graph& g, Domain domain, Node* images, bool training) {
  check_images(images->val, cfg_, "discriminate_domain");
  const DomainDisc& d = domain == Domain::kSource ? disc_s_ : disc_t_;
  Node* h = images;
  for (const Conv2dLayer& c : d.convs) h = leaky_relu(c(g, h, training), 0.2);
  h = global_avg_pool(h);
  h = d.head(g, h);
  h = reshape(h, {images->val.dim(0)});
  return sigmoid_op(h);
}

Node* Model::run_pose_disc(Graph& g, const PoseDisc& net, Node* images, Node* maps,
                           bool training) {
  Node* h = concat_channels(images, maps);
  h = avg_pool2(h);
  for (size_t i = 0; i < net.convs.size(); ++i) {
    h = net.convs[i](g, h, training);
    if (i + 1 < net.convs.size()) h = leaky_relu(h, 0.2);
  }
  return sigmoid_op(h);
}

Node* Model::discriminate_pose(Graph& g, Domain domain, Node* images, Node* pose_maps,
                               bool training) {
  check_images(images->val, cfg_, "discriminate_pose");
  check_maps(pose_maps->val, cfg_, "discriminate_pose");
  require(images->val.dim(0) == pose_maps->val.dim(0), "discriminate_pose: batch mismatch");
  const PoseDisc& net = (cfg_.share_dp || domain == Domain::kSource) ? disc_p_ : disc_p2_;
  return run_pose_disc(g, net, images, pose_maps, training);
}

// ---- tensor-level inference -------------------------------------------------

Tensor Model::encode_content(const Tensor& images) const {
  Graph g;
  Model* self = const_cast<Model*>(this);
  return self->encode_content(g, g.constant(images), false)->val;
}

Tensor Model::encode_pose(const Tensor& pose_maps) const {
  Graph g;
  Model* self = const_cast<Model*>(this);
  return self->encode_pose(g, g.constant(pose_maps), false)->val;
}

Tensor Model::generate(Domain out_domain, const Tensor& v_p, const Tensor& v_c) const {
  Graph g;
  Model* self = const_cast<Model*>(this);
  return self->generate(g, out_domain, g.constant(v_p), g.constant(v_c), false)->val;
}

Tensor Model::discriminate_domain(Domain domain, const Tensor& images) const {
  Graph g;
  Model* self = const_cast<Model*>(this);
  return self->discriminate_domain(g, domain, g.constant(images), false)->val;
}

Tensor Model::discriminate_pose(Domain domain, const Tensor& images,
                                const Tensor& pose_maps) const {
  Graph g;
  Model* self = const_cast<Model*>(this);
  return self->discriminate_pose(g, domain, g.constant(images), g.constant(pose_maps), false)
      ->val;
}

std::vector<ParamGroup*> Model::groups() {
  std::vector<ParamGroup*> v = {&ec_, &ep_, &gs_, &gt_, &ds_, &dt_, &dp_};
  if (!cfg_.share_dp) v.push_back(&dp2_);
  return v;
}

int64_t Model::num_scalars() {
  int64_t n = 0;
  for (ParamGroup* pg : groups()) n += pg->num_scalars();
  return n;
}

}  // namespace pdanet
