// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "pdanet/networks.hpp"
#include "pdanet/serialize.hpp"
#include "testutil.hpp"

using namespace pdanet;

namespace {

Tensor random_images(int n, const ModelConfig& cfg, Rng& rng, double scale = 0.5) {
  Tensor t = Tensor::randn({n, 3, cfg.height, cfg.width}, rng, scale);
  for (double& v : t.data) v = std::tanh(v);
  return t;
}

Tensor random_maps(int n, const ModelConfig& cfg, Rng& rng) {
  Tensor t = Tensor::uniform({n, datagen::kNumLandmarks, cfg.height, cfg.width}, rng, 0.0, 1.0);
  return t;
}

}  // namespace

TEST_CASE("encoders: finiteness, determinism, dimensions") {
  ModelConfig cfg = ModelConfig::tiny();
  Model m(cfg);

  Tensor zero_img({2, 3, cfg.height, cfg.width});
  Tensor f = m.encode_content(zero_img);
  CHECK(f.shape == Shape{2, cfg.content_dim});
  CHECK(f.all_finite());

  Tensor again = m.encode_content(zero_img);
  CHECK(bit_equal(f, again));

  Tensor zero_map({2, datagen::kNumLandmarks, cfg.height, cfg.width});
  Tensor p = m.encode_pose(zero_map);
  CHECK(p.shape == Shape{2, cfg.pose_dim});
  CHECK(p.all_finite());
  CHECK(bit_equal(p, m.encode_pose(zero_map)));
}

TEST_CASE("encoders: shape mismatch raises invalid_argument") {
  Model m(ModelConfig::tiny());
  CHECK_THROWS_AS(m.encode_content(Tensor({1, 3, 8, 8})), std::invalid_argument);
  CHECK_THROWS_AS(m.encode_pose(Tensor({1, 17, 16, 8})), std::invalid_argument);
  CHECK_THROWS_AS(m.generate(Domain::kSource, Tensor({1, 3}), Tensor({1, 8})),
                  std::invalid_argument);
  CHECK_THROWS_AS(m.discriminate_domain(Domain::kSource, Tensor({1, 3, 4, 4})),
                  std::invalid_argument);
}

TEST_CASE("generator: output range and determinism under random parameters") {
  Rng seed_rng(999);
  for (uint64_t seed : {1ull, 7ull, 1234ull}) {
    ModelConfig cfg = ModelConfig::tiny();
    cfg.init_seed = seed;
    Model m(cfg);
    Rng rng(seed + 5);
    Tensor vp = Tensor::randn({3, cfg.pose_dim}, rng, 2.0);
    Tensor vc = Tensor::randn({3, cfg.content_dim}, rng, 2.0);
    Tensor img = m.generate(Domain::kSource, vp, vc);
    CHECK(img.shape == Shape{3, 3, cfg.height, cfg.width});
    for (double v : img.data) {
      CHECK(v >= -1.0);
      CHECK(v <= 1.0);
    }
    CHECK(bit_equal(img, m.generate(Domain::kSource, vp, vc)));
    Tensor img_t = m.generate(Domain::kTarget, vp, vc);
    CHECK(img_t.all_finite());
  }
}

TEST_CASE("domain discriminator: scores strictly inside (0,1), no saturation untrained") {
  ModelConfig cfg = ModelConfig::tiny();
  Model m(cfg);
  Rng rng(3);
  Tensor imgs = random_images(4, cfg, rng);
  for (Domain d : {Domain::kSource, Domain::kTarget}) {
    Tensor s = m.discriminate_domain(d, imgs);
    CHECK(s.shape == Shape{4});
    for (double v : s.data) {
      CHECK(v > 0.0);
      CHECK(v < 1.0);
      CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("pose discriminator: confidence map shape, range, pair determinism") {
  ModelConfig cfg = ModelConfig::tiny();
  Model m(cfg);
  Rng rng(4);
  Tensor imgs = random_images(2, cfg, rng);
  Tensor maps = random_maps(2, cfg, rng);
  Tensor c = m.discriminate_pose(Domain::kSource, imgs, maps);
  CHECK(c.shape == Shape{2, 1, cfg.height / 8, cfg.width / 8});
  for (double v : c.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }
  CHECK(bit_equal(c, m.discriminate_pose(Domain::kSource, imgs, maps)));
  CHECK_THROWS_AS(m.discriminate_pose(Domain::kSource, imgs, Tensor({2, 18, 8, 8})),
                  std::invalid_argument);
}

TEST_CASE("shared pose discriminator is one parameter group") {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.share_dp = true;
  Model shared(cfg);
  CHECK(&shared.group_dp(Domain::kSource) == &shared.group_dp(Domain::kTarget));
  CHECK_FALSE(shared.has_separate_dp());

  cfg.share_dp = false;
  Model split(cfg);
  CHECK(&split.group_dp(Domain::kSource) != &split.group_dp(Domain::kTarget));
  CHECK(split.has_separate_dp());
  CHECK(split.group_dp(Domain::kSource).size() == split.group_dp(Domain::kTarget).size());
  // Disjoint parameter names.
  for (Param* p : split.group_dp(Domain::kTarget).all())
    CHECK(split.group_dp(Domain::kSource).find(p->name) == nullptr);
  // Same output path for the source domain regardless of sharing.
  Rng rng(6);
  Tensor imgs = random_images(1, cfg, rng);
  Tensor maps = random_maps(1, cfg, rng);
  Tensor a = split.discriminate_pose(Domain::kSource, imgs, maps);
  Tensor b = split.discriminate_pose(Domain::kTarget, imgs, maps);
  CHECK(a.shape == b.shape);
}

TEST_CASE("checkpoint save/load reproduces outputs bit-exactly") {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.init_seed = 77;
  Model m(cfg);
  Rng rng(8);
  Tensor imgs = random_images(2, cfg, rng);
  Tensor maps = random_maps(2, cfg, rng);
  Tensor feats = m.encode_content(imgs);
  Tensor pose = m.encode_pose(maps);
  Tensor gen = m.generate(Domain::kTarget, pose, feats);

  testutil::TempDir tmp("pdanet_ckpt");
  std::string path = tmp.sub("model.ckpt");
  save_checkpoint(path, m, "{}", 0, Rng(1).serialize(), {}, {});

  ModelConfig cfg2 = cfg;
  cfg2.init_seed = 123456;  // different init; loading must overwrite it
  Model m2(cfg2);
  LoadedCheckpoint ck = read_checkpoint(path);
  apply_params(m2, ck.params);
  CHECK(bit_equal(m2.encode_content(imgs), feats));
  CHECK(bit_equal(m2.encode_pose(maps), pose));
  CHECK(bit_equal(m2.generate(Domain::kTarget, pose, feats), gen));
}

TEST_CASE("content encoder respects an empirically measured local Lipschitz bound") {
  ModelConfig cfg = ModelConfig::tiny();
  Model m(cfg);
  Rng rng(21);
  Tensor base = random_images(1, cfg, rng);
  Tensor f0 = m.encode_content(base);

  auto norm_diff = [](const Tensor& a, const Tensor& b) {
    double s = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) s += (a.data[i] - b.data[i]) * (a.data[i] - b.data[i]);
    return std::sqrt(s);
  };

  double lipschitz = 0.0;
  auto probe = [&](Rng& r) {
    Tensor perturbed = base;
    int64_t idx = static_cast<int64_t>(r.randint(perturbed.data.size()));
    double delta = r.uniform(-0.2, 0.2);
    if (std::abs(delta) < 1e-4) delta = 1e-4;
    perturbed.data[idx] += delta;
    Tensor f1 = m.encode_content(perturbed);
    return norm_diff(f1, f0) / std::abs(delta);
  };
  for (int i = 0; i < 100; ++i) lipschitz = std::max(lipschitz, probe(rng));
  CHECK(lipschitz > 0.0);

  // Fresh perturbations stay within the measured bound (with safety margin).
  Rng rng2(22);
  for (int i = 0; i < 50; ++i) CHECK(probe(rng2) <= 1.5 * lipschitz);
}

TEST_CASE("spatial-broadcast fusion is a working alternative") {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.fusion = ModelConfig::Fusion::kSpatialBroadcast;
  Model m(cfg);
  Rng rng(12);
  Tensor vp = Tensor::randn({2, cfg.pose_dim}, rng);
  Tensor vc = Tensor::randn({2, cfg.content_dim}, rng);
  Tensor img = m.generate(Domain::kSource, vp, vc);
  CHECK(img.shape == Shape{2, 3, cfg.height, cfg.width});
  for (double v : img.data) CHECK(std::abs(v) <= 1.0);
}

TEST_CASE("spectral-norm flag: forward works and gradient stays exact") {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.spectral_norm = true;
  Model m(cfg);
  Rng rng(13);
  Tensor imgs = random_images(2, cfg, rng);
  Tensor s = m.discriminate_domain(Domain::kSource, imgs);
  for (double v : s.data) {
    CHECK(v > 0.0);
    CHECK(v < 1.0);
  }

  // Finite-difference check of the reparameterized weight's backward. The
  // power-iteration buffer must stay frozen during the check, so training
  // mode is off.
  ParamGroup pg("sn");
  Rng prng(14);
  Conv2dLayer conv = Conv2dLayer::create(pg, "c", 2, 3, 3, 1, 1, prng, true);
  Param x;
  x.name = "x";
  x.value = Tensor::randn({1, 2, 4, 4}, prng, 0.7);
  x.grad = Tensor::zeros(x.value.shape);
  auto build = [&](Graph& g) {
    Node* y = conv(g, g.param(&x), /*training=*/false);
    return mean_all(mul(y, y));
  };
  Rng pick(15);
  auto rep = testutil::check_param_grads(build, {conv.w, conv.b, &x}, 8, pick);
  CHECK(rep.max_rel_err < 1e-4);
}
