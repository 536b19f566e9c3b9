// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "pdanet/datagen.hpp"
#include "testutil.hpp"

using namespace pdanet;
using namespace pdanet::datagen;

namespace {

SynthSpec small_spec() {
  SynthSpec s;
  s.seed = 99;
  s.height = 32;
  s.width = 16;
  s.source_identities = 6;
  s.source_images_per_identity = 3;
  s.target_identities = 5;
  s.target_images_per_identity = 3;
  return s;
}

Keypoints single_point(int x, int y) {
  Keypoints kp;
  for (auto& p : kp.points) p = {1.0, 1.0, false};
  kp.points[0] = {static_cast<double>(x), static_cast<double>(y), true};
  return kp;
}

}  // namespace

TEST_CASE("pose map: gaussian peak of 1 at the landmark pixel") {
  Keypoints kp = single_point(10, 20);
  Tensor map = render_pose_map(kp, 2.0, 64, 32);
  CHECK(map.shape == Shape{18, 64, 32});
  CHECK(map.data[(0 * 64 + 20) * 32 + 10] == doctest::Approx(1.0));
  double mx = 0.0;
  for (int y = 0; y < 64; ++y)
    for (int x = 0; x < 32; ++x) mx = std::max(mx, map.data[(0 * 64 + y) * 32 + x]);
  CHECK(mx == doctest::Approx(1.0));
}

TEST_CASE("pose map: invisible landmark channel is identically zero") {
  Keypoints kp = single_point(10, 20);
  Tensor map = render_pose_map(kp, 2.0, 64, 32);
  for (int c = 1; c < kNumLandmarks; ++c) {
    double sum = 0.0;
    for (int y = 0; y < 64; ++y)
      for (int x = 0; x < 32; ++x) sum += map.data[(static_cast<int64_t>(c) * 64 + y) * 32 + x];
    CHECK(sum == 0.0);
  }
}

TEST_CASE("pose map: probe value matches the gaussian formula") {
  Keypoints kp = single_point(10, 20);
  Tensor map = render_pose_map(kp, 2.0, 64, 32);
  const double expected = std::exp(-4.0 / 8.0);  // probe (12,20): dx=2, 2 sigma^2 = 8
  CHECK(map.data[(0 * 64 + 20) * 32 + 12] == doctest::Approx(expected).epsilon(1e-12));
  CHECK(expected == doctest::Approx(0.6065).epsilon(1e-4));
}

TEST_CASE("pose map: errors on bad sigma and out-of-bounds keypoints") {
  Keypoints kp = single_point(10, 20);
  CHECK_THROWS_AS(render_pose_map(kp, 0.0, 64, 32), std::invalid_argument);
  CHECK_THROWS_AS(render_pose_map(kp, -1.5, 64, 32), std::invalid_argument);
  Keypoints oob = single_point(32, 20);  // x == width
  CHECK_THROWS_AS(render_pose_map(oob, 2.0, 64, 32), std::invalid_argument);
  // The same point marked invisible is acceptable.
  oob.points[0].visible = false;
  CHECK_NOTHROW(render_pose_map(oob, 2.0, 64, 32));
}

TEST_CASE("pose map invariants over random sampled poses") {
  SynthSpec spec = small_spec();
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    Keypoints kp = sample_pose(spec, rng);
    Tensor map = render_pose_map(kp, spec.sigma, spec.height, spec.width);
    double lo = 1e300, hi = -1e300;
    for (double v : map.data) {
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    CHECK(lo >= 0.0);
    CHECK(hi <= 1.0);
    for (int c = 0; c < kNumLandmarks; ++c) {
      // argmax equals the landmark pixel (coordinates are integer-snapped)
      int best = 0;
      for (int i = 1; i < spec.height * spec.width; ++i)
        if (map.data[static_cast<int64_t>(c) * spec.height * spec.width + i] >
            map.data[static_cast<int64_t>(c) * spec.height * spec.width + best])
          best = i;
      CHECK(best / spec.width == static_cast<int>(kp.points[c].y));
      CHECK(best % spec.width == static_cast<int>(kp.points[c].x));
    }
  }
}

TEST_CASE("synthesize: counts, disjoint identities, determinism") {
  SynthSpec spec = small_spec();
  spec.source_identities = 10;
  spec.source_images_per_identity = 4;
  spec.target_identities = 10;
  spec.target_images_per_identity = 4;
  Dataset ds = Dataset::synthesize(spec);
  CHECK(ds.domain_indices(Domain::kSource).size() == 40);
  CHECK(ds.domain_indices(Domain::kTarget).size() == 40);

  std::set<int> src_ids, tgt_ids;
  for (int i : ds.domain_indices(Domain::kSource)) src_ids.insert(ds.item(i).identity);
  for (int i : ds.domain_indices(Domain::kTarget)) tgt_ids.insert(ds.item(i).identity);
  CHECK(src_ids.size() == 10);
  CHECK(tgt_ids.size() == 10);
  for (int id : src_ids) CHECK(tgt_ids.count(id) == 0);

  Dataset ds2 = Dataset::synthesize(spec);
  REQUIRE(ds2.items().size() == ds.items().size());
  for (size_t i = 0; i < ds.items().size(); ++i) {
    CHECK(bit_equal(ds.item(i).pixels, ds2.item(i).pixels));
    for (int c = 0; c < kNumLandmarks; ++c) {
      CHECK(ds.item(i).keypoints.points[c].x == ds2.item(i).keypoints.points[c].x);
      CHECK(ds.item(i).keypoints.points[c].y == ds2.item(i).keypoints.points[c].y);
    }
  }
}

TEST_CASE("synthesize: degenerate specs are rejected") {
  SynthSpec spec = small_spec();
  spec.source_identities = 0;
  CHECK_THROWS_AS(Dataset::synthesize(spec), std::invalid_argument);
  spec = small_spec();
  spec.source_images_per_identity = 1;
  CHECK_THROWS_AS(Dataset::synthesize(spec), std::invalid_argument);
  spec = small_spec();
  spec.source_identities = 1;
  CHECK_THROWS_AS(Dataset::synthesize(spec), std::invalid_argument);
}

TEST_CASE("domain style transform applies to target images only") {
  SynthSpec spec = small_spec();
  SynthSpec neutral = spec;
  neutral.target_style = spec.source_style;
  Dataset styled = Dataset::synthesize(spec);
  Dataset plain = Dataset::synthesize(neutral);
  bool target_differs = false;
  for (size_t i = 0; i < styled.items().size(); ++i) {
    bool same = bit_equal(styled.item(i).pixels, plain.item(i).pixels);
    if (styled.item(i).domain == Domain::kSource) {
      CHECK(same);
    } else if (!same) {
      target_differs = true;
    }
  }
  CHECK(target_differs);
}

TEST_CASE("triplet sampler: contract holds on every draw") {
  SynthSpec spec = small_spec();
  Dataset ds = Dataset::synthesize(spec);
  Rng rng(123);
  for (int i = 0; i < 10000; ++i) {
    Triplet t = sample_triplet(ds, rng);
    const auto& a = ds.item(t.anchor);
    const auto& p = ds.item(t.positive);
    const auto& n = ds.item(t.negative);
    REQUIRE(t.anchor != t.positive);
    REQUIRE(a.identity == p.identity);
    REQUIRE(a.identity != n.identity);
    REQUIRE(a.domain == Domain::kSource);
    REQUIRE(p.domain == Domain::kSource);
    REQUIRE(n.domain == Domain::kSource);
  }
}

TEST_CASE("triplet sampler: every identity appears as anchor") {
  SynthSpec spec = small_spec();
  spec.source_identities = 5;
  Dataset ds = Dataset::synthesize(spec);
  Rng rng(7);
  std::set<int> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(ds.item(sample_triplet(ds, rng).anchor).identity);
  CHECK(seen.size() == 5);
}

TEST_CASE("pose pair: same identity, distinct images, exact pose maps") {
  SynthSpec spec = small_spec();
  Dataset ds = Dataset::synthesize(spec);
  Rng rng(55);
  for (int i = 0; i < 200; ++i) {
    PosePair pp = sample_pose_pair(ds, rng);
    REQUIRE(pp.first != pp.second);
    REQUIRE(ds.item(pp.first).identity == ds.item(pp.second).identity);
    Tensor expected =
        render_pose_map(ds.item(pp.first).keypoints, spec.sigma, spec.height, spec.width);
    CHECK(bit_equal(pp.pose_first, expected));
  }
}

TEST_CASE("dataset save/load round-trips bit-exactly") {
  SynthSpec spec = small_spec();
  Dataset ds = Dataset::synthesize(spec);
  testutil::TempDir tmp("pdanet_ds");
  save_dataset(ds, tmp.path());
  Dataset back = load_dataset(tmp.path());
  REQUIRE(back.items().size() == ds.items().size());
  for (size_t i = 0; i < ds.items().size(); ++i) {
    CHECK(bit_equal(back.item(i).pixels, ds.item(i).pixels));
    CHECK(back.item(i).identity == ds.item(i).identity);
    CHECK(back.item(i).domain == ds.item(i).domain);
    for (int c = 0; c < kNumLandmarks; ++c) {
      CHECK(back.item(i).keypoints.points[c].x == ds.item(i).keypoints.points[c].x);
      CHECK(back.item(i).keypoints.points[c].y == ds.item(i).keypoints.points[c].y);
      CHECK(back.item(i).keypoints.points[c].visible == ds.item(i).keypoints.points[c].visible);
    }
  }
  CHECK(back.spec().seed == spec.seed);
}

TEST_CASE("canonical poses differ between arms up and arms down") {
  SynthSpec spec = small_spec();
  Keypoints up = canonical_pose(spec, true);
  Keypoints down = canonical_pose(spec, false);
  // Wrists end up above the shoulders only in the arms-up pose.
  CHECK(up.points[4].y < up.points[2].y);
  CHECK(down.points[4].y > down.points[2].y);
}
