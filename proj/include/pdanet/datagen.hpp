// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "pdanet/rng.hpp"
#include "pdanet/tensor.hpp"

namespace pdanet::datagen {

// OpenPose/COCO landmark layout.
constexpr int kNumLandmarks = 18;

enum class Domain { kSource, kTarget };

inline const char* domain_name(Domain d) { return d == Domain::kSource ? "source" : "target"; }

struct KeypointEntry {
  double x = 0.0;
  double y = 0.0;
  bool visible = true;
};

struct Keypoints {
  std::array<KeypointEntry, kNumLandmarks> points;

  // Throws invalid_argument when a visible point is outside [0,w) x [0,h).
  void validate(int height, int width) const;
};

// Renders the per-landmark Gaussian heatmap stack, [kNumLandmarks, H, W].
// Channel c is exp(-((x-xc)^2 + (y-yc)^2) / (2 sigma^2)) for a visible
// landmark and all zeros for an invisible one.
Tensor render_pose_map(const Keypoints& kp, double sigma, int height, int width);

// Per-domain rendering style. The target domain's defaults produce the
// cross-dataset gap: busier background, rotated hues, compressed contrast.
struct StyleParams {
  int background = 0;  // 0 soft waves, 1 diagonal stripes, 2 checker
  double background_strength = 0.22;
  double hue_shift = 0.0;  // radians, rotation of RGB about the gray axis
  double contrast = 1.0;
  double brightness = 0.0;
};

struct SynthSpec {
  uint64_t seed = 7;
  int height = 64;
  int width = 32;
  double sigma = 1.5;  // pose heatmap bandwidth in pixels
  int source_identities = 50;
  int source_images_per_identity = 6;
  int target_identities = 50;
  int target_images_per_identity = 6;
  double pose_variation = 1.0;  // scales joint angle ranges
  StyleParams source_style{0, 0.22, 0.0, 1.0, 0.0};
  StyleParams target_style{1, 0.45, 2.2, 0.72, 0.06};

  void validate() const;  // throws invalid_argument on degenerate specs
};

// Identity appearance: colors and body proportions. Deterministic function
// of (spec.seed, identity id), so evaluation code can re-derive it.
struct Appearance {
  double torso_rgb[3];
  double leg_rgb[3];
  double arm_l_rgb[3];
  double arm_r_rgb[3];
  double skin_rgb[3];
  double body_scale = 1.0;
  double torso_width = 1.0;
  double limb_radius = 2.0;
  double head_radius = 4.0;
  double shoulder_factor = 1.0;
  double hip_factor = 1.0;
};

Appearance identity_appearance(const SynthSpec& spec, int identity);

// Samples an articulated stick-figure pose; keypoints are snapped to integer
// pixel coordinates inside the canvas.
Keypoints sample_pose(const SynthSpec& spec, Rng& rng);

// Canonical poses for diagnostics (arms raised vs lowered).
Keypoints canonical_pose(const SynthSpec& spec, bool arms_up);

// Renders one avatar over a procedural background and applies the domain
// style transform. Output [3,H,W] in [-1,1]; values are exactly
// representable as dequantized 8-bit so disk round-trips are lossless.
Tensor render_avatar(const Appearance& ap, const Keypoints& kp, const StyleParams& style,
                     int height, int width, uint64_t texture_salt);

struct ImageRecord {
  Tensor pixels;  // [3,H,W]
  Keypoints keypoints;
  int identity = 0;
  Domain domain = Domain::kSource;
  int index = 0;  // position in Dataset::items
};

// Immutable after construction. Identity ids are disjoint across domains:
// source ids are 0..S-1, target ids S..S+T-1.
class Dataset {
 public:
  static Dataset synthesize(const SynthSpec& spec);

  const SynthSpec& spec() const { return spec_; }
  int height() const { return spec_.height; }
  int width() const { return spec_.width; }
  const std::vector<ImageRecord>& items() const { return items_; }
  const ImageRecord& item(int i) const { return items_.at(i); }
  const std::vector<int>& domain_indices(Domain d) const {
    return d == Domain::kSource ? source_indices_ : target_indices_;
  }
  const std::vector<int>& images_of_identity(int id) const { return by_identity_.at(id); }
  std::vector<int> identities(Domain d) const;

  friend Dataset load_dataset(const std::string& dir);

 private:
  Dataset() = default;
  void index_items();

  SynthSpec spec_;
  std::vector<ImageRecord> items_;
  std::vector<int> source_indices_;
  std::vector<int> target_indices_;
  std::map<int, std::vector<int>> by_identity_;
};

struct Triplet {
  int anchor = -1;
  int positive = -1;
  int negative = -1;
};

// Draws a source-domain triplet: anchor/positive share an identity but are
// distinct images, negative has a different identity.
Triplet sample_triplet(const Dataset& ds, Rng& rng);

// Two distinct images of one source identity plus their pose maps.
struct PosePair {
  int first = -1;
  int second = -1;
  Tensor pose_first;
  Tensor pose_second;
};
PosePair sample_pose_pair(const Dataset& ds, Rng& rng);

// Lazily renders and caches pose maps per item index.
class PoseMapCache {
 public:
  explicit PoseMapCache(const Dataset& ds) : ds_(&ds), maps_(ds.items().size()) {}
  const Tensor& get(int index);

 private:
  const Dataset* ds_;
  std::vector<Tensor> maps_;
};

// Directory layout: meta.json, keypoints.jsonl, images/<domain>/*.png.
void save_dataset(const Dataset& ds, const std::string& dir);
Dataset load_dataset(const std::string& dir);

nlohmann::json spec_to_json(const SynthSpec& s);
SynthSpec spec_from_json(const nlohmann::json& j);

}  // namespace pdanet::datagen
