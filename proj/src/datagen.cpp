// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/datagen.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pdanet/image_io.hpp"
#include "pdanet/json_util.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pdanet::datagen {

namespace {

uint64_t splitmix64(uint64_t x) {
  x += 0x9E3779B97F4A7C15ull;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
  return x ^ (x >> 31);
}

// Independent stream for (seed, tag, index); keeps synthesis order-free.
Rng derived_rng(uint64_t seed, uint64_t tag, uint64_t index) {
  return Rng(splitmix64(splitmix64(seed ^ (tag * 0xA24BAED4963EE407ull)) ^ index));
}

double hash01(uint64_t x) { return static_cast<double>(splitmix64(x) >> 11) * 0x1.0p-53; }

void hsv_to_rgb(double h, double s, double v, double* rgb) {
  h = h - std::floor(h);
  double c = v * s;
  double hp = h * 6.0;
  double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1) {
    r = c; g = x;
  } else if (hp < 2) {
    r = x; g = c;
  } else if (hp < 3) {
    g = c; b = x;
  } else if (hp < 4) {
    g = x; b = c;
  } else if (hp < 5) {
    r = x; b = c;
  } else {
    r = c; b = x;
  }
  double m = v - c;
  rgb[0] = r + m;
  rgb[1] = g + m;
  rgb[2] = b + m;
}

struct Vec2 {
  double x = 0.0, y = 0.0;
};

Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

Vec2 rotate(Vec2 v, double ang) {
  double c = std::cos(ang), s = std::sin(ang);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

double dist_point_segment(Vec2 p, Vec2 a, Vec2 b) {
  Vec2 ab = b - a;
  double len2 = ab.x * ab.x + ab.y * ab.y;
  double t = len2 > 0.0 ? ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  Vec2 q = a + t * ab;
  Vec2 d = p - q;
  return std::sqrt(d.x * d.x + d.y * d.y);
}

// Rotation of an RGB vector about the gray axis (hue rotation).
void hue_rotate(double* rgb, double theta) {
  const double c = std::cos(theta), s = std::sin(theta);
  const double a00 = c + (1.0 - c) / 3.0;
  const double a01 = (1.0 - c) / 3.0 - s / std::sqrt(3.0);
  const double a02 = (1.0 - c) / 3.0 + s / std::sqrt(3.0);
  double r = rgb[0], g = rgb[1], b = rgb[2];
  rgb[0] = a00 * r + a01 * g + a02 * b;
  rgb[1] = a02 * r + a00 * g + a01 * b;
  rgb[2] = a01 * r + a02 * g + a00 * b;
}

constexpr double kPi = 3.14159265358979323846;

}  // namespace

// ---- keypoints / pose maps -------------------------------------------------

void Keypoints::validate(int height, int width) const {
  for (int c = 0; c < kNumLandmarks; ++c) {
    const KeypointEntry& p = points[c];
    if (!p.visible) continue;
    if (p.x < 0.0 || p.x >= width || p.y < 0.0 || p.y >= height)
      throw std::invalid_argument("keypoint " + std::to_string(c) + " out of bounds: (" +
                                  std::to_string(p.x) + "," + std::to_string(p.y) + ")");
  }
}

Tensor render_pose_map(const Keypoints& kp, double sigma, int height, int width) {
  require(sigma > 0.0, "render_pose_map: sigma must be positive");
  kp.validate(height, width);
  Tensor map({kNumLandmarks, height, width});
  const double inv = 1.0 / (2.0 * sigma * sigma);
  for (int c = 0; c < kNumLandmarks; ++c) {
    if (!kp.points[c].visible) continue;
    const double xc = kp.points[c].x, yc = kp.points[c].y;
    double* ch = &map.data[static_cast<int64_t>(c) * height * width];
    for (int y = 0; y < height; ++y) {
      const double dy2 = (y - yc) * (y - yc);
      for (int x = 0; x < width; ++x) {
        const double dx = x - xc;
        ch[static_cast<int64_t>(y) * width + x] = std::exp(-(dx * dx + dy2) * inv);
      }
    }
  }
  return map;
}

// ---- spec ------------------------------------------------------------------

void SynthSpec::validate() const {
  require(height >= 16 && width >= 8, "SynthSpec: image size too small");
  require(height % 8 == 0 && width % 8 == 0, "SynthSpec: dims must be multiples of 8");
  require(sigma > 0.0, "SynthSpec: sigma must be positive");
  require(source_identities >= 2, "SynthSpec: need >= 2 source identities");
  require(source_images_per_identity >= 2,
          "SynthSpec: need >= 2 source images per identity (triplet and pose-pair sampling)");
  require(target_identities >= 1 && target_images_per_identity >= 1,
          "SynthSpec: target domain must be non-empty");
  require(pose_variation >= 0.0 && pose_variation <= 2.0,
          "SynthSpec: pose_variation outside [0,2]");
}

// ---- appearance / pose -----------------------------------------------------

Appearance identity_appearance(const SynthSpec& spec, int identity) {
  Rng rng = derived_rng(spec.seed, 0xA99EA3ull, static_cast<uint64_t>(identity));
  Appearance ap;
  // Low-discrepancy hue assignment keeps identities well separated in color
  // space while both domains draw from the same distribution.
  const double golden = 0.61803398874989484820;
  double torso_hue = std::fmod(identity * golden + rng.uniform() * 0.04, 1.0);
  double leg_hue = std::fmod(torso_hue + 0.3 + 0.4 * rng.uniform(), 1.0);
  double arm_spread = 0.06 + 0.06 * rng.uniform();
  double sat = rng.uniform(0.6, 0.95);
  double val = rng.uniform(0.5, 0.9);
  hsv_to_rgb(torso_hue, sat, val, ap.torso_rgb);
  hsv_to_rgb(leg_hue, rng.uniform(0.5, 0.9), rng.uniform(0.45, 0.85), ap.leg_rgb);
  hsv_to_rgb(torso_hue + arm_spread, sat, std::min(1.0, val + 0.1), ap.arm_l_rgb);
  hsv_to_rgb(torso_hue - arm_spread, sat, std::max(0.2, val - 0.1), ap.arm_r_rgb);
  hsv_to_rgb(rng.uniform(0.07, 0.12), rng.uniform(0.3, 0.55), rng.uniform(0.7, 0.95),
             ap.skin_rgb);
  ap.body_scale = rng.uniform(0.88, 1.0);
  ap.torso_width = rng.uniform(0.85, 1.2);
  ap.limb_radius = rng.uniform(1.5, 2.3);
  ap.head_radius = rng.uniform(3.2, 4.4);
  ap.shoulder_factor = rng.uniform(0.9, 1.15);
  ap.hip_factor = rng.uniform(0.85, 1.1);
  return ap;
}

namespace {

struct Skeleton {
  Vec2 p[kNumLandmarks];
};

// Joint indices, OpenPose order.
enum : int {
  kNose = 0, kNeck = 1, kRSho = 2, kRElb = 3, kRWri = 4, kLSho = 5, kLElb = 6, kLWri = 7,
  kRHip = 8, kRKnee = 9, kRAnk = 10, kLHip = 11, kLKnee = 12, kLAnk = 13,
  kREye = 14, kLEye = 15, kREar = 16, kLEar = 17
};

Keypoints skeleton_to_keypoints(const Skeleton& sk, int height, int width) {
  Keypoints kp;
  for (int c = 0; c < kNumLandmarks; ++c) {
    double x = std::clamp(sk.p[c].x, 1.0, width - 2.0);
    double y = std::clamp(sk.p[c].y, 1.0, height - 2.0);
    kp.points[c] = {std::round(x), std::round(y), true};
  }
  return kp;
}

Skeleton build_skeleton(const SynthSpec& spec, double body_scale, double shoulder_f,
                        double hip_f, double lean, const double arm_ang[2],
                        const double elbow_bend[2], const double thigh_ang[2],
                        const double knee_bend[2], Vec2 jitter) {
  const double b = 0.78 * spec.height * body_scale;
  Skeleton sk;
  Vec2 hip_c{spec.width * 0.5 + jitter.x, (spec.height - b) * 0.5 + 0.55 * b + jitter.y};
  Vec2 up = rotate({0.0, -1.0}, lean);
  Vec2 neck = hip_c + (0.37 * b) * up;
  Vec2 head_c = neck + (0.115 * b) * up;
  sk.p[kNeck] = neck;
  sk.p[kNose] = head_c + Vec2{0.0, 0.01 * b};
  Vec2 side = rotate(up, kPi / 2.0);  // unit vector to the figure's left on screen
  sk.p[kREye] = head_c + (-0.022 * b) * side + Vec2{0.0, -0.005 * b};
  sk.p[kLEye] = head_c + (0.022 * b) * side + Vec2{0.0, -0.005 * b};
  sk.p[kREar] = head_c + (-0.045 * b) * side;
  sk.p[kLEar] = head_c + (0.045 * b) * side;

  const double sho_half = 0.155 * b * shoulder_f;
  sk.p[kRSho] = neck + (-sho_half) * side + Vec2{0.0, 0.02 * b};
  sk.p[kLSho] = neck + (sho_half)*side + Vec2{0.0, 0.02 * b};
  const double hip_half = 0.095 * b * hip_f;
  sk.p[kRHip] = hip_c + (-hip_half) * side;
  sk.p[kLHip] = hip_c + (hip_half)*side;

  const double l_ua = 0.20 * b, l_fa = 0.18 * b;
  const double l_th = 0.24 * b, l_sh = 0.22 * b;
  // Arm angle 0 means hanging down; positive values swing outward/up.
  for (int s = 0; s < 2; ++s) {
    int sho = s == 0 ? kRSho : kLSho;
    int elb = s == 0 ? kRElb : kLElb;
    int wri = s == 0 ? kRWri : kLWri;
    double outward = s == 0 ? -1.0 : 1.0;
    Vec2 dir = rotate({0.0, 1.0}, outward * arm_ang[s]);
    sk.p[elb] = sk.p[sho] + l_ua * dir;
    Vec2 dir2 = rotate(dir, outward * elbow_bend[s]);
    sk.p[wri] = sk.p[elb] + l_fa * dir2;
  }
  for (int s = 0; s < 2; ++s) {
    int hip = s == 0 ? kRHip : kLHip;
    int knee = s == 0 ? kRKnee : kLKnee;
    int ank = s == 0 ? kRAnk : kLAnk;
    double outward = s == 0 ? -1.0 : 1.0;
    Vec2 dir = rotate({0.0, 1.0}, outward * thigh_ang[s]);
    sk.p[knee] = sk.p[hip] + l_th * dir;
    Vec2 dir2 = rotate(dir, outward * knee_bend[s]);
    sk.p[ank] = sk.p[knee] + l_sh * dir2;
  }
  return sk;
}

}  // namespace

Keypoints sample_pose(const SynthSpec& spec, Rng& rng) {
  const double v = spec.pose_variation;
  double lean = rng.uniform(-0.12, 0.12) * v;
  double arm_ang[2], elbow_bend[2], thigh_ang[2], knee_bend[2];
  for (int s = 0; s < 2; ++s) {
    double mode = rng.uniform();
    if (mode < 0.45)
      arm_ang[s] = rng.uniform(0.05, 0.45) * v;  // hanging
    else if (mode < 0.8)
      arm_ang[s] = rng.uniform(0.9, 1.6) * v;  // raised outward
    else
      arm_ang[s] = rng.uniform(2.2, 2.9) * v;  // overhead
    elbow_bend[s] = rng.uniform(-0.2, 0.9) * v;
    thigh_ang[s] = rng.uniform(0.02, 0.45) * v;
    knee_bend[s] = rng.uniform(-0.35, 0.15) * v;
  }
  Vec2 jitter{rng.uniform(-2.0, 2.0), rng.uniform(-1.5, 1.5)};
  // Body proportions belong to the identity; use neutral values here and let
  // render_avatar place limbs from the keypoints alone.
  Skeleton sk = build_skeleton(spec, 0.94, 1.0, 1.0, lean, arm_ang, elbow_bend, thigh_ang,
                               knee_bend, jitter);
  return skeleton_to_keypoints(sk, spec.height, spec.width);
}

Keypoints canonical_pose(const SynthSpec& spec, bool arms_up) {
  double arm_ang[2], elbow_bend[2] = {0.1, 0.1};
  double thigh_ang[2] = {0.15, 0.15}, knee_bend[2] = {0.0, 0.0};
  arm_ang[0] = arm_ang[1] = arms_up ? 2.6 : 0.15;
  Skeleton sk = build_skeleton(spec, 0.94, 1.0, 1.0, 0.0, arm_ang, elbow_bend, thigh_ang,
                               knee_bend, {0.0, 0.0});
  return skeleton_to_keypoints(sk, spec.height, spec.width);
}

// ---- rendering -------------------------------------------------------------

namespace {

struct Capsule {
  Vec2 a, b;
  double radius;
  const double* rgb;
};

void background_pixel(const StyleParams& st, int x, int y, uint64_t salt, double* rgb) {
  double base[3] = {0.35 + 0.25 * hash01(salt ^ 0x11ull), 0.35 + 0.25 * hash01(salt ^ 0x22ull),
                    0.35 + 0.25 * hash01(salt ^ 0x33ull)};
  double s = st.background_strength;
  switch (st.background) {
    case 1: {  // diagonal stripes
      int band = ((x + y) / 5) % 2;
      double n = 0.08 * (hash01(salt ^ (static_cast<uint64_t>(y) * 92821ull + x)) - 0.5);
      for (int c = 0; c < 3; ++c) rgb[c] = base[c] + (band ? s : -s) + n;
      break;
    }
    case 2: {  // checker
      int band = ((x / 6) + (y / 6)) % 2;
      for (int c = 0; c < 3; ++c) rgb[c] = base[c] + (band ? s : -s);
      break;
    }
    default: {  // soft waves
      double phase = 2.0 * kPi * hash01(salt ^ 0x44ull);
      double f = std::sin(2.0 * kPi * (0.05 * x + 0.03 * y) + phase);
      double g = std::sin(2.0 * kPi * (0.015 * y) + 0.7 * phase);
      for (int c = 0; c < 3; ++c) rgb[c] = base[c] + s * 0.5 * (f + 0.6 * g);
      break;
    }
  }
}

void composite(double* dst, const double* rgb, double alpha) {
  for (int c = 0; c < 3; ++c) dst[c] = dst[c] * (1.0 - alpha) + rgb[c] * alpha;
}

}  // namespace

Tensor render_avatar(const Appearance& ap, const Keypoints& kp, const StyleParams& style,
                     int height, int width, uint64_t texture_salt) {
  kp.validate(height, width);
  Vec2 p[kNumLandmarks];
  for (int c = 0; c < kNumLandmarks; ++c) p[c] = {kp.points[c].x, kp.points[c].y};

  const double lr = ap.limb_radius;
  Vec2 hip_c = 0.5 * (p[kRHip] + p[kLHip]);
  double darker[4][3];
  const double* limb_cols[4] = {ap.leg_rgb, ap.arm_l_rgb, ap.arm_r_rgb, ap.torso_rgb};
  for (int i = 0; i < 4; ++i)
    for (int c = 0; c < 3; ++c) darker[i][c] = limb_cols[i][c] * 0.55;

  // Draw order is back to front.
  std::vector<Capsule> caps;
  caps.push_back({p[kRHip], p[kRKnee], lr, ap.leg_rgb});
  caps.push_back({p[kRKnee], p[kRAnk], lr * 0.9, ap.leg_rgb});
  caps.push_back({p[kLHip], p[kLKnee], lr, ap.leg_rgb});
  caps.push_back({p[kLKnee], p[kLAnk], lr * 0.9, ap.leg_rgb});
  caps.push_back({p[kNeck], hip_c, 3.1 * ap.torso_width, ap.torso_rgb});
  caps.push_back({p[kRSho], p[kLSho], lr, ap.torso_rgb});
  caps.push_back({p[kRSho], p[kRElb], lr * 0.95, ap.arm_r_rgb});
  caps.push_back({p[kRElb], p[kRWri], lr * 0.85, ap.arm_r_rgb});
  caps.push_back({p[kLSho], p[kLElb], lr * 0.95, ap.arm_l_rgb});
  caps.push_back({p[kLElb], p[kLWri], lr * 0.85, ap.arm_l_rgb});

  struct Dot {
    Vec2 at;
    double r;
    const double* rgb;
  };
  std::vector<Dot> dots;
  dots.push_back({p[kRKnee], 1.3, darker[0]});
  dots.push_back({p[kLKnee], 1.3, darker[0]});
  dots.push_back({p[kRAnk], 1.2, darker[0]});
  dots.push_back({p[kLAnk], 1.2, darker[0]});
  dots.push_back({p[kRElb], 1.2, darker[2]});
  dots.push_back({p[kLElb], 1.2, darker[1]});
  dots.push_back({p[kRWri], 1.2, ap.skin_rgb});
  dots.push_back({p[kLWri], 1.2, ap.skin_rgb});
  dots.push_back({p[kRHip], 1.3, darker[3]});
  dots.push_back({p[kLHip], 1.3, darker[3]});
  dots.push_back({p[kRSho], 1.3, darker[3]});
  dots.push_back({p[kLSho], 1.3, darker[3]});

  Vec2 head_c = p[kNose] + Vec2{0.0, -1.0};
  double eye_col[3] = {0.05, 0.05, 0.08};
  double ear_col[3];
  for (int c = 0; c < 3; ++c) ear_col[c] = ap.skin_rgb[c] * 0.7;

  Tensor img({3, height, width});
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      double px[3];
      background_pixel(style, x, y, texture_salt, px);
      Vec2 q{static_cast<double>(x), static_cast<double>(y)};
      for (const Capsule& cp : caps) {
        double d = dist_point_segment(q, cp.a, cp.b);
        double alpha = std::clamp(cp.radius + 0.5 - d, 0.0, 1.0);
        if (alpha > 0.0) composite(px, cp.rgb, alpha);
      }
      {
        Vec2 d2 = q - head_c;
        double d = std::sqrt(d2.x * d2.x + d2.y * d2.y);
        double alpha = std::clamp(ap.head_radius + 0.5 - d, 0.0, 1.0);
        if (alpha > 0.0) composite(px, ap.skin_rgb, alpha);
      }
      for (const Dot& dt : dots) {
        Vec2 d2 = q - dt.at;
        double d = std::sqrt(d2.x * d2.x + d2.y * d2.y);
        double alpha = std::clamp(dt.r + 0.5 - d, 0.0, 1.0);
        if (alpha > 0.0) composite(px, dt.rgb, alpha);
      }
      for (int e : {kREye, kLEye}) {
        Vec2 d2 = q - p[e];
        double d = std::sqrt(d2.x * d2.x + d2.y * d2.y);
        double alpha = std::clamp(1.1 + 0.5 - d, 0.0, 1.0);
        if (alpha > 0.0) composite(px, eye_col, alpha);
      }
      for (int e : {kREar, kLEar}) {
        Vec2 d2 = q - p[e];
        double d = std::sqrt(d2.x * d2.x + d2.y * d2.y);
        double alpha = std::clamp(1.0 + 0.5 - d, 0.0, 1.0);
        if (alpha > 0.0) composite(px, ear_col, alpha);
      }

      // Domain style: hue rotation, contrast, brightness on [-1,1] values.
      double out[3];
      for (int c = 0; c < 3; ++c) out[c] = px[c] * 2.0 - 1.0;
      if (style.hue_shift != 0.0) hue_rotate(out, style.hue_shift);
      for (int c = 0; c < 3; ++c) {
        double v = out[c] * style.contrast + style.brightness;
        v = std::clamp(v, -1.0, 1.0);
        // Snap to the 8-bit lattice so persisted datasets round-trip exactly.
        img.data[(static_cast<int64_t>(c) * height + y) * width + x] =
            dequantize_unit(quantize_unit(v));
      }
    }
  }
  return img;
}

// ---- dataset ---------------------------------------------------------------

void Dataset::index_items() {
  source_indices_.clear();
  target_indices_.clear();
  by_identity_.clear();
  for (const ImageRecord& r : items_) {
    (r.domain == Domain::kSource ? source_indices_ : target_indices_).push_back(r.index);
    by_identity_[r.identity].push_back(r.index);
  }
}

Dataset Dataset::synthesize(const SynthSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.spec_ = spec;
  int index = 0;
  for (Domain dom : {Domain::kSource, Domain::kTarget}) {
    const bool src = dom == Domain::kSource;
    const int n_ids = src ? spec.source_identities : spec.target_identities;
    const int n_imgs = src ? spec.source_images_per_identity : spec.target_images_per_identity;
    const StyleParams& style = src ? spec.source_style : spec.target_style;
    const int id_base = src ? 0 : spec.source_identities;
    for (int i = 0; i < n_ids; ++i) {
      const int identity = id_base + i;
      Appearance ap = identity_appearance(spec, identity);
      for (int k = 0; k < n_imgs; ++k) {
        Rng rng = derived_rng(spec.seed, src ? 0x50ull : 0x54ull,
                              static_cast<uint64_t>(identity) * 100003ull + k);
        Keypoints kp = sample_pose(spec, rng);
        uint64_t salt = rng.raw();
        ImageRecord rec;
        rec.pixels = render_avatar(ap, kp, style, spec.height, spec.width, salt);
        rec.keypoints = kp;
        rec.identity = identity;
        rec.domain = dom;
        rec.index = index++;
        ds.items_.push_back(std::move(rec));
      }
    }
  }
  ds.index_items();
  return ds;
}

std::vector<int> Dataset::identities(Domain d) const {
  std::vector<int> ids;
  for (const auto& [id, idxs] : by_identity_) {
    if (!idxs.empty() && items_[idxs[0]].domain == d) ids.push_back(id);
  }
  return ids;
}

// ---- samplers --------------------------------------------------------------

namespace {

int draw_same_identity_other(const Dataset& ds, int anchor, Rng& rng) {
  const std::vector<int>& mates = ds.images_of_identity(ds.item(anchor).identity);
  require(mates.size() >= 2, "sampler: identity has a single image");
  int j = static_cast<int>(rng.randint(mates.size() - 1));
  // Skip the anchor's own slot.
  int count = 0;
  for (int idx : mates) {
    if (idx == anchor) continue;
    if (count == j) return idx;
    ++count;
  }
  return mates.front();  // unreachable
}

}  // namespace

Triplet sample_triplet(const Dataset& ds, Rng& rng) {
  const std::vector<int>& src = ds.domain_indices(Domain::kSource);
  require(!src.empty(), "sample_triplet: empty source domain");
  Triplet t;
  t.anchor = src[rng.randint(src.size())];
  t.positive = draw_same_identity_other(ds, t.anchor, rng);
  const int anchor_id = ds.item(t.anchor).identity;
  const int same_count = static_cast<int>(ds.images_of_identity(anchor_id).size());
  const int other_count = static_cast<int>(src.size()) - same_count;
  require(other_count > 0, "sample_triplet: no negative candidates");
  int j = static_cast<int>(rng.randint(other_count));
  int count = 0;
  for (int idx : src) {
    if (ds.item(idx).identity == anchor_id) continue;
    if (count == j) {
      t.negative = idx;
      break;
    }
    ++count;
  }
  return t;
}

PosePair sample_pose_pair(const Dataset& ds, Rng& rng) {
  const std::vector<int>& src = ds.domain_indices(Domain::kSource);
  require(!src.empty(), "sample_pose_pair: empty source domain");
  PosePair pp;
  pp.first = src[rng.randint(src.size())];
  pp.second = draw_same_identity_other(ds, pp.first, rng);
  const SynthSpec& sp = ds.spec();
  pp.pose_first = render_pose_map(ds.item(pp.first).keypoints, sp.sigma, sp.height, sp.width);
  pp.pose_second = render_pose_map(ds.item(pp.second).keypoints, sp.sigma, sp.height, sp.width);
  return pp;
}

const Tensor& PoseMapCache::get(int index) {
  Tensor& slot = maps_.at(index);
  if (slot.empty()) {
    const SynthSpec& sp = ds_->spec();
    slot = render_pose_map(ds_->item(index).keypoints, sp.sigma, sp.height, sp.width);
  }
  return slot;
}

// ---- persistence -----------------------------------------------------------

namespace {

json style_to_json(const StyleParams& s) {
  return json{{"background", s.background},
              {"background_strength", s.background_strength},
              {"hue_shift", s.hue_shift},
              {"contrast", s.contrast},
              {"brightness", s.brightness}};
}

StyleParams style_from_json(const json& j, const std::string& context) {
  check_json_keys(j, {"background", "background_strength", "hue_shift", "contrast", "brightness"},
             context);
  StyleParams s;
  s.background = j.value("background", s.background);
  s.background_strength = j.value("background_strength", s.background_strength);
  s.hue_shift = j.value("hue_shift", s.hue_shift);
  s.contrast = j.value("contrast", s.contrast);
  s.brightness = j.value("brightness", s.brightness);
  return s;
}

}  // namespace

json spec_to_json(const SynthSpec& s) {
  return json{{"seed", s.seed},
              {"height", s.height},
              {"width", s.width},
              {"sigma", s.sigma},
              {"source_identities", s.source_identities},
              {"source_images_per_identity", s.source_images_per_identity},
              {"target_identities", s.target_identities},
              {"target_images_per_identity", s.target_images_per_identity},
              {"pose_variation", s.pose_variation},
              {"source_style", style_to_json(s.source_style)},
              {"target_style", style_to_json(s.target_style)}};
}

SynthSpec spec_from_json(const json& j) {
  check_json_keys(j,
             {"seed", "height", "width", "sigma", "source_identities",
              "source_images_per_identity", "target_identities", "target_images_per_identity",
              "pose_variation", "source_style", "target_style"},
             "data spec");
  SynthSpec s;
  s.seed = j.value("seed", s.seed);
  s.height = j.value("height", s.height);
  s.width = j.value("width", s.width);
  s.sigma = j.value("sigma", s.sigma);
  s.source_identities = j.value("source_identities", s.source_identities);
  s.source_images_per_identity =
      j.value("source_images_per_identity", s.source_images_per_identity);
  s.target_identities = j.value("target_identities", s.target_identities);
  s.target_images_per_identity =
      j.value("target_images_per_identity", s.target_images_per_identity);
  s.pose_variation = j.value("pose_variation", s.pose_variation);
  if (j.contains("source_style")) s.source_style = style_from_json(j["source_style"], "source_style");
  if (j.contains("target_style")) s.target_style = style_from_json(j["target_style"], "target_style");
  return s;
}

void save_dataset(const Dataset& ds, const std::string& dir) {
  fs::create_directories(fs::path(dir) / "images" / "source");
  fs::create_directories(fs::path(dir) / "images" / "target");

  json meta;
  meta["format_version"] = 1;
  meta["spec"] = spec_to_json(ds.spec());
  meta["height"] = ds.height();
  meta["width"] = ds.width();
  json images = json::array();
  std::ofstream kpf(fs::path(dir) / "keypoints.jsonl");
  if (!kpf) throw std::runtime_error("save_dataset: cannot write keypoints.jsonl");
  for (const ImageRecord& r : ds.items()) {
    char name[64];
    std::snprintf(name, sizeof(name), "id%04d_im%04d.png", r.identity, r.index);
    std::string rel = std::string("images/") + domain_name(r.domain) + "/" + name;
    write_png((fs::path(dir) / rel).string(), to_u8(r.pixels));
    images.push_back(json{{"index", r.index},
                          {"file", rel},
                          {"identity", r.identity},
                          {"domain", domain_name(r.domain)}});
    json pts = json::array();
    for (const KeypointEntry& p : r.keypoints.points)
      pts.push_back(json::array({p.x, p.y, p.visible ? 1 : 0}));
    kpf << json{{"index", r.index}, {"points", pts}}.dump() << "\n";
  }
  meta["images"] = images;
  std::ofstream mf(fs::path(dir) / "meta.json");
  if (!mf) throw std::runtime_error("save_dataset: cannot write meta.json");
  mf << meta.dump(2) << "\n";
}

Dataset load_dataset(const std::string& dir) {
  std::ifstream mf(fs::path(dir) / "meta.json");
  if (!mf) throw std::runtime_error("load_dataset: missing meta.json in " + dir);
  json meta = json::parse(mf);
  Dataset ds;
  ds.spec_ = spec_from_json(meta.at("spec"));
  const int expected = static_cast<int>(meta.at("images").size());

  std::vector<Keypoints> kps(expected);
  {
    std::ifstream kpf(fs::path(dir) / "keypoints.jsonl");
    if (!kpf) throw std::runtime_error("load_dataset: missing keypoints.jsonl");
    std::string line;
    while (std::getline(kpf, line)) {
      if (line.empty()) continue;
      json rec = json::parse(line);
      int idx = rec.at("index").get<int>();
      const json& pts = rec.at("points");
      require(pts.size() == kNumLandmarks, "load_dataset: keypoint record length");
      for (int c = 0; c < kNumLandmarks; ++c) {
        kps.at(idx).points[c] = {pts[c][0].get<double>(), pts[c][1].get<double>(),
                                 pts[c][2].get<int>() != 0};
      }
    }
  }

  ds.items_.resize(expected);
  for (const json& im : meta.at("images")) {
    ImageRecord rec;
    rec.index = im.at("index").get<int>();
    rec.identity = im.at("identity").get<int>();
    rec.domain = im.at("domain").get<std::string>() == "source" ? Domain::kSource : Domain::kTarget;
    ImageU8 png = read_png((fs::path(dir) / im.at("file").get<std::string>()).string());
    require(png.height == ds.spec_.height && png.width == ds.spec_.width,
            "load_dataset: image size mismatch in " + im.at("file").get<std::string>());
    rec.pixels = from_u8(png);
    rec.keypoints = kps.at(rec.index);
    ds.items_.at(rec.index) = std::move(rec);
  }
  ds.index_items();
  return ds;
}

}  // namespace pdanet::datagen
