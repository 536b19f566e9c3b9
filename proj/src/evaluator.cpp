// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pdanet/translator.hpp"

using nlohmann::json;

namespace pdanet::evaluator {

std::vector<RankedList> rank_gallery(const Tensor& query_feats, const Tensor& gallery_feats) {
  require(query_feats.ndim() == 2 && gallery_feats.ndim() == 2,
          "rank_gallery: need [N,D] feature batches");
  require(query_feats.dim(1) == gallery_feats.dim(1),
          "rank_gallery: feature dim mismatch: query " + std::to_string(query_feats.dim(1)) +
              " vs gallery " + std::to_string(gallery_feats.dim(1)));
  const int q = query_feats.dim(0), g = gallery_feats.dim(0), d = query_feats.dim(1);
  require(g >= 1, "rank_gallery: empty gallery");

  std::vector<RankedList> out(q);
  std::vector<std::pair<double, int>> keyed(g);
  for (int i = 0; i < q; ++i) {
    for (int j = 0; j < g; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        double dlt = query_feats.at2(i, k) - gallery_feats.at2(j, k);
        s += dlt * dlt;
      }
      keyed[j] = {s, j};
    }
    std::sort(keyed.begin(), keyed.end());  // pair ordering = distance, then index
    out[i].order.resize(g);
    for (int j = 0; j < g; ++j) out[i].order[j] = keyed[j].second;
  }
  return out;
}

double cmc(const std::vector<RankedList>& ranked, const std::vector<int>& query_labels,
           const std::vector<int>& gallery_labels, int k) {
  require(!ranked.empty(), "cmc: no queries");
  require(ranked.size() == query_labels.size(), "cmc: labels misaligned with queries");
  const int g = static_cast<int>(gallery_labels.size());
  require(k >= 1 && k <= g, "cmc: k must be in [1, gallery size], got " + std::to_string(k));
  int hits = 0;
  for (size_t i = 0; i < ranked.size(); ++i) {
    require(static_cast<int>(ranked[i].order.size()) == g, "cmc: ranked list length mismatch");
    for (int r = 0; r < k; ++r) {
      if (gallery_labels[ranked[i].order[r]] == query_labels[i]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(ranked.size());
}

double average_precision(const RankedList& ranked, int query_label,
                         const std::vector<int>& gallery_labels) {
  int relevant = 0;
  double sum = 0.0;
  for (size_t r = 0; r < ranked.order.size(); ++r) {
    if (gallery_labels[ranked.order[r]] == query_label) {
      ++relevant;
      sum += static_cast<double>(relevant) / static_cast<double>(r + 1);
    }
  }
  require(relevant > 0, "average_precision: query has no relevant gallery items");
  return sum / static_cast<double>(relevant);
}

double mean_average_precision(const std::vector<RankedList>& ranked,
                              const std::vector<int>& query_labels,
                              const std::vector<int>& gallery_labels,
                              std::vector<double>* per_query) {
  require(!ranked.empty(), "mean_average_precision: no queries");
  require(ranked.size() == query_labels.size(), "mean_average_precision: label misalignment");
  double sum = 0.0;
  if (per_query) per_query->clear();
  for (size_t i = 0; i < ranked.size(); ++i) {
    double ap = average_precision(ranked[i], query_labels[i], gallery_labels);
    if (per_query) per_query->push_back(ap);
    sum += ap;
  }
  return sum / static_cast<double>(ranked.size());
}

json EvalReport::to_json() const {
  json j{{"rank1", rank1}, {"rank5", rank5}, {"rank10", rank10}, {"mAP", map}};
  j["per_query_ap"] = per_query_ap;
  for (const auto& [k, v] : diagnostics) j["diagnostics"][k] = v;
  return j;
}

std::string EvalReport::to_table() const {
  char buf[160];
  std::string out = "          Rank-1   Rank-5   Rank-10  mAP\n";
  std::snprintf(buf, sizeof(buf), "target    %-8.4f %-8.4f %-8.4f %-8.4f\n", rank1, rank5,
                rank10, map);
  out += buf;
  return out;
}

Tensor extract_features(const Model& model, const Tensor& images) {
  require(images.ndim() == 4, "extract_features: need [N,3,H,W]");
  const int n = images.dim(0);
  require(n >= 1, "extract_features: empty batch");
  const int chunk = 32;
  Tensor out({n, model.config().content_dim});
  for (int start = 0; start < n; start += chunk) {
    const int m = std::min(chunk, n - start);
    Tensor part({m, images.dim(1), images.dim(2), images.dim(3)});
    std::copy_n(images.data.begin() + static_cast<int64_t>(start) * images.numel() / n,
                part.numel(), part.data.begin());
    Tensor feats = model.encode_content(part);
    std::copy_n(feats.data.begin(), feats.numel(),
                out.data.begin() + static_cast<int64_t>(start) * model.config().content_dim);
  }
  return out;
}

Split make_target_split(const datagen::Dataset& ds, const Protocol& protocol) {
  require(protocol.queries_per_id >= 1, "make_target_split: queries_per_id must be >= 1");
  Split split;
  for (int id : ds.identities(datagen::Domain::kTarget)) {
    const std::vector<int>& items = ds.images_of_identity(id);
    require(static_cast<int>(items.size()) > protocol.queries_per_id,
            "make_target_split: identity " + std::to_string(id) +
                " needs more images than queries_per_id");
    for (size_t i = 0; i < items.size(); ++i) {
      if (static_cast<int>(i) < protocol.queries_per_id)
        split.query_idx.push_back(items[i]);
      else
        split.gallery_idx.push_back(items[i]);
    }
  }
  require(!split.query_idx.empty() && !split.gallery_idx.empty(),
          "make_target_split: empty split (no target identities?)");
  return split;
}

EvalReport evaluate_retrieval(const Tensor& query_feats, const std::vector<int>& query_labels,
                              const Tensor& gallery_feats,
                              const std::vector<int>& gallery_labels) {
  require(static_cast<int>(gallery_labels.size()) >= 10,
          "evaluate_retrieval: standard report needs a gallery of >= 10");
  std::vector<RankedList> ranked = rank_gallery(query_feats, gallery_feats);
  EvalReport rep;
  rep.rank1 = cmc(ranked, query_labels, gallery_labels, 1);
  rep.rank5 = cmc(ranked, query_labels, gallery_labels, 5);
  rep.rank10 = cmc(ranked, query_labels, gallery_labels, 10);
  rep.map = mean_average_precision(ranked, query_labels, gallery_labels, &rep.per_query_ap);
  return rep;
}

namespace {

Tensor gather_images(const datagen::Dataset& ds, const std::vector<int>& idx) {
  const int h = ds.height(), w = ds.width();
  Tensor out({static_cast<int>(idx.size()), 3, h, w});
  for (size_t i = 0; i < idx.size(); ++i)
    std::copy_n(ds.item(idx[i]).pixels.data.begin(), static_cast<int64_t>(3) * h * w,
                out.data.begin() + static_cast<int64_t>(i) * 3 * h * w);
  return out;
}

std::vector<int> gather_labels(const datagen::Dataset& ds, const std::vector<int>& idx) {
  std::vector<int> out;
  for (int i : idx) out.push_back(ds.item(i).identity);
  return out;
}

}  // namespace

EvalReport evaluate_model(const Model& model, const datagen::Dataset& ds,
                          const Protocol& protocol) {
  Split split = make_target_split(ds, protocol);
  Tensor qf = extract_features(model, gather_images(ds, split.query_idx));
  Tensor gf = extract_features(model, gather_images(ds, split.gallery_idx));
  return evaluate_retrieval(qf, gather_labels(ds, split.query_idx), gf,
                            gather_labels(ds, split.gallery_idx));
}

Tensor one_hot_features(const std::vector<int>& labels, int dim) {
  Tensor out({static_cast<int>(labels.size()), dim});
  for (size_t i = 0; i < labels.size(); ++i) out.at2(static_cast<int>(i), labels[i] % dim) = 1.0;
  return out;
}

// ---- pose consistency ---------------------------------------------------------

namespace {

uint64_t probe_salt(int content_index, int pose_index) {
  return 0x9E3779B97F4A7C15ull * static_cast<uint64_t>(content_index + 1) +
         0xD1B54A32D192ED03ull * static_cast<uint64_t>(pose_index + 1);
}

}  // namespace

Tensor oracle_render(const datagen::Dataset& ds, int content_index, int pose_index) {
  const datagen::ImageRecord& content = ds.item(content_index);
  const datagen::ImageRecord& pose = ds.item(pose_index);
  const datagen::SynthSpec& spec = ds.spec();
  const datagen::StyleParams& style = content.domain == datagen::Domain::kSource
                                          ? spec.source_style
                                          : spec.target_style;
  return datagen::render_avatar(datagen::identity_appearance(spec, content.identity),
                                pose.keypoints, style, spec.height, spec.width,
                                probe_salt(content_index, pose_index));
}

double pose_consistency(const Model& model, const datagen::Dataset& ds,
                        const PoseConsistencyOptions& opts,
                        const GenerateFn& generate_override) {
  require(opts.num_probes >= 1, "pose_consistency: need at least one probe");
  require(opts.tolerance_px > 0.0 && opts.search_radius >= 1,
          "pose_consistency: invalid tolerance/search radius");
  const int h = ds.height(), w = ds.width();
  const int tr = opts.template_radius;
  Rng rng(opts.seed);

  int64_t hits = 0, total = 0;
  for (int probe = 0; probe < opts.num_probes; ++probe) {
    const auto& all = ds.items();
    int content_index = static_cast<int>(rng.randint(all.size()));
    const datagen::Domain dom = all[content_index].domain;
    const std::vector<int>& same_domain = ds.domain_indices(dom);
    int pose_index = same_domain[rng.randint(same_domain.size())];

    const datagen::ImageRecord& content = ds.item(content_index);
    const datagen::ImageRecord& pose_rec = ds.item(pose_index);
    Tensor pose_map =
        datagen::render_pose_map(pose_rec.keypoints, ds.spec().sigma, h, w);

    Tensor generated = generate_override
                           ? generate_override(content, pose_rec, pose_map)
                           : translator::translate(model, content.pixels, pose_map, dom);
    require(generated.ndim() == 3 && generated.dim(1) == h && generated.dim(2) == w,
            "pose_consistency: generated image shape mismatch");

    Tensor reference = oracle_render(ds, content_index, pose_index);

    for (int c = 0; c < datagen::kNumLandmarks; ++c) {
      const datagen::KeypointEntry& kp = pose_rec.keypoints.points[c];
      if (!kp.visible) continue;
      const int cx = static_cast<int>(kp.x), cy = static_cast<int>(kp.y);

      // Template from the reference render around the expected location.
      double best = 1e300;
      int best_x = cx, best_y = cy;
      for (int oy = -opts.search_radius; oy <= opts.search_radius; ++oy) {
        for (int ox = -opts.search_radius; ox <= opts.search_radius; ++ox) {
          const int px = cx + ox, py = cy + oy;
          if (px - tr < 0 || px + tr >= w || py - tr < 0 || py + tr >= h) continue;
          double ssd = 0.0;
          for (int ch = 0; ch < 3; ++ch)
            for (int dy = -tr; dy <= tr; ++dy)
              for (int dx = -tr; dx <= tr; ++dx) {
                const int ty = cy + dy, tx = cx + dx;
                if (ty < 0 || ty >= h || tx < 0 || tx >= w) continue;
                const double tmpl =
                    reference.data[(static_cast<int64_t>(ch) * h + ty) * w + tx];
                const double img =
                    generated.data[(static_cast<int64_t>(ch) * h + py + dy) * w + px + dx];
                const double d = tmpl - img;
                ssd += d * d;
              }
          if (ssd < best) {
            best = ssd;
            best_x = px;
            best_y = py;
          }
        }
      }
      const double dist = std::hypot(static_cast<double>(best_x - cx),
                                     static_cast<double>(best_y - cy));
      if (dist <= opts.tolerance_px) ++hits;
      ++total;
    }
  }
  return total == 0 ? 0.0 : static_cast<double>(hits) / static_cast<double>(total);
}

}  // namespace pdanet::evaluator
