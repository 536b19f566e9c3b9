// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdanet/datagen.hpp"
#include "pdanet/networks.hpp"

namespace pdanet::evaluator {

// Gallery indices sorted by ascending Euclidean distance to the query;
// ties break toward the lower gallery index.
struct RankedList {
  std::vector<int> order;
};

// query_feats [Q,D], gallery_feats [G,D].
std::vector<RankedList> rank_gallery(const Tensor& query_feats, const Tensor& gallery_feats);

// Fraction of queries whose top-k gallery entries contain the query identity.
double cmc(const std::vector<RankedList>& ranked, const std::vector<int>& query_labels,
           const std::vector<int>& gallery_labels, int k);

// Interpolation-free AP: mean over the query's relevant items of
// (#relevant seen so far) / rank.
double average_precision(const RankedList& ranked, int query_label,
                         const std::vector<int>& gallery_labels);

double mean_average_precision(const std::vector<RankedList>& ranked,
                              const std::vector<int>& query_labels,
                              const std::vector<int>& gallery_labels,
                              std::vector<double>* per_query = nullptr);

struct EvalReport {
  double rank1 = 0.0, rank5 = 0.0, rank10 = 0.0;
  double map = 0.0;
  std::vector<double> per_query_ap;
  std::map<std::string, double> diagnostics;

  nlohmann::json to_json() const;
  std::string to_table() const;
};

// Batched content-feature extraction, [N,3,H,W] -> [N,d].
Tensor extract_features(const Model& model, const Tensor& images);

// Query/gallery split of the target domain: per identity, the first
// queries_per_id images (by index) are queries, the rest gallery.
struct Protocol {
  int queries_per_id = 2;
};
struct Split {
  std::vector<int> query_idx, gallery_idx;
};
Split make_target_split(const datagen::Dataset& ds, const Protocol& protocol);

// Full retrieval evaluation from features aligned with a split.
EvalReport evaluate_retrieval(const Tensor& query_feats, const std::vector<int>& query_labels,
                              const Tensor& gallery_feats,
                              const std::vector<int>& gallery_labels);

// Convenience: features via E_C on a target split of `ds`.
EvalReport evaluate_model(const Model& model, const datagen::Dataset& ds,
                          const Protocol& protocol = {});

// Test hook: one-hot identity features give the retrieval ceiling.
Tensor one_hot_features(const std::vector<int>& labels, int dim);

// ---- pose consistency diagnostic -------------------------------------------

// Reference render for probe (content item, pose item): content identity's
// appearance, the pose item's keypoints, the content domain's style. Both
// the score's templates and test oracles use this exact function.
Tensor oracle_render(const datagen::Dataset& ds, int content_index, int pose_index);

struct PoseConsistencyOptions {
  int num_probes = 48;
  double tolerance_px = 3.0;
  int search_radius = 10;
  int template_radius = 3;  // (2r+1)^2 patches
  uint64_t seed = 2024;
};

// Generated image for (content image, target pose map); defaults to the
// model's translate composition.
using GenerateFn =
    std::function<Tensor(const datagen::ImageRecord& content, const datagen::ImageRecord& pose,
                         const Tensor& pose_map)>;

// Fraction of probe keypoints whose re-detected location (windowed SSD
// template match against the reference render) lies within tolerance of the
// conditioning pose. In [0,1].
double pose_consistency(const Model& model, const datagen::Dataset& ds,
                        const PoseConsistencyOptions& opts = {},
                        const GenerateFn& generate_override = {});

}  // namespace pdanet::evaluator
