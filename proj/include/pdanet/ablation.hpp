// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>
#include <vector>

#include "pdanet/evaluator.hpp"
#include "pdanet/trainer.hpp"

namespace pdanet::ablation {

// Variant names, in table order: baseline, baseline_mmd, no_rec, no_pose,
// no_share_dp, no_domain_adv, no_mmd, full.
std::vector<std::string> default_variant_names();

// Applies a variant's ablation switches to a copy of the base config; the
// seed is left untouched so variants share it.
TrainConfig variant_config(const TrainConfig& base, const std::string& name);

struct VariantResult {
  std::string name;
  bool ok = false;
  std::string error;
  double rank1 = 0.0, rank5 = 0.0, rank10 = 0.0, map = 0.0;
  TrainConfig config;
  // Final state, kept so callers can run extra diagnostics on the trained
  // variant without re-training.
  std::shared_ptr<TrainState> state;
};

// Trains and evaluates one variant. When run_dir is non-empty the run's
// checkpoints/logs land there.
VariantResult run_variant(const TrainConfig& base, const std::string& name,
                          const datagen::Dataset& ds, const std::string& run_dir = "",
                          const evaluator::Protocol& protocol = {});

// Runs each variant with the shared seed; failures are recorded per row and
// do not stop the remaining variants.
std::vector<VariantResult> run_variants(const TrainConfig& base,
                                        const std::vector<std::string>& names,
                                        const datagen::Dataset& ds,
                                        const std::string& run_root = "",
                                        const evaluator::Protocol& protocol = {});

// Aligned text table: one row per variant with its switch pattern and
// target-domain retrieval scores.
std::string results_table(const std::vector<VariantResult>& results);
nlohmann::json results_to_json(const std::vector<VariantResult>& results);

}  // namespace pdanet::ablation
