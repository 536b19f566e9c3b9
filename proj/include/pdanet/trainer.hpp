// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "pdanet/datagen.hpp"
#include "pdanet/losses.hpp"
#include "pdanet/networks.hpp"
#include "pdanet/serialize.hpp"

namespace pdanet {

struct TrainConfig {
  // Loss weights and margin.
  double lambda_tri = 1.0;
  double lambda_rec = 10.0;
  double lambda_pose = 0.1;
  double margin = 0.5;

  int batch_source = 16;  // n_s
  int batch_target = 16;  // n_t
  int64_t iterations = 3000;
  int gen_iters = 1;   // inner generator updates per iteration
  int disc_iters = 1;  // inner discriminator updates per iteration

  double lr_encoder = 1e-4;
  double lr_gen = 2e-4;
  double lr_disc = 2e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double clip_norm = 5.0;  // global-norm gradient clip per phase update

  uint64_t seed = 42;
  int64_t checkpoint_every = 500;
  int64_t grid_every = 0;  // 0 disables periodic translation grids

  // Ablation switches.
  bool use_mmd = true;
  bool use_triplet = true;
  bool use_rec = true;
  bool use_pose = true;
  bool use_domain_adv = true;
  bool share_dp = true;

  // When set, both players descend the written adversarial objectives
  // verbatim instead of the standard minimax convention. For comparison
  // runs only; it inverts the usual discriminator/generator roles.
  bool literal_adversarial_signs = false;

  enum class BandwidthMode { kMedian, kExplicit };
  BandwidthMode bandwidth_mode = BandwidthMode::kMedian;
  std::vector<double> explicit_bandwidths;
  losses::KernelSpec::Estimator mmd_estimator = losses::KernelSpec::Estimator::kBiased;

  ModelConfig model;

  void validate() const;
  bool generation_enabled() const { return use_rec || use_pose || use_domain_adv; }
};

// "train" section only.
nlohmann::json train_section_to_json(const TrainConfig& c);
void train_section_from_json(const nlohmann::json& j, TrainConfig& c);
// Full {"model": ..., "train": ...} document, used inside checkpoints.
nlohmann::json train_config_to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);

struct TrainState {
  std::unique_ptr<Model> model;
  std::map<std::string, AdamState> optimizers;
  int64_t iteration = 0;
  Rng rng{0};
  std::vector<double> mmd_bandwidths;  // frozen on the first step

  static TrainState init(const TrainConfig& cfg);
};

class TrainAbortError : public std::runtime_error {
 public:
  TrainAbortError(int64_t step, const std::string& term)
      : std::runtime_error("non-finite value in \"" + term + "\" at step " +
                           std::to_string(step)),
        step(step),
        term(term) {}
  int64_t step;
  std::string term;
};

// One sampled iteration batch: anchors, their same-identity partners,
// triplet negatives, target images, and the matching pose maps.
struct StepBatch {
  Tensor x_s, x_pos, x_neg, x_t;
  Tensor p_s, p_pos, p_t;
  std::vector<int> anchor_idx, pos_idx, neg_idx, target_idx;
};

StepBatch sample_step_batch(TrainState& state, const TrainConfig& cfg,
                            const datagen::Dataset& ds, datagen::PoseMapCache& cache);

// Generated images of the last generator sub-iteration, reused as the
// discriminator phase's fake inputs.
struct GenSnapshots {
  Tensor x_ss, x_ts, x_st, x_tt, x_ss_guided;
  bool valid = false;
};

// The three phases, exposed for isolation tests. Each updates only its own
// parameter groups.
void run_encoder_phase(TrainState& state, const TrainConfig& cfg, const StepBatch& batch,
                       losses::LossReport& report);
void run_generator_phase(TrainState& state, const TrainConfig& cfg, const StepBatch& batch,
                         GenSnapshots& snaps, losses::LossReport& report);
void run_discriminator_phase(TrainState& state, const TrainConfig& cfg, const StepBatch& batch,
                             const GenSnapshots& snaps, losses::LossReport& report);

// One full iteration of the alternating schedule; throws TrainAbortError on
// a non-finite loss or parameter.
losses::LossReport train_step(TrainState& state, const TrainConfig& cfg,
                              const datagen::Dataset& ds, datagen::PoseMapCache& cache);

struct TrainHooks {
  std::function<void(const losses::LossReport&)> on_report;
  std::function<void(int64_t, const std::string&)> on_checkpoint;  // step, path
};

struct TrainResult {
  std::vector<losses::LossReport> history;
  std::string final_checkpoint;  // empty when run_dir is empty
};

// Runs the outer loop from state.iteration to cfg.iterations. When run_dir
// is non-empty, writes losses.jsonl (append on resume), periodic checkpoints
// under checkpoints/, checkpoint_latest.ckpt, and periodic grids.
TrainResult train(TrainState& state, const TrainConfig& cfg, const datagen::Dataset& ds,
                  const std::string& run_dir = "", const TrainHooks& hooks = {});

// Rebuilds a TrainState (model, optimizers, RNG, iteration) from a
// checkpoint produced by train().
TrainState resume_from_checkpoint(const std::string& path, TrainConfig* out_cfg = nullptr);

}  // namespace pdanet
