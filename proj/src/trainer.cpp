// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/trainer.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "pdanet/json_util.hpp"
#include "pdanet/translator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pdanet {

// ---- config ------------------------------------------------------------------

void TrainConfig::validate() const {
  require(lambda_tri >= 0.0 && lambda_rec >= 0.0 && lambda_pose >= 0.0,
          "TrainConfig: loss weights must be >= 0");
  require(margin > 0.0, "TrainConfig: margin must be positive");
  require(batch_source >= 2 && batch_target >= 2, "TrainConfig: batch sizes must be >= 2");
  require(gen_iters >= 1 && disc_iters >= 1, "TrainConfig: inner loop counts must be >= 1");
  require(iterations >= 0, "TrainConfig: iterations must be >= 0");
  require(lr_encoder > 0.0 && lr_gen > 0.0 && lr_disc > 0.0,
          "TrainConfig: learning rates must be positive");
  require(checkpoint_every >= 1, "TrainConfig: checkpoint_every must be >= 1");
  require(grid_every >= 0, "TrainConfig: grid_every must be >= 0");
  if (bandwidth_mode == BandwidthMode::kExplicit) {
    require(!explicit_bandwidths.empty(), "TrainConfig: explicit bandwidth list is empty");
    for (double b : explicit_bandwidths)
      require(b > 0.0, "TrainConfig: bandwidths must be positive");
  }
  model.validate();
}

json train_section_to_json(const TrainConfig& c) {
  return json{{"lambda_tri", c.lambda_tri},
              {"lambda_rec", c.lambda_rec},
              {"lambda_pose", c.lambda_pose},
              {"margin", c.margin},
              {"batch_source", c.batch_source},
              {"batch_target", c.batch_target},
              {"iterations", c.iterations},
              {"gen_iters", c.gen_iters},
              {"disc_iters", c.disc_iters},
              {"lr_encoder", c.lr_encoder},
              {"lr_gen", c.lr_gen},
              {"lr_disc", c.lr_disc},
              {"adam_beta1", c.adam_beta1},
              {"adam_beta2", c.adam_beta2},
              {"adam_eps", c.adam_eps},
              {"clip_norm", c.clip_norm},
              {"seed", c.seed},
              {"checkpoint_every", c.checkpoint_every},
              {"grid_every", c.grid_every},
              {"use_mmd", c.use_mmd},
              {"use_triplet", c.use_triplet},
              {"use_rec", c.use_rec},
              {"use_pose", c.use_pose},
              {"use_domain_adv", c.use_domain_adv},
              {"share_dp", c.share_dp},
              {"literal_adversarial_signs", c.literal_adversarial_signs},
              {"bandwidth_mode",
               c.bandwidth_mode == TrainConfig::BandwidthMode::kMedian ? "median" : "explicit"},
              {"explicit_bandwidths", c.explicit_bandwidths},
              {"mmd_estimator",
               c.mmd_estimator == losses::KernelSpec::Estimator::kBiased ? "biased" : "unbiased"}};
}

void train_section_from_json(const json& j, TrainConfig& c) {
  check_json_keys(
      j, {"lambda_tri", "lambda_rec", "lambda_pose", "margin", "batch_source", "batch_target",
          "iterations", "gen_iters", "disc_iters", "lr_encoder", "lr_gen", "lr_disc",
          "adam_beta1", "adam_beta2", "adam_eps", "clip_norm", "seed", "checkpoint_every",
          "grid_every", "use_mmd", "use_triplet", "use_rec", "use_pose", "use_domain_adv",
          "share_dp", "literal_adversarial_signs", "bandwidth_mode", "explicit_bandwidths",
          "mmd_estimator"},
      "train config");
  c.lambda_tri = j.value("lambda_tri", c.lambda_tri);
  c.lambda_rec = j.value("lambda_rec", c.lambda_rec);
  c.lambda_pose = j.value("lambda_pose", c.lambda_pose);
  c.margin = j.value("margin", c.margin);
  c.batch_source = j.value("batch_source", c.batch_source);
  c.batch_target = j.value("batch_target", c.batch_target);
  c.iterations = j.value("iterations", c.iterations);
  c.gen_iters = j.value("gen_iters", c.gen_iters);
  c.disc_iters = j.value("disc_iters", c.disc_iters);
  c.lr_encoder = j.value("lr_encoder", c.lr_encoder);
  c.lr_gen = j.value("lr_gen", c.lr_gen);
  c.lr_disc = j.value("lr_disc", c.lr_disc);
  c.adam_beta1 = j.value("adam_beta1", c.adam_beta1);
  c.adam_beta2 = j.value("adam_beta2", c.adam_beta2);
  c.adam_eps = j.value("adam_eps", c.adam_eps);
  c.clip_norm = j.value("clip_norm", c.clip_norm);
  c.seed = j.value("seed", c.seed);
  c.checkpoint_every = j.value("checkpoint_every", c.checkpoint_every);
  c.grid_every = j.value("grid_every", c.grid_every);
  c.use_mmd = j.value("use_mmd", c.use_mmd);
  c.use_triplet = j.value("use_triplet", c.use_triplet);
  c.use_rec = j.value("use_rec", c.use_rec);
  c.use_pose = j.value("use_pose", c.use_pose);
  c.use_domain_adv = j.value("use_domain_adv", c.use_domain_adv);
  c.share_dp = j.value("share_dp", c.share_dp);
  c.literal_adversarial_signs = j.value("literal_adversarial_signs", c.literal_adversarial_signs);
  if (j.contains("bandwidth_mode")) {
    std::string m = j["bandwidth_mode"].get<std::string>();
    if (m == "median")
      c.bandwidth_mode = TrainConfig::BandwidthMode::kMedian;
    else if (m == "explicit")
      c.bandwidth_mode = TrainConfig::BandwidthMode::kExplicit;
    else
      throw std::invalid_argument("train config: unknown bandwidth_mode \"" + m + "\"");
  }
  c.explicit_bandwidths = j.value("explicit_bandwidths", c.explicit_bandwidths);
  if (j.contains("mmd_estimator")) {
    std::string e = j["mmd_estimator"].get<std::string>();
    if (e == "biased")
      c.mmd_estimator = losses::KernelSpec::Estimator::kBiased;
    else if (e == "unbiased")
      c.mmd_estimator = losses::KernelSpec::Estimator::kUnbiased;
    else
      throw std::invalid_argument("train config: unknown mmd_estimator \"" + e + "\"");
  }
}

json train_config_to_json(const TrainConfig& c) {
  return json{{"model", model_config_to_json(c.model)}, {"train", train_section_to_json(c)}};
}

TrainConfig train_config_from_json(const json& j) {
  check_json_keys(j, {"model", "train"}, "checkpoint config");
  TrainConfig c;
  if (j.contains("model")) c.model = model_config_from_json(j["model"]);
  if (j.contains("train")) train_section_from_json(j["train"], c);
  c.model.share_dp = c.share_dp;
  return c;
}

// ---- state -------------------------------------------------------------------

TrainState TrainState::init(const TrainConfig& cfg) {
  cfg.validate();
  TrainState st;
  ModelConfig mc = cfg.model;
  mc.share_dp = cfg.share_dp;
  st.model = std::make_unique<Model>(mc);
  st.rng = Rng(cfg.seed);
  st.iteration = 0;
  auto mk = [&cfg](std::map<std::string, AdamState>& m, const std::string& name) {
    AdamState s;
    s.beta1 = cfg.adam_beta1;
    s.beta2 = cfg.adam_beta2;
    s.eps = cfg.adam_eps;
    m[name] = s;
  };
  mk(st.optimizers, "enc");
  mk(st.optimizers, "gen_s");
  mk(st.optimizers, "gen_t");
  mk(st.optimizers, "disc_s");
  mk(st.optimizers, "disc_t");
  mk(st.optimizers, "disc_p");
  return st;
}

// ---- sampling ------------------------------------------------------------------

namespace {

void copy_image_into(Tensor& batch, int slot, const Tensor& chw) {
  std::copy(chw.data.begin(), chw.data.end(),
            batch.data.begin() + static_cast<int64_t>(slot) * chw.numel());
}

void zero_all_grads(Model& m) {
  for (ParamGroup* pg : m.groups()) pg->zero_grad();
}

std::vector<Param*> concat_params(std::initializer_list<ParamGroup*> groups) {
  std::vector<Param*> ps;
  for (ParamGroup* pg : groups)
    for (Param* p : pg->trainable()) ps.push_back(p);
  return ps;
}

// total += weight * term, building the expression lazily.
Node* acc(Node* total, Node* term, double weight) {
  Node* w = weight == 1.0 ? term : affine(term, weight, 0.0);
  return total ? add(total, w) : w;
}

void check_params_finite(const TrainState& state, int64_t step) {
  for (ParamGroup* pg : const_cast<Model&>(*state.model).groups())
    if (!pg->all_finite()) throw TrainAbortError(step, "parameters of group " + pg->name());
}

}  // namespace

StepBatch sample_step_batch(TrainState& state, const TrainConfig& cfg,
                            const datagen::Dataset& ds, datagen::PoseMapCache& cache) {
  const int h = ds.height(), w = ds.width();
  require(h == cfg.model.height && w == cfg.model.width,
          "sample_step_batch: dataset resolution " + std::to_string(h) + "x" + std::to_string(w) +
              " does not match model " + std::to_string(cfg.model.height) + "x" +
              std::to_string(cfg.model.width));
  const int ns = cfg.batch_source, nt = cfg.batch_target;
  StepBatch b;
  b.x_s = Tensor({ns, 3, h, w});
  b.x_pos = Tensor({ns, 3, h, w});
  b.x_neg = Tensor({ns, 3, h, w});
  b.x_t = Tensor({nt, 3, h, w});
  b.p_s = Tensor({ns, datagen::kNumLandmarks, h, w});
  b.p_pos = Tensor({ns, datagen::kNumLandmarks, h, w});
  b.p_t = Tensor({nt, datagen::kNumLandmarks, h, w});

  for (int i = 0; i < ns; ++i) {
    datagen::Triplet t = datagen::sample_triplet(ds, state.rng);
    b.anchor_idx.push_back(t.anchor);
    b.pos_idx.push_back(t.positive);
    b.neg_idx.push_back(t.negative);
    copy_image_into(b.x_s, i, ds.item(t.anchor).pixels);
    copy_image_into(b.x_pos, i, ds.item(t.positive).pixels);
    copy_image_into(b.x_neg, i, ds.item(t.negative).pixels);
    copy_image_into(b.p_s, i, cache.get(t.anchor));
    copy_image_into(b.p_pos, i, cache.get(t.positive));
  }
  const std::vector<int>& tgt = ds.domain_indices(datagen::Domain::kTarget);
  require(!tgt.empty(), "sample_step_batch: empty target domain");
  for (int i = 0; i < nt; ++i) {
    int idx = tgt[state.rng.randint(tgt.size())];
    b.target_idx.push_back(idx);
    copy_image_into(b.x_t, i, ds.item(idx).pixels);
    copy_image_into(b.p_t, i, cache.get(idx));
  }
  return b;
}

// ---- encoder phase -------------------------------------------------------------

void run_encoder_phase(TrainState& state, const TrainConfig& cfg, const StepBatch& batch,
                       losses::LossReport& report) {
  if (!cfg.use_mmd && !cfg.use_triplet) return;
  Model& m = *state.model;
  Graph g;
  Node* v_anchor = m.encode_content(g, g.constant(batch.x_s));
  Node* total = nullptr;

  if (cfg.use_mmd) {
    Node* v_target = m.encode_content(g, g.constant(batch.x_t));
    if (state.mmd_bandwidths.empty()) {
      if (cfg.bandwidth_mode == TrainConfig::BandwidthMode::kExplicit)
        state.mmd_bandwidths = cfg.explicit_bandwidths;
      else
        state.mmd_bandwidths =
            losses::median_kernel(v_anchor->val, v_target->val).bandwidths;
    }
    losses::KernelSpec spec;
    spec.bandwidths = state.mmd_bandwidths;
    spec.estimator = cfg.mmd_estimator;
    Node* mmd = losses::mmd_loss(v_anchor, v_target, spec);
    report.mmd = mmd->scalar();
    total = acc(total, mmd, 1.0);
  }
  if (cfg.use_triplet) {
    Node* v_pos = m.encode_content(g, g.constant(batch.x_pos));
    Node* v_neg = m.encode_content(g, g.constant(batch.x_neg));
    Node* tri = losses::triplet_loss(v_anchor, v_pos, v_neg, cfg.margin);
    report.triplet = tri->scalar();
    total = acc(total, tri, cfg.lambda_tri);
  }
  report.enc_total = total->scalar();

  m.group_ec().zero_grad();
  g.backward(total);
  std::vector<Param*> ps = m.group_ec().trainable();
  if (clip_global_norm(ps, cfg.clip_norm)) ++report.clip_events;
  adam_step(state.optimizers.at("enc"), ps, cfg.lr_encoder);
}

// ---- generator phase ------------------------------------------------------------

void run_generator_phase(TrainState& state, const TrainConfig& cfg, const StepBatch& batch,
                         GenSnapshots& snaps, losses::LossReport& report) {
  if (!cfg.generation_enabled()) return;
  Model& m = *state.model;
  const bool literal = cfg.literal_adversarial_signs;

  for (int k = 0; k < cfg.gen_iters; ++k) {
    Graph g;
    Node* xs = g.constant(batch.x_s);
    Node* xpos = g.constant(batch.x_pos);
    Node* xt = g.constant(batch.x_t);
    Node* ps = g.constant(batch.p_s);
    Node* ppos = g.constant(batch.p_pos);
    Node* pt = g.constant(batch.p_t);

    Node* vc_s = m.encode_content(g, xs);
    Node* vc_pos = m.encode_content(g, xpos);
    Node* vc_t = m.encode_content(g, xt);
    Node* vp_s = m.encode_pose(g, ps);
    Node* vp_t = m.encode_pose(g, pt);

    Node* x_ss = m.generate(g, Domain::kSource, vp_s, vc_s);
    Node* x_tt = m.generate(g, Domain::kTarget, vp_t, vc_t);
    Node* x_ss_guided = m.generate(g, Domain::kSource, vp_s, vc_pos);
    Node* x_ts = nullptr;
    Node* x_st = nullptr;
    if (cfg.use_domain_adv) {
      x_ts = m.generate(g, Domain::kSource, vp_t, vc_t);
      x_st = m.generate(g, Domain::kTarget, vp_s, vc_s);
    }

    Node* total_s = nullptr;
    Node* total_t = nullptr;

    if (cfg.use_rec) {
      Node* rec_s = losses::reconstruction_loss_source(x_ss, xs, x_ss_guided, xs);
      Node* rec_t = losses::reconstruction_loss_target(x_tt, xt);
      report.rec_s = rec_s->scalar();
      report.rec_t = rec_t->scalar();
      total_s = acc(total_s, rec_s, cfg.lambda_rec);
      total_t = acc(total_t, rec_t, cfg.lambda_rec);
    }
    if (cfg.use_domain_adv) {
      losses::AdvObjectives dom_s =
          losses::domain_adversarial_loss(g, m, Domain::kSource, xs, x_ss, x_ts);
      losses::AdvObjectives dom_t =
          losses::domain_adversarial_loss(g, m, Domain::kTarget, xt, x_tt, x_st);
      report.g_domain_s = dom_s.g_objective->scalar();
      report.g_domain_t = dom_t.g_objective->scalar();
      if (literal) {
        total_s = acc(total_s, dom_s.d_objective, -1.0);
        total_t = acc(total_t, dom_t.d_objective, -1.0);
      } else {
        total_s = acc(total_s, dom_s.g_objective, 1.0);
        total_t = acc(total_t, dom_t.g_objective, 1.0);
      }
    }
    if (cfg.use_pose) {
      losses::PoseTuple tuple{xs, ps, ppos, x_ss, x_ss_guided, xt, pt, x_tt};
      losses::PoseObjectives pose = losses::pose_adversarial_loss(g, m, tuple);
      report.g_pose = pose.g_objective->scalar();
      Node* term = literal ? affine(pose.d_objective, -1.0, 0.0) : pose.g_objective;
      // Both generator updates carry the full pose objective, matching the
      // grouped updates of the training schedule.
      total_s = acc(total_s, term, cfg.lambda_pose);
      total_t = acc(total_t, term, cfg.lambda_pose);
    }

    if (total_s) report.gen_s_total = total_s->scalar();
    if (total_t) report.gen_t_total = total_t->scalar();

    // Both updates reuse one forward pass: gradients for the target-route
    // update are taken at the pre-update parameter values.
    if (total_s) {
      zero_all_grads(m);
      g.backward(total_s);
      std::vector<Param*> ps_s = concat_params({&m.group_ec(), &m.group_ep(),
                                                &m.group_gen(Domain::kSource)});
      if (clip_global_norm(ps_s, cfg.clip_norm)) ++report.clip_events;
      adam_step(state.optimizers.at("gen_s"), ps_s, cfg.lr_gen);
    }
    if (total_t) {
      g.zero_node_grads();
      zero_all_grads(m);
      g.backward(total_t);
      std::vector<Param*> ps_t = concat_params({&m.group_ec(), &m.group_ep(),
                                                &m.group_gen(Domain::kTarget)});
      if (clip_global_norm(ps_t, cfg.clip_norm)) ++report.clip_events;
      adam_step(state.optimizers.at("gen_t"), ps_t, cfg.lr_gen);
    }

    if (k == cfg.gen_iters - 1) {
      snaps.x_ss = x_ss->val;
      snaps.x_tt = x_tt->val;
      snaps.x_ss_guided = x_ss_guided->val;
      if (x_ts) snaps.x_ts = x_ts->val;
      if (x_st) snaps.x_st = x_st->val;
      snaps.valid = true;
    }
  }
}

// ---- discriminator phase ---------------------------------------------------------

void run_discriminator_phase(TrainState& state, const TrainConfig& cfg, const StepBatch& batch,
                             const GenSnapshots& snaps, losses::LossReport& report) {
  if (!cfg.use_domain_adv && !cfg.use_pose) return;
  require(snaps.valid, "discriminator phase needs generator snapshots");
  Model& m = *state.model;
  const bool literal = cfg.literal_adversarial_signs;
  const double d_sign = literal ? 1.0 : -1.0;  // objective weight when descending

  for (int k = 0; k < cfg.disc_iters; ++k) {
    Graph g;
    Node* xs = g.constant(batch.x_s);
    Node* xt = g.constant(batch.x_t);
    double disc_total = 0.0;

    if (cfg.use_domain_adv) {
      losses::AdvObjectives dom_s = losses::domain_adversarial_loss(
          g, m, Domain::kSource, xs, g.constant(snaps.x_ss), g.constant(snaps.x_ts));
      report.domain_s = dom_s.d_objective->scalar();
      m.group_disc(Domain::kSource).zero_grad();
      g.backward(affine(dom_s.d_objective, d_sign, 0.0));
      std::vector<Param*> ps_ds = m.group_disc(Domain::kSource).trainable();
      if (clip_global_norm(ps_ds, cfg.clip_norm)) ++report.clip_events;
      adam_step(state.optimizers.at("disc_s"), ps_ds, cfg.lr_disc);
      disc_total += d_sign * *report.domain_s;

      g.zero_node_grads();
      losses::AdvObjectives dom_t = losses::domain_adversarial_loss(
          g, m, Domain::kTarget, xt, g.constant(snaps.x_tt), g.constant(snaps.x_st));
      report.domain_t = dom_t.d_objective->scalar();
      m.group_disc(Domain::kTarget).zero_grad();
      g.backward(affine(dom_t.d_objective, d_sign, 0.0));
      std::vector<Param*> ps_dt = m.group_disc(Domain::kTarget).trainable();
      if (clip_global_norm(ps_dt, cfg.clip_norm)) ++report.clip_events;
      adam_step(state.optimizers.at("disc_t"), ps_dt, cfg.lr_disc);
      disc_total += d_sign * *report.domain_t;
    }

    if (cfg.use_pose) {
      g.zero_node_grads();
      losses::PoseTuple tuple{xs,
                              g.constant(batch.p_s),
                              g.constant(batch.p_pos),
                              g.constant(snaps.x_ss),
                              g.constant(snaps.x_ss_guided),
                              xt,
                              g.constant(batch.p_t),
                              g.constant(snaps.x_tt)};
      losses::PoseObjectives pose = losses::pose_adversarial_loss(g, m, tuple);
      report.pose_s = pose.d_source->scalar();
      report.pose_t = pose.d_target->scalar();
      m.group_dp(Domain::kSource).zero_grad();
      m.group_dp(Domain::kTarget).zero_grad();
      g.backward(affine(pose.d_objective, d_sign, 0.0));
      std::vector<Param*> ps_dp =
          m.has_separate_dp()
              ? concat_params({&m.group_dp(Domain::kSource), &m.group_dp(Domain::kTarget)})
              : m.group_dp(Domain::kSource).trainable();
      if (clip_global_norm(ps_dp, cfg.clip_norm)) ++report.clip_events;
      adam_step(state.optimizers.at("disc_p"), ps_dp, cfg.lr_disc);
      disc_total += d_sign * (*report.pose_s + *report.pose_t);
    }
    report.disc_total = disc_total;
  }
}

// ---- full step --------------------------------------------------------------------

losses::LossReport train_step(TrainState& state, const TrainConfig& cfg,
                              const datagen::Dataset& ds, datagen::PoseMapCache& cache) {
  const int64_t step = state.iteration + 1;
  losses::LossReport report;
  report.step = step;

  StepBatch batch = sample_step_batch(state, cfg, ds, cache);
  run_encoder_phase(state, cfg, batch, report);
  GenSnapshots snaps;
  run_generator_phase(state, cfg, batch, snaps, report);
  run_discriminator_phase(state, cfg, batch, snaps, report);

  std::string offending;
  if (!report.all_finite(&offending)) throw TrainAbortError(step, offending);
  check_params_finite(state, step);

  state.iteration = step;
  return report;
}

// ---- outer loop ---------------------------------------------------------------------

namespace {

std::string checkpoint_name(int64_t step) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "step_%08lld.ckpt", static_cast<long long>(step));
  return buf;
}

void write_checkpoint_files(TrainState& state, const TrainConfig& cfg,
                            const std::string& run_dir, const TrainHooks& hooks) {
  fs::create_directories(fs::path(run_dir) / "checkpoints");
  const std::string cfg_json = train_config_to_json(cfg).dump(2);
  const std::string path =
      (fs::path(run_dir) / "checkpoints" / checkpoint_name(state.iteration)).string();
  save_checkpoint(path, *state.model, cfg_json, state.iteration, state.rng.serialize(),
                  state.mmd_bandwidths, state.optimizers);
  const std::string latest = (fs::path(run_dir) / "checkpoint_latest.ckpt").string();
  fs::copy_file(path, latest, fs::copy_options::overwrite_existing);
  if (hooks.on_checkpoint) hooks.on_checkpoint(state.iteration, path);
}

void write_grid(TrainState& state, const TrainConfig& cfg, const datagen::Dataset& ds,
                datagen::PoseMapCache& cache, const std::string& run_dir) {
  const auto& src = ds.domain_indices(datagen::Domain::kSource);
  const auto& tgt = ds.domain_indices(datagen::Domain::kTarget);
  if (src.empty() || tgt.empty()) return;
  std::vector<translator::Route> routes = translator::default_routes();
  std::vector<Tensor> inputs = {ds.item(src[0]).pixels, ds.item(tgt[0]).pixels,
                                ds.item(tgt[0]).pixels, ds.item(src[0]).pixels};
  std::vector<Tensor> poses;
  for (int i = 0; i < 3 && i < static_cast<int>(src.size()); ++i)
    poses.push_back(cache.get(src[i]));
  for (int i = 0; i < 3 && i < static_cast<int>(tgt.size()); ++i)
    poses.push_back(cache.get(tgt[i]));
  fs::create_directories(fs::path(run_dir) / "grids");
  const std::string name = translator::grid_filename(state.iteration, routes);
  translator::save_grid(*state.model, inputs, poses, routes,
                        (fs::path(run_dir) / "grids" / name).string());
}

}  // namespace

TrainResult train(TrainState& state, const TrainConfig& cfg, const datagen::Dataset& ds,
                  const std::string& run_dir, const TrainHooks& hooks) {
  cfg.validate();
  TrainResult result;
  datagen::PoseMapCache cache(ds);

  std::ofstream losses_file;
  if (!run_dir.empty()) {
    fs::create_directories(run_dir);
    const auto mode = state.iteration > 0 ? std::ios::app : std::ios::trunc;
    losses_file.open(fs::path(run_dir) / "losses.jsonl", mode);
    if (!losses_file)
      throw std::runtime_error("train: cannot open losses.jsonl under " + run_dir);
  }

  if (cfg.iterations == 0 && !run_dir.empty()) write_checkpoint_files(state, cfg, run_dir, hooks);

  while (state.iteration < cfg.iterations) {
    losses::LossReport report;
    try {
      report = train_step(state, cfg, ds, cache);
    } catch (const TrainAbortError&) {
      if (!run_dir.empty()) losses_file.flush();
      throw;
    }
    if (!run_dir.empty()) {
      losses_file << report.to_jsonl() << "\n";
      losses_file.flush();
      if (!losses_file)
        throw std::runtime_error("train: losses.jsonl write failed at step " +
                                 std::to_string(report.step));
    }
    if (hooks.on_report) hooks.on_report(report);
    result.history.push_back(report);

    const bool last = state.iteration >= cfg.iterations;
    if (!run_dir.empty() && (state.iteration % cfg.checkpoint_every == 0 || last))
      write_checkpoint_files(state, cfg, run_dir, hooks);
    if (!run_dir.empty() && cfg.grid_every > 0 &&
        (state.iteration % cfg.grid_every == 0 || last))
      write_grid(state, cfg, ds, cache, run_dir);
  }

  if (!run_dir.empty())
    result.final_checkpoint = (fs::path(run_dir) / "checkpoint_latest.ckpt").string();
  return result;
}

TrainState resume_from_checkpoint(const std::string& path, TrainConfig* out_cfg) {
  LoadedCheckpoint ck = read_checkpoint(path);
  TrainConfig cfg = train_config_from_json(json::parse(ck.config_json));
  TrainState state = TrainState::init(cfg);
  apply_params(*state.model, ck.params);
  state.optimizers = ck.optimizers;
  state.iteration = ck.iteration;
  state.rng.deserialize(ck.rng_state);
  state.mmd_bandwidths = ck.mmd_bandwidths;
  if (out_cfg) *out_cfg = cfg;
  return state;
}

}  // namespace pdanet
