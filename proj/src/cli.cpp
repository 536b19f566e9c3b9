// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "pdanet/ablation.hpp"
#include "pdanet/json_util.hpp"
#include "pdanet/translator.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pdanet::cli {

FullConfig parse_full_config(const json& j) {
  check_json_keys(j, {"data", "model", "train", "eval", "ablate"}, "config");
  FullConfig c;
  if (j.contains("data")) c.data = datagen::spec_from_json(j["data"]);
  if (j.contains("model")) c.train.model = model_config_from_json(j["model"]);
  if (j.contains("train")) train_section_from_json(j["train"], c.train);
  c.train.model.share_dp = c.train.share_dp;
  if (j.contains("eval")) {
    check_json_keys(j["eval"], {"queries_per_id"}, "eval config");
    c.protocol.queries_per_id = j["eval"].value("queries_per_id", c.protocol.queries_per_id);
  }
  c.ablate_variants = ablation::default_variant_names();
  if (j.contains("ablate")) {
    check_json_keys(j["ablate"], {"variants"}, "ablate config");
    if (j["ablate"].contains("variants"))
      c.ablate_variants = j["ablate"]["variants"].get<std::vector<std::string>>();
  }
  // Keep the model resolution in sync with the synthetic data by default.
  if (!j.contains("model") ||
      (!j["model"].contains("height") && !j["model"].contains("width"))) {
    c.train.model.height = c.data.height;
    c.train.model.width = c.data.width;
  }
  return c;
}

json full_config_to_json(const FullConfig& c) {
  return json{{"data", datagen::spec_to_json(c.data)},
              {"model", model_config_to_json(c.train.model)},
              {"train", train_section_to_json(c.train)},
              {"eval", json{{"queries_per_id", c.protocol.queries_per_id}}},
              {"ablate", json{{"variants", c.ablate_variants}}}};
}

namespace {

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::invalid_argument("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write file: " + path);
  f << content;
}

// Applies "a.b.c=value" to a json document; the value parses as JSON when
// possible and falls back to a string.
void apply_override(json& doc, const std::string& kv) {
  auto eq = kv.find('=');
  if (eq == std::string::npos)
    throw std::invalid_argument("--set expects key=value, got \"" + kv + "\"");
  std::string path = kv.substr(0, eq);
  std::string value = kv.substr(eq + 1);
  json* cur = &doc;
  size_t start = 0;
  while (true) {
    size_t dot = path.find('.', start);
    std::string key = path.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
    if (key.empty()) throw std::invalid_argument("--set: empty key segment in \"" + path + "\"");
    if (dot == std::string::npos) {
      json parsed = json::parse(value, nullptr, false);
      (*cur)[key] = parsed.is_discarded() ? json(value) : parsed;
      break;
    }
    cur = &(*cur)[key];
    start = dot + 1;
  }
}

std::string resolve_run_dir(const std::string& run_dir) {
  if (run_dir.empty()) return run_dir;
  fs::path p(run_dir);
  if (p.is_absolute()) return run_dir;
  const char* root = std::getenv("PDANET_RUN_ROOT");
  if (root && *root) return (fs::path(root) / p).string();
  return run_dir;
}

bool dir_nonempty(const std::string& dir) {
  return fs::exists(dir) && fs::is_directory(dir) && !fs::is_empty(dir);
}

void require_usable_out_dir(const std::string& dir, bool force, const char* what) {
  if (dir_nonempty(dir) && !force)
    throw std::invalid_argument(std::string(what) + " \"" + dir +
                                "\" exists and is not empty; pass --force to reuse it");
}

struct LoadedConfig {
  FullConfig cfg;
  std::string raw_text;     // input file, byte for byte
  json merged;              // after --set overrides
  bool has_overrides = false;
};

LoadedConfig load_config(const std::string& path, const std::vector<std::string>& overrides) {
  LoadedConfig lc;
  lc.raw_text = read_file(path);
  json doc = json::parse(lc.raw_text, nullptr, true, /*ignore_comments=*/false);
  for (const std::string& kv : overrides) apply_override(doc, kv);
  lc.merged = doc;
  lc.has_overrides = !overrides.empty();
  lc.cfg = parse_full_config(doc);
  lc.cfg.train.validate();
  return lc;
}

// The verbatim input is the snapshot; merged/override views are written
// alongside when --set was used.
void snapshot_config(const LoadedConfig& lc, const std::string& run_dir,
                     const std::vector<std::string>& overrides) {
  write_file((fs::path(run_dir) / "config.json").string(), lc.raw_text);
  if (lc.has_overrides) {
    write_file((fs::path(run_dir) / "config.merged.json").string(), lc.merged.dump(2) + "\n");
    json ov = json::array();
    for (const std::string& s : overrides) ov.push_back(s);
    write_file((fs::path(run_dir) / "config.overrides.json").string(), ov.dump(2) + "\n");
  }
}

// ---- commands -----------------------------------------------------------------

int cmd_synth_data(const std::string& config_path, const std::string& out_dir, bool force,
                   const std::vector<std::string>& overrides) {
  LoadedConfig lc = load_config(config_path, overrides);
  require_usable_out_dir(out_dir, force, "output directory");
  datagen::Dataset ds = datagen::Dataset::synthesize(lc.cfg.data);
  fs::create_directories(out_dir);
  datagen::save_dataset(ds, out_dir);
  const size_t n_src = ds.domain_indices(datagen::Domain::kSource).size();
  const size_t n_tgt = ds.domain_indices(datagen::Domain::kTarget).size();
  std::cout << "wrote " << n_src << " source / " << n_tgt << " target images to " << out_dir
            << "\n";
  return kExitOk;
}

int cmd_train(const std::string& config_path, const std::string& data_dir,
              const std::string& run_dir_arg, bool force, bool resume,
              const std::vector<std::string>& overrides) {
  LoadedConfig lc = load_config(config_path, overrides);
  const std::string run_dir = resolve_run_dir(run_dir_arg);
  datagen::Dataset ds = datagen::load_dataset(data_dir);

  TrainState state;
  TrainConfig cfg = lc.cfg.train;
  if (resume) {
    const std::string latest = (fs::path(run_dir) / "checkpoint_latest.ckpt").string();
    if (!fs::exists(latest))
      throw std::invalid_argument("--resume: no checkpoint at " + latest);
    // The checkpoint's own config drives the resumed run so the trajectory
    // continues exactly.
    state = resume_from_checkpoint(latest, &cfg);
  } else {
    require_usable_out_dir(run_dir, force, "run directory");
    fs::create_directories(run_dir);
    snapshot_config(lc, run_dir, overrides);
    state = TrainState::init(cfg);
  }

  TrainHooks hooks;
  hooks.on_report = [](const losses::LossReport& r) {
    if (r.step % 100 == 0) std::cout << "step " << r.step << ": " << r.to_jsonl() << "\n";
  };
  TrainResult res = train(state, cfg, ds, run_dir, hooks);
  std::cout << "trained to step " << state.iteration << "; checkpoint: " << res.final_checkpoint
            << "\n";
  return kExitOk;
}

int cmd_eval(const std::string& checkpoint_path, const std::string& data_dir,
             const std::string& out_dir, int queries_per_id, bool oracle_features) {
  LoadedCheckpoint ck = read_checkpoint(checkpoint_path);
  TrainConfig cfg = train_config_from_json(json::parse(ck.config_json));
  Model model(cfg.model);
  apply_params(model, ck.params);
  datagen::Dataset ds = datagen::load_dataset(data_dir);

  evaluator::Protocol protocol;
  protocol.queries_per_id = queries_per_id;
  evaluator::Split split = evaluator::make_target_split(ds, protocol);

  evaluator::EvalReport rep;
  if (oracle_features) {
    std::vector<int> qlabels, glabels;
    for (int i : split.query_idx) qlabels.push_back(ds.item(i).identity);
    for (int i : split.gallery_idx) glabels.push_back(ds.item(i).identity);
    int max_id = 0;
    for (int l : qlabels) max_id = std::max(max_id, l);
    for (int l : glabels) max_id = std::max(max_id, l);
    Tensor qf = evaluator::one_hot_features(qlabels, max_id + 1);
    Tensor gf = evaluator::one_hot_features(glabels, max_id + 1);
    rep = evaluator::evaluate_retrieval(qf, qlabels, gf, glabels);
  } else {
    rep = evaluator::evaluate_model(model, ds, protocol);
  }

  std::cout << rep.to_table();
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_file((fs::path(out_dir) / "eval_report.json").string(), rep.to_json().dump(2) + "\n");
    write_file((fs::path(out_dir) / "eval_report.txt").string(), rep.to_table());
  }
  return kExitOk;
}

std::vector<int> parse_index_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    out.push_back(std::stoi(tok));
  }
  return out;
}

int cmd_translate(const std::string& checkpoint_path, const std::string& data_dir,
                  const std::string& out_path, const std::string& inputs_arg,
                  const std::string& poses_arg, const std::string& routes_arg) {
  LoadedCheckpoint ck = read_checkpoint(checkpoint_path);
  TrainConfig cfg = train_config_from_json(json::parse(ck.config_json));
  Model model(cfg.model);
  apply_params(model, ck.params);
  datagen::Dataset ds = datagen::load_dataset(data_dir);

  std::vector<translator::Route> routes;
  if (routes_arg.empty()) {
    routes = translator::default_routes();
  } else {
    std::stringstream ss(routes_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (tok.size() != 2 || (tok[0] != 's' && tok[0] != 't') || (tok[1] != 's' && tok[1] != 't'))
        throw std::invalid_argument("--routes: expected tokens like ss,ts,tt,st; got \"" + tok +
                                    "\"");
      routes.push_back({tok[0] == 's' ? Domain::kSource : Domain::kTarget,
                        tok[1] == 's' ? Domain::kSource : Domain::kTarget});
    }
    require(!routes.empty(), "--routes: empty route list");
  }

  std::vector<Tensor> inputs;
  if (inputs_arg.empty()) {
    for (const translator::Route& r : routes) {
      const auto& idxs = ds.domain_indices(r.in);
      require(!idxs.empty(), "translate: dataset has no images in the route's input domain");
      inputs.push_back(ds.item(idxs[0]).pixels);
    }
  } else {
    for (int i : parse_index_list(inputs_arg)) inputs.push_back(ds.item(i).pixels);
  }

  std::vector<Tensor> poses;
  datagen::PoseMapCache cache(ds);
  if (poses_arg.empty()) {
    const auto& src = ds.domain_indices(datagen::Domain::kSource);
    for (int i = 0; i < 6 && i < static_cast<int>(src.size()); ++i)
      poses.push_back(cache.get(src[i]));
  } else {
    for (int i : parse_index_list(poses_arg)) poses.push_back(cache.get(i));
  }

  if (fs::path(out_path).has_parent_path())
    fs::create_directories(fs::path(out_path).parent_path());
  translator::save_grid(model, inputs, poses, routes, out_path);
  std::cout << "wrote " << out_path << "\n";
  return kExitOk;
}

int cmd_ablate(const std::string& config_path, const std::string& data_dir,
               const std::string& run_dir_arg, bool force, const std::string& variants_arg,
               const std::vector<std::string>& overrides) {
  LoadedConfig lc = load_config(config_path, overrides);
  const std::string run_dir = resolve_run_dir(run_dir_arg);
  require_usable_out_dir(run_dir, force, "run directory");
  fs::create_directories(run_dir);
  snapshot_config(lc, run_dir, overrides);
  datagen::Dataset ds = datagen::load_dataset(data_dir);

  std::vector<std::string> names = lc.cfg.ablate_variants;
  if (!variants_arg.empty()) {
    names.clear();
    std::stringstream ss(variants_arg);
    std::string tok;
    while (std::getline(ss, tok, ',')) names.push_back(tok);
  }

  std::vector<ablation::VariantResult> results =
      ablation::run_variants(lc.cfg.train, names, ds, run_dir, lc.cfg.protocol);
  const std::string table = ablation::results_table(results);
  std::cout << table;
  write_file((fs::path(run_dir) / "ablation.txt").string(), table);
  write_file((fs::path(run_dir) / "ablation.json").string(),
             ablation::results_to_json(results).dump(2) + "\n");
  for (const auto& r : results)
    if (!r.ok) return kExitRuntime;
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args) {
  CLI::App app{"synthetic cross-domain person re-id: pose-disentangled adaptation"};
  app.require_subcommand(1);

  std::string config_path, data_dir, run_dir, out_dir, out_path, checkpoint;
  std::string inputs_arg, poses_arg, routes_arg, variants_arg;
  std::vector<std::string> overrides;
  bool force = false, resume = false, oracle_features = false;
  int queries_per_id = 2;

  CLI::App* synth = app.add_subcommand("synth-data", "generate the synthetic two-domain dataset");
  synth->add_option("--config", config_path, "config file")->required();
  synth->add_option("--out", out_dir, "output dataset directory")->required();
  synth->add_flag("--force", force, "overwrite a non-empty output directory");
  synth->add_option("--set", overrides, "config override key=value (repeatable)");

  CLI::App* tr = app.add_subcommand("train", "train on a synthesized dataset");
  tr->add_option("--config", config_path, "config file")->required();
  tr->add_option("--data", data_dir, "dataset directory")->required();
  tr->add_option("--run", run_dir, "run directory")->required();
  tr->add_flag("--force", force, "reuse a non-empty run directory");
  tr->add_flag("--resume", resume, "resume from the run's latest checkpoint");
  tr->add_option("--set", overrides, "config override key=value (repeatable)");

  CLI::App* ev = app.add_subcommand("eval", "retrieval evaluation on the target domain");
  ev->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  ev->add_option("--data", data_dir, "dataset directory")->required();
  ev->add_option("--out", out_dir, "directory for report files");
  ev->add_option("--queries-per-id", queries_per_id, "queries per target identity");
  ev->add_flag("--oracle-features", oracle_features,
               "use ground-truth one-hot identity features (test hook)");

  CLI::App* tl = app.add_subcommand("translate", "render a pose-guided translation grid");
  tl->add_option("--checkpoint", checkpoint, "checkpoint file")->required();
  tl->add_option("--data", data_dir, "dataset directory")->required();
  tl->add_option("--out", out_path, "output PNG path")->required();
  tl->add_option("--inputs", inputs_arg, "comma-separated dataset indices, one per route");
  tl->add_option("--poses", poses_arg, "comma-separated dataset indices for pose conditions");
  tl->add_option("--routes", routes_arg, "comma-separated routes from {ss,ts,tt,st}");

  CLI::App* ab = app.add_subcommand("ablate", "train and score the ablation variants");
  ab->add_option("--config", config_path, "config file")->required();
  ab->add_option("--data", data_dir, "dataset directory")->required();
  ab->add_option("--run", run_dir, "run directory")->required();
  ab->add_flag("--force", force, "reuse a non-empty run directory");
  ab->add_option("--variants", variants_arg, "comma-separated variant names");
  ab->add_option("--set", overrides, "config override key=value (repeatable)");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (synth->parsed()) return cmd_synth_data(config_path, out_dir, force, overrides);
    if (tr->parsed()) return cmd_train(config_path, data_dir, run_dir, force, resume, overrides);
    if (ev->parsed())
      return cmd_eval(checkpoint, data_dir, out_dir, queries_per_id, oracle_features);
    if (tl->parsed())
      return cmd_translate(checkpoint, data_dir, out_path, inputs_arg, poses_arg, routes_arg);
    if (ab->parsed())
      return cmd_ablate(config_path, data_dir, run_dir, force, variants_arg, overrides);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "runtime error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitUsage;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args);
}

}  // namespace pdanet::cli
