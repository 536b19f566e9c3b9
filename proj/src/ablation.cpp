// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/ablation.hpp"

#include <cstdio>
#include <filesystem>

namespace fs = std::filesystem;
using nlohmann::json;

namespace pdanet::ablation {

std::vector<std::string> default_variant_names() {
  return {"baseline", "baseline_mmd", "no_rec",       "no_pose",
          "no_share_dp", "no_domain_adv", "no_mmd", "full"};
}

TrainConfig variant_config(const TrainConfig& base, const std::string& name) {
  TrainConfig c = base;
  c.use_triplet = true;
  c.use_mmd = true;
  c.use_rec = true;
  c.use_domain_adv = true;
  c.use_pose = true;
  c.share_dp = true;
  if (name == "baseline") {
    c.use_mmd = false;
    c.use_rec = false;
    c.use_domain_adv = false;
    c.use_pose = false;
    c.share_dp = false;
  } else if (name == "baseline_mmd") {
    c.use_rec = false;
    c.use_domain_adv = false;
    c.use_pose = false;
    c.share_dp = false;
  } else if (name == "no_rec") {
    c.use_rec = false;
  } else if (name == "no_pose") {
    c.use_pose = false;
  } else if (name == "no_share_dp") {
    c.share_dp = false;
  } else if (name == "no_domain_adv") {
    c.use_domain_adv = false;
  } else if (name == "no_mmd") {
    c.use_mmd = false;
  } else if (name == "full") {
    // all switches on
  } else {
    throw std::invalid_argument("unknown ablation variant \"" + name + "\"");
  }
  c.model.share_dp = c.share_dp;
  return c;
}

VariantResult run_variant(const TrainConfig& base, const std::string& name,
                          const datagen::Dataset& ds, const std::string& run_dir,
                          const evaluator::Protocol& protocol) {
  VariantResult r;
  r.name = name;
  r.config = variant_config(base, name);
  try {
    r.state = std::make_shared<TrainState>(TrainState::init(r.config));
    train(*r.state, r.config, ds, run_dir);
    evaluator::EvalReport rep = evaluator::evaluate_model(*r.state->model, ds, protocol);
    r.rank1 = rep.rank1;
    r.rank5 = rep.rank5;
    r.rank10 = rep.rank10;
    r.map = rep.map;
    r.ok = true;
  } catch (const std::exception& e) {
    r.ok = false;
    r.error = e.what();
  }
  return r;
}

std::vector<VariantResult> run_variants(const TrainConfig& base,
                                        const std::vector<std::string>& names,
                                        const datagen::Dataset& ds, const std::string& run_root,
                                        const evaluator::Protocol& protocol) {
  std::vector<VariantResult> out;
  for (const std::string& name : names) {
    std::string run_dir;
    if (!run_root.empty()) {
      run_dir = (fs::path(run_root) / name).string();
      fs::create_directories(run_dir);
    }
    out.push_back(run_variant(base, name, ds, run_dir, protocol));
  }
  return out;
}

std::string results_table(const std::vector<VariantResult>& results) {
  std::string out =
      "variant          L_tri  L_MMD  L_rec  L_dom  L_pose  share_DP  Rank-1   mAP\n";
  char buf[256];
  for (const VariantResult& r : results) {
    auto mark = [](bool b) { return b ? "x" : "-"; };
    const TrainConfig& c = r.config;
    if (r.ok) {
      std::snprintf(buf, sizeof(buf), "%-16s %-6s %-6s %-6s %-6s %-7s %-9s %-8.4f %-8.4f\n",
                    r.name.c_str(), mark(c.use_triplet), mark(c.use_mmd), mark(c.use_rec),
                    mark(c.use_domain_adv), mark(c.use_pose), mark(c.share_dp), r.rank1, r.map);
    } else {
      std::snprintf(buf, sizeof(buf), "%-16s %-6s %-6s %-6s %-6s %-7s %-9s FAILED: %s\n",
                    r.name.c_str(), mark(c.use_triplet), mark(c.use_mmd), mark(c.use_rec),
                    mark(c.use_domain_adv), mark(c.use_pose), mark(c.share_dp),
                    r.error.c_str());
    }
    out += buf;
  }
  return out;
}

json results_to_json(const std::vector<VariantResult>& results) {
  json arr = json::array();
  for (const VariantResult& r : results) {
    json row{{"variant", r.name},
             {"ok", r.ok},
             {"use_triplet", r.config.use_triplet},
             {"use_mmd", r.config.use_mmd},
             {"use_rec", r.config.use_rec},
             {"use_domain_adv", r.config.use_domain_adv},
             {"use_pose", r.config.use_pose},
             {"share_dp", r.config.share_dp}};
    if (r.ok) {
      row["rank1"] = r.rank1;
      row["rank5"] = r.rank5;
      row["rank10"] = r.rank10;
      row["mAP"] = r.map;
    } else {
      row["error"] = r.error;
    }
    arr.push_back(row);
  }
  return arr;
}

}  // namespace pdanet::ablation
