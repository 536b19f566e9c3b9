// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "pdanet/networks.hpp"
#include "pdanet/params.hpp"

namespace pdanet {

// Checkpoint archive: binary, little-endian, doubles stored raw so that a
// save/load round-trip is bit-exact. Layout is versioned via a magic header.
//
//   "PDNC" | u32 version | config json | iteration | rng state |
//   mmd bandwidths | parameter groups | optimizer states

struct LoadedCheckpoint {
  std::string config_json;
  int64_t iteration = 0;
  std::string rng_state;
  std::vector<double> mmd_bandwidths;
  std::map<std::string, Tensor> params;  // full name -> tensor
  std::map<std::string, AdamState> optimizers;
};

void save_checkpoint(const std::string& path, Model& model, const std::string& config_json,
                     int64_t iteration, const std::string& rng_state,
                     const std::vector<double>& mmd_bandwidths,
                     const std::map<std::string, AdamState>& optimizers);

LoadedCheckpoint read_checkpoint(const std::string& path);

// Copies checkpoint tensors into the model's parameters; throws on a missing
// name or shape mismatch.
void apply_params(Model& model, const std::map<std::string, Tensor>& params);

}  // namespace pdanet
