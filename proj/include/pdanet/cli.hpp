// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "pdanet/datagen.hpp"
#include "pdanet/evaluator.hpp"
#include "pdanet/trainer.hpp"

namespace pdanet::cli {

// Exit codes: 0 success, 1 usage/config error, 2 runtime abort (non-finite
// loss, I/O failure).
constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitRuntime = 2;

// Everything a run needs, parsed from one config file.
struct FullConfig {
  datagen::SynthSpec data;
  TrainConfig train;  // includes the model section
  evaluator::Protocol protocol;
  std::vector<std::string> ablate_variants;
};

FullConfig parse_full_config(const nlohmann::json& j);
nlohmann::json full_config_to_json(const FullConfig& c);

// Entry point used by main() and by tests.
int run(const std::vector<std::string>& args);
int run(int argc, char** argv);

}  // namespace pdanet::cli
