// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

namespace pdanet {

// Rejects unknown fields so config typos fail loudly with the field named.
inline void check_json_keys(const nlohmann::json& j, const std::vector<std::string>& allowed,
                            const std::string& context) {
  if (!j.is_object()) throw std::invalid_argument(context + ": expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end())
      throw std::invalid_argument("unknown field \"" + it.key() + "\" in " + context);
  }
}

}  // namespace pdanet
