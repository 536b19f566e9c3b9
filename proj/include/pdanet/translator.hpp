// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "pdanet/networks.hpp"

namespace pdanet::translator {

// Pose-guided synthesis: encode the image's content, encode the target pose,
// generate in the requested domain. Exactly the composition of the three
// network ops.
Tensor translate(const Model& model, const Tensor& image, const Tensor& target_pose,
                 Domain out_domain);

struct Route {
  Domain in = Domain::kSource;
  Domain out = Domain::kSource;
  std::string name() const {
    return std::string(1, in == Domain::kSource ? 's' : 't') +
           std::string(1, out == Domain::kSource ? 's' : 't');
  }
};

// Fig-style tiling: header row shows the pose conditions (max-projected
// heatmap silhouettes), then one row per route with its input image in the
// first column. Output is [3, (1+routes)*H, (1+poses)*W] in [-1,1].
// `inputs` must have one image per route, or a single image reused for all.
Tensor render_grid(const Model& model, const std::vector<Tensor>& inputs,
                   const std::vector<Tensor>& poses, const std::vector<Route>& routes);

// Renders and writes the grid as PNG.
void save_grid(const Model& model, const std::vector<Tensor>& inputs,
               const std::vector<Tensor>& poses, const std::vector<Route>& routes,
               const std::string& path);

// Standard four routes (ss, ts, tt, st).
std::vector<Route> default_routes();

std::string grid_filename(int64_t step, const std::vector<Route>& routes);

}  // namespace pdanet::translator
