// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/translator.hpp"

#include <cstdio>

#include "pdanet/image_io.hpp"

namespace pdanet::translator {

Tensor translate(const Model& model, const Tensor& image, const Tensor& target_pose,
                 Domain out_domain) {
  const ModelConfig& cfg = model.config();
  require(image.ndim() == 3 && image.dim(0) == 3 && image.dim(1) == cfg.height &&
              image.dim(2) == cfg.width,
          "translate: image shape mismatch, got " + shape_str(image.shape));
  require(target_pose.ndim() == 3 && target_pose.dim(0) == datagen::kNumLandmarks,
          "translate: pose map shape mismatch, got " + shape_str(target_pose.shape));

  Tensor img_b({1, 3, cfg.height, cfg.width});
  img_b.data = image.data;
  Tensor pose_b({1, datagen::kNumLandmarks, cfg.height, cfg.width});
  pose_b.data = target_pose.data;

  Tensor v_c = model.encode_content(img_b);
  Tensor v_p = model.encode_pose(pose_b);
  Tensor out = model.generate(out_domain, v_p, v_c);
  Tensor result({3, cfg.height, cfg.width});
  result.data.assign(out.data.begin(), out.data.end());
  return result;
}

namespace {

void blit(Tensor& canvas, const Tensor& cell, int row, int col, int h, int w) {
  const int gw = canvas.dim(2);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        canvas.data[(static_cast<int64_t>(c) * canvas.dim(1) + row * h + y) * gw + col * w + x] =
            cell.data[(static_cast<int64_t>(c) * h + y) * w + x];
}

Tensor pose_silhouette(const Tensor& pose, int h, int w) {
  Tensor cell({3, h, w});
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double m = 0.0;
      for (int c = 0; c < datagen::kNumLandmarks; ++c)
        m = std::max(m, pose.data[(static_cast<int64_t>(c) * h + y) * w + x]);
      for (int c = 0; c < 3; ++c)
        cell.data[(static_cast<int64_t>(c) * h + y) * w + x] = 2.0 * m - 1.0;
    }
  return cell;
}

}  // namespace

Tensor render_grid(const Model& model, const std::vector<Tensor>& inputs,
                   const std::vector<Tensor>& poses, const std::vector<Route>& routes) {
  require(!inputs.empty() && !poses.empty() && !routes.empty(),
          "render_grid: inputs, poses and routes must be non-empty");
  require(inputs.size() == routes.size() || inputs.size() == 1,
          "render_grid: need one input per route (or a single shared input)");
  const int h = model.config().height, w = model.config().width;
  for (const Tensor& t : inputs)
    require(t.ndim() == 3 && t.dim(0) == 3 && t.dim(1) == h && t.dim(2) == w,
            "render_grid: input shape mismatch");
  for (const Tensor& t : poses)
    require(t.ndim() == 3 && t.dim(0) == datagen::kNumLandmarks && t.dim(1) == h && t.dim(2) == w,
            "render_grid: pose shape mismatch");

  const int rows = 1 + static_cast<int>(routes.size());
  const int cols = 1 + static_cast<int>(poses.size());
  Tensor canvas({3, rows * h, cols * w}, -1.0);

  for (size_t j = 0; j < poses.size(); ++j)
    blit(canvas, pose_silhouette(poses[j], h, w), 0, 1 + static_cast<int>(j), h, w);

  for (size_t i = 0; i < routes.size(); ++i) {
    const Tensor& input = inputs.size() == 1 ? inputs[0] : inputs[i];
    blit(canvas, input, 1 + static_cast<int>(i), 0, h, w);
    for (size_t j = 0; j < poses.size(); ++j) {
      Tensor cell = translate(model, input, poses[j], routes[i].out);
      blit(canvas, cell, 1 + static_cast<int>(i), 1 + static_cast<int>(j), h, w);
    }
  }
  return canvas;
}

void save_grid(const Model& model, const std::vector<Tensor>& inputs,
               const std::vector<Tensor>& poses, const std::vector<Route>& routes,
               const std::string& path) {
  write_png(path, to_u8(render_grid(model, inputs, poses, routes)));
}

std::vector<Route> default_routes() {
  return {{Domain::kSource, Domain::kSource},
          {Domain::kTarget, Domain::kSource},
          {Domain::kTarget, Domain::kTarget},
          {Domain::kSource, Domain::kTarget}};
}

std::string grid_filename(int64_t step, const std::vector<Route>& routes) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "grid_step%06lld", static_cast<long long>(step));
  std::string name = buf;
  name += "_routes";
  for (const Route& r : routes) {
    name += "-";
    name += r.name();
  }
  return name + ".png";
}

}  // namespace pdanet::translator
