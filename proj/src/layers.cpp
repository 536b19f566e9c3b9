// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/layers.hpp"

#include <cmath>
#include <memory>

namespace pdanet {

Node* spectral_norm_weight(Graph& g, Node* w, Param* u, bool update_u) {
  const int m = w->val.dim(0);
  const int64_t n = w->val.numel() / m;

  // One power iteration from the persistent u estimate.
  std::vector<double> v(n, 0.0), u2(m, 0.0);
  for (int i = 0; i < m; ++i) {
    const double* row = &w->val.data[i * n];
    double ui = u->value.data[i];
    for (int64_t j = 0; j < n; ++j) v[j] += ui * row[j];
  }
  double vn = 0.0;
  for (double x : v) vn += x * x;
  vn = std::sqrt(std::max(vn, 1e-24));
  for (double& x : v) x /= vn;
  for (int i = 0; i < m; ++i) {
    const double* row = &w->val.data[i * n];
    double s = 0.0;
    for (int64_t j = 0; j < n; ++j) s += row[j] * v[j];
    u2[i] = s;
  }
  double sigma = 0.0;
  for (double x : u2) sigma += x * x;
  sigma = std::sqrt(std::max(sigma, 1e-24));
  for (double& x : u2) x /= sigma;
  if (update_u)
    for (int i = 0; i < m; ++i) u->value.data[i] = u2[i];

  Tensor out = w->val;
  for (double& x : out.data) x /= sigma;
  auto uv = std::make_shared<std::pair<std::vector<double>, std::vector<double>>>(u2, v);
  Node* r = g.make(std::move(out), w->needs_grad, nullptr);
  r->back = [w, r, sigma, uv, m, n](Node& nd) {
    if (!w->needs_grad) return;
    w->ensure_grad();
    double dot = 0.0;  // G : W_hat
    for (int64_t i = 0; i < nd.grad.numel(); ++i) dot += nd.grad.data[i] * r->val.data[i];
    const auto& [u2v, vv] = *uv;
    for (int i = 0; i < m; ++i)
      for (int64_t j = 0; j < n; ++j)
        w->grad.data[i * n + j] +=
            nd.grad.data[i * n + j] / sigma - dot / sigma * u2v[i] * vv[j];
  };
  return r;
}

Conv2dLayer Conv2dLayer::create(ParamGroup& pg, const std::string& name, int cin, int cout,
                                int kernel, int stride, int pad, Rng& rng, bool spectral_norm,
                                double init_gain) {
  Conv2dLayer l;
  double fan_in = static_cast<double>(cin) * kernel * kernel;
  double stddev = std::sqrt(init_gain / fan_in);
  l.w = pg.add(name + ".w", Tensor::randn({cout, cin, kernel, kernel}, rng, stddev));
  l.b = pg.add(name + ".b", Tensor::zeros({cout}));
  l.stride = stride;
  l.pad = pad;
  if (spectral_norm) {
    Tensor u = Tensor::randn({cout}, rng, 1.0);
    double nrm = 0.0;
    for (double x : u.data) nrm += x * x;
    nrm = std::sqrt(std::max(nrm, 1e-24));
    for (double& x : u.data) x /= nrm;
    l.sn_u = pg.add(name + ".sn_u", std::move(u), /*trainable=*/false);
  }
  return l;
}

Node* Conv2dLayer::operator()(Graph& g, Node* x, bool training) const {
  Node* wn = g.param(w);
  if (sn_u) wn = spectral_norm_weight(g, wn, sn_u, training);
  return conv2d(x, wn, g.param(b), stride, pad);
}

LinearLayer LinearLayer::create(ParamGroup& pg, const std::string& name, int in, int out,
                                Rng& rng, double init_gain) {
  LinearLayer l;
  double stddev = std::sqrt(init_gain / static_cast<double>(in));
  l.w = pg.add(name + ".w", Tensor::randn({out, in}, rng, stddev));
  l.b = pg.add(name + ".b", Tensor::zeros({out}));
  return l;
}

Node* LinearLayer::operator()(Graph& g, Node* x) const {
  return linear(x, g.param(w), g.param(b));
}

InstanceNormLayer InstanceNormLayer::create(ParamGroup& pg, const std::string& name,
                                            int channels) {
  InstanceNormLayer l;
  l.gamma = pg.add(name + ".gamma", Tensor::full({channels}, 1.0));
  l.beta = pg.add(name + ".beta", Tensor::zeros({channels}));
  return l;
}

Node* InstanceNormLayer::operator()(Graph& g, Node* x) const {
  return instance_norm(x, g.param(gamma), g.param(beta));
}

ResBlock ResBlock::create(ParamGroup& pg, const std::string& name, int cin, int cout, int stride,
                          bool use_norm, Rng& rng) {
  ResBlock b;
  b.use_norm = use_norm;
  b.c1 = Conv2dLayer::create(pg, name + ".c1", cin, cout, 3, stride, 1, rng);
  b.c2 = Conv2dLayer::create(pg, name + ".c2", cout, cout, 3, 1, 1, rng);
  b.has_proj = (cin != cout) || (stride != 1);
  if (b.has_proj) b.proj = Conv2dLayer::create(pg, name + ".proj", cin, cout, 1, stride, 0, rng);
  if (use_norm) {
    b.n1 = InstanceNormLayer::create(pg, name + ".n1", cout);
    b.n2 = InstanceNormLayer::create(pg, name + ".n2", cout);
  }
  return b;
}

Node* ResBlock::operator()(Graph& g, Node* x, bool training) const {
  Node* h = c1(g, x, training);
  if (use_norm) h = n1(g, h);
  h = relu(h);
  h = c2(g, h, training);
  if (use_norm) h = n2(g, h);
  Node* skip = has_proj ? proj(g, x, training) : x;
  return relu(add(h, skip));
}

}  // namespace pdanet
