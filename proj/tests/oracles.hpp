// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

// Slow, independent reference implementations used to pin expected values.
// These deliberately avoid the library's computation paths.

#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "pdanet/networks.hpp"
#include "pdanet/tensor.hpp"

namespace oracles {

using pdanet::Tensor;

// Plain kernel-sum MMD^2 for one bandwidth sigma, biased or unbiased.
inline double mmd_kernel_sum(const Tensor& fs, const Tensor& ft, double sigma, bool unbiased) {
  const int ns = fs.dim(0), nt = ft.dim(0), d = fs.dim(1);
  auto k = [sigma, d](const Tensor& a, int i, const Tensor& b, int j) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      double dlt = a.at2(i, c) - b.at2(j, c);
      s += dlt * dlt;
    }
    return std::exp(-s / (2.0 * sigma * sigma));
  };
  double sss = 0.0, stt = 0.0, sst = 0.0;
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < ns; ++j)
      if (!(unbiased && i == j)) sss += k(fs, i, fs, j);
  for (int i = 0; i < nt; ++i)
    for (int j = 0; j < nt; ++j)
      if (!(unbiased && i == j)) stt += k(ft, i, ft, j);
  for (int i = 0; i < ns; ++i)
    for (int j = 0; j < nt; ++j) sst += k(fs, i, ft, j);
  double cs = unbiased ? 1.0 / (double(ns) * (ns - 1)) : 1.0 / (double(ns) * ns);
  double ct = unbiased ? 1.0 / (double(nt) * (nt - 1)) : 1.0 / (double(nt) * nt);
  return cs * sss + ct * stt - 2.0 / (double(ns) * nt) * sst;
}

inline double mmd_multi(const Tensor& fs, const Tensor& ft, const std::vector<double>& bands,
                        bool unbiased) {
  double sum = 0.0;
  for (double b : bands) sum += mmd_kernel_sum(fs, ft, b, unbiased);
  return sum / static_cast<double>(bands.size());
}

// Triplet hinge over explicit rows.
inline double triplet(const Tensor& v, const Tensor& vp, const Tensor& vn, double m) {
  const int n = v.dim(0), d = v.dim(1);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    double dp = 0.0, dn = 0.0;
    for (int c = 0; c < d; ++c) {
      dp += (v.at2(i, c) - vp.at2(i, c)) * (v.at2(i, c) - vp.at2(i, c));
      dn += (v.at2(i, c) - vn.at2(i, c)) * (v.at2(i, c) - vn.at2(i, c));
    }
    total += std::max(0.0, m + std::sqrt(dp) - std::sqrt(dn));
  }
  return total / n;
}

inline double mean_abs_diff(const Tensor& a, const Tensor& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) s += std::abs(a.data[i] - b.data[i]);
  return s / static_cast<double>(a.data.size());
}

// Scalar-loop discriminator objective from per-sample scores.
inline double mean_log(const std::vector<double>& scores) {
  double s = 0.0;
  for (double v : scores) s += std::log(v);
  return s / scores.size();
}
inline double mean_log1m(const std::vector<double>& scores) {
  double s = 0.0;
  for (double v : scores) s += std::log(1.0 - v);
  return s / scores.size();
}

inline std::vector<double> domain_scores(const pdanet::Model& m, pdanet::Domain d,
                                         const Tensor& images) {
  Tensor s = m.discriminate_domain(d, images);
  return {s.data.begin(), s.data.end()};
}

// Per-sample mean confidence of the pose discriminator.
inline std::vector<double> pose_scores(const pdanet::Model& m, pdanet::Domain d,
                                       const Tensor& images, const Tensor& maps) {
  Tensor c = m.discriminate_pose(d, images, maps);
  const int n = c.dim(0);
  const int64_t area = c.numel() / n;
  std::vector<double> out(n, 0.0);
  for (int i = 0; i < n; ++i) {
    for (int64_t t = 0; t < area; ++t) out[i] += c.data[i * area + t];
    out[i] /= static_cast<double>(area);
  }
  return out;
}

// ---- retrieval oracles ------------------------------------------------------

// O(n^2) selection sort on (distance, index) keys.
inline std::vector<int> rank_bruteforce(const Tensor& queries, int qi, const Tensor& gallery) {
  const int g = gallery.dim(0), d = gallery.dim(1);
  std::vector<double> dist(g);
  for (int j = 0; j < g; ++j) {
    double s = 0.0;
    for (int c = 0; c < d; ++c) {
      double dlt = queries.at2(qi, c) - gallery.at2(j, c);
      s += dlt * dlt;
    }
    dist[j] = std::sqrt(s);
  }
  std::vector<int> order(g);
  for (int j = 0; j < g; ++j) order[j] = j;
  for (int a = 0; a < g; ++a) {
    int best = a;
    for (int b = a + 1; b < g; ++b) {
      if (dist[order[b]] < dist[order[best]] ||
          (dist[order[b]] == dist[order[best]] && order[b] < order[best]))
        best = b;
    }
    std::swap(order[a], order[best]);
  }
  return order;
}

inline double cmc_bruteforce(const std::vector<std::vector<int>>& orders,
                             const std::vector<int>& qlabels, const std::vector<int>& glabels,
                             int k) {
  int hits = 0;
  for (size_t q = 0; q < orders.size(); ++q) {
    bool hit = false;
    for (int r = 0; r < k; ++r)
      if (glabels[orders[q][r]] == qlabels[q]) hit = true;
    if (hit) ++hits;
  }
  return double(hits) / orders.size();
}

inline double ap_bruteforce(const std::vector<int>& order, int qlabel,
                            const std::vector<int>& glabels) {
  int rel = 0;
  double sum = 0.0;
  for (size_t r = 0; r < order.size(); ++r) {
    if (glabels[order[r]] == qlabel) {
      ++rel;
      sum += double(rel) / double(r + 1);
    }
  }
  return sum / rel;
}

}  // namespace oracles
