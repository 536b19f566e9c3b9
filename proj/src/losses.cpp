// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/losses.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <memory>

namespace pdanet::losses {

using nlohmann::json;

// ---- kernels ----------------------------------------------------------------

double median_pairwise_distance(const Tensor& a, const Tensor& b) {
  require(a.ndim() == 2 && b.ndim() == 2 && a.dim(1) == b.dim(1),
          "median_pairwise_distance: need [N,D] batches of equal D");
  const int d = a.dim(1);
  std::vector<const double*> rows;
  for (int i = 0; i < a.dim(0); ++i) rows.push_back(&a.data[static_cast<int64_t>(i) * d]);
  for (int i = 0; i < b.dim(0); ++i) rows.push_back(&b.data[static_cast<int64_t>(i) * d]);
  std::vector<double> dists;
  for (size_t i = 0; i < rows.size(); ++i)
    for (size_t j = i + 1; j < rows.size(); ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        double dlt = rows[i][k] - rows[j][k];
        s += dlt * dlt;
      }
      dists.push_back(std::sqrt(s));
    }
  if (dists.empty()) return 1.0;
  std::sort(dists.begin(), dists.end());
  double med = dists[(dists.size() - 1) / 2];
  if (!(med > 0.0) || !std::isfinite(med)) return 1.0;
  return med;
}

KernelSpec median_kernel(const Tensor& fs, const Tensor& ft, KernelSpec::Estimator est) {
  double m = median_pairwise_distance(fs, ft);
  KernelSpec k;
  k.bandwidths = {m / 4.0, m / 2.0, m, 2.0 * m, 4.0 * m};
  k.estimator = est;
  return k;
}

// ---- MMD --------------------------------------------------------------------

namespace {

// Pairwise squared Euclidean distances between row sets, [na, nb].
std::vector<double> pairwise_sq(const Tensor& a, const Tensor& b) {
  const int na = a.dim(0), nb = b.dim(0), d = a.dim(1);
  std::vector<double> out(static_cast<size_t>(na) * nb);
  for (int i = 0; i < na; ++i)
    for (int j = 0; j < nb; ++j) {
      double s = 0.0;
      for (int k = 0; k < d; ++k) {
        double dlt = a.at2(i, k) - b.at2(j, k);
        s += dlt * dlt;
      }
      out[static_cast<size_t>(i) * nb + j] = s;
    }
  return out;
}

}  // namespace

Node* mmd_loss(Node* feats_s, Node* feats_t, const KernelSpec& kernel) {
  const Tensor& fs = feats_s->val;
  const Tensor& ft = feats_t->val;
  require(fs.ndim() == 2 && ft.ndim() == 2, "mmd_loss: need [N,D] feature batches");
  require(fs.dim(1) == ft.dim(1), "mmd_loss: feature dim mismatch");
  const int ns = fs.dim(0), nt = ft.dim(0);
  require(ns >= 1 && nt >= 1, "mmd_loss: empty batch");
  require(!kernel.bandwidths.empty(), "mmd_loss: kernel needs at least one bandwidth");
  for (double b : kernel.bandwidths) require(b > 0.0, "mmd_loss: bandwidths must be positive");
  const bool unbiased = kernel.estimator == KernelSpec::Estimator::kUnbiased;
  if (unbiased)
    require(ns >= 2 && nt >= 2, "mmd_loss: unbiased estimator needs batch sizes >= 2");

  auto dss = std::make_shared<std::vector<double>>(pairwise_sq(fs, fs));
  auto dtt = std::make_shared<std::vector<double>>(pairwise_sq(ft, ft));
  auto dst = std::make_shared<std::vector<double>>(pairwise_sq(fs, ft));
  auto bands = std::make_shared<std::vector<double>>(kernel.bandwidths);

  double total = 0.0;
  for (double b : *bands) {
    const double inv = 1.0 / (2.0 * b * b);
    double sss = 0.0, stt = 0.0, sst = 0.0;
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < ns; ++j) {
        if (unbiased && i == j) continue;
        sss += std::exp(-(*dss)[static_cast<size_t>(i) * ns + j] * inv);
      }
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < nt; ++j) {
        if (unbiased && i == j) continue;
        stt += std::exp(-(*dtt)[static_cast<size_t>(i) * nt + j] * inv);
      }
    for (int i = 0; i < ns; ++i)
      for (int j = 0; j < nt; ++j) sst += std::exp(-(*dst)[static_cast<size_t>(i) * nt + j] * inv);
    const double cs = unbiased ? 1.0 / (static_cast<double>(ns) * (ns - 1)) : 1.0 / (static_cast<double>(ns) * ns);
    const double ct = unbiased ? 1.0 / (static_cast<double>(nt) * (nt - 1)) : 1.0 / (static_cast<double>(nt) * nt);
    total += cs * sss + ct * stt - 2.0 / (static_cast<double>(ns) * nt) * sst;
  }
  total /= static_cast<double>(bands->size());

  bool ng = feats_s->needs_grad || feats_t->needs_grad;
  Graph* g = feats_s->graph;
  return g->make(Tensor::scalar(total), ng,
                 [feats_s, feats_t, dss, dtt, dst, bands, ns, nt, unbiased](Node& nd) {
    const Tensor& fs = feats_s->val;
    const Tensor& ft = feats_t->val;
    const int d = fs.dim(1);
    const double gscale = nd.grad.data[0] / static_cast<double>(bands->size());
    for (double b : *bands) {
      const double inv = 1.0 / (2.0 * b * b);
      const double isig = 1.0 / (b * b);
      const double cs = unbiased ? 1.0 / (static_cast<double>(ns) * (ns - 1))
                                 : 1.0 / (static_cast<double>(ns) * ns);
      const double ct = unbiased ? 1.0 / (static_cast<double>(nt) * (nt - 1))
                                 : 1.0 / (static_cast<double>(nt) * nt);
      const double cc = 2.0 / (static_cast<double>(ns) * nt);
      if (feats_s->needs_grad) {
        feats_s->ensure_grad();
        for (int i = 0; i < ns; ++i) {
          double* gi = &feats_s->grad.data[static_cast<int64_t>(i) * d];
          for (int j = 0; j < ns; ++j) {
            if (i == j) continue;  // zero derivative on the diagonal either way
            double k = std::exp(-(*dss)[static_cast<size_t>(i) * ns + j] * inv);
            double coef = gscale * cs * 2.0 * k * isig;
            for (int c = 0; c < d; ++c) gi[c] += coef * (fs.at2(j, c) - fs.at2(i, c));
          }
          for (int j = 0; j < nt; ++j) {
            double k = std::exp(-(*dst)[static_cast<size_t>(i) * nt + j] * inv);
            double coef = gscale * cc * k * isig;
            for (int c = 0; c < d; ++c) gi[c] -= coef * (ft.at2(j, c) - fs.at2(i, c));
          }
        }
      }
      if (feats_t->needs_grad) {
        feats_t->ensure_grad();
        for (int i = 0; i < nt; ++i) {
          double* gi = &feats_t->grad.data[static_cast<int64_t>(i) * d];
          for (int j = 0; j < nt; ++j) {
            if (i == j) continue;
            double k = std::exp(-(*dtt)[static_cast<size_t>(i) * nt + j] * inv);
            double coef = gscale * ct * 2.0 * k * isig;
            for (int c = 0; c < d; ++c) gi[c] += coef * (ft.at2(j, c) - ft.at2(i, c));
          }
          for (int j = 0; j < ns; ++j) {
            double k = std::exp(-(*dst)[static_cast<size_t>(j) * nt + i] * inv);
            double coef = gscale * cc * k * isig;
            for (int c = 0; c < d; ++c) gi[c] -= coef * (fs.at2(j, c) - ft.at2(i, c));
          }
        }
      }
    }
  });
}

// ---- triplet ----------------------------------------------------------------

Node* triplet_loss(Node* v, Node* v_pos, Node* v_neg, double margin) {
  require(margin > 0.0, "triplet_loss: margin must be positive");
  require(v->val.ndim() == 2 && v->val.same_shape(v_pos->val) && v->val.same_shape(v_neg->val),
          "triplet_loss: feature dim mismatch");
  Node* d_pos = row_l2_diff(v, v_pos);
  Node* d_neg = row_l2_diff(v, v_neg);
  Node* hinge = relu(affine(sub(d_pos, d_neg), 1.0, margin));
  return mean_all(hinge);
}

// ---- reconstruction ----------------------------------------------------------

Node* reconstruction_loss_source(Node* x_ss, Node* x_s, Node* x_pose_guided, Node* x_s_ref) {
  require(x_ss->val.same_shape(x_s->val) && x_pose_guided->val.same_shape(x_s_ref->val) &&
              x_ss->val.same_shape(x_pose_guided->val),
          "reconstruction_loss_source: image shape mismatch");
  return add(l1_mean(x_ss, x_s), l1_mean(x_pose_guided, x_s_ref));
}

Node* reconstruction_loss_target(Node* x_tt, Node* x_t) {
  require(x_tt->val.same_shape(x_t->val), "reconstruction_loss_target: image shape mismatch");
  return l1_mean(x_tt, x_t);
}

// ---- adversarial --------------------------------------------------------------

namespace {

Node* mean_log(Node* probs) { return mean_all(log_clamped(probs)); }
Node* mean_log1m(Node* probs) { return mean_all(log_clamped(affine(probs, -1.0, 1.0))); }

}  // namespace

AdvObjectives domain_adversarial_loss(Graph& g, Model& model, Domain domain, Node* real_images,
                                      Node* recon_images, Node* translated_images,
                                      bool training) {
  require(real_images && recon_images && translated_images,
          "domain_adversarial_loss: missing image batch");
  Node* d_real = model.discriminate_domain(g, domain, real_images, training);
  Node* d_recon = model.discriminate_domain(g, domain, recon_images, training);
  Node* d_trans = model.discriminate_domain(g, domain, translated_images, training);
  AdvObjectives o;
  o.d_objective = add(mean_log(d_real), add(mean_log1m(d_recon), mean_log1m(d_trans)));
  o.g_objective = affine(add(mean_log(d_recon), mean_log(d_trans)), -1.0, 0.0);
  return o;
}

PoseObjectives pose_adversarial_loss(Graph& g, Model& model, const PoseTuple& t, bool training) {
  require(t.x_s && t.p_s && t.x_ss && t.x_t && t.p_t && t.x_tt,
          "pose_adversarial_loss: missing tuple member");
  require(t.p_s_prime && t.x_ss_pose_guided,
          "pose_adversarial_loss: source identity pair (p', pose-guided recovery) is required");

  Node* real_match = model.discriminate_pose(g, Domain::kSource, t.x_s, t.p_s, training);
  Node* recon_fake = model.discriminate_pose(g, Domain::kSource, t.x_ss, t.p_s, training);
  Node* mismatched = model.discriminate_pose(g, Domain::kSource, t.x_s, t.p_s_prime, training);
  Node* guided_fake =
      model.discriminate_pose(g, Domain::kSource, t.x_ss_pose_guided, t.p_s, training);
  Node* t_real = model.discriminate_pose(g, Domain::kTarget, t.x_t, t.p_t, training);
  Node* t_recon = model.discriminate_pose(g, Domain::kTarget, t.x_tt, t.p_t, training);

  // Confidence maps reduce to scalars before the log.
  Node* s_real = spatial_mean(real_match);
  Node* s_recon = spatial_mean(recon_fake);
  Node* s_mis = spatial_mean(mismatched);
  Node* s_guided = spatial_mean(guided_fake);
  Node* s_treal = spatial_mean(t_real);
  Node* s_trecon = spatial_mean(t_recon);

  PoseObjectives o;
  o.d_source = add(add(mean_log(s_real), mean_log1m(s_recon)),
                   add(mean_log1m(s_mis), mean_log1m(s_guided)));
  o.d_target = add(mean_log(s_treal), mean_log1m(s_trecon));
  o.d_objective = add(o.d_source, o.d_target);
  o.g_objective = affine(
      add(mean_log(s_recon), add(mean_log(s_guided), mean_log(s_trecon))), -1.0, 0.0);
  return o;
}

// ---- report -------------------------------------------------------------------

std::string LossReport::to_jsonl() const {
  json j;
  j["step"] = step;
  auto put = [&j](const char* k, const std::optional<double>& v) {
    if (v) j[k] = *v;
  };
  put("mmd", mmd);
  put("triplet", triplet);
  put("rec_s", rec_s);
  put("rec_t", rec_t);
  put("domain_s", domain_s);
  put("domain_t", domain_t);
  put("pose_s", pose_s);
  put("pose_t", pose_t);
  put("g_domain_s", g_domain_s);
  put("g_domain_t", g_domain_t);
  put("g_pose", g_pose);
  put("enc_total", enc_total);
  put("gen_s_total", gen_s_total);
  put("gen_t_total", gen_t_total);
  put("disc_total", disc_total);
  j["clip_events"] = clip_events;
  return j.dump();
}

bool LossReport::all_finite(std::string* offending) const {
  const std::pair<const char*, const std::optional<double>*> fields[] = {
      {"mmd", &mmd},           {"triplet", &triplet},   {"rec_s", &rec_s},
      {"rec_t", &rec_t},       {"domain_s", &domain_s}, {"domain_t", &domain_t},
      {"pose_s", &pose_s},     {"pose_t", &pose_t},     {"g_domain_s", &g_domain_s},
      {"g_domain_t", &g_domain_t}, {"g_pose", &g_pose}, {"enc_total", &enc_total},
      {"gen_s_total", &gen_s_total}, {"gen_t_total", &gen_t_total}, {"disc_total", &disc_total}};
  for (const auto& [name, val] : fields) {
    if (val->has_value() && !std::isfinite(**val)) {
      if (offending) *offending = name;
      return false;
    }
  }
  return true;
}

}  // namespace pdanet::losses
