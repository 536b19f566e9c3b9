// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/graph.hpp"

#include <Eigen/Core>

#include <cmath>
#include <memory>

namespace pdanet {

using MatRM = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<MatRM>;
using MapC = Eigen::Map<const MatRM>;

namespace {

Graph* graph_of(Node* a) { return a->graph; }

void accumulate(Node* parent, const Tensor& g) {
  if (!parent->needs_grad) return;
  parent->ensure_grad();
  for (int64_t i = 0; i < g.numel(); ++i) parent->grad.data[i] += g.data[i];
}

}  // namespace

// ---- elementwise -----------------------------------------------------------

Node* add(Node* a, Node* b) {
  require(a->val.same_shape(b->val), "add: shape mismatch " + shape_str(a->val.shape) +
                                         " vs " + shape_str(b->val.shape));
  Tensor out = a->val;
  for (int64_t i = 0; i < out.numel(); ++i) out.data[i] += b->val.data[i];
  bool ng = a->needs_grad || b->needs_grad;
  return graph_of(a)->make(std::move(out), ng, [a, b](Node& n) {
    accumulate(a, n.grad);
    accumulate(b, n.grad);
  });
}

Node* sub(Node* a, Node* b) {
  require(a->val.same_shape(b->val), "sub: shape mismatch");
  Tensor out = a->val;
  for (int64_t i = 0; i < out.numel(); ++i) out.data[i] -= b->val.data[i];
  bool ng = a->needs_grad || b->needs_grad;
  return graph_of(a)->make(std::move(out), ng, [a, b](Node& n) {
    accumulate(a, n.grad);
    if (b->needs_grad) {
      b->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i) b->grad.data[i] -= n.grad.data[i];
    }
  });
}

Node* mul(Node* a, Node* b) {
  require(a->val.same_shape(b->val), "mul: shape mismatch");
  Tensor out = a->val;
  for (int64_t i = 0; i < out.numel(); ++i) out.data[i] *= b->val.data[i];
  bool ng = a->needs_grad || b->needs_grad;
  return graph_of(a)->make(std::move(out), ng, [a, b](Node& n) {
    if (a->needs_grad) {
      a->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i)
        a->grad.data[i] += n.grad.data[i] * b->val.data[i];
    }
    if (b->needs_grad) {
      b->ensure_grad();
      for (int64_t i = 0; i < n.grad.numel(); ++i)
        b->grad.data[i] += n.grad.data[i] * a->val.data[i];
    }
  });
}

Node* affine(Node* a, double alpha, double beta) {
  Tensor out = a->val;
  for (double& x : out.data) x = alpha * x + beta;
  return graph_of(a)->make(std::move(out), a->needs_grad, [a, alpha](Node& n) {
    if (!a->needs_grad) return;
    a->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) a->grad.data[i] += alpha * n.grad.data[i];
  });
}

Node* relu(Node* a) {
  Tensor out = a->val;
  for (double& x : out.data) x = x > 0.0 ? x : 0.0;
  return graph_of(a)->make(std::move(out), a->needs_grad, [a](Node& n) {
    if (!a->needs_grad) return;
    a->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i)
      if (a->val.data[i] > 0.0) a->grad.data[i] += n.grad.data[i];
  });
}

Node* leaky_relu(Node* a, double slope) {
  Tensor out = a->val;
  for (double& x : out.data) x = x > 0.0 ? x : slope * x;
  return graph_of(a)->make(std::move(out), a->needs_grad, [a, slope](Node& n) {
    if (!a->needs_grad) return;
    a->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i)
      a->grad.data[i] += (a->val.data[i] > 0.0 ? 1.0 : slope) * n.grad.data[i];
  });
}

Node* tanh_op(Node* a) {
  Tensor out = a->val;
  for (double& x : out.data) x = std::tanh(x);
  Node* r = graph_of(a)->make(std::move(out), a->needs_grad, nullptr);
  r->back = [a, r](Node& n) {
    if (!a->needs_grad) return;
    a->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      double y = r->val.data[i];
      a->grad.data[i] += (1.0 - y * y) * n.grad.data[i];
    }
  };
  return r;
}

Node* sigmoid_op(Node* a) {
  Tensor out = a->val;
  for (double& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  Node* r = graph_of(a)->make(std::move(out), a->needs_grad, nullptr);
  r->back = [a, r](Node& n) {
    if (!a->needs_grad) return;
    a->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      double y = r->val.data[i];
      a->grad.data[i] += y * (1.0 - y) * n.grad.data[i];
    }
  };
  return r;
}

Node* log_clamped(Node* a, double eps) {
  Tensor out = a->val;
  for (double& x : out.data) x = std::log(x > eps ? x : eps);
  return graph_of(a)->make(std::move(out), a->needs_grad, [a, eps](Node& n) {
    if (!a->needs_grad) return;
    a->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) {
      double x = a->val.data[i];
      if (x > eps) a->grad.data[i] += n.grad.data[i] / x;
    }
  });
}

Node* reshape(Node* a, Shape s) {
  require(shape_numel(s) == a->val.numel(), "reshape: element count mismatch");
  Tensor out = a->val;
  out.shape = std::move(s);
  return graph_of(a)->make(std::move(out), a->needs_grad, [a](Node& n) {
    if (!a->needs_grad) return;
    a->ensure_grad();
    for (int64_t i = 0; i < n.grad.numel(); ++i) a->grad.data[i] += n.grad.data[i];
  });
}

Node* concat_cols(Node* a, Node* b) {
  require(a->val.ndim() == 2 && b->val.ndim() == 2 && a->val.dim(0) == b->val.dim(0),
          "concat_cols: need [N,D] inputs with equal N");
  int n = a->val.dim(0), da = a->val.dim(1), db = b->val.dim(1);
  Tensor out({n, da + db});
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < da; ++j) out.at2(i, j) = a->val.at2(i, j);
    for (int j = 0; j < db; ++j) out.at2(i, da + j) = b->val.at2(i, j);
  }
  bool ng = a->needs_grad || b->needs_grad;
  return graph_of(a)->make(std::move(out), ng, [a, b, n, da, db](Node& nd) {
    if (a->needs_grad) {
      a->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < da; ++j) a->grad.at2(i, j) += nd.grad.at2(i, j);
    }
    if (b->needs_grad) {
      b->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < db; ++j) b->grad.at2(i, j) += nd.grad.at2(i, da + j);
    }
  });
}

Node* concat_channels(Node* a, Node* b) {
  require(a->val.ndim() == 4 && b->val.ndim() == 4, "concat_channels: need [N,C,H,W]");
  require(a->val.dim(0) == b->val.dim(0) && a->val.dim(2) == b->val.dim(2) &&
              a->val.dim(3) == b->val.dim(3),
          "concat_channels: spatial/batch mismatch");
  int n = a->val.dim(0), ca = a->val.dim(1), cb = b->val.dim(1);
  int h = a->val.dim(2), w = a->val.dim(3);
  int64_t plane = static_cast<int64_t>(h) * w;
  Tensor out({n, ca + cb, h, w});
  for (int i = 0; i < n; ++i) {
    std::copy_n(&a->val.data[static_cast<int64_t>(i) * ca * plane], ca * plane,
                &out.data[static_cast<int64_t>(i) * (ca + cb) * plane]);
    std::copy_n(&b->val.data[static_cast<int64_t>(i) * cb * plane], cb * plane,
                &out.data[(static_cast<int64_t>(i) * (ca + cb) + ca) * plane]);
  }
  bool ng = a->needs_grad || b->needs_grad;
  return graph_of(a)->make(std::move(out), ng, [a, b, n, ca, cb, plane](Node& nd) {
    for (int i = 0; i < n; ++i) {
      if (a->needs_grad) {
        a->ensure_grad();
        const double* src = &nd.grad.data[static_cast<int64_t>(i) * (ca + cb) * plane];
        double* dst = &a->grad.data[static_cast<int64_t>(i) * ca * plane];
        for (int64_t k = 0; k < ca * plane; ++k) dst[k] += src[k];
      }
      if (b->needs_grad) {
        b->ensure_grad();
        const double* src = &nd.grad.data[(static_cast<int64_t>(i) * (ca + cb) + ca) * plane];
        double* dst = &b->grad.data[static_cast<int64_t>(i) * cb * plane];
        for (int64_t k = 0; k < cb * plane; ++k) dst[k] += src[k];
      }
    }
  });
}

// ---- linear ----------------------------------------------------------------

Node* linear(Node* x, Node* w, Node* b) {
  require(x->val.ndim() == 2 && w->val.ndim() == 2, "linear: need [N,In] and [Out,In]");
  int n = x->val.dim(0), in = x->val.dim(1), out_dim = w->val.dim(0);
  require(w->val.dim(1) == in, "linear: weight/input dim mismatch");
  require(b->val.numel() == out_dim, "linear: bias dim mismatch");
  Tensor out({n, out_dim});
  {
    MapC X(x->val.data.data(), n, in);
    MapC W(w->val.data.data(), out_dim, in);
    MapM Y(out.data.data(), n, out_dim);
    Y.noalias() = X * W.transpose();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < out_dim; ++j) out.at2(i, j) += b->val.data[j];
  }
  bool ng = x->needs_grad || w->needs_grad || b->needs_grad;
  return graph_of(x)->make(std::move(out), ng, [x, w, b, n, in, out_dim](Node& nd) {
    MapC G(nd.grad.data.data(), n, out_dim);
    if (x->needs_grad) {
      x->ensure_grad();
      MapM GX(x->grad.data.data(), n, in);
      MapC W(w->val.data.data(), out_dim, in);
      GX.noalias() += G * W;
    }
    if (w->needs_grad) {
      w->ensure_grad();
      MapM GW(w->grad.data.data(), out_dim, in);
      MapC X(x->val.data.data(), n, in);
      GW.noalias() += G.transpose() * X;
    }
    if (b->needs_grad) {
      b->ensure_grad();
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < out_dim; ++j) b->grad.data[j] += nd.grad.at2(i, j);
    }
  });
}

// ---- conv2d ----------------------------------------------------------------

namespace {

struct ConvDims {
  int n, cin, h, w, cout, kh, kw, stride, pad, ho, wo;
};

void im2col(const Tensor& x, int img, const ConvDims& d, double* col) {
  // col is [cin*kh*kw, ho*wo] row-major.
  const int64_t plane = static_cast<int64_t>(d.h) * d.w;
  const double* base = &x.data[static_cast<int64_t>(img) * d.cin * plane];
  int64_t row = 0;
  for (int c = 0; c < d.cin; ++c) {
    for (int ki = 0; ki < d.kh; ++ki) {
      for (int kj = 0; kj < d.kw; ++kj, ++row) {
        double* dst = col + row * d.ho * d.wo;
        for (int oi = 0; oi < d.ho; ++oi) {
          int ii = oi * d.stride + ki - d.pad;
          if (ii < 0 || ii >= d.h) {
            std::fill_n(dst + static_cast<int64_t>(oi) * d.wo, d.wo, 0.0);
            continue;
          }
          const double* src_row = base + c * plane + static_cast<int64_t>(ii) * d.w;
          for (int oj = 0; oj < d.wo; ++oj) {
            int jj = oj * d.stride + kj - d.pad;
            dst[static_cast<int64_t>(oi) * d.wo + oj] =
                (jj >= 0 && jj < d.w) ? src_row[jj] : 0.0;
          }
        }
      }
    }
  }
}

void col2im_add(const double* col, int img, const ConvDims& d, Tensor& gx) {
  const int64_t plane = static_cast<int64_t>(d.h) * d.w;
  double* base = &gx.data[static_cast<int64_t>(img) * d.cin * plane];
  int64_t row = 0;
  for (int c = 0; c < d.cin; ++c) {
    for (int ki = 0; ki < d.kh; ++ki) {
      for (int kj = 0; kj < d.kw; ++kj, ++row) {
        const double* src = col + row * d.ho * d.wo;
        for (int oi = 0; oi < d.ho; ++oi) {
          int ii = oi * d.stride + ki - d.pad;
          if (ii < 0 || ii >= d.h) continue;
          double* dst_row = base + c * plane + static_cast<int64_t>(ii) * d.w;
          for (int oj = 0; oj < d.wo; ++oj) {
            int jj = oj * d.stride + kj - d.pad;
            if (jj >= 0 && jj < d.w) dst_row[jj] += src[static_cast<int64_t>(oi) * d.wo + oj];
          }
        }
      }
    }
  }
}

}  // namespace

Node* conv2d(Node* x, Node* w, Node* b, int stride, int pad) {
  require(x->val.ndim() == 4 && w->val.ndim() == 4, "conv2d: need [N,C,H,W] and [O,I,kh,kw]");
  ConvDims d;
  d.n = x->val.dim(0);
  d.cin = x->val.dim(1);
  d.h = x->val.dim(2);
  d.w = x->val.dim(3);
  d.cout = w->val.dim(0);
  d.kh = w->val.dim(2);
  d.kw = w->val.dim(3);
  d.stride = stride;
  d.pad = pad;
  require(w->val.dim(1) == d.cin, "conv2d: channel mismatch");
  require(stride >= 1, "conv2d: stride must be >= 1");
  d.ho = (d.h + 2 * pad - d.kh) / stride + 1;
  d.wo = (d.w + 2 * pad - d.kw) / stride + 1;
  require(d.ho > 0 && d.wo > 0, "conv2d: output would be empty");
  require(b->val.numel() == d.cout, "conv2d: bias dim mismatch");

  const int64_t k = static_cast<int64_t>(d.cin) * d.kh * d.kw;
  const int64_t area = static_cast<int64_t>(d.ho) * d.wo;

  Tensor out({d.n, d.cout, d.ho, d.wo});
  {
    std::vector<double> col(static_cast<size_t>(k) * area);
    MapC W(w->val.data.data(), d.cout, k);
    for (int img = 0; img < d.n; ++img) {
      im2col(x->val, img, d, col.data());
      MapC C(col.data(), k, area);
      MapM Y(&out.data[static_cast<int64_t>(img) * d.cout * area], d.cout, area);
      Y.noalias() = W * C;
    }
    for (int img = 0; img < d.n; ++img)
      for (int c = 0; c < d.cout; ++c) {
        double* dst = &out.data[(static_cast<int64_t>(img) * d.cout + c) * area];
        for (int64_t i = 0; i < area; ++i) dst[i] += b->val.data[c];
      }
  }

  bool ng = x->needs_grad || w->needs_grad || b->needs_grad;
  // im2col is recomputed in backward; cheaper than caching a column buffer
  // per tape node at training batch sizes.
  return graph_of(x)->make(std::move(out), ng, [x, w, b, d, k, area](Node& nd) {
    std::vector<double> col(static_cast<size_t>(k) * area);
    std::vector<double> gcol(static_cast<size_t>(k) * area);
    for (int img = 0; img < d.n; ++img) {
      MapC G(&nd.grad.data[static_cast<int64_t>(img) * d.cout * area], d.cout, area);
      if (w->needs_grad) {
        w->ensure_grad();
        im2col(x->val, img, d, col.data());
        MapM GW(w->grad.data.data(), d.cout, k);
        MapC C(col.data(), k, area);
        GW.noalias() += G * C.transpose();
      }
      if (x->needs_grad) {
        x->ensure_grad();
        MapC W(w->val.data.data(), d.cout, k);
        MapM GC(gcol.data(), k, area);
        GC.noalias() = W.transpose() * G;
        col2im_add(gcol.data(), img, d, x->grad);
      }
    }
    if (b->needs_grad) {
      b->ensure_grad();
      for (int img = 0; img < d.n; ++img)
        for (int c = 0; c < d.cout; ++c) {
          const double* src = &nd.grad.data[(static_cast<int64_t>(img) * d.cout + c) * area];
          double s = 0.0;
          for (int64_t i = 0; i < area; ++i) s += src[i];
          b->grad.data[c] += s;
        }
    }
  });
}

// ---- instance norm ---------------------------------------------------------

Node* instance_norm(Node* x, Node* gamma, Node* beta, double eps) {
  require(x->val.ndim() == 4, "instance_norm: need [N,C,H,W]");
  int n = x->val.dim(0), c = x->val.dim(1), h = x->val.dim(2), w = x->val.dim(3);
  require(gamma->val.numel() == c && beta->val.numel() == c,
          "instance_norm: affine param dim mismatch");
  const int64_t m = static_cast<int64_t>(h) * w;

  // Cache normalized values and inverse stddevs for backward.
  auto xhat = std::make_shared<Tensor>(x->val.shape);
  auto inv_std = std::make_shared<std::vector<double>>(static_cast<size_t>(n) * c);

  Tensor out(x->val.shape);
  for (int i = 0; i < n; ++i) {
    for (int ch = 0; ch < c; ++ch) {
      const double* src = &x->val.data[(static_cast<int64_t>(i) * c + ch) * m];
      double mean = 0.0;
      for (int64_t t = 0; t < m; ++t) mean += src[t];
      mean /= static_cast<double>(m);
      double var = 0.0;
      for (int64_t t = 0; t < m; ++t) {
        double dlt = src[t] - mean;
        var += dlt * dlt;
      }
      var /= static_cast<double>(m);
      double is = 1.0 / std::sqrt(var + eps);
      (*inv_std)[static_cast<int64_t>(i) * c + ch] = is;
      double* xh = &xhat->data[(static_cast<int64_t>(i) * c + ch) * m];
      double* dst = &out.data[(static_cast<int64_t>(i) * c + ch) * m];
      double g = gamma->val.data[ch], bt = beta->val.data[ch];
      for (int64_t t = 0; t < m; ++t) {
        xh[t] = (src[t] - mean) * is;
        dst[t] = g * xh[t] + bt;
      }
    }
  }

  bool ng = x->needs_grad || gamma->needs_grad || beta->needs_grad;
  return graph_of(x)->make(std::move(out), ng, [x, gamma, beta, n, c, m, xhat, inv_std](Node& nd) {
    for (int i = 0; i < n; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        const double* gy = &nd.grad.data[(static_cast<int64_t>(i) * c + ch) * m];
        const double* xh = &xhat->data[(static_cast<int64_t>(i) * c + ch) * m];
        if (gamma->needs_grad) {
          gamma->ensure_grad();
          double s = 0.0;
          for (int64_t t = 0; t < m; ++t) s += gy[t] * xh[t];
          gamma->grad.data[ch] += s;
        }
        if (beta->needs_grad) {
          beta->ensure_grad();
          double s = 0.0;
          for (int64_t t = 0; t < m; ++t) s += gy[t];
          beta->grad.data[ch] += s;
        }
        if (x->needs_grad) {
          x->ensure_grad();
          double g = gamma->val.data[ch];
          double is = (*inv_std)[static_cast<int64_t>(i) * c + ch];
          double sum_g = 0.0, sum_gx = 0.0;
          for (int64_t t = 0; t < m; ++t) {
            sum_g += gy[t];
            sum_gx += gy[t] * xh[t];
          }
          double mg = sum_g / static_cast<double>(m);
          double mgx = sum_gx / static_cast<double>(m);
          double* gx = &x->grad.data[(static_cast<int64_t>(i) * c + ch) * m];
          for (int64_t t = 0; t < m; ++t)
            gx[t] += g * is * (gy[t] - mg - xh[t] * mgx);
        }
      }
    }
  });
}

// ---- pooling / resampling --------------------------------------------------

Node* avg_pool2(Node* x) {
  require(x->val.ndim() == 4, "avg_pool2: need [N,C,H,W]");
  int n = x->val.dim(0), c = x->val.dim(1), h = x->val.dim(2), w = x->val.dim(3);
  require(h % 2 == 0 && w % 2 == 0, "avg_pool2: dims must be even");
  Tensor out({n, c, h / 2, w / 2});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int oi = 0; oi < h / 2; ++oi)
        for (int oj = 0; oj < w / 2; ++oj)
          out.at4(i, ch, oi, oj) =
              0.25 * (x->val.at4(i, ch, 2 * oi, 2 * oj) + x->val.at4(i, ch, 2 * oi, 2 * oj + 1) +
                      x->val.at4(i, ch, 2 * oi + 1, 2 * oj) +
                      x->val.at4(i, ch, 2 * oi + 1, 2 * oj + 1));
  return graph_of(x)->make(std::move(out), x->needs_grad, [x, n, c, h, w](Node& nd) {
    if (!x->needs_grad) return;
    x->ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch)
        for (int oi = 0; oi < h / 2; ++oi)
          for (int oj = 0; oj < w / 2; ++oj) {
            double g = 0.25 * nd.grad.at4(i, ch, oi, oj);
            x->grad.at4(i, ch, 2 * oi, 2 * oj) += g;
            x->grad.at4(i, ch, 2 * oi, 2 * oj + 1) += g;
            x->grad.at4(i, ch, 2 * oi + 1, 2 * oj) += g;
            x->grad.at4(i, ch, 2 * oi + 1, 2 * oj + 1) += g;
          }
  });
}

Node* upsample_nearest2(Node* x) {
  require(x->val.ndim() == 4, "upsample_nearest2: need [N,C,H,W]");
  int n = x->val.dim(0), c = x->val.dim(1), h = x->val.dim(2), w = x->val.dim(3);
  Tensor out({n, c, 2 * h, 2 * w});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int ii = 0; ii < h; ++ii)
        for (int jj = 0; jj < w; ++jj) {
          double v = x->val.at4(i, ch, ii, jj);
          out.at4(i, ch, 2 * ii, 2 * jj) = v;
          out.at4(i, ch, 2 * ii, 2 * jj + 1) = v;
          out.at4(i, ch, 2 * ii + 1, 2 * jj) = v;
          out.at4(i, ch, 2 * ii + 1, 2 * jj + 1) = v;
        }
  return graph_of(x)->make(std::move(out), x->needs_grad, [x, n, c, h, w](Node& nd) {
    if (!x->needs_grad) return;
    x->ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch)
        for (int ii = 0; ii < h; ++ii)
          for (int jj = 0; jj < w; ++jj)
            x->grad.at4(i, ch, ii, jj) +=
                nd.grad.at4(i, ch, 2 * ii, 2 * jj) + nd.grad.at4(i, ch, 2 * ii, 2 * jj + 1) +
                nd.grad.at4(i, ch, 2 * ii + 1, 2 * jj) + nd.grad.at4(i, ch, 2 * ii + 1, 2 * jj + 1);
  });
}

Node* pixel_shuffle2(Node* x) {
  require(x->val.ndim() == 4 && x->val.dim(1) % 4 == 0,
          "pixel_shuffle2: need [N,4C,H,W]");
  int n = x->val.dim(0), c4 = x->val.dim(1), h = x->val.dim(2), w = x->val.dim(3);
  int c = c4 / 4;
  Tensor out({n, c, 2 * h, 2 * w});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch)
      for (int a = 0; a < 2; ++a)
        for (int b2 = 0; b2 < 2; ++b2)
          for (int ii = 0; ii < h; ++ii)
            for (int jj = 0; jj < w; ++jj)
              out.at4(i, ch, 2 * ii + a, 2 * jj + b2) = x->val.at4(i, ch * 4 + a * 2 + b2, ii, jj);
  return graph_of(x)->make(std::move(out), x->needs_grad, [x, n, c, h, w](Node& nd) {
    if (!x->needs_grad) return;
    x->ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch)
        for (int a = 0; a < 2; ++a)
          for (int b2 = 0; b2 < 2; ++b2)
            for (int ii = 0; ii < h; ++ii)
              for (int jj = 0; jj < w; ++jj)
                x->grad.at4(i, ch * 4 + a * 2 + b2, ii, jj) +=
                    nd.grad.at4(i, ch, 2 * ii + a, 2 * jj + b2);
  });
}

Node* global_avg_pool(Node* x) {
  require(x->val.ndim() == 4, "global_avg_pool: need [N,C,H,W]");
  int n = x->val.dim(0), c = x->val.dim(1);
  int64_t m = static_cast<int64_t>(x->val.dim(2)) * x->val.dim(3);
  Tensor out({n, c});
  for (int i = 0; i < n; ++i)
    for (int ch = 0; ch < c; ++ch) {
      const double* src = &x->val.data[(static_cast<int64_t>(i) * c + ch) * m];
      double s = 0.0;
      for (int64_t t = 0; t < m; ++t) s += src[t];
      out.at2(i, ch) = s / static_cast<double>(m);
    }
  return graph_of(x)->make(std::move(out), x->needs_grad, [x, n, c, m](Node& nd) {
    if (!x->needs_grad) return;
    x->ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int ch = 0; ch < c; ++ch) {
        double g = nd.grad.at2(i, ch) / static_cast<double>(m);
        double* dst = &x->grad.data[(static_cast<int64_t>(i) * c + ch) * m];
        for (int64_t t = 0; t < m; ++t) dst[t] += g;
      }
  });
}

Node* spatial_mean(Node* x) {
  require(x->val.ndim() == 4, "spatial_mean: need [N,C,H,W]");
  int n = x->val.dim(0);
  int64_t m = static_cast<int64_t>(x->val.dim(1)) * x->val.dim(2) * x->val.dim(3);
  Tensor out({n});
  for (int i = 0; i < n; ++i) {
    const double* src = &x->val.data[static_cast<int64_t>(i) * m];
    double s = 0.0;
    for (int64_t t = 0; t < m; ++t) s += src[t];
    out.data[i] = s / static_cast<double>(m);
  }
  return graph_of(x)->make(std::move(out), x->needs_grad, [x, n, m](Node& nd) {
    if (!x->needs_grad) return;
    x->ensure_grad();
    for (int i = 0; i < n; ++i) {
      double g = nd.grad.data[i] / static_cast<double>(m);
      double* dst = &x->grad.data[static_cast<int64_t>(i) * m];
      for (int64_t t = 0; t < m; ++t) dst[t] += g;
    }
  });
}

Node* broadcast_spatial(Node* v, int h, int w) {
  require(v->val.ndim() == 2, "broadcast_spatial: need [N,D]");
  int n = v->val.dim(0), d = v->val.dim(1);
  Tensor out({n, d, h, w});
  int64_t m = static_cast<int64_t>(h) * w;
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < d; ++j) {
      double val = v->val.at2(i, j);
      double* dst = &out.data[(static_cast<int64_t>(i) * d + j) * m];
      for (int64_t t = 0; t < m; ++t) dst[t] = val;
    }
  return graph_of(v)->make(std::move(out), v->needs_grad, [v, n, d, m](Node& nd) {
    if (!v->needs_grad) return;
    v->ensure_grad();
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < d; ++j) {
        const double* src = &nd.grad.data[(static_cast<int64_t>(i) * d + j) * m];
        double s = 0.0;
        for (int64_t t = 0; t < m; ++t) s += src[t];
        v->grad.at2(i, j) += s;
      }
  });
}

// ---- reductions ------------------------------------------------------------

Node* mean_all(Node* a) {
  int64_t m = a->val.numel();
  require(m > 0, "mean_all: empty tensor");
  double s = 0.0;
  for (double x : a->val.data) s += x;
  Tensor out({1}, s / static_cast<double>(m));
  return graph_of(a)->make(std::move(out), a->needs_grad, [a, m](Node& nd) {
    if (!a->needs_grad) return;
    a->ensure_grad();
    double g = nd.grad.data[0] / static_cast<double>(m);
    for (int64_t i = 0; i < m; ++i) a->grad.data[i] += g;
  });
}

Node* l1_mean(Node* a, Node* b) {
  require(a->val.same_shape(b->val), "l1_mean: shape mismatch " + shape_str(a->val.shape) +
                                         " vs " + shape_str(b->val.shape));
  int64_t m = a->val.numel();
  require(m > 0, "l1_mean: empty tensor");
  double s = 0.0;
  for (int64_t i = 0; i < m; ++i) s += std::abs(a->val.data[i] - b->val.data[i]);
  Tensor out({1}, s / static_cast<double>(m));
  bool ng = a->needs_grad || b->needs_grad;
  return graph_of(a)->make(std::move(out), ng, [a, b, m](Node& nd) {
    double g = nd.grad.data[0] / static_cast<double>(m);
    for (int64_t i = 0; i < m; ++i) {
      double diff = a->val.data[i] - b->val.data[i];
      double sgn = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
      if (a->needs_grad) {
        a->ensure_grad();
        a->grad.data[i] += g * sgn;
      }
      if (b->needs_grad) {
        b->ensure_grad();
        b->grad.data[i] -= g * sgn;
      }
    }
  });
}

Node* row_l2_diff(Node* a, Node* b) {
  require(a->val.ndim() == 2 && a->val.same_shape(b->val),
          "row_l2_diff: need equal [N,D] inputs");
  int n = a->val.dim(0), d = a->val.dim(1);
  Tensor out({n});
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 0; j < d; ++j) {
      double dlt = a->val.at2(i, j) - b->val.at2(i, j);
      s += dlt * dlt;
    }
    out.data[i] = std::sqrt(s);
  }
  bool ng = a->needs_grad || b->needs_grad;
  Node* r = graph_of(a)->make(std::move(out), ng, nullptr);
  r->back = [a, b, r, n, d](Node& nd) {
    for (int i = 0; i < n; ++i) {
      double norm = std::max(r->val.data[i], 1e-12);
      double g = nd.grad.data[i] / norm;
      for (int j = 0; j < d; ++j) {
        double dlt = a->val.at2(i, j) - b->val.at2(i, j);
        if (a->needs_grad) {
          a->ensure_grad();
          a->grad.at2(i, j) += g * dlt;
        }
        if (b->needs_grad) {
          b->ensure_grad();
          b->grad.at2(i, j) -= g * dlt;
        }
      }
    }
  };
  return r;
}

}  // namespace pdanet
