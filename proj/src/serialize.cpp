// Copyright (c) 2026 the pdanet authors.
// SPDX-License-Identifier: Apache-2.0

#include "pdanet/serialize.hpp"

#include <cstring>
#include <fstream>

namespace pdanet {

namespace {

constexpr char kMagic[4] = {'P', 'D', 'N', 'C'};
constexpr uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::string& path) : f_(path, std::ios::binary) {
    if (!f_) throw std::runtime_error("checkpoint: cannot open for writing: " + path);
  }
  void bytes(const void* p, size_t n) { f_.write(static_cast<const char*>(p), n); }
  void u32(uint32_t v) { bytes(&v, sizeof v); }
  void i64(int64_t v) { bytes(&v, sizeof v); }
  void f64(double v) { bytes(&v, sizeof v); }
  void str(const std::string& s) {
    u32(static_cast<uint32_t>(s.size()));
    bytes(s.data(), s.size());
  }
  void tensor(const Tensor& t) {
    u32(static_cast<uint32_t>(t.shape.size()));
    for (int d : t.shape) u32(static_cast<uint32_t>(d));
    bytes(t.data.data(), t.data.size() * sizeof(double));
  }
  void done(const std::string& path) {
    f_.flush();
    if (!f_) throw std::runtime_error("checkpoint: write failed: " + path);
  }

 private:
  std::ofstream f_;
};

class Reader {
 public:
  explicit Reader(const std::string& path) : f_(path, std::ios::binary), path_(path) {
    if (!f_) throw std::runtime_error("checkpoint: cannot open: " + path);
  }
  void bytes(void* p, size_t n) {
    f_.read(static_cast<char*>(p), n);
    if (f_.gcount() != static_cast<std::streamsize>(n))
      throw std::runtime_error("checkpoint: truncated file: " + path_);
  }
  uint32_t u32() {
    uint32_t v;
    bytes(&v, sizeof v);
    return v;
  }
  int64_t i64() {
    int64_t v;
    bytes(&v, sizeof v);
    return v;
  }
  double f64() {
    double v;
    bytes(&v, sizeof v);
    return v;
  }
  std::string str() {
    uint32_t n = u32();
    std::string s(n, '\0');
    bytes(s.data(), n);
    return s;
  }
  Tensor tensor() {
    uint32_t nd = u32();
    Shape shape(nd);
    for (uint32_t i = 0; i < nd; ++i) shape[i] = static_cast<int>(u32());
    Tensor t(shape);
    bytes(t.data.data(), t.data.size() * sizeof(double));
    return t;
  }

 private:
  std::ifstream f_;
  std::string path_;
};

}  // namespace

void save_checkpoint(const std::string& path, Model& model, const std::string& config_json,
                     int64_t iteration, const std::string& rng_state,
                     const std::vector<double>& mmd_bandwidths,
                     const std::map<std::string, AdamState>& optimizers) {
  Writer w(path);
  w.bytes(kMagic, 4);
  w.u32(kVersion);
  w.str(config_json);
  w.i64(iteration);
  w.str(rng_state);
  w.u32(static_cast<uint32_t>(mmd_bandwidths.size()));
  for (double b : mmd_bandwidths) w.f64(b);

  std::vector<ParamGroup*> groups = model.groups();
  w.u32(static_cast<uint32_t>(groups.size()));
  for (ParamGroup* pg : groups) {
    w.str(pg->name());
    auto ps = pg->all();
    w.u32(static_cast<uint32_t>(ps.size()));
    for (Param* p : ps) {
      w.str(p->name);
      w.u32(p->trainable ? 1 : 0);
      w.tensor(p->value);
    }
  }

  w.u32(static_cast<uint32_t>(optimizers.size()));
  for (const auto& [name, st] : optimizers) {
    w.str(name);
    w.f64(st.beta1);
    w.f64(st.beta2);
    w.f64(st.eps);
    w.i64(st.t);
    w.u32(static_cast<uint32_t>(st.m.size()));
    for (const auto& [pname, t] : st.m) {
      w.str(pname);
      w.tensor(t);
    }
    w.u32(static_cast<uint32_t>(st.v.size()));
    for (const auto& [pname, t] : st.v) {
      w.str(pname);
      w.tensor(t);
    }
  }
  w.done(path);
}

LoadedCheckpoint read_checkpoint(const std::string& path) {
  Reader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("checkpoint: bad magic in " + path);
  uint32_t version = r.u32();
  if (version != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(version));

  LoadedCheckpoint c;
  c.config_json = r.str();
  c.iteration = r.i64();
  c.rng_state = r.str();
  uint32_t nb = r.u32();
  for (uint32_t i = 0; i < nb; ++i) c.mmd_bandwidths.push_back(r.f64());

  uint32_t ngroups = r.u32();
  for (uint32_t gi = 0; gi < ngroups; ++gi) {
    r.str();  // group name, implied by param prefixes
    uint32_t np = r.u32();
    for (uint32_t pi = 0; pi < np; ++pi) {
      std::string name = r.str();
      r.u32();  // trainable flag, determined by the model structure
      c.params[name] = r.tensor();
    }
  }

  uint32_t nopt = r.u32();
  for (uint32_t oi = 0; oi < nopt; ++oi) {
    std::string name = r.str();
    AdamState st;
    st.beta1 = r.f64();
    st.beta2 = r.f64();
    st.eps = r.f64();
    st.t = r.i64();
    uint32_t nm = r.u32();
    for (uint32_t i = 0; i < nm; ++i) {
      std::string pname = r.str();
      st.m[pname] = r.tensor();
    }
    uint32_t nv = r.u32();
    for (uint32_t i = 0; i < nv; ++i) {
      std::string pname = r.str();
      st.v[pname] = r.tensor();
    }
    c.optimizers[name] = std::move(st);
  }
  return c;
}

void apply_params(Model& model, const std::map<std::string, Tensor>& params) {
  for (ParamGroup* pg : model.groups()) {
    for (Param* p : pg->all()) {
      auto it = params.find(p->name);
      if (it == params.end())
        throw std::runtime_error("checkpoint: missing parameter " + p->name);
      if (it->second.shape != p->value.shape)
        throw std::runtime_error("checkpoint: shape mismatch for " + p->name + ": model " +
                                 shape_str(p->value.shape) + " vs file " +
                                 shape_str(it->second.shape));
      p->value = it->second;
    }
  }
}

}  // namespace pdanet
