#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "tce/core.hpp"
#include "tce/image.hpp"
#include "tce/kernels.hpp"
#include "tce/rng.hpp"

namespace tce::nn {

// Small plain conv net standing in for a full residual backbone: stride-2
// conv stages with ReLU, global average pooling, a projection to the
// embedding sphere and an optional 4-way rotation head off the pooled
// features. Templated on the scalar type: float in production (checkpoints
// are float32), double in the finite-difference gradient tests.
struct EncoderConfig {
  int in_channels = 3;
  std::vector<int> widths = {16, 32, 64};
  int kernel = 3;
  int embedding_dim = 128;
  bool rotation_head = true;

  void validate() const {
    if (widths.empty()) throw std::invalid_argument("EncoderConfig: need >= 1 stage");
    if (embedding_dim < 2) throw std::invalid_argument("EncoderConfig: embedding_dim >= 2");
    if (in_channels < 1) throw std::invalid_argument("EncoderConfig: in_channels >= 1");
    if (kernel < 1 || kernel % 2 == 0) throw std::invalid_argument("EncoderConfig: odd kernel");
    for (int w : widths) {
      if (w < 1) throw std::invalid_argument("EncoderConfig: stage width >= 1");
    }
  }
};

template <typename T>
struct ParamRef {
  std::string name;
  std::vector<T>* value = nullptr;
  std::vector<T>* grad = nullptr;
  std::vector<uint32_t> shape;
};

template <typename T>
struct ConvLayer {
  int in_ch = 0, out_ch = 0, kernel = 3, stride = 2, pad = 1;
  std::vector<T> weight, bias, grad_weight, grad_bias;

  void init(int ci, int co, int k, Rng& rng) {
    in_ch = ci;
    out_ch = co;
    kernel = k;
    pad = k / 2;
    weight.resize(size_t(co) * ci * k * k);
    const double scale = std::sqrt(2.0 / (double(ci) * k * k));
    for (auto& w : weight) w = T(scale * rng.gaussian());
    bias.assign(size_t(co), T(0));
    grad_weight.assign(weight.size(), T(0));
    grad_bias.assign(bias.size(), T(0));
  }
};

template <typename T>
struct LinearLayer {
  int in = 0, out = 0;
  std::vector<T> weight, bias, grad_weight, grad_bias;  // weight[out, in]

  void init(int in_dim, int out_dim, Rng& rng) {
    in = in_dim;
    out = out_dim;
    weight.resize(size_t(out) * in);
    const double scale = std::sqrt(1.0 / double(in));
    for (auto& w : weight) w = T(scale * rng.gaussian());
    bias.assign(size_t(out), T(0));
    grad_weight.assign(weight.size(), T(0));
    grad_bias.assign(bias.size(), T(0));
  }

  // y[n,out] = x[n,in] W^T + b
  void forward(const T* x, int n, T* y) const {
    for (int i = 0; i < n; ++i) {
      for (int o = 0; o < out; ++o) {
        T acc = bias[o];
        const T* wrow = weight.data() + size_t(o) * in;
        const T* xrow = x + size_t(i) * in;
        for (int j = 0; j < in; ++j) acc += wrow[j] * xrow[j];
        y[size_t(i) * out + o] = acc;
      }
    }
  }

  // accumulates parameter grads; writes (or adds into) dx when provided
  void backward(const T* dy, const T* x, int n, T* dx, bool accumulate_dx) {
    for (int i = 0; i < n; ++i) {
      const T* dyrow = dy + size_t(i) * out;
      const T* xrow = x + size_t(i) * in;
      for (int o = 0; o < out; ++o) {
        const T g = dyrow[o];
        T* gw = grad_weight.data() + size_t(o) * in;
        for (int j = 0; j < in; ++j) gw[j] += g * xrow[j];
        grad_bias[o] += g;
      }
      if (dx != nullptr) {
        T* dxrow = dx + size_t(i) * in;
        if (!accumulate_dx) {
          for (int j = 0; j < in; ++j) dxrow[j] = T(0);
        }
        for (int o = 0; o < out; ++o) {
          const T g = dyrow[o];
          const T* wrow = weight.data() + size_t(o) * in;
          for (int j = 0; j < in; ++j) dxrow[j] += g * wrow[j];
        }
      }
    }
  }
};

// Conv stages + ReLU + global average pool.
template <typename T>
struct ConvStack {
  int in_channels = 0;
  int kernel = 3;
  std::vector<ConvLayer<T>> stages;

  ConvStack() = default;
  ConvStack(int in_ch, const std::vector<int>& widths, int k, Rng& rng) {
    in_channels = in_ch;
    kernel = k;
    int ci = in_ch;
    for (int co : widths) {
      ConvLayer<T> layer;
      layer.init(ci, co, k, rng);
      stages.push_back(std::move(layer));
      ci = co;
    }
  }

  int pooled_dim() const { return stages.back().out_ch; }

  struct Trace {
    int n = 0;
    std::vector<std::vector<T>> acts;  // acts[0] = input; acts[i+1] = post-ReLU of stage i
    std::vector<std::array<int, 3>> dims;  // (c, h, w) per act
    std::vector<T> pooled;                 // n x pooled_dim
  };

  void forward(const T* input, int n, int h, int w, Trace& tr) const {
    tr.n = n;
    tr.acts.assign(stages.size() + 1, {});
    tr.dims.assign(stages.size() + 1, {});
    tr.acts[0].assign(input, input + size_t(n) * in_channels * h * w);
    tr.dims[0] = {in_channels, h, w};
    int ci = in_channels, hh = h, ww = w;
    for (size_t s = 0; s < stages.size(); ++s) {
      const auto& st = stages[s];
      const int ho = kernels::conv_out_extent(hh, st.kernel, st.stride, st.pad);
      const int wo = kernels::conv_out_extent(ww, st.kernel, st.stride, st.pad);
      if (ho < 1 || wo < 1) throw std::invalid_argument("ConvStack: input too small for stages");
      tr.acts[s + 1].resize(size_t(n) * st.out_ch * ho * wo);
      kernels::conv2d_forward(tr.acts[s].data(), n, ci, hh, ww, st.weight.data(), st.bias.data(),
                              st.out_ch, st.kernel, st.stride, st.pad, tr.acts[s + 1].data(), ho,
                              wo);
      for (auto& v : tr.acts[s + 1]) v = std::max(v, T(0));
      tr.dims[s + 1] = {st.out_ch, ho, wo};
      ci = st.out_ch;
      hh = ho;
      ww = wo;
    }
    const int pd = pooled_dim();
    tr.pooled.assign(size_t(n) * pd, T(0));
    const auto [c, fh, fw] = tr.dims.back();
    const T inv = T(1) / T(fh * fw);
    for (int i = 0; i < n; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        T acc = T(0);
        const T* base = tr.acts.back().data() + (size_t(i) * c + ch) * fh * fw;
        for (int p = 0; p < fh * fw; ++p) acc += base[p];
        tr.pooled[size_t(i) * pd + ch] = acc * inv;
      }
    }
  }

  // d_pooled: n x pooled_dim. Accumulates parameter gradients.
  void backward(const Trace& tr, const std::vector<T>& d_pooled) {
    const auto [c, fh, fw] = tr.dims.back();
    std::vector<T> g(size_t(tr.n) * c * fh * fw);
    const T inv = T(1) / T(fh * fw);
    for (int i = 0; i < tr.n; ++i) {
      for (int ch = 0; ch < c; ++ch) {
        const T v = d_pooled[size_t(i) * c + ch] * inv;
        T* base = g.data() + (size_t(i) * c + ch) * fh * fw;
        for (int p = 0; p < fh * fw; ++p) base[p] = v;
      }
    }
    for (int s = int(stages.size()) - 1; s >= 0; --s) {
      auto& st = stages[size_t(s)];
      const auto [co, ho, wo] = tr.dims[size_t(s) + 1];
      const auto [ci, hi, wi] = tr.dims[size_t(s)];
      // ReLU mask of this stage's output
      const auto& out_act = tr.acts[size_t(s) + 1];
      for (size_t i = 0; i < g.size(); ++i) {
        if (out_act[i] <= T(0)) g[i] = T(0);
      }
      kernels::conv2d_backward_params(g.data(), tr.acts[size_t(s)].data(), tr.n, ci, hi, wi, co,
                                      st.kernel, st.stride, st.pad, ho, wo, st.grad_weight.data(),
                                      st.grad_bias.data());
      if (s > 0) {
        std::vector<T> dx(size_t(tr.n) * ci * hi * wi);
        kernels::conv2d_backward_input(g.data(), tr.n, co, ho, wo, st.weight.data(), ci, st.kernel,
                                       st.stride, st.pad, dx.data(), hi, wi);
        g = std::move(dx);
      }
    }
  }

  void collect_params(std::vector<ParamRef<T>>& out, const std::string& prefix) {
    for (size_t s = 0; s < stages.size(); ++s) {
      auto& st = stages[s];
      out.push_back({prefix + ".stage" + std::to_string(s) + ".weight", &st.weight,
                     &st.grad_weight,
                     {uint32_t(st.out_ch), uint32_t(st.in_ch), uint32_t(st.kernel),
                      uint32_t(st.kernel)}});
      out.push_back({prefix + ".stage" + std::to_string(s) + ".bias", &st.bias, &st.grad_bias,
                     {uint32_t(st.out_ch)}});
    }
  }
};

template <typename T>
struct Encoder {
  EncoderConfig cfg;
  ConvStack<T> trunk;
  LinearLayer<T> proj;
  LinearLayer<T> rot;

  Encoder() = default;
  Encoder(const EncoderConfig& config, uint64_t seed) : cfg(config) {
    cfg.validate();
    Rng rng(seed);
    trunk = ConvStack<T>(cfg.in_channels, cfg.widths, cfg.kernel, rng);
    proj.init(trunk.pooled_dim(), cfg.embedding_dim, rng);
    if (cfg.rotation_head) rot.init(trunk.pooled_dim(), 4, rng);
  }

  struct Trace {
    typename ConvStack<T>::Trace trunk;
    std::vector<T> z;           // n x D pre-normalization
    std::vector<T> norm;        // n
    std::vector<T> embeddings;  // n x D unit rows
    std::vector<T> rot_logits;  // n x 4 when the head exists
    int n = 0;
  };

  void forward(const T* input, int n, int h, int w, Trace& tr) const {
    const int d = cfg.embedding_dim;
    tr.n = n;
    trunk.forward(input, n, h, w, tr.trunk);
    tr.z.resize(size_t(n) * d);
    proj.forward(tr.trunk.pooled.data(), n, tr.z.data());
    tr.norm.resize(size_t(n));
    tr.embeddings.resize(size_t(n) * d);
    for (int i = 0; i < n; ++i) {
      T s = T(0);
      const T* zrow = tr.z.data() + size_t(i) * d;
      for (int j = 0; j < d; ++j) s += zrow[j] * zrow[j];
      const T nrm = std::max(std::sqrt(s), T(1e-12));
      tr.norm[size_t(i)] = nrm;
      T* erow = tr.embeddings.data() + size_t(i) * d;
      for (int j = 0; j < d; ++j) erow[j] = zrow[j] / nrm;
    }
    if (cfg.rotation_head) {
      tr.rot_logits.resize(size_t(n) * 4);
      rot.forward(tr.trunk.pooled.data(), n, tr.rot_logits.data());
    }
  }

  // d_embeddings: n x D (empty = zero); d_rot: n x 4 (empty = none).
  void backward(const Trace& tr, const std::vector<T>& d_embeddings,
                const std::vector<T>& d_rot) {
    const int d = cfg.embedding_dim;
    const int pd = trunk.pooled_dim();
    std::vector<T> dz(size_t(tr.n) * d, T(0));
    if (!d_embeddings.empty()) {
      for (int i = 0; i < tr.n; ++i) {
        const T* erow = tr.embeddings.data() + size_t(i) * d;
        const T* derow = d_embeddings.data() + size_t(i) * d;
        T dot = T(0);
        for (int j = 0; j < d; ++j) dot += erow[j] * derow[j];
        const T inv = T(1) / tr.norm[size_t(i)];
        T* dzrow = dz.data() + size_t(i) * d;
        for (int j = 0; j < d; ++j) dzrow[j] = (derow[j] - erow[j] * dot) * inv;
      }
    }
    std::vector<T> d_pooled(size_t(tr.n) * pd, T(0));
    proj.backward(dz.data(), tr.trunk.pooled.data(), tr.n, d_pooled.data(), false);
    if (!d_rot.empty() && cfg.rotation_head) {
      rot.backward(d_rot.data(), tr.trunk.pooled.data(), tr.n, d_pooled.data(), true);
    }
    trunk.backward(tr.trunk, d_pooled);
  }

  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    trunk.collect_params(out, "enc");
    out.push_back({"enc.proj.weight", &proj.weight, &proj.grad_weight,
                   {uint32_t(proj.out), uint32_t(proj.in)}});
    out.push_back({"enc.proj.bias", &proj.bias, &proj.grad_bias, {uint32_t(proj.out)}});
    if (cfg.rotation_head) {
      out.push_back({"enc.rot.weight", &rot.weight, &rot.grad_weight,
                     {uint32_t(rot.out), uint32_t(rot.in)}});
      out.push_back({"enc.rot.bias", &rot.bias, &rot.grad_bias, {uint32_t(rot.out)}});
    }
    return out;
  }

  void zero_grad() {
    for (auto& p : params()) std::fill(p.grad->begin(), p.grad->end(), T(0));
  }

  // Single image -> unit embedding as double vector.
  Vec embed(const Image& img) const {
    if (img.channels != cfg.in_channels) {
      throw std::invalid_argument("Encoder: expected " + std::to_string(cfg.in_channels) +
                                  " channels, got " + std::to_string(img.channels));
    }
    const Tensor3f chw = to_chw(img);
    std::vector<T> input(chw.data.begin(), chw.data.end());
    Trace tr;
    forward(input.data(), 1, img.height, img.width, tr);
    Vec out(tr.embeddings.begin(), tr.embeddings.end());
    return out;
  }
};

// Encoder trunk with a fresh classification head in place of the projection.
template <typename T>
struct Classifier {
  EncoderConfig trunk_cfg;
  int num_classes = 0;
  double dropout = 0.0;
  ConvStack<T> trunk;
  LinearLayer<T> head;

  struct Trace {
    typename ConvStack<T>::Trace trunk;
    std::vector<T> dropped;  // pooled after dropout (== pooled when disabled)
    std::vector<T> mask;     // dropout keep-scale per pooled element
    std::vector<T> logits;   // n x num_classes
    int n = 0;
    bool used_dropout = false;
  };

  void forward(const T* input, int n, int h, int w, Trace& tr, bool training, Rng* rng) const {
    tr.n = n;
    trunk.forward(input, n, h, w, tr.trunk);
    const int pd = trunk.pooled_dim();
    tr.used_dropout = training && dropout > 0.0;
    if (tr.used_dropout) {
      tr.mask.resize(size_t(n) * pd);
      tr.dropped.resize(size_t(n) * pd);
      const T scale = T(1.0 / (1.0 - dropout));
      for (size_t i = 0; i < tr.mask.size(); ++i) {
        tr.mask[i] = (rng != nullptr && rng->uniform() < dropout) ? T(0) : scale;
        tr.dropped[i] = tr.trunk.pooled[i] * tr.mask[i];
      }
    } else {
      tr.dropped = tr.trunk.pooled;
    }
    tr.logits.resize(size_t(n) * num_classes);
    head.forward(tr.dropped.data(), n, tr.logits.data());
  }

  // trunk_grads = false freezes the trunk (linear probe): only the head
  // accumulates gradients and the trunk backward pass is skipped entirely.
  void backward(const Trace& tr, const std::vector<T>& d_logits, bool trunk_grads) {
    const int pd = trunk.pooled_dim();
    std::vector<T> d_dropped(size_t(tr.n) * pd, T(0));
    head.backward(d_logits.data(), tr.dropped.data(), tr.n, trunk_grads ? d_dropped.data() : nullptr,
                  false);
    if (!trunk_grads) return;
    if (tr.used_dropout) {
      for (size_t i = 0; i < d_dropped.size(); ++i) d_dropped[i] *= tr.mask[i];
    }
    trunk.backward(tr.trunk, d_dropped);
  }

  std::vector<ParamRef<T>> params(bool include_trunk) {
    std::vector<ParamRef<T>> out;
    if (include_trunk) trunk.collect_params(out, "cls");
    out.push_back({"cls.head.weight", &head.weight, &head.grad_weight,
                   {uint32_t(head.out), uint32_t(head.in)}});
    out.push_back({"cls.head.bias", &head.bias, &head.grad_bias, {uint32_t(head.out)}});
    return out;
  }

  void zero_grad() {
    for (auto& p : params(true)) std::fill(p.grad->begin(), p.grad->end(), T(0));
  }
};

// Plain SGD with momentum: v = mu * v + g; w -= lr * v.
template <typename T>
class Sgd {
 public:
  Sgd(double lr, double momentum) : lr_(lr), momentum_(momentum) {}

  double lr() const { return lr_; }
  void set_lr(double lr) { lr_ = lr; }
  double momentum() const { return momentum_; }

  void step(std::span<ParamRef<T>> params) {
    for (auto& p : params) {
      auto& v = velocity_[p.name];
      if (v.size() != p.value->size()) v.assign(p.value->size(), T(0));
      for (size_t i = 0; i < v.size(); ++i) {
        v[i] = T(momentum_) * v[i] + (*p.grad)[i];
        (*p.value)[i] -= T(lr_) * v[i];
      }
    }
  }

  std::map<std::string, std::vector<T>>& velocity() { return velocity_; }
  const std::map<std::string, std::vector<T>>& velocity() const { return velocity_; }

 private:
  double lr_;
  double momentum_;
  std::map<std::string, std::vector<T>> velocity_;
};

// Batch assembly helpers (CHW layout).
template <typename T>
void append_input(std::vector<T>& dst, const Image& img) {
  const Tensor3f chw = to_chw(img);
  dst.insert(dst.end(), chw.data.begin(), chw.data.end());
}

template <typename T>
void append_input(std::vector<T>& dst, const Tensor3f& chw) {
  dst.insert(dst.end(), chw.data.begin(), chw.data.end());
}

}  // namespace tce::nn
