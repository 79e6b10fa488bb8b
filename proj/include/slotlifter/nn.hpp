#pragma once

#include <map>
#include <string>
#include <unordered_map>

#include "slotlifter/graph.hpp"

namespace sl::nn {

using ad::Var;

// Ordered registry of named trainable leaves. Creation order is fixed by
// module construction order, which makes initialization deterministic for a
// given seed.
template <typename T>
struct ParamStore {
  std::mt19937_64 init_rng;
  std::vector<std::pair<std::string, Var<T>>> params;
  std::unordered_map<std::string, size_t> index;

  explicit ParamStore(uint64_t seed = 0) : init_rng(seed) {}

  Var<T> add(const std::string& name, std::vector<long> shape, T stddev) {
    if (index.count(name)) throw std::invalid_argument("duplicate param: " + name);
    Tensor<T> t = stddev > T(0) ? Tensor<T>::template randn<std::mt19937_64>(shape, init_rng, stddev)
                                : Tensor<T>::zeros(shape);
    auto v = ad::leaf(std::move(t));
    index[name] = params.size();
    params.emplace_back(name, v);
    return v;
  }

  Var<T> get(const std::string& name) const {
    auto it = index.find(name);
    if (it == index.end()) throw std::out_of_range("no such param: " + name);
    return params[it->second].second;
  }

  void zero_grad() {
    for (auto& [_, p] : params) p->zero_grad();
  }

  long total_size() const {
    long n = 0;
    for (const auto& [_, p] : params) n += p->value.size();
    return n;
  }
};

template <typename T>
struct Linear {
  Var<T> w, b;
  Linear() = default;
  Linear(ParamStore<T>& ps, const std::string& name, long in, long out) {
    w = ps.add(name + ".w", {in, out}, static_cast<T>(std::sqrt(1.0 / in)));
    b = ps.add(name + ".b", {out}, T(0));
  }
  Var<T> operator()(const Var<T>& x) const { return ad::add_bias(ad::matmul(x, w), b); }
};

template <typename T>
struct LayerNorm {
  Var<T> gamma, beta;
  LayerNorm() = default;
  LayerNorm(ParamStore<T>& ps, const std::string& name, long dim) {
    gamma = ps.add(name + ".g", {dim}, T(0));
    for (auto& x : gamma->value.data) x = T(1);
    beta = ps.add(name + ".b", {dim}, T(0));
  }
  Var<T> operator()(const Var<T>& x) const {
    return ad::add_bias(ad::mul_bias(ad::layer_norm_rows(x), gamma), beta);
  }
};

// Two-layer MLP with ReLU.
template <typename T>
struct Mlp {
  Linear<T> fc1, fc2;
  Mlp() = default;
  Mlp(ParamStore<T>& ps, const std::string& name, long in, long hidden, long out)
      : fc1(ps, name + ".fc1", in, hidden), fc2(ps, name + ".fc2", hidden, out) {}
  Var<T> operator()(const Var<T>& x) const { return fc2(ad::relu(fc1(x))); }
};

template <typename T>
struct GruCell {
  Linear<T> ir, iz, in_, hr, hz, hn;
  GruCell() = default;
  GruCell(ParamStore<T>& ps, const std::string& name, long in, long hidden)
      : ir(ps, name + ".ir", in, hidden),
        iz(ps, name + ".iz", in, hidden),
        in_(ps, name + ".in", in, hidden),
        hr(ps, name + ".hr", hidden, hidden),
        hz(ps, name + ".hz", hidden, hidden),
        hn(ps, name + ".hn", hidden, hidden) {}
  Var<T> operator()(const Var<T>& x, const Var<T>& h) const {
    auto r = ad::sigmoid_(ad::add(ir(x), hr(h)));
    auto z = ad::sigmoid_(ad::add(iz(x), hz(h)));
    auto n = ad::tanh_(ad::add(in_(x), ad::mul(r, hn(h))));
    // h' = (1-z)*n + z*h
    auto one_minus_z = ad::add_scalar(ad::neg(z), T(1));
    return ad::add(ad::mul(one_minus_z, n), ad::mul(z, h));
  }
};

// Multi-head attention with queries from x and keys/values from a shared
// context (every query row attends over the same context rows).
template <typename T>
struct CrossAttention {
  long heads, dim;
  Linear<T> wq, wk, wv, wo;
  CrossAttention() = default;
  CrossAttention(ParamStore<T>& ps, const std::string& name, long dim_, long ctx_dim,
                 long heads_)
      : heads(heads_),
        dim(dim_),
        wq(ps, name + ".q", dim_, dim_),
        wk(ps, name + ".k", ctx_dim, dim_),
        wv(ps, name + ".v", ctx_dim, dim_),
        wo(ps, name + ".o", dim_, dim_) {}

  Var<T> operator()(const Var<T>& x, const Var<T>& ctx) const {
    long dh = dim / heads;
    auto q = wq(x), k = wk(ctx), v = wv(ctx);
    T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    Var<T> out;
    for (long h = 0; h < heads; ++h) {
      auto qh = ad::slice_cols(q, h * dh, dh);
      auto kh = ad::slice_cols(k, h * dh, dh);
      auto vh = ad::slice_cols(v, h * dh, dh);
      auto attn = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), inv));
      auto oh = ad::matmul(attn, vh);
      out = h == 0 ? oh : ad::concat_cols(out, oh);
    }
    return wo(out);
  }
};

// Multi-head self-attention among the N samples of each of R rays.
template <typename T>
struct RaySelfAttention {
  long heads, dim;
  Linear<T> wq, wk, wv, wo;
  RaySelfAttention() = default;
  RaySelfAttention(ParamStore<T>& ps, const std::string& name, long dim_, long heads_)
      : heads(heads_),
        dim(dim_),
        wq(ps, name + ".q", dim_, dim_),
        wk(ps, name + ".k", dim_, dim_),
        wv(ps, name + ".v", dim_, dim_),
        wo(ps, name + ".o", dim_, dim_) {}

  Var<T> operator()(const Var<T>& x, long R, long N) const {
    long dh = dim / heads;
    auto q = wq(x), k = wk(x), v = wv(x);
    T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dh)));
    Var<T> out;
    for (long h = 0; h < heads; ++h) {
      auto qh = ad::reshape(ad::slice_cols(q, h * dh, dh), {R, N, dh});
      auto kh = ad::reshape(ad::slice_cols(k, h * dh, dh), {R, N, dh});
      auto vh = ad::reshape(ad::slice_cols(v, h * dh, dh), {R, N, dh});
      auto scores = ad::reshape(ad::scale(ad::bmm_nt(qh, kh), inv), {R * N, N});
      auto attn = ad::reshape(ad::softmax_rows(scores), {R, N, N});
      auto oh = ad::reshape(ad::bmm(attn, vh), {R * N, dh});
      out = h == 0 ? oh : ad::concat_cols(out, oh);
    }
    return wo(out);
  }
};

// Kernel-3 1D convolution along each ray's sample axis, zero padded.
template <typename T>
struct RayConv1d {
  Var<T> w_prev, w_self, w_next, b;
  RayConv1d() = default;
  RayConv1d(ParamStore<T>& ps, const std::string& name, long in, long out) {
    T sd = static_cast<T>(std::sqrt(1.0 / (3.0 * in)));
    w_prev = ps.add(name + ".wm", {in, out}, sd);
    w_self = ps.add(name + ".wc", {in, out}, sd);
    w_next = ps.add(name + ".wp", {in, out}, sd);
    b = ps.add(name + ".b", {out}, T(0));
  }

  Var<T> operator()(const Var<T>& x, long R, long N) const {
    std::vector<long> prev(R * N), next(R * N);
    for (long r = 0; r < R; ++r)
      for (long i = 0; i < N; ++i) {
        prev[r * N + i] = i > 0 ? r * N + i - 1 : -1;
        next[r * N + i] = i + 1 < N ? r * N + i + 1 : -1;
      }
    auto y = ad::add(ad::matmul(x, w_self),
                     ad::add(ad::matmul(ad::gather_rows(x, std::move(prev)), w_prev),
                             ad::matmul(ad::gather_rows(x, std::move(next)), w_next)));
    return ad::add_bias(y, b);
  }
};

// 3x3 2D convolution over an [H*W, C] feature map, zero padded, with stride.
// Implemented as nine shifted gathers, one matmul per tap.
template <typename T>
struct Conv3x3 {
  long cin, cout, stride;
  std::vector<Var<T>> w;  // 9 taps, row-major over (dy, dx)
  Var<T> b;
  Conv3x3() = default;
  Conv3x3(ParamStore<T>& ps, const std::string& name, long cin_, long cout_, long stride_)
      : cin(cin_), cout(cout_), stride(stride_) {
    T sd = static_cast<T>(std::sqrt(1.0 / (9.0 * cin_)));
    for (int k = 0; k < 9; ++k)
      w.push_back(ps.add(name + ".w" + std::to_string(k), {cin_, cout_}, sd));
    b = ps.add(name + ".b", {cout_}, T(0));
  }

  Var<T> operator()(const Var<T>& x, long H, long W) const {
    long Ho = H / stride, Wo = W / stride;
    Var<T> y;
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        std::vector<long> idx(Ho * Wo);
        for (long ho = 0; ho < Ho; ++ho)
          for (long wo = 0; wo < Wo; ++wo) {
            long hi = ho * stride + dy, wi = wo * stride + dx;
            idx[ho * Wo + wo] =
                (hi >= 0 && hi < H && wi >= 0 && wi < W) ? hi * W + wi : -1;
          }
        auto term = ad::matmul(ad::gather_rows(x, std::move(idx)), w[(dy + 1) * 3 + dx + 1]);
        y = (dy == -1 && dx == -1) ? term : ad::add(y, term);
      }
    return ad::add_bias(y, b);
  }
};

// Nearest-neighbour 2x upsampling of an [H*W, C] map.
template <typename T>
Var<T> upsample2x(const Var<T>& x, long H, long W) {
  std::vector<long> idx(4 * H * W);
  for (long h = 0; h < 2 * H; ++h)
    for (long w = 0; w < 2 * W; ++w) idx[h * 2 * W + w] = (h / 2) * W + w / 2;
  return ad::gather_rows(x, std::move(idx));
}

}  // namespace sl::nn
