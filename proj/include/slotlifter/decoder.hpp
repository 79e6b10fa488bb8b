#pragma once

#include "slotlifter/config.hpp"
#include "slotlifter/nn.hpp"

namespace sl {

// One refinement layer: cross-attention from ray samples onto the slot set,
// a kernel-3 convolution along each ray, then self-attention among the
// samples of a ray. Pre-norm residual throughout.
template <typename T>
struct AllocationLayer {
  nn::LayerNorm<T> ln_cross, ln_ctx, ln_conv, ln_self;
  nn::CrossAttention<T> cross;
  nn::RayConv1d<T> conv;
  nn::RaySelfAttention<T> self;

  AllocationLayer(nn::ParamStore<T>& ps, const std::string& name, const ModelConfig& cfg)
      : ln_cross(ps, name + ".ln_cross", cfg.dec_dim),
        ln_ctx(ps, name + ".ln_ctx", cfg.slot_dim),
        ln_conv(ps, name + ".ln_conv", cfg.dec_dim),
        ln_self(ps, name + ".ln_self", cfg.dec_dim),
        cross(ps, name + ".cross", cfg.dec_dim, cfg.slot_dim, cfg.dec_heads),
        conv(ps, name + ".conv", cfg.dec_dim, cfg.dec_dim),
        self(ps, name + ".self", cfg.dec_dim, cfg.dec_heads) {}

  ad::Var<T> operator()(const ad::Var<T>& x, const ad::Var<T>& slots, long R, long N) const {
    auto h = ad::add(x, cross(ln_cross(x), ln_ctx(slots)));
    h = ad::add(h, conv(ln_conv(h), R, N));
    return ad::add(h, self(ln_self(h), R, N));
  }
};

template <typename T>
struct AllocationTransformer {
  std::vector<AllocationLayer<T>> layers;

  AllocationTransformer(nn::ParamStore<T>& ps, const ModelConfig& cfg) {
    for (long l = 0; l < cfg.dec_layers; ++l)
      layers.emplace_back(ps, "dec.layer" + std::to_string(l), cfg);
  }

  // point_feats: [R*N, D]; slots_plus_empty: [K+1, D_s].
  ad::Var<T> operator()(const ad::Var<T>& point_feats, const ad::Var<T>& slots, long R,
                        long N) const {
    auto x = point_feats;
    for (const auto& layer : layers) x = layer(x, slots, R, N);
    return x;
  }
};

template <typename T>
struct PointSlotMap {
  ad::Var<T> logits;   // A_p: [P, K+1], pre-softmax, unscaled
  ad::Var<T> weights;  // W_p: [P, K+1], rows sum to 1
  ad::Var<T> slot_feats;  // F_s: [P, D], W_p-weighted projected slots
};

// Single-head attention of refined point features over the slot set. The
// raw logits are kept for the density readout; the softmax uses the usual
// 1/sqrt(D) temperature.
template <typename T>
struct PointSlotMapper {
  long dim;
  nn::Linear<T> q, k, v;

  PointSlotMapper(nn::ParamStore<T>& ps, const ModelConfig& cfg)
      : dim(cfg.dec_dim),
        q(ps, "psm.q", cfg.dec_dim, cfg.dec_dim),
        k(ps, "psm.k", cfg.slot_dim, cfg.dec_dim),
        v(ps, "psm.v", cfg.slot_dim, cfg.dec_dim) {}

  PointSlotMap<T> operator()(const ad::Var<T>& refined, const ad::Var<T>& slots) const {
    PointSlotMap<T> m;
    m.logits = ad::matmul_nt(q(refined), k(slots));
    T inv = static_cast<T>(1.0 / std::sqrt(static_cast<double>(dim)));
    m.weights = ad::softmax_rows(ad::scale(m.logits, inv));
    m.slot_feats = ad::matmul(m.weights, v(slots));
    return m;
  }
};

// sigma_i = exp(theta) * sum_{k=1..K} W_p[i,k] * relu(A_p[i,k]); column 0 is
// the empty slot and contributes nothing.
template <typename T>
ad::Var<T> slot_density(const PointSlotMap<T>& map, const ad::Var<T>& theta_sigma) {
  long K = map.weights->value.last_dim() - 1;
  auto w = ad::slice_cols(map.weights, 1, K);
  auto a = ad::relu(ad::slice_cols(map.logits, 1, K));
  auto s = ad::sum_cols(ad::mul(w, a));  // [P, 1]
  return ad::mul_scalar_var(s, ad::exp_(theta_sigma));
}

// c = sigmoid(MLP(F_s + E_p)), bounded to [0,1].
template <typename T>
struct ColorHead {
  nn::Mlp<T> mlp;

  ColorHead(nn::ParamStore<T>& ps, const ModelConfig& cfg)
      : mlp(ps, "color.mlp", cfg.dec_dim, cfg.dec_dim, 3) {}

  ad::Var<T> operator()(const ad::Var<T>& slot_feats, const ad::Var<T>& pos_embed) const {
    return ad::sigmoid_(mlp(ad::add(slot_feats, pos_embed)));
  }
};

}  // namespace sl
