#pragma once

#include "slotlifter/config.hpp"
#include "slotlifter/nn.hpp"

namespace sl {

// U-shaped convolutional encoder over a source view conditioned on per-pixel
// ray directions and the camera position: three stride-2 stages down, two
// upsampling stages with skip connections back to stride 2.
template <typename T>
struct FeatureEncoder {
  long c1, c2, c3, out_dim;
  nn::Conv3x3<T> stem, down2, down3, up1, up2;

  FeatureEncoder(nn::ParamStore<T>& ps, const ModelConfig& cfg)
      : c1(cfg.enc_c1),
        c2(cfg.enc_c2),
        c3(cfg.enc_c3),
        out_dim(cfg.feat_dim),
        stem(ps, "enc.stem", 9, cfg.enc_c1, 2),
        down2(ps, "enc.down2", cfg.enc_c1, cfg.enc_c2, 2),
        down3(ps, "enc.down3", cfg.enc_c2, cfg.enc_c3, 2),
        up1(ps, "enc.up1", cfg.enc_c3 + cfg.enc_c2, cfg.enc_c2, 1),
        up2(ps, "enc.up2", cfg.enc_c2 + cfg.enc_c1, cfg.feat_dim, 1) {}

  static long stride() { return 2; }

  // image, ray_dirs, cam_pos: [H*W, 3] each. Returns [H/2*W/2, feat_dim].
  ad::Var<T> operator()(const Tensor<T>& image, const Tensor<T>& ray_dirs,
                        const Tensor<T>& cam_pos, long H, long W) const {
    if (H % 8 != 0 || W % 8 != 0)
      throw std::invalid_argument("encode_features: image size must be divisible by 8");
    auto x = ad::concat_cols(ad::constant(image),
                             ad::concat_cols(ad::constant(ray_dirs), ad::constant(cam_pos)));
    auto f1 = ad::relu(stem(x, H, W));            // H/2, c1
    auto f2 = ad::relu(down2(f1, H / 2, W / 2));  // H/4, c2
    auto f3 = ad::relu(down3(f2, H / 4, W / 4));  // H/8, c3
    auto u = nn::upsample2x(f3, H / 8, W / 8);
    u = ad::relu(up1(ad::concat_cols(u, f2), H / 4, W / 4));
    u = nn::upsample2x(u, H / 4, W / 4);
    return up2(ad::concat_cols(u, f1), H / 2, W / 2);
  }
};

template <typename T>
struct SlotAttentionResult {
  ad::Var<T> slots;  // [K, D_s]
  ad::Var<T> attn;   // [N, K], rows sum to 1 (final iteration)
  ad::Var<T> win;    // [N, K], columns sum to 1 (final iteration)
};

// Iterative slot attention with learnable initial queries. The first
// iterations run detached; gradients flow through the final iteration only,
// reaching the init queries via a straight-through connection on the
// hidden-state input.
template <typename T>
struct SlotAttention {
  long n_slots, slot_dim, iters;
  ad::Var<T> init_queries;
  nn::LayerNorm<T> input_ln, slot_ln, mlp_ln;
  ad::Var<T> wk, wv, wq;
  nn::GruCell<T> gru;
  nn::Mlp<T> mlp;

  SlotAttention(nn::ParamStore<T>& ps, const ModelConfig& cfg)
      : n_slots(cfg.n_slots),
        slot_dim(cfg.slot_dim),
        iters(cfg.sa_iters),
        input_ln(ps, "sa.input_ln", cfg.feat_dim),
        slot_ln(ps, "sa.slot_ln", cfg.slot_dim),
        mlp_ln(ps, "sa.mlp_ln", cfg.slot_dim),
        gru(ps, "sa.gru", cfg.slot_dim, cfg.slot_dim),
        mlp(ps, "sa.mlp", cfg.slot_dim, cfg.slot_dim, cfg.slot_dim) {
    init_queries = ps.add("sa.init_queries", {cfg.n_slots, cfg.slot_dim},
                          static_cast<T>(std::sqrt(1.0 / cfg.slot_dim)));
    wk = ps.add("sa.wk", {cfg.feat_dim, cfg.slot_dim},
                static_cast<T>(std::sqrt(1.0 / cfg.feat_dim)));
    wv = ps.add("sa.wv", {cfg.feat_dim, cfg.slot_dim},
                static_cast<T>(std::sqrt(1.0 / cfg.feat_dim)));
    wq = ps.add("sa.wq", {cfg.slot_dim, cfg.slot_dim},
                static_cast<T>(std::sqrt(1.0 / cfg.slot_dim)));
  }

  SlotAttentionResult<T> operator()(const ad::Var<T>& features) const {
    if (features->value.rows() == 0)
      throw std::invalid_argument("slot_attention: empty input");
    auto x = input_ln(features);
    auto k = ad::matmul(x, wk);  // [N, D_s]
    auto v = ad::matmul(x, wv);
    T inv_sqrt_d = static_cast<T>(1.0 / std::sqrt(static_cast<double>(slot_dim)));

    Tensor<T> slots_val = init_queries->value;
    SlotAttentionResult<T> out;
    for (long t = 0; t < iters; ++t) {
      bool last = t + 1 == iters;
      ad::Var<T> s_in;
      if (last) {
        // value equals the detached slots; gradient path is the identity to
        // the init queries
        Tensor<T> offset = slots_val;
        for (long i = 0; i < offset.size(); ++i) offset[i] -= init_queries->value[i];
        s_in = ad::add(ad::constant(std::move(offset)), init_queries);
      } else {
        s_in = ad::constant(slots_val);
      }
      auto q = ad::matmul(slot_ln(s_in), wq);                        // [K, D_s]
      auto logits = ad::scale(ad::matmul_nt(k, q), inv_sqrt_d);     // [N, K]
      auto attn = ad::softmax_rows(logits);
      auto win = ad::normalize_cols(attn);
      auto updates = ad::matmul_tn(win, v);                         // [K, D_s]
      auto slots = gru(updates, s_in);
      slots = ad::add(slots, mlp(mlp_ln(slots)));
      if (last) {
        out.slots = slots;
        out.attn = attn;
        out.win = win;
      } else {
        slots_val = slots->value;
      }
    }
    return out;
  }
};

}  // namespace sl
