#pragma once

#include <optional>

#include "slotlifter/decoder.hpp"
#include "slotlifter/encoder.hpp"
#include "slotlifter/lifting.hpp"
#include "slotlifter/renderer.hpp"

namespace sl {

template <typename T>
struct CameraView {
  Tensor<T> image;  // [H*W, 3] in [0,1]
  geom::Pose pose;
  geom::Intrinsics intr;
};

// Per-point keep weights for random feature masking: 0 drops the lifted
// feature (positional embedding alone remains), 1 keeps it.
template <typename T>
Tensor<T> bernoulli_keep(long n_points, double mask_ratio, std::mt19937_64& rng) {
  Tensor<T> keep({n_points});
  std::bernoulli_distribution drop(mask_ratio);
  for (long i = 0; i < n_points; ++i) keep[i] = drop(rng) ? T(0) : T(1);
  return keep;
}

template <typename T>
struct RenderPass {
  CompositeOutput<T> comp;
  ad::Var<T> masks;         // [R, K]
  ad::Var<T> slot_weights;  // [R*N, K+1]
  geom::RaySamples samples;
};

template <typename T>
struct RenderResult {
  RenderPass<T> coarse;
  std::optional<RenderPass<T>> fine;
  SlotAttentionResult<T> slots;  // shared slot set from the source views
};

struct RenderOptions {
  double near = 0.5, far = 13.0;
  long n_coarse = 64, n_fine = 64;
  bool fine_pass = true;
  double mask_ratio = 0.0;  // train-time lifted-feature masking
};

template <typename T>
struct SlotLifterModel {
  ModelConfig cfg;
  nn::ParamStore<T> params;
  FeatureEncoder<T> encoder;
  SlotAttention<T> slot_attn;
  MultiViewFusion<T> fusion;
  PositionalEmbedding<T> pos_embed;
  AllocationTransformer<T> allocator;
  PointSlotMapper<T> mapper;
  ColorHead<T> color_head;
  ad::Var<T> empty_slot;   // s_0, appended to the slot set at decode time
  ad::Var<T> theta_sigma;  // density rescale, sigma_scale = exp(theta_sigma)

  explicit SlotLifterModel(const ModelConfig& cfg_)
      : cfg(cfg_),
        params(cfg_.param_seed),
        encoder(params, cfg_),
        slot_attn(params, cfg_),
        fusion(params, cfg_),
        pos_embed(params, cfg_),
        allocator(params, cfg_),
        mapper(params, cfg_),
        color_head(params, cfg_) {
    empty_slot = params.add("empty_slot", {1, cfg.slot_dim},
                            static_cast<T>(std::sqrt(1.0 / cfg.slot_dim)));
    theta_sigma = params.add("theta_sigma", {1}, T(0));
  }

  // Per-pixel ray directions and camera-position planes for the encoder.
  ad::Var<T> encode_view(const CameraView<T>& view) const {
    long H = view.intr.height, W = view.intr.width;
    std::vector<std::pair<double, double>> pixels;
    pixels.reserve(H * W);
    for (long r = 0; r < H; ++r)
      for (long c = 0; c < W; ++c) pixels.emplace_back(double(r), double(c));
    auto rays = geom::generate_rays(view.pose, view.intr, pixels);
    Tensor<T> dirs({H * W, 3}), pos({H * W, 3});
    for (long i = 0; i < H * W; ++i)
      for (int c = 0; c < 3; ++c) {
        dirs[i * 3 + c] = static_cast<T>(rays.dirs[i][c]);
        pos[i * 3 + c] = static_cast<T>(rays.origins[i][c]);
      }
    return encoder(view.image, dirs, pos, H, W);
  }

  SlotAttentionResult<T> encode_slots(const std::vector<ad::Var<T>>& grids) const {
    auto feats = grids[0];
    for (size_t l = 1; l < grids.size(); ++l) feats = ad::concat_rows(feats, grids[l]);
    return slot_attn(feats);
  }

  RenderPass<T> decode_pass(geom::RaySamples samples, const geom::RayBatch& rays,
                            const std::vector<ad::Var<T>>& grids,
                            const std::vector<geom::Pose>& src_poses,
                            const geom::Intrinsics& intr, const ad::Var<T>& slots_plus_empty,
                            double mask_ratio, std::mt19937_64& rng) const {
    long R = samples.n_rays, N = samples.n_samples;
    auto lifted = lift_features<T>(samples, grids, src_poses, intr, encoder.stride());
    auto fused = fusion(lifted);
    auto ep = pos_embed(samples.points, rays.dirs, N);
    if (mask_ratio > 0)
      fused = ad::scale_rows(fused, bernoulli_keep<T>(R * N, mask_ratio, rng));
    auto point_feats = ad::add(fused, ep);
    auto refined = allocator(point_feats, slots_plus_empty, R, N);
    auto map = mapper(refined, slots_plus_empty);
    auto sigma = slot_density(map, theta_sigma);
    auto colors = color_head(map.slot_feats, ep);
    RenderPass<T> pass;
    pass.comp = composite(colors, sigma, samples);
    pass.masks = composite_masks(map.weights, sigma, samples);
    pass.slot_weights = map.weights;
    pass.samples = std::move(samples);
    return pass;
  }

  // Full pipeline for a batch of target pixels of one scene: encode source
  // views, form slots, then a coarse stratified pass and (optionally) a fine
  // importance-sampled pass sharing all decoder weights.
  RenderResult<T> render_view(const std::vector<CameraView<T>>& sources,
                              const geom::Pose& target_pose, const geom::Intrinsics& intr,
                              const std::vector<std::pair<double, double>>& pixels,
                              const RenderOptions& opt, std::mt19937_64& rng) const {
    if (sources.empty()) throw std::invalid_argument("render_view: need at least one source view");
    std::vector<ad::Var<T>> grids;
    std::vector<geom::Pose> src_poses;
    for (const auto& v : sources) {
      grids.push_back(encode_view(v));
      src_poses.push_back(v.pose);
    }
    RenderResult<T> out;
    out.slots = encode_slots(grids);
    auto slots_plus_empty = ad::concat_rows(empty_slot, out.slots.slots);

    auto rays = geom::generate_rays(target_pose, intr, pixels);
    auto coarse_samples = geom::sample_stratified(rays, opt.near, opt.far, opt.n_coarse, rng);
    out.coarse = decode_pass(coarse_samples, rays, grids, src_poses, sources[0].intr,
                             slots_plus_empty, opt.mask_ratio, rng);
    if (opt.fine_pass) {
      std::vector<double> w(out.coarse.comp.weights->value.data.begin(),
                            out.coarse.comp.weights->value.data.end());
      auto fine_samples = geom::sample_importance(rays, out.coarse.samples.depths, w,
                                                  opt.n_coarse, opt.n_fine, rng);
      out.fine = decode_pass(std::move(fine_samples), rays, grids, src_poses, sources[0].intr,
                             slots_plus_empty, opt.mask_ratio, rng);
    }
    return out;
  }
};

}  // namespace sl
