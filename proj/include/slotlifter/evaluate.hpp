#pragma once

#include "slotlifter/dataset.hpp"
#include "slotlifter/metrics.hpp"

namespace sl {

struct FullRender {
  long width = 0, height = 0, n_slots = 0;
  std::vector<double> rgb;          // H*W*3
  std::vector<double> mask_values;  // H*W*K composited mask channels
  std::vector<int> labels;          // H*W argmax over the K channels
};

// Renders a complete target view in ray chunks, reusing one slot encoding of
// the source views. Evaluation mode: no feature masking.
template <typename T>
FullRender render_full_view(const SlotLifterModel<T>& model,
                            const std::vector<CameraView<T>>& sources,
                            const geom::Pose& target_pose, const geom::Intrinsics& intr,
                            double near, double far, long chunk, std::mt19937_64& rng) {
  std::vector<ad::Var<T>> grids;
  std::vector<geom::Pose> src_poses;
  for (const auto& v : sources) {
    grids.push_back(model.encode_view(v));
    src_poses.push_back(v.pose);
  }
  auto slot_res = model.encode_slots(grids);
  auto slots_plus_empty = ad::concat_rows(model.empty_slot, slot_res.slots);

  FullRender out;
  out.width = intr.width;
  out.height = intr.height;
  out.n_slots = model.cfg.n_slots;
  long n_px = intr.width * intr.height;
  out.rgb.resize(n_px * 3);
  out.mask_values.resize(n_px * model.cfg.n_slots);
  out.labels.resize(n_px);

  for (long start = 0; start < n_px; start += chunk) {
    long n = std::min(chunk, n_px - start);
    std::vector<std::pair<double, double>> pixels;
    for (long i = 0; i < n; ++i)
      pixels.emplace_back(double((start + i) / intr.width), double((start + i) % intr.width));
    auto rays = geom::generate_rays(target_pose, intr, pixels);
    auto coarse_samples = geom::sample_stratified(rays, near, far, model.cfg.n_coarse, rng);
    auto coarse = model.decode_pass(coarse_samples, rays, grids, src_poses, sources[0].intr,
                                    slots_plus_empty, 0.0, rng);
    RenderPass<T> final_pass = std::move(coarse);
    if (model.cfg.n_fine > 0) {
      std::vector<double> w(final_pass.comp.weights->value.data.begin(),
                            final_pass.comp.weights->value.data.end());
      auto fine_samples = geom::sample_importance(rays, final_pass.samples.depths, w,
                                                  model.cfg.n_coarse, model.cfg.n_fine, rng);
      final_pass = model.decode_pass(std::move(fine_samples), rays, grids, src_poses,
                                     sources[0].intr, slots_plus_empty, 0.0, rng);
    }
    long K = model.cfg.n_slots;
    for (long i = 0; i < n; ++i) {
      for (int c = 0; c < 3; ++c)
        out.rgb[(start + i) * 3 + c] = double(final_pass.comp.color->value[i * 3 + c]);
      long best = 0;
      for (long k = 0; k < K; ++k) {
        double v = double(final_pass.masks->value[i * K + k]);
        out.mask_values[(start + i) * K + k] = v;
        if (v > out.mask_values[(start + i) * K + best]) best = k;
      }
      out.labels[start + i] = static_cast<int>(best);
    }
  }
  return out;
}

struct SceneEval {
  long scene_id = 0;
  double ari = 0, fg_ari = 0;           // input view
  double psnr = 0, ssim = 0;            // novel views
  double nv_ari = 0, nv_fg_ari = 0;     // novel views
  long n_novel_views = 0;
};

struct EvalReport {
  std::vector<SceneEval> scenes;
  double psnr = 0, ssim = 0, ari = 0, fg_ari = 0, nv_ari = 0, nv_fg_ari = 0;
};

// Input-view decomposition metrics on the first source view; image quality
// and NV decomposition on every held-out view.
template <typename T>
EvalReport evaluate(const SlotLifterModel<T>& model, const std::vector<SceneData>& scenes,
                    long n_source_views, long chunk = 1024, uint64_t seed = 0) {
  EvalReport report;
  for (const auto& scene : scenes) {
    std::mt19937_64 rng(seed + scene.scene_id);
    std::vector<CameraView<T>> sources;
    for (long l = 0; l < n_source_views; ++l) {
      const auto& v = scene.views[l % scene.n_train_views];
      sources.push_back({v.image.template cast<T>(), v.pose, v.intr});
    }
    SceneEval se;
    se.scene_id = scene.scene_id;

    auto input_render = render_full_view(model, sources, scene.views[0].pose,
                                         scene.views[0].intr, scene.near, scene.far, chunk, rng);
    se.ari = metrics::ari(input_render.labels, scene.masks[0], false);
    se.fg_ari = metrics::ari(input_render.labels, scene.masks[0], true);

    for (long v = scene.n_train_views; v < static_cast<long>(scene.views.size()); ++v) {
      auto nv = render_full_view(model, sources, scene.views[v].pose, scene.views[v].intr,
                                 scene.near, scene.far, chunk, rng);
      std::vector<double> gt(scene.views[v].image.data.begin(),
                             scene.views[v].image.data.end());
      se.psnr += metrics::psnr(nv.rgb, gt);
      se.ssim += metrics::ssim(nv.rgb, gt, scene.views[v].intr.height,
                               scene.views[v].intr.width);
      se.nv_ari += metrics::ari(nv.labels, scene.masks[v], false);
      se.nv_fg_ari += metrics::ari(nv.labels, scene.masks[v], true);
      ++se.n_novel_views;
    }
    if (se.n_novel_views > 0) {
      se.psnr /= se.n_novel_views;
      se.ssim /= se.n_novel_views;
      se.nv_ari /= se.n_novel_views;
      se.nv_fg_ari /= se.n_novel_views;
    }
    report.scenes.push_back(se);
  }
  for (const auto& se : report.scenes) {
    report.psnr += se.psnr;
    report.ssim += se.ssim;
    report.ari += se.ari;
    report.fg_ari += se.fg_ari;
    report.nv_ari += se.nv_ari;
    report.nv_fg_ari += se.nv_fg_ari;
  }
  if (!report.scenes.empty()) {
    double n = double(report.scenes.size());
    report.psnr /= n;
    report.ssim /= n;
    report.ari /= n;
    report.fg_ari /= n;
    report.nv_ari /= n;
    report.nv_fg_ari /= n;
  }
  return report;
}

}  // namespace sl
