#pragma once

#include "slotlifter/dataset.hpp"

namespace sl {

struct TrainConfig {
  long scene_batch = 4;
  long ray_batch = 1024;
  double lr = 5e-5;
  long warmup_steps = 10000;
  long decay_steps = 50000;
  long max_steps = 250000;
  long mask_anneal_steps = 30000;
  long locality_steps = 50000;
  double locality_weight = 1.0;
  double grad_clip = 0.5;
  bool use_random_mask = true;  // ablation switch for the masking anneal
  long n_source_views = 1;
  uint64_t seed = 0;

  void validate() const {
    if (scene_batch < 1 || ray_batch < 1 || max_steps < 1 || warmup_steps < 0 ||
        decay_steps < 1 || mask_anneal_steps < 1 || locality_steps < 0 ||
        n_source_views < 1 || lr <= 0)
      throw std::invalid_argument("TrainConfig: counts must be positive and lr > 0");
  }
};

// Cosine anneal of the lifted-feature masking ratio, 0.99 down to exactly 0.
inline double mask_ratio(long step, long anneal_steps) {
  if (step < 0) throw std::invalid_argument("mask_ratio: negative step");
  if (step >= anneal_steps) return 0.0;
  return 0.99 * 0.5 * (1.0 + std::cos(M_PI * double(step) / double(anneal_steps)));
}

// Linear warmup to lr, then halving every decay_steps.
inline double lr_schedule(long step, const TrainConfig& cfg) {
  if (step < cfg.warmup_steps) return cfg.lr * double(step) / double(cfg.warmup_steps);
  return cfg.lr * std::pow(0.5, double(step - cfg.warmup_steps) / double(cfg.decay_steps));
}

// Masked points keep only their positional embedding: the lifted-feature
// term is zeroed per point with Bernoulli(ratio) draws.
template <typename T>
ad::Var<T> apply_random_mask(const ad::Var<T>& lifted_feats, double ratio,
                             std::mt19937_64& rng) {
  if (ratio < 0 || ratio > 1) throw std::invalid_argument("apply_random_mask: bad ratio");
  if (ratio == 0) return lifted_feats;
  return ad::scale_rows(lifted_feats, bernoulli_keep<T>(lifted_feats->value.rows(), ratio, rng));
}

// Mean squared error over rays and channels.
template <typename T>
ad::Var<T> reconstruction_loss(const ad::Var<T>& pred, const Tensor<T>& gt) {
  auto d = ad::sub(pred, ad::constant(gt));
  return ad::mean_all(ad::mul(d, d));
}

// Out-of-bound points must map to the empty slot (column 0) or the first
// object slot (column 1): penalize their mean mass on columns 2..K.
template <typename T>
ad::Var<T> locality_penalty(const ad::Var<T>& slot_weights,
                            const std::vector<Eigen::Vector3d>& points,
                            const Eigen::Vector3d& lo, const Eigen::Vector3d& hi) {
  long K1 = slot_weights->value.last_dim();
  std::vector<long> outside;
  for (size_t p = 0; p < points.size(); ++p) {
    bool in = true;
    for (int c = 0; c < 3; ++c) in = in && points[p][c] >= lo[c] && points[p][c] <= hi[c];
    if (!in) outside.push_back(static_cast<long>(p));
  }
  if (outside.empty() || K1 <= 2) return ad::constant(Tensor<T>::scalar(T(0)));
  auto w = ad::gather_rows(slot_weights, std::move(outside));
  return ad::mean_all(ad::sum_cols(ad::slice_cols(w, 2, K1 - 2)));
}

// Lion: sign of the beta1-interpolated momentum, decoupled weight decay.
template <typename T>
struct Lion {
  double beta1 = 0.9, beta2 = 0.99, weight_decay = 0.0;
  std::vector<Tensor<T>> momentum;

  void init(const nn::ParamStore<T>& params) {
    momentum.clear();
    for (const auto& [_, p] : params.params) momentum.push_back(Tensor<T>::zeros(p->value.shape));
  }

  void step(nn::ParamStore<T>& params, double lr) {
    if (momentum.size() != params.params.size()) init(params);
    for (size_t i = 0; i < params.params.size(); ++i) {
      auto& p = params.params[i].second;
      p->ensure_grad();
      auto& m = momentum[i];
      for (long j = 0; j < p->value.size(); ++j) {
        T g = p->grad[j];
        if (!std::isfinite(g))
          throw std::runtime_error("non-finite gradient in " + params.params[i].first);
        T u = static_cast<T>(beta1) * m[j] + static_cast<T>(1 - beta1) * g;
        T s = u > T(0) ? T(1) : u < T(0) ? T(-1) : T(0);
        p->value[j] -= static_cast<T>(lr) * (s + static_cast<T>(weight_decay) * p->value[j]);
        m[j] = static_cast<T>(beta2) * m[j] + static_cast<T>(1 - beta2) * g;
      }
    }
  }
};

// Scales all gradients so the global norm is at most max_norm; returns the
// pre-clip norm.
template <typename T>
double clip_gradients(nn::ParamStore<T>& params, double max_norm) {
  double sq = 0;
  for (auto& [_, p] : params.params) {
    p->ensure_grad();
    for (long i = 0; i < p->grad.size(); ++i) sq += double(p->grad[i]) * double(p->grad[i]);
  }
  double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0) {
    T scale = static_cast<T>(max_norm / norm);
    for (auto& [_, p] : params.params)
      for (long i = 0; i < p->grad.size(); ++i) p->grad[i] *= scale;
  }
  return norm;
}

struct StepMetrics {
  double loss = 0, recon = 0, locality = 0;
  double lr = 0, mask = 0, grad_norm = 0;
};

template <typename T>
struct Trainer {
  SlotLifterModel<T>& model;
  TrainConfig cfg;
  Lion<T> opt;
  std::mt19937_64 rng;
  long step = 0;

  Trainer(SlotLifterModel<T>& model_, const TrainConfig& cfg_)
      : model(model_), cfg(cfg_), rng(cfg_.seed) {
    cfg.validate();
    opt.init(model.params);
  }

  // Scene loss: coarse + fine reconstruction plus the early locality term.
  ad::Var<T> scene_loss(const SceneData& scene, double ratio, bool use_locality) {
    long n_train = scene.n_train_views;
    std::uniform_int_distribution<long> pick(0, n_train - 1);
    std::vector<CameraView<T>> sources;
    long src0 = pick(rng);
    for (long l = 0; l < cfg.n_source_views; ++l) {
      const auto& v = scene.views[(src0 + l) % n_train];
      sources.push_back({v.image.template cast<T>(), v.pose, v.intr});
    }
    long tgt = pick(rng);
    const auto& target = scene.views[tgt];

    long n_px = target.intr.width * target.intr.height;
    std::uniform_int_distribution<long> pix(0, n_px - 1);
    std::vector<std::pair<double, double>> pixels;
    Tensor<T> gt({cfg.ray_batch, 3});
    for (long r = 0; r < cfg.ray_batch; ++r) {
      long id = pix(rng);
      pixels.emplace_back(double(id / target.intr.width), double(id % target.intr.width));
      for (int c = 0; c < 3; ++c) gt[r * 3 + c] = static_cast<T>(target.image[id * 3 + c]);
    }

    RenderOptions opt_r;
    opt_r.near = scene.near;
    opt_r.far = scene.far;
    opt_r.n_coarse = model.cfg.n_coarse;
    opt_r.n_fine = model.cfg.n_fine;
    opt_r.mask_ratio = ratio;
    auto out = model.render_view(sources, target.pose, target.intr, pixels, opt_r, rng);

    auto loss = ad::add(reconstruction_loss(out.coarse.comp.color, gt),
                        reconstruction_loss(out.fine->comp.color, gt));
    if (use_locality) {
      auto pen = ad::add(locality_penalty(out.coarse.slot_weights, out.coarse.samples.points,
                                          scene.bound_lo, scene.bound_hi),
                         locality_penalty(out.fine->slot_weights, out.fine->samples.points,
                                          scene.bound_lo, scene.bound_hi));
      loss = ad::add(loss, ad::scale(pen, static_cast<T>(cfg.locality_weight)));
    }
    return loss;
  }

  StepMetrics train_step(const std::vector<const SceneData*>& scenes) {
    double ratio = cfg.use_random_mask ? mask_ratio(step, cfg.mask_anneal_steps) : 0.0;
    bool use_locality = step < cfg.locality_steps && cfg.locality_weight > 0;
    ad::Var<T> total;
    for (size_t i = 0; i < scenes.size(); ++i) {
      auto l = scene_loss(*scenes[i], ratio, use_locality);
      total = i == 0 ? l : ad::add(total, l);
    }
    total = ad::scale(total, T(1) / static_cast<T>(scenes.size()));

    StepMetrics m;
    m.loss = total->value[0];
    if (!std::isfinite(m.loss)) throw std::runtime_error("non-finite loss at step " +
                                                         std::to_string(step));
    model.params.zero_grad();
    ad::backward(total);
    m.grad_norm = clip_gradients(model.params, cfg.grad_clip);
    m.lr = lr_schedule(step, cfg);
    m.mask = ratio;
    opt.step(model.params, m.lr);
    ++step;
    return m;
  }
};

}  // namespace sl
