// Acceptance checks for the full pipeline. Run with --fast for the
// property-based criteria (1-7, 10) or --training for the end-to-end toy
// training criteria (8, 9). Prints one PASS/FAIL line per criterion and
// exits nonzero if any checked criterion fails.

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "slotlifter/checkpoint.hpp"
#include "slotlifter/evaluate.hpp"
#include "slotlifter/toy_scene.hpp"
#include "slotlifter/training.hpp"

namespace fs = std::filesystem;
using namespace sl;
using json = nlohmann::json;

namespace {

int failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::cout << "criterion " << id << ": " << (pass ? "PASS" : "FAIL") << " - " << name;
  if (!detail.empty()) std::cout << " (" << detail << ")";
  std::cout << std::endl;
  if (!pass) ++failures;
}

ModelConfig tiny_cfg(long n_slots = 3, uint64_t seed = 5) {
  ModelConfig cfg;
  cfg.image_size = 16;
  cfg.n_slots = n_slots;
  cfg.slot_dim = 8;
  cfg.feat_dim = 4;
  cfg.dec_dim = 4;
  cfg.dec_layers = 1;
  cfg.dec_heads = 2;
  cfg.sa_iters = 2;
  cfg.n_freqs = 2;
  cfg.fuse_hidden = 4;
  cfg.enc_c1 = 4;
  cfg.enc_c2 = 4;
  cfg.enc_c3 = 4;
  cfg.n_coarse = 4;
  cfg.n_fine = 4;
  cfg.param_seed = seed;
  return cfg;
}

SceneData tiny_scene(uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto scene = toy::random_scene(1, 2, rng);
  geom::Intrinsics intr{14.4, 14.4, 8, 8, 16, 16};
  SceneData data;
  data.scene_id = long(seed);
  data.n_train_views = 3;
  data.near = 2.0;
  data.far = 13.0;
  data.bound_lo = {-3.5, -0.1, -3.5};
  data.bound_hi = {3.5, 2.2, 3.5};
  for (long v = 0; v < 3; ++v) {
    auto pose = toy::ring_pose(2 * M_PI * v / 3, 4.2, 2.8, {0, 0.35, 0});
    auto r = toy::render(scene, pose, intr);
    CameraView<float> view;
    view.pose = pose;
    view.intr = intr;
    view.image = Tensor<float>({16 * 16, 3}, std::vector<float>(r.rgb.begin(), r.rgb.end()));
    data.views.push_back(std::move(view));
    data.masks.emplace_back(r.labels.begin(), r.labels.end());
  }
  return data;
}

geom::RaySamples make_samples(long R, long N, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> d_delta(0.01, 0.5);
  geom::RaySamples s;
  s.n_rays = R;
  s.n_samples = N;
  for (long r = 0; r < R; ++r) {
    double depth = 0.5;
    for (long n = 0; n < N; ++n) {
      double delta = d_delta(rng);
      s.depths.push_back(depth);
      s.deltas.push_back(delta);
      s.points.emplace_back(0, 0, depth);
      depth += delta;
    }
  }
  return s;
}

// --- criterion 1: compositing normalization ------------------------------

void criterion_1() {
  auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> d_sigma(0.0, 5.0);
  double max_dev = 0, max_opaque_dev = 0;
  for (int trial = 0; trial < 10000; ++trial) {
    long N = 1 + long(rng() % 8);
    auto samples = make_samples(1, N, rng);
    Tensor<double> sig({N, 1}), col({N, 3});
    for (long i = 0; i < N; ++i) sig[i] = d_sigma(rng);
    for (long i = 0; i < 3 * N; ++i) col[i] = 0.5;
    auto out = composite(ad::constant(col), ad::constant(sig), samples);
    double sum = 0;
    for (long i = 0; i < N; ++i) sum += out.weights->value[i];
    max_dev = std::max({max_dev, -sum, sum - 1.0});

    sig[N - 1] = 1e4;  // opaque terminal sample
    auto out2 = composite(ad::constant(col), ad::constant(sig), samples);
    double sum2 = 0;
    for (long i = 0; i < N; ++i) sum2 += out2.weights->value[i];
    max_opaque_dev = std::max(max_opaque_dev, std::abs(sum2 - 1.0));
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool pass = max_dev <= 1e-6 && max_opaque_dev <= 1e-6 && secs < 5.0;
  std::ostringstream d;
  d << "range dev " << max_dev << ", opaque dev " << max_opaque_dev << ", " << secs << " s";
  report(1, "compositing normalization", pass, d.str());
}

// --- criterion 2: opaque point oracle ------------------------------------

void criterion_2() {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> uni(0, 1);
  double max_err = 0;
  for (int trial = 0; trial < 100; ++trial) {
    geom::RaySamples s;
    s.n_rays = 1;
    s.n_samples = 1;
    s.depths = {2.0};
    s.deltas = {1.0};
    s.points = {{0, 0, 2}};
    Tensor<double> sig({1, 1}, {1e8});
    Tensor<double> col({1, 3}, {uni(rng), uni(rng), uni(rng)});
    auto out = composite(ad::constant(col), ad::constant(sig), s);
    for (int c = 0; c < 3; ++c)
      max_err = std::max(max_err, std::abs(out.color->value[c] - col[c]));
  }
  report(2, "opaque point oracle", max_err <= 1e-5,
         "max channel error " + std::to_string(max_err));
}

// --- criterion 3: stochasticity contracts --------------------------------

void criterion_3() {
  using D = double;
  auto scene = tiny_scene(21);
  SlotLifterModel<D> model(tiny_cfg());
  CameraView<D> src{scene.views[0].image.cast<D>(), scene.views[0].pose, scene.views[0].intr};
  auto grid = model.encode_view(src);
  auto slot_res = model.encode_slots({grid});

  double dev = 0;
  long n_cells = slot_res.attn->value.rows();
  long K = model.cfg.n_slots;
  for (long i = 0; i < n_cells; ++i) {
    double s = 0;
    for (long k = 0; k < K; ++k) s += slot_res.attn->value[i * K + k];
    dev = std::max(dev, std::abs(s - 1.0));
  }
  for (long k = 0; k < K; ++k) {
    double s = 0;
    for (long i = 0; i < n_cells; ++i) s += slot_res.win->value[i * K + k];
    dev = std::max(dev, std::abs(s - 1.0));
  }

  auto s_prime = ad::concat_rows(model.empty_slot, slot_res.slots);
  std::vector<std::pair<double, double>> pixels{{3, 4}, {8, 8}, {12, 5}, {6, 11}};
  auto rays = geom::generate_rays(src.pose, src.intr, pixels);
  std::mt19937_64 rng(3);
  auto samples = geom::sample_stratified(rays, scene.near, scene.far, 6, rng);
  auto pass_out = model.decode_pass(samples, rays, {grid}, {src.pose}, src.intr, s_prime,
                                    0.0, rng);

  long P = pass_out.slot_weights->value.rows();
  long K1 = pass_out.slot_weights->value.last_dim();
  double min_sigma = 0;
  for (long p = 0; p < P; ++p) {
    double s = 0;
    for (long k = 0; k < K1; ++k) s += pass_out.slot_weights->value[p * K1 + k];
    dev = std::max(dev, std::abs(s - 1.0));
  }
  // recompute sigma from the pass internals: rely on compositing having
  // rejected negatives, and check the mask-sum identity against acc
  auto lifted = lift_features<D>(samples, {grid}, {src.pose}, src.intr, model.encoder.stride());
  auto fused = model.fusion(lifted);
  auto ep = model.pos_embed(samples.points, rays.dirs, samples.n_samples);
  auto refined = model.allocator(ad::add(fused, ep), s_prime, samples.n_rays,
                                 samples.n_samples);
  auto map = model.mapper(refined, s_prime);
  auto sigma = slot_density(map, model.theta_sigma);
  for (long i = 0; i < sigma->value.size(); ++i)
    min_sigma = std::min(min_sigma, double(sigma->value[i]));

  // augment with a zero leading column so composite_masks returns all K+1
  // channels, then compare their total against the accumulated opacity
  Tensor<D> zero({P, 1});
  auto augmented = ad::concat_cols(ad::constant(zero), map.weights);
  auto channels = composite_masks(augmented, sigma, samples);
  auto colors = model.color_head(map.slot_feats, ep);
  auto comp = composite(colors, sigma, samples);
  for (long r = 0; r < samples.n_rays; ++r) {
    double total = 0;
    for (long k = 0; k < K1; ++k) total += channels->value[r * K1 + k];
    dev = std::max(dev, std::abs(total - comp.acc->value[r]));
  }
  bool pass = dev <= 1e-6 && min_sigma >= 0;
  std::ostringstream d;
  d << "max deviation " << dev << ", min sigma " << min_sigma;
  report(3, "stochasticity contracts", pass, d.str());
}

// --- criterion 4: gradient check -----------------------------------------

void criterion_4() {
  using D = double;
  auto start = std::chrono::steady_clock::now();
  auto scene = tiny_scene(31);
  ModelConfig mc = tiny_cfg(2, 7);  // K = 2
  // a single attention iteration keeps every parameter on a differentiable
  // path; with more iterations the earlier ones are run detached by design
  // and finite differences would see contributions the analytic gradient
  // deliberately stops
  mc.sa_iters = 1;
  SlotLifterModel<D> model(mc);
  std::vector<CameraView<D>> sources{{scene.views[0].image.cast<D>(), scene.views[0].pose,
                                      scene.views[0].intr}};
  std::vector<std::pair<double, double>> pixels;
  std::mt19937_64 prng(41);
  for (int r = 0; r < 8; ++r) pixels.emplace_back(double(prng() % 16), double(prng() % 16));
  Tensor<D> gt({8, 3});
  for (long r = 0; r < 8; ++r) {
    long id = long(pixels[r].first) * 16 + long(pixels[r].second);
    for (int c = 0; c < 3; ++c) gt[r * 3 + c] = scene.views[0].image[id * 3 + c];
  }
  RenderOptions opt;
  opt.near = scene.near;
  opt.far = scene.far;
  opt.n_coarse = 4;
  opt.n_fine = 4;
  auto loss_at = [&] {
    std::mt19937_64 rng(9);
    auto out = model.render_view(sources, scene.views[0].pose, scene.views[0].intr, pixels,
                                 opt, rng);
    auto loss = ad::add(reconstruction_loss(out.coarse.comp.color, gt),
                        reconstruction_loss(out.fine->comp.color, gt));
    auto pen = ad::add(locality_penalty(out.coarse.slot_weights, out.coarse.samples.points,
                                        scene.bound_lo, scene.bound_hi),
                       locality_penalty(out.fine->slot_weights, out.fine->samples.points,
                                        scene.bound_lo, scene.bound_hi));
    return ad::add(loss, pen);
  };
  auto root = loss_at();
  model.params.zero_grad();
  ad::backward(root);

  // >= 20 random entries plus theta_sigma and a slot init query
  std::vector<std::pair<std::string, long>> targets{{"theta_sigma", 0}, {"sa.init_queries", 3}};
  std::mt19937_64 rng(42);
  while (targets.size() < 22) {
    const auto& [name, p] = model.params.params[rng() % model.params.params.size()];
    targets.emplace_back(name, long(rng() % p->value.size()));
  }
  double worst = 0, max_grad = 0;
  std::string worst_name;
  long checked = 0;
  for (const auto& [name, idx] : targets) {
    ad::Var<D> p;
    for (const auto& [n, q] : model.params.params)
      if (n == name) p = q;
    double ana = p->grad[idx];
    double eps = 1e-5;
    double orig = p->value[idx];
    p->value[idx] = orig + eps;
    double fp = loss_at()->value[0];
    p->value[idx] = orig - eps;
    double fm = loss_at()->value[0];
    p->value[idx] = orig;
    double num = (fp - fm) / (2 * eps);
    if (std::abs(ana) > max_grad) max_grad = std::abs(ana);
    if (std::abs(num - ana) < 1e-9) continue;  // below FD noise
    double rel = std::abs(num - ana) / std::max({std::abs(num), std::abs(ana), 1e-8});
    if (rel > worst) {
      worst = rel;
      worst_name = name + "[" + std::to_string(idx) + "]";
    }
    ++checked;
  }
  double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  bool pass = worst <= 1e-3 && secs < 120.0;
  std::ostringstream d;
  d << targets.size() << " entries (" << checked << " above FD noise, max |grad| " << max_grad << "), worst rel err " << worst
    << (worst_name.empty() ? "" : " at " + worst_name) << ", " << secs << " s";
  report(4, "analytic gradients vs finite differences", pass, d.str());
}

// --- criterion 5: ARI oracle equivalence ---------------------------------

double pair_count_ari(const std::vector<int>& pred, const std::vector<int>& gt) {
  long m = static_cast<long>(pred.size());
  double s11 = 0, sp = 0, sg = 0;
  for (long i = 0; i < m; ++i)
    for (long j = i + 1; j < m; ++j) {
      bool same_p = pred[i] == pred[j], same_g = gt[i] == gt[j];
      if (same_p && same_g) ++s11;
      if (same_p) ++sp;
      if (same_g) ++sg;
    }
  double total = 0.5 * m * (m - 1);
  double expected = sp * sg / total;
  double max_index = 0.5 * (sp + sg);
  if (max_index == expected) return 1.0;
  return (s11 - expected) / (max_index - expected);
}

void criterion_5() {
  std::mt19937_64 rng(51);
  bool exact = true, perm_ok = true;
  for (int trial = 0; trial < 1000; ++trial) {
    long m = 2 + long(rng() % 11);
    std::vector<int> pred(m), gt(m);
    for (long i = 0; i < m; ++i) {
      pred[i] = int(rng() % 4);
      gt[i] = int(rng() % 4);
    }
    double a = metrics::ari(pred, gt, false);
    exact = exact && a == pair_count_ari(pred, gt);
    std::vector<int> relabel{3, 1, 0, 2};
    std::vector<int> pred_r(m);
    for (long i = 0; i < m; ++i) pred_r[i] = relabel[pred[i]];
    perm_ok = perm_ok && metrics::ari(pred_r, gt, false) == a;
  }
  report(5, "ARI matches the pair-counting oracle", exact && perm_ok,
         exact ? "1000 labelings exact" : "oracle mismatch");
}

// --- criterion 6: slot-permutation equivariance --------------------------

void criterion_6() {
  using D = double;
  auto scene = tiny_scene(61);
  SlotLifterModel<D> model(tiny_cfg());
  CameraView<D> src{scene.views[0].image.cast<D>(), scene.views[0].pose, scene.views[0].intr};
  auto grid = model.encode_view(src);
  auto slot_res = model.encode_slots({grid});
  long K = model.cfg.n_slots, Ds = model.cfg.slot_dim;

  Tensor<D> s_plain({K + 1, Ds}), s_perm({K + 1, Ds});
  std::vector<long> perm{2, 0, 1};  // object slots only; empty slot stays put
  for (long d = 0; d < Ds; ++d) {
    s_plain[d] = model.empty_slot->value[d];
    s_perm[d] = model.empty_slot->value[d];
  }
  for (long k = 0; k < K; ++k)
    for (long d = 0; d < Ds; ++d) {
      s_plain[(k + 1) * Ds + d] = slot_res.slots->value[k * Ds + d];
      s_perm[(k + 1) * Ds + d] = slot_res.slots->value[perm[k] * Ds + d];
    }

  std::vector<std::pair<double, double>> pixels{{4, 4}, {10, 6}, {7, 12}};
  auto rays = geom::generate_rays(src.pose, src.intr, pixels);
  std::mt19937_64 rng_s(1);
  auto samples = geom::sample_stratified(rays, scene.near, scene.far, 5, rng_s);
  std::mt19937_64 rng_a(2), rng_b(2);
  auto pass_a = model.decode_pass(samples, rays, {grid}, {src.pose}, src.intr,
                                  ad::constant(s_plain), 0.0, rng_a);
  auto pass_b = model.decode_pass(samples, rays, {grid}, {src.pose}, src.intr,
                                  ad::constant(s_perm), 0.0, rng_b);

  double color_dev = 0, mask_dev = 0;
  for (long i = 0; i < pass_a.comp.color->value.size(); ++i)
    color_dev = std::max(color_dev,
                         std::abs(pass_a.comp.color->value[i] - pass_b.comp.color->value[i]));
  long R = samples.n_rays;
  for (long r = 0; r < R; ++r)
    for (long k = 0; k < K; ++k)
      mask_dev = std::max(mask_dev, std::abs(pass_a.masks->value[r * K + perm[k]] -
                                             pass_b.masks->value[r * K + k]));
  bool pass = color_dev <= 1e-6 && mask_dev <= 1e-6;
  std::ostringstream d;
  d << "color dev " << color_dev << ", permuted mask dev " << mask_dev;
  report(6, "slot-permutation equivariance", pass, d.str());
}

// --- criterion 7: masking schedule ---------------------------------------

void criterion_7() {
  bool endpoints = mask_ratio(0, 30000) == 0.99 && mask_ratio(30000, 30000) == 0.0;
  bool monotone = true;
  double prev = mask_ratio(0, 30000);
  for (long t = 1; t <= 40000; ++t) {
    double r = mask_ratio(t, 30000);
    monotone = monotone && r <= prev + 1e-15;
    prev = r;
  }
  report(7, "masking anneal schedule", endpoints && monotone,
         endpoints ? "0.99 at 0, 0 at 30000, nonincreasing" : "endpoint mismatch");
}

// --- criterion 10: determinism and resume --------------------------------

void criterion_10(const fs::path& work) {
  using F = float;
  std::vector<SceneData> scenes{tiny_scene(101), tiny_scene(102)};
  std::vector<const SceneData*> batch{&scenes[0], &scenes[1]};
  TrainConfig tc;
  tc.scene_batch = 2;
  tc.ray_batch = 8;
  tc.lr = 3e-4;
  tc.warmup_steps = 5;
  tc.decay_steps = 1000;
  tc.max_steps = 100;
  tc.mask_anneal_steps = 20;
  tc.locality_steps = 50;
  tc.seed = 17;

  auto run = [&](const fs::path& ckpt) {
    SlotLifterModel<F> model(tiny_cfg());
    Trainer<F> trainer(model, tc);
    for (int s = 0; s < 100; ++s) trainer.train_step(batch);
    std::ostringstream rng_state;
    rng_state << trainer.rng;
    save_checkpoint<F>(ckpt.string(), model.params, &trainer.opt.momentum, trainer.step,
                       json::object(), rng_state.str());
  };
  fs::create_directories(work);
  run(work / "a.slcp");
  run(work / "b.slcp");
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  bool identical = slurp(work / "a.slcp") == slurp(work / "b.slcp");

  // resume equivalence: 100 straight steps vs 50 + checkpoint + 50
  SlotLifterModel<F> direct(tiny_cfg());
  Trainer<F> t_direct(direct, tc);
  for (int s = 0; s < 100; ++s) t_direct.train_step(batch);

  SlotLifterModel<F> half(tiny_cfg());
  Trainer<F> t_half(half, tc);
  for (int s = 0; s < 50; ++s) t_half.train_step(batch);
  std::ostringstream rng_state;
  rng_state << t_half.rng;
  save_checkpoint<F>((work / "half.slcp").string(), half.params, &t_half.opt.momentum,
                     t_half.step, json::object(), rng_state.str());

  ModelConfig other_cfg = tiny_cfg();
  other_cfg.param_seed = 99;  // different init, fully overwritten by the load
  SlotLifterModel<F> resumed(other_cfg);
  Trainer<F> t_res(resumed, tc);
  auto info = load_checkpoint<F>((work / "half.slcp").string(), resumed.params,
                                 &t_res.opt.momentum);
  t_res.step = info.step;
  std::istringstream(info.rng_state) >> t_res.rng;
  for (int s = 0; s < 50; ++s) t_res.train_step(batch);

  bool resume_ok = true;
  for (size_t i = 0; i < direct.params.params.size(); ++i) {
    const auto& a = direct.params.params[i].second->value;
    const auto& b = resumed.params.params[i].second->value;
    for (long j = 0; j < a.size(); ++j) resume_ok = resume_ok && a[j] == b[j];
  }
  report(10, "bit-identical checkpoints and resume equivalence", identical && resume_ok,
         std::string(identical ? "checkpoints identical" : "checkpoint bytes differ") +
             (resume_ok ? ", resume bitwise equal" : ", resume diverged"));
}

// --- criteria 8/9: toy end-to-end training -------------------------------

struct RunResult {
  double psnr = 0, ssim = 0, fg_ari = 0, nv_fg_ari = 0;
};

RunResult train_and_eval(const fs::path& data_dir, const fs::path& cache_dir, uint64_t seed,
                         bool masked) {
  std::string tag = "run_seed" + std::to_string(seed) + (masked ? "_mask" : "_nomask");
  fs::path cache = cache_dir / (tag + ".json");
  if (fs::exists(cache)) {
    std::ifstream in(cache);
    json j = json::parse(in);
    std::cerr << "[accept] " << tag << ": cached result reused\n";
    return {j["psnr"], j["ssim"], j["fg_ari"], j["nv_fg_ari"]};
  }

  ModelConfig mc;
  mc.image_size = 64;
  mc.n_slots = 5;
  mc.slot_dim = 64;
  mc.feat_dim = 32;
  mc.dec_dim = 32;
  mc.dec_layers = 2;
  mc.dec_heads = 4;
  mc.sa_iters = 3;
  mc.n_freqs = 6;
  mc.fuse_hidden = 32;
  mc.enc_c1 = 16;
  mc.enc_c2 = 32;
  mc.enc_c3 = 32;
  mc.n_coarse = 16;
  mc.n_fine = 16;
  mc.n_views = 1;
  mc.param_seed = seed;

  TrainConfig tc;
  tc.scene_batch = 2;
  tc.ray_batch = 48;
  tc.lr = 1e-4;
  tc.warmup_steps = 1000;
  tc.decay_steps = 8000;
  tc.max_steps = 20000;
  tc.mask_anneal_steps = 3000;
  tc.locality_steps = 5000;
  // weight scaled down for the desk-scale recipe: at 1.0 the penalty
  // saturates the point-slot softmax onto the empty slot before the lifted
  // features become informative and the density path dies
  tc.locality_weight = 0.01;
  tc.n_source_views = 1;
  tc.use_random_mask = masked;
  tc.seed = seed;

  std::vector<SceneData> scenes;
  for (long i = 0; i < count_scenes(data_dir.string()); ++i)
    scenes.push_back(load_scene(data_dir.string(), i));

  SlotLifterModel<float> model(mc);
  Trainer<float> trainer(model, tc);
  std::uniform_int_distribution<size_t> pick(0, scenes.size() - 1);
  auto start = std::chrono::steady_clock::now();
  while (trainer.step < tc.max_steps) {
    std::vector<const SceneData*> batch;
    for (long b = 0; b < tc.scene_batch; ++b) batch.push_back(&scenes[pick(trainer.rng)]);
    auto m = trainer.train_step(batch);
    if (trainer.step % 1000 == 0) {
      double secs =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      std::cerr << "[accept] " << tag << " step " << trainer.step << " loss " << m.loss
                << " (" << secs << " s)\n";
    }
  }
  auto rep = evaluate(model, scenes, tc.n_source_views, 2048, 0);
  RunResult res{rep.psnr, rep.ssim, rep.fg_ari, rep.nv_fg_ari};
  fs::create_directories(cache_dir);
  std::ofstream(cache) << json{{"psnr", res.psnr},
                               {"ssim", res.ssim},
                               {"fg_ari", res.fg_ari},
                               {"nv_fg_ari", res.nv_fg_ari}}
                              .dump(2)
                       << "\n";
  std::cerr << "[accept] " << tag << ": psnr " << res.psnr << " fg_ari " << res.fg_ari
            << " nv_fg_ari " << res.nv_fg_ari << "\n";
  return res;
}

double median3(double a, double b, double c) {
  return std::max(std::min(a, b), std::min(std::max(a, b), c));
}

void criteria_8_9(const fs::path& work) {
  fs::path data = work / "data";
  if (!fs::exists(data / "dataset.json") || count_scenes(data.string()) != 32) {
    ToyDatasetSpec spec;
    spec.seed = 100;
    make_toy_dataset(spec, data.string());
  }
  fs::path cache = work / "cache";
  std::vector<uint64_t> seeds{1, 2, 3};
  std::vector<RunResult> masked, unmasked;
  for (auto s : seeds) masked.push_back(train_and_eval(data, cache, s, true));
  for (auto s : seeds) unmasked.push_back(train_and_eval(data, cache, s, false));

  double m_fg = median3(masked[0].fg_ari, masked[1].fg_ari, masked[2].fg_ari);
  double u_fg = median3(unmasked[0].fg_ari, unmasked[1].fg_ari, unmasked[2].fg_ari);
  std::ostringstream d8;
  d8 << "median FG-ARI masked " << m_fg << " vs unmasked " << u_fg;
  report(8, "random masking improves decomposition", m_fg > u_fg, d8.str());

  double m_psnr = median3(masked[0].psnr, masked[1].psnr, masked[2].psnr);
  double m_nv = median3(masked[0].nv_fg_ari, masked[1].nv_fg_ari, masked[2].nv_fg_ari);
  std::ostringstream d9;
  d9 << "median PSNR " << m_psnr << " dB (>= 24), median NV-FG-ARI " << m_nv << " (>= 0.6)";
  report(9, "toy end-to-end quality", m_psnr >= 24.0 && m_nv >= 0.6, d9.str());
}

}  // namespace

int main(int argc, char** argv) {
  bool fast = false, training = false;
  fs::path work = fs::temp_directory_path() / "slotlifter_acceptance";
  for (int i = 1; i < argc; ++i) {
    std::string a = argv[i];
    if (a == "--fast") fast = true;
    else if (a == "--training") training = true;
    else if (a == "--work-dir" && i + 1 < argc) work = argv[++i];
    else {
      std::cerr << "usage: acceptance [--fast] [--training] [--work-dir DIR]\n";
      return 2;
    }
  }
  if (!fast && !training) fast = training = true;

  try {
    if (fast) {
      criterion_1();
      criterion_2();
      criterion_3();
      criterion_4();
      criterion_5();
      criterion_6();
      criterion_7();
      criterion_10(work / "determinism");
    }
    if (training) criteria_8_9(work);
  } catch (const std::exception& e) {
    std::cerr << "acceptance harness error: " << e.what() << "\n";
    return 1;
  }
  return failures == 0 ? 0 : 1;
}
