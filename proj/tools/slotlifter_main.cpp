#include <CLI11.hpp>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "slotlifter/checkpoint.hpp"
#include "slotlifter/evaluate.hpp"
#include "slotlifter/png_io.hpp"
#include "slotlifter/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;
using F = float;

namespace {

int log_verbosity() {
  const char* env = std::getenv("SLOTLIFTER_LOG");
  if (!env) return 1;
  std::string v(env);
  if (v == "quiet" || v == "0") return 0;
  if (v == "verbose" || v == "2") return 2;
  return 1;
}

// Flat run configuration: training hyperparameters, architecture knobs, and
// artifact paths. Unknown keys in a config file are rejected.
struct RunConfig {
  sl::ModelConfig model;
  sl::TrainConfig train;
  std::string data, out;
  long checkpoint_every = 1000;
  long log_every = 10;

  json to_json() const {
    return {{"data", data},
            {"out", out},
            {"checkpoint_every", checkpoint_every},
            {"log_every", log_every},
            {"image_size", model.image_size},
            {"n_slots", model.n_slots},
            {"slot_dim", model.slot_dim},
            {"feat_dim", model.feat_dim},
            {"dec_dim", model.dec_dim},
            {"dec_layers", model.dec_layers},
            {"dec_heads", model.dec_heads},
            {"sa_iters", model.sa_iters},
            {"n_freqs", model.n_freqs},
            {"fuse_hidden", model.fuse_hidden},
            {"enc_c1", model.enc_c1},
            {"enc_c2", model.enc_c2},
            {"enc_c3", model.enc_c3},
            {"n_coarse", model.n_coarse},
            {"n_fine", model.n_fine},
            {"param_seed", model.param_seed},
            {"scene_batch", train.scene_batch},
            {"ray_batch", train.ray_batch},
            {"lr", train.lr},
            {"warmup_steps", train.warmup_steps},
            {"decay_steps", train.decay_steps},
            {"max_steps", train.max_steps},
            {"mask_anneal_steps", train.mask_anneal_steps},
            {"locality_steps", train.locality_steps},
            {"locality_weight", train.locality_weight},
            {"grad_clip", train.grad_clip},
            {"use_random_mask", train.use_random_mask},
            {"n_source_views", train.n_source_views},
            {"seed", train.seed}};
  }

  void apply(const json& j) {
    json known = to_json();
    for (const auto& [key, _] : j.items())
      if (!known.contains(key))
        throw std::runtime_error("unknown config key: " + key);
    auto get = [&](const char* k, auto& field) {
      if (j.contains(k)) field = j.at(k).get<std::decay_t<decltype(field)>>();
    };
    get("data", data);
    get("out", out);
    get("checkpoint_every", checkpoint_every);
    get("log_every", log_every);
    get("image_size", model.image_size);
    get("n_slots", model.n_slots);
    get("slot_dim", model.slot_dim);
    get("feat_dim", model.feat_dim);
    get("dec_dim", model.dec_dim);
    get("dec_layers", model.dec_layers);
    get("dec_heads", model.dec_heads);
    get("sa_iters", model.sa_iters);
    get("n_freqs", model.n_freqs);
    get("fuse_hidden", model.fuse_hidden);
    get("enc_c1", model.enc_c1);
    get("enc_c2", model.enc_c2);
    get("enc_c3", model.enc_c3);
    get("n_coarse", model.n_coarse);
    get("n_fine", model.n_fine);
    get("param_seed", model.param_seed);
    get("scene_batch", train.scene_batch);
    get("ray_batch", train.ray_batch);
    get("lr", train.lr);
    get("warmup_steps", train.warmup_steps);
    get("decay_steps", train.decay_steps);
    get("max_steps", train.max_steps);
    get("mask_anneal_steps", train.mask_anneal_steps);
    get("locality_steps", train.locality_steps);
    get("locality_weight", train.locality_weight);
    get("grad_clip", train.grad_clip);
    get("use_random_mask", train.use_random_mask);
    get("n_source_views", train.n_source_views);
    get("seed", train.seed);
  }
};

json read_checkpoint_header(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  char magic[4];
  uint32_t ver = 0;
  uint64_t hlen = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&ver), 4);
  in.read(reinterpret_cast<char*>(&hlen), 8);
  if (!in || std::memcmp(magic, sl::kCheckpointMagic, 4) != 0)
    throw std::runtime_error("not a checkpoint file: " + path);
  if (ver != sl::kCheckpointVersion)
    throw std::runtime_error("checkpoint version mismatch in " + path);
  std::string hs(hlen, '\0');
  in.read(hs.data(), hlen);
  if (!in) throw std::runtime_error("truncated checkpoint: " + path);
  return json::parse(hs);
}

void write_effective_config(const RunConfig& rc) {
  fs::create_directories(rc.out);
  std::ofstream out(fs::path(rc.out) / "config.json");
  out << rc.to_json().dump(2) << "\n";
}

std::vector<sl::SceneData> load_all_scenes(const std::string& dir, long limit = -1) {
  long n = sl::count_scenes(dir);
  if (limit >= 0) n = std::min(n, limit);
  std::vector<sl::SceneData> scenes;
  scenes.reserve(n);
  for (long i = 0; i < n; ++i) scenes.push_back(sl::load_scene(dir, i));
  if (scenes.empty()) throw std::runtime_error("no scenes found in " + dir);
  return scenes;
}

void write_rgb(const std::string& path, const std::vector<double>& rgb, long h, long w) {
  sl::png::Image img;
  img.width = w;
  img.height = h;
  img.channels = 3;
  img.pixels.resize(h * w * 3);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = static_cast<uint8_t>(std::lround(std::clamp(rgb[i], 0.0, 1.0) * 255.0));
  sl::png::write(path, img);
}

void write_gray(const std::string& path, const std::vector<double>& v, long h, long w) {
  sl::png::Image img;
  img.width = w;
  img.height = h;
  img.channels = 1;
  img.pixels.resize(h * w);
  for (size_t i = 0; i < img.pixels.size(); ++i)
    img.pixels[i] = static_cast<uint8_t>(std::lround(std::clamp(v[i], 0.0, 1.0) * 255.0));
  sl::png::write(path, img);
}

// Distinct colors for label visualizations; label 0 renders dark gray.
std::array<uint8_t, 3> label_color(int label) {
  static const std::array<std::array<uint8_t, 3>, 8> palette{{{60, 60, 60},
                                                              {230, 60, 60},
                                                              {60, 160, 230},
                                                              {60, 200, 90},
                                                              {240, 200, 60},
                                                              {190, 90, 220},
                                                              {240, 140, 50},
                                                              {110, 220, 210}}};
  return palette[static_cast<size_t>(label) % palette.size()];
}

void write_labels(const std::string& path, const std::vector<int>& labels, long h, long w) {
  sl::png::Image img;
  img.width = w;
  img.height = h;
  img.channels = 3;
  img.pixels.resize(h * w * 3);
  for (long i = 0; i < h * w; ++i) {
    auto c = label_color(labels[i]);
    for (int k = 0; k < 3; ++k) img.pixels[i * 3 + k] = c[k];
  }
  sl::png::write(path, img);
}

// Side-by-side grid: GT image, render, GT mask, predicted mask.
void write_grid(const std::string& path, const sl::SceneData& scene, long view,
                const sl::FullRender& render) {
  long h = scene.views[view].intr.height, w = scene.views[view].intr.width;
  sl::png::Image img;
  img.width = 4 * w;
  img.height = h;
  img.channels = 3;
  img.pixels.assign(h * img.width * 3, 0);
  auto put = [&](long tile, long i, const std::array<uint8_t, 3>& c) {
    long r = i / w, col = tile * w + i % w;
    for (int k = 0; k < 3; ++k) img.pixels[(r * img.width + col) * 3 + k] = c[k];
  };
  auto quant = [](double v) {
    return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  for (long i = 0; i < h * w; ++i) {
    const auto& gt = scene.views[view].image;
    put(0, i, {quant(gt[i * 3]), quant(gt[i * 3 + 1]), quant(gt[i * 3 + 2])});
    put(1, i,
        {quant(render.rgb[i * 3]), quant(render.rgb[i * 3 + 1]), quant(render.rgb[i * 3 + 2])});
    put(2, i, label_color(scene.masks[view][i]));
    put(3, i, label_color(render.labels[i] + 1));  // offset so slot 0 is not background gray
  }
  sl::png::write(path, img);
}

// Restores model weights (and optionally the full training state) from a
// checkpoint, rebuilding the architecture from the stored config.
struct LoadedModel {
  RunConfig rc;
  std::unique_ptr<sl::SlotLifterModel<F>> model;
  sl::CheckpointInfo info;
};

LoadedModel load_model(const std::string& ckpt_path) {
  LoadedModel lm;
  json header = read_checkpoint_header(ckpt_path);
  lm.rc.apply(header.value("config", json::object()));
  lm.model = std::make_unique<sl::SlotLifterModel<F>>(lm.rc.model);
  lm.info = sl::load_checkpoint<F>(ckpt_path, lm.model->params, nullptr);
  return lm;
}

int cmd_make_toy_data(const sl::ToyDatasetSpec& spec, const std::string& out) {
  sl::make_toy_dataset(spec, out);
  std::cout << "wrote " << spec.n_scenes << " scenes to " << out << "\n";
  return 0;
}

int cmd_train(RunConfig rc, const std::string& resume_from) {
  int verbosity = log_verbosity();
  rc.train.validate();
  if (rc.data.empty() || rc.out.empty())
    throw std::runtime_error("train: --data and --out are required");
  rc.model.n_views = rc.train.n_source_views;
  write_effective_config(rc);

  auto scenes = load_all_scenes(rc.data);
  sl::SlotLifterModel<F> model(rc.model);
  sl::Trainer<F> trainer(model, rc.train);
  if (!resume_from.empty()) {
    auto info = sl::load_checkpoint<F>(resume_from, model.params, &trainer.opt.momentum);
    trainer.step = info.step;
    std::istringstream(info.rng_state) >> trainer.rng;
    if (verbosity >= 1)
      std::cout << "resumed from " << resume_from << " at step " << info.step << "\n";
  }

  std::ofstream log(fs::path(rc.out) / "train_log.jsonl", std::ios::app);
  auto save = [&](const std::string& name) {
    std::ostringstream rng_state;
    rng_state << trainer.rng;
    std::string tmp = (fs::path(rc.out) / (name + ".tmp")).string();
    sl::save_checkpoint<F>(tmp, model.params, &trainer.opt.momentum, trainer.step, rc.to_json(),
                           rng_state.str());
    fs::rename(tmp, fs::path(rc.out) / name);
  };

  std::uniform_int_distribution<size_t> pick(0, scenes.size() - 1);
  while (trainer.step < rc.train.max_steps) {
    std::vector<const sl::SceneData*> batch;
    for (long b = 0; b < rc.train.scene_batch; ++b) batch.push_back(&scenes[pick(trainer.rng)]);
    auto m = trainer.train_step(batch);
    if (trainer.step % rc.log_every == 0 || trainer.step == rc.train.max_steps) {
      json line = {{"step", trainer.step}, {"loss", m.loss},      {"lr", m.lr},
                   {"mask", m.mask},       {"grad", m.grad_norm}};
      log << line.dump() << "\n";
      log.flush();
      if (verbosity >= 2 || (verbosity == 1 && trainer.step % (rc.log_every * 10) == 0))
        std::cout << line.dump() << std::endl;
    }
    if (trainer.step % rc.checkpoint_every == 0) save("ckpt_latest.slcp");
  }
  save("ckpt_latest.slcp");
  save("ckpt_final.slcp");
  if (verbosity >= 1)
    std::cout << "finished " << trainer.step << " steps; checkpoints in " << rc.out << "\n";
  return 0;
}

int cmd_render(const std::string& ckpt, const std::string& data, long scene_id,
               const std::string& out, uint64_t seed, long chunk) {
  auto lm = load_model(ckpt);
  auto scene = sl::load_scene(data, scene_id);
  fs::create_directories(out);
  std::ofstream(fs::path(out) / "config.json") << lm.rc.to_json().dump(2) << "\n";

  std::mt19937_64 rng(seed);
  std::vector<sl::CameraView<F>> sources;
  for (long l = 0; l < lm.rc.train.n_source_views; ++l) {
    const auto& v = scene.views[l % scene.n_train_views];
    sources.push_back({v.image, v.pose, v.intr});
  }
  for (long v = scene.n_train_views; v < static_cast<long>(scene.views.size()); ++v) {
    auto render = sl::render_full_view(*lm.model, sources, scene.views[v].pose,
                                       scene.views[v].intr, scene.near, scene.far, chunk, rng);
    char name[64];
    std::snprintf(name, sizeof name, "render_%04ld.png", v);
    write_rgb((fs::path(out) / name).string(), render.rgb, render.height, render.width);
    std::snprintf(name, sizeof name, "labels_%04ld.png", v);
    write_labels((fs::path(out) / name).string(), render.labels, render.height, render.width);
  }
  std::cout << "rendered " << scene.views.size() - scene.n_train_views << " novel views to "
            << out << "\n";
  return 0;
}

int cmd_decompose(const std::string& ckpt, const std::string& data, long scene_id, long view,
                  const std::string& out, uint64_t seed, long chunk) {
  auto lm = load_model(ckpt);
  auto scene = sl::load_scene(data, scene_id);
  if (view < 0 || view >= static_cast<long>(scene.views.size()))
    throw std::runtime_error("decompose: view index out of range");
  fs::create_directories(out);
  std::ofstream(fs::path(out) / "config.json") << lm.rc.to_json().dump(2) << "\n";

  std::mt19937_64 rng(seed);
  std::vector<sl::CameraView<F>> sources;
  for (long l = 0; l < lm.rc.train.n_source_views; ++l) {
    const auto& v = scene.views[l % scene.n_train_views];
    sources.push_back({v.image, v.pose, v.intr});
  }
  auto render = sl::render_full_view(*lm.model, sources, scene.views[view].pose,
                                     scene.views[view].intr, scene.near, scene.far, chunk, rng);
  long n_px = render.height * render.width;
  write_rgb((fs::path(out) / "render.png").string(), render.rgb, render.height, render.width);
  write_labels((fs::path(out) / "labels.png").string(), render.labels, render.height,
               render.width);
  for (long k = 0; k < render.n_slots; ++k) {
    std::vector<double> mask(n_px), comp(n_px * 3);
    for (long i = 0; i < n_px; ++i) {
      mask[i] = render.mask_values[i * render.n_slots + k];
      for (int c = 0; c < 3; ++c) comp[i * 3 + c] = render.rgb[i * 3 + c] * mask[i];
    }
    char name[64];
    std::snprintf(name, sizeof name, "mask_slot_%02ld.png", k);
    write_gray((fs::path(out) / name).string(), mask, render.height, render.width);
    std::snprintf(name, sizeof name, "composite_slot_%02ld.png", k);
    write_rgb((fs::path(out) / name).string(), comp, render.height, render.width);
  }
  std::cout << "wrote " << render.n_slots << " slot decompositions to " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& ckpt, const std::string& data, long num_scenes,
             const std::string& out, uint64_t seed, long chunk, bool grids) {
  auto lm = load_model(ckpt);
  auto scenes = load_all_scenes(data, num_scenes);
  fs::create_directories(out);
  std::ofstream(fs::path(out) / "config.json") << lm.rc.to_json().dump(2) << "\n";

  auto report = sl::evaluate(*lm.model, scenes, lm.rc.train.n_source_views, chunk, seed);

  std::ofstream txt(fs::path(out) / "report.txt");
  txt << "scenes " << report.scenes.size() << "  step " << lm.info.step << "\n";
  txt << "psnr " << report.psnr << "  ssim " << report.ssim << "  ari " << report.ari
      << "  fg_ari " << report.fg_ari << "  nv_ari " << report.nv_ari << "  nv_fg_ari "
      << report.nv_fg_ari << "\n";
  for (const auto& se : report.scenes)
    txt << "scene " << se.scene_id << "  psnr " << se.psnr << "  ssim " << se.ssim << "  ari "
        << se.ari << "  fg_ari " << se.fg_ari << "  nv_ari " << se.nv_ari << "  nv_fg_ari "
        << se.nv_fg_ari << "\n";

  json jr = {{"step", lm.info.step},     {"psnr", report.psnr},
             {"ssim", report.ssim},      {"ari", report.ari},
             {"fg_ari", report.fg_ari},  {"nv_ari", report.nv_ari},
             {"nv_fg_ari", report.nv_fg_ari}, {"scenes", json::array()}};
  for (const auto& se : report.scenes)
    jr["scenes"].push_back({{"scene_id", se.scene_id},
                            {"psnr", se.psnr},
                            {"ssim", se.ssim},
                            {"ari", se.ari},
                            {"fg_ari", se.fg_ari},
                            {"nv_ari", se.nv_ari},
                            {"nv_fg_ari", se.nv_fg_ari}});
  std::ofstream(fs::path(out) / "report.json") << jr.dump(2) << "\n";

  if (grids) {
    for (const auto& scene : scenes) {
      std::mt19937_64 rng(seed + scene.scene_id);
      std::vector<sl::CameraView<F>> sources;
      for (long l = 0; l < lm.rc.train.n_source_views; ++l) {
        const auto& v = scene.views[l % scene.n_train_views];
        sources.push_back({v.image, v.pose, v.intr});
      }
      long v = scene.n_train_views < static_cast<long>(scene.views.size())
                   ? scene.n_train_views
                   : 0;
      auto render = sl::render_full_view(*lm.model, sources, scene.views[v].pose,
                                         scene.views[v].intr, scene.near, scene.far, chunk, rng);
      char name[64];
      std::snprintf(name, sizeof name, "grid_scene_%04ld.png", scene.scene_id);
      write_grid((fs::path(out) / name).string(), scene, v, render);
    }
  }
  std::cout << "psnr " << report.psnr << "  ssim " << report.ssim << "  fg_ari "
            << report.fg_ari << "  nv_fg_ari " << report.nv_fg_ari << "\n";
  std::cout << "report written to " << out << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SlotLifter: object-centric radiance fields"};
  app.require_subcommand(1);
  app.failure_message(CLI::FailureMessage::help);

  // make-toy-data
  auto* mk = app.add_subcommand("make-toy-data", "Generate a synthetic multi-view dataset");
  sl::ToyDatasetSpec spec;
  std::string mk_out;
  mk->add_option("--out", mk_out, "Output directory")->required();
  mk->add_option("--seed", spec.seed, "Dataset seed");
  mk->add_option("--num-scenes", spec.n_scenes, "Number of scenes");
  mk->add_option("--image-size", spec.image_size, "Square image resolution");
  mk->add_option("--num-views", spec.n_views, "Views per scene (train + holdout)");
  mk->add_option("--holdout-views", spec.n_holdout_views, "Held-out views per scene");
  mk->add_option("--min-objects", spec.min_objects, "Minimum objects per scene");
  mk->add_option("--max-objects", spec.max_objects, "Maximum objects per scene");

  // train
  auto* tr = app.add_subcommand("train", "Train a model on a dataset");
  std::string tr_config, tr_data, tr_out, tr_ckpt;
  long tr_max_steps = -1, tr_slots = -1, tr_views = -1;
  int64_t tr_seed = -1;
  tr->add_option("--config", tr_config, "JSON run config")->check(CLI::ExistingFile);
  tr->add_option("--data", tr_data, "Dataset directory");
  tr->add_option("--out", tr_out, "Output directory");
  tr->add_option("--checkpoint", tr_ckpt, "Resume from checkpoint")->check(CLI::ExistingFile);
  tr->add_option("--max-steps", tr_max_steps, "Override total training steps");
  tr->add_option("--num-slots", tr_slots, "Override slot count K");
  tr->add_option("--num-views", tr_views, "Override source view count L");
  tr->add_option("--seed", tr_seed, "Override training seed");

  // render
  auto* rd = app.add_subcommand("render", "Render held-out views from a checkpoint");
  std::string rd_ckpt, rd_data, rd_out;
  long rd_scene = 0, rd_chunk = 1024;
  uint64_t rd_seed = 0;
  rd->add_option("--checkpoint", rd_ckpt, "Checkpoint file")->required()
      ->check(CLI::ExistingFile);
  rd->add_option("--data", rd_data, "Dataset directory")->required();
  rd->add_option("--scene", rd_scene, "Scene id");
  rd->add_option("--out", rd_out, "Output directory")->required();
  rd->add_option("--seed", rd_seed, "Sampling seed");
  rd->add_option("--chunk", rd_chunk, "Rays per render chunk");

  // decompose
  auto* dc = app.add_subcommand("decompose", "Write per-slot masks and composites");
  std::string dc_ckpt, dc_data, dc_out;
  long dc_scene = 0, dc_view = 0, dc_chunk = 1024;
  uint64_t dc_seed = 0;
  dc->add_option("--checkpoint", dc_ckpt, "Checkpoint file")->required()
      ->check(CLI::ExistingFile);
  dc->add_option("--data", dc_data, "Dataset directory")->required();
  dc->add_option("--scene", dc_scene, "Scene id");
  dc->add_option("--view", dc_view, "View index within the scene");
  dc->add_option("--out", dc_out, "Output directory")->required();
  dc->add_option("--seed", dc_seed, "Sampling seed");
  dc->add_option("--chunk", dc_chunk, "Rays per render chunk");

  // eval
  auto* ev = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
  std::string ev_ckpt, ev_data, ev_out;
  long ev_scenes = -1, ev_chunk = 1024;
  uint64_t ev_seed = 0;
  bool ev_grids = false;
  ev->add_option("--checkpoint", ev_ckpt, "Checkpoint file")->required()
      ->check(CLI::ExistingFile);
  ev->add_option("--data", ev_data, "Dataset directory")->required();
  ev->add_option("--out", ev_out, "Output directory")->required();
  ev->add_option("--num-scenes", ev_scenes, "Evaluate only the first N scenes");
  ev->add_option("--seed", ev_seed, "Sampling seed");
  ev->add_option("--chunk", ev_chunk, "Rays per render chunk");
  ev->add_flag("--grids", ev_grids, "Write GT/render/mask comparison grids");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (mk->parsed()) return cmd_make_toy_data(spec, mk_out);
    if (tr->parsed()) {
      RunConfig rc;
      if (!tr_config.empty()) {
        std::ifstream in(tr_config);
        rc.apply(json::parse(in));
      }
      if (!tr_data.empty()) rc.data = tr_data;
      if (!tr_out.empty()) rc.out = tr_out;
      if (tr_max_steps >= 0) rc.train.max_steps = tr_max_steps;
      if (tr_slots >= 0) rc.model.n_slots = tr_slots;
      if (tr_views >= 0) rc.train.n_source_views = tr_views;
      if (tr_seed >= 0) rc.train.seed = static_cast<uint64_t>(tr_seed);
      return cmd_train(std::move(rc), tr_ckpt);
    }
    if (rd->parsed()) return cmd_render(rd_ckpt, rd_data, rd_scene, rd_out, rd_seed, rd_chunk);
    if (dc->parsed())
      return cmd_decompose(dc_ckpt, dc_data, dc_scene, dc_view, dc_out, dc_seed, dc_chunk);
    if (ev->parsed())
      return cmd_eval(ev_ckpt, ev_data, ev_scenes, ev_out, ev_seed, ev_chunk, ev_grids);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
