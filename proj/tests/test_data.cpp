#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>

#include "slotlifter/checkpoint.hpp"
#include "slotlifter/dataset.hpp"
#include "slotlifter/png_io.hpp"
#include "slotlifter/toy_scene.hpp"
#include "slotlifter/training.hpp"

using namespace sl;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  auto p = fs::temp_directory_path() / ("slotlifter_test_" + tag);
  fs::remove_all(p);
  return p;
}

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

ToyDatasetSpec small_spec(uint64_t seed) {
  ToyDatasetSpec spec;
  spec.n_scenes = 2;
  spec.image_size = 32;
  spec.n_views = 4;
  spec.n_holdout_views = 1;
  spec.seed = seed;
  return spec;
}

}  // namespace

TEST_CASE("png round trip preserves every byte") {
  png::Image img;
  img.width = 7;
  img.height = 5;
  img.channels = 3;
  std::mt19937_64 rng(1);
  img.pixels.resize(7 * 5 * 3);
  for (auto& p : img.pixels) p = uint8_t(rng());
  auto path = (temp_dir("png") / "x.png");
  fs::create_directories(path.parent_path());
  png::write(path.string(), img);
  auto back = png::read(path.string());
  CHECK(back.width == 7);
  CHECK(back.height == 5);
  CHECK(back.channels == 3);
  CHECK(back.pixels == img.pixels);
  CHECK_THROWS_AS(png::read((path.parent_path() / "missing.png").string()),
                  std::runtime_error);
}

TEST_CASE("dataset generation is byte-identical for a fixed seed") {
  auto d1 = temp_dir("ds1"), d2 = temp_dir("ds2");
  make_toy_dataset(small_spec(7), d1.string());
  make_toy_dataset(small_spec(7), d2.string());
  long files = 0;
  for (auto& e : fs::recursive_directory_iterator(d1)) {
    if (!e.is_regular_file()) continue;
    auto rel = fs::relative(e.path(), d1);
    CHECK(slurp(e.path()) == slurp(d2 / rel));
    ++files;
  }
  CHECK(files == 2 * (4 * 2 + 1) + 1);  // views + masks + manifests + index

  // a different seed changes the images
  auto d3 = temp_dir("ds3");
  make_toy_dataset(small_spec(8), d3.string());
  CHECK(slurp(d1 / "scene_0000/view_0000.png") != slurp(d3 / "scene_0000/view_0000.png"));
}

TEST_CASE("loaded scenes parse into consistent views, masks and bounds") {
  auto dir = temp_dir("dsload");
  make_toy_dataset(small_spec(9), dir.string());
  CHECK(count_scenes(dir.string()) == 2);
  auto scene = load_scene(dir.string(), 1);
  CHECK(scene.views.size() == 4);
  CHECK(scene.masks.size() == 4);
  CHECK(scene.n_train_views == 3);
  CHECK(scene.near == 1.0);
  CHECK(scene.far == 12.0);
  CHECK(scene.bound_lo.x() < scene.bound_hi.x());
  for (const auto& v : scene.views) {
    v.pose.validate();
    CHECK(v.image.rows() == 32 * 32);
    for (long i = 0; i < v.image.size(); ++i) {
      CHECK(v.image[i] >= 0.0f);
      CHECK(v.image[i] <= 1.0f);
    }
  }
  for (const auto& m : scene.masks)
    for (int label : m) {
      CHECK(label >= 0);
      CHECK(label <= 3);
    }
  CHECK_THROWS_AS(load_scene(dir.string(), 99), std::runtime_error);
}

TEST_CASE("a manifest without near/far is rejected with the field name") {
  auto dir = temp_dir("dsbad");
  make_toy_dataset(small_spec(10), dir.string());
  auto mpath = dir / "scene_0000" / "manifest.json";
  auto m = nlohmann::json::parse(std::ifstream(mpath));
  m.erase("near");
  std::ofstream(mpath) << m.dump(2);
  try {
    load_scene(dir.string(), 0);
    FAIL("expected a format error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("near") != std::string::npos);
  }
}

TEST_CASE("an axis-aligned sphere projects its mask around the principal point") {
  toy::Scene scene;
  toy::Object sphere;
  sphere.center = {0, 1.0, 0};
  sphere.radius = 0.8;
  sphere.albedo = {0.85, 0.15, 0.15};
  scene.objects.push_back(sphere);
  geom::Intrinsics intr{57.6, 57.6, 32, 32, 64, 64};
  auto pose = toy::ring_pose(M_PI / 2, 5.0, 0.0, sphere.center);  // camera level with center
  auto r = toy::render(scene, pose, intr);
  double cr = 0, cc = 0, n = 0;
  for (long row = 0; row < 64; ++row)
    for (long col = 0; col < 64; ++col)
      if (r.labels[row * 64 + col] == 1) {
        cr += row;
        cc += col;
        ++n;
      }
  REQUIRE(n > 0);
  // pixel centers sit at +0.5, so the principal point is index 31.5
  CHECK(cr / n == doctest::Approx(31.5).epsilon(0.04));
  CHECK(cc / n == doctest::Approx(31.5).epsilon(0.04));
}

TEST_CASE("rendered depth matches an independent ray-sphere solve") {
  toy::Scene scene;
  toy::Object sphere;
  sphere.center = {0.3, 0.9, -0.2};
  sphere.radius = 0.9;
  scene.objects.push_back(sphere);
  geom::Intrinsics intr{28.8, 28.8, 16, 16, 32, 32};
  auto pose = toy::ring_pose(0.7, 4.2, 2.8, {0, 0.35, 0});
  auto r = toy::render(scene, pose, intr);

  std::vector<std::pair<double, double>> pixels;
  for (long row = 0; row < 32; ++row)
    for (long col = 0; col < 32; ++col) pixels.emplace_back(double(row), double(col));
  auto rays = geom::generate_rays(pose, intr, pixels);
  long checked = 0;
  for (long i = 0; i < 32 * 32; ++i) {
    if (r.labels[i] != 1) continue;
    Eigen::Vector3d oc = rays.origins[i] - sphere.center;
    double b = oc.dot(rays.dirs[i]);
    double disc = b * b - (oc.squaredNorm() - sphere.radius * sphere.radius);
    REQUIRE(disc >= 0);
    double t = -b - std::sqrt(disc);
    CHECK(r.depth[i] == doctest::Approx(t).epsilon(1e-6));
    ++checked;
  }
  CHECK(checked > 10);
}

TEST_CASE("object pixels carry the object's albedo, never the ground color") {
  std::mt19937_64 rng(11);
  auto scene = toy::random_scene(2, 3, rng);
  geom::Intrinsics intr{28.8, 28.8, 16, 16, 32, 32};
  auto pose = toy::ring_pose(1.9, 4.2, 2.8, {0, 0.35, 0});
  auto r = toy::render(scene, pose, intr);
  long checked = 0;
  for (long i = 0; i < 32 * 32; ++i) {
    int label = r.labels[i];
    if (label == 0) continue;
    const auto& albedo = scene.objects[label - 1].albedo;
    // Lambertian shading scales all channels equally, so hue ratios survive
    double scale = r.rgb[i * 3] / albedo[0];
    CHECK(r.rgb[i * 3 + 1] == doctest::Approx(scale * albedo[1]).epsilon(1e-2));
    CHECK(r.rgb[i * 3 + 2] == doctest::Approx(scale * albedo[2]).epsilon(1e-2));
    CHECK(scale > 0.3);
    ++checked;
  }
  CHECK(checked > 20);
}

TEST_CASE("checkpoints round-trip parameters and optimizer state exactly") {
  using F = float;
  ModelConfig mc;
  mc.image_size = 16;
  mc.n_slots = 2;
  mc.slot_dim = 8;
  mc.feat_dim = 4;
  mc.dec_dim = 4;
  mc.dec_layers = 1;
  mc.dec_heads = 2;
  mc.sa_iters = 2;
  mc.n_freqs = 2;
  mc.fuse_hidden = 4;
  mc.enc_c1 = mc.enc_c2 = mc.enc_c3 = 4;
  mc.param_seed = 3;
  SlotLifterModel<F> model(mc);
  Lion<F> lion;
  lion.init(model.params);
  std::mt19937_64 grng(4);
  for (auto& m : lion.momentum) m = Tensor<F>::randn(m.shape, grng, F(0.1));

  std::mt19937_64 rng(99);
  rng.discard(12345);
  std::ostringstream rs;
  rs << rng;

  auto dir = temp_dir("ckpt");
  fs::create_directories(dir);
  auto path = (dir / "model.ckpt").string();
  save_checkpoint(path, model.params, &lion.momentum, 42,
                  nlohmann::json{{"note", "test"}}, rs.str());

  ModelConfig mc2 = mc;
  mc2.param_seed = 77;
  SlotLifterModel<F> other(mc2);
  // fresh init differs before loading
  CHECK(other.params.params[0].second->value.data != model.params.params[0].second->value.data);
  std::vector<Tensor<F>> momentum;
  auto info = load_checkpoint(path, other.params, &momentum);
  CHECK(info.step == 42);
  CHECK(info.config.at("note") == "test");
  for (size_t i = 0; i < model.params.params.size(); ++i)
    CHECK(other.params.params[i].second->value.data ==
          model.params.params[i].second->value.data);
  REQUIRE(momentum.size() == lion.momentum.size());
  for (size_t i = 0; i < momentum.size(); ++i)
    CHECK(momentum[i].data == lion.momentum[i].data);

  std::mt19937_64 restored;
  std::istringstream(info.rng_state) >> restored;
  CHECK(restored == rng);

  // bumped version field is rejected
  auto bytes = slurp(path);
  bytes[4] = 9;
  std::ofstream(path, std::ios::binary).write(bytes.data(), bytes.size());
  try {
    load_checkpoint<F>(path, other.params, nullptr);
    FAIL("expected a version error");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("version") != std::string::npos);
  }

  // truncated payload is rejected
  std::ofstream(path, std::ios::binary).write(bytes.data(), bytes.size() / 2);
  CHECK_THROWS_AS(load_checkpoint<F>(path, other.params, nullptr), std::runtime_error);
}

TEST_CASE("training resumed from a checkpoint retraces the original run bitwise") {
  using F = float;
  ModelConfig mc;
  mc.image_size = 16;
  mc.n_slots = 2;
  mc.slot_dim = 8;
  mc.feat_dim = 4;
  mc.dec_dim = 4;
  mc.dec_layers = 1;
  mc.dec_heads = 2;
  mc.sa_iters = 2;
  mc.n_freqs = 2;
  mc.fuse_hidden = 4;
  mc.enc_c1 = mc.enc_c2 = mc.enc_c3 = 4;
  mc.n_coarse = 4;
  mc.n_fine = 4;
  mc.param_seed = 21;

  // one in-memory scene rendered by the analytic tracer
  std::mt19937_64 srng(2);
  auto toy_scene = toy::random_scene(1, 2, srng);
  geom::Intrinsics intr{14.4, 14.4, 8, 8, 16, 16};
  SceneData scene;
  scene.n_train_views = 2;
  scene.near = 2.0;
  scene.far = 13.0;
  scene.bound_lo = {-3.5, -0.1, -3.5};
  scene.bound_hi = {3.5, 2.2, 3.5};
  for (long v = 0; v < 2; ++v) {
    auto pose = toy::ring_pose(M_PI * v, 4.2, 2.8, {0, 0.35, 0});
    auto r = toy::render(toy_scene, pose, intr);
    CameraView<float> view;
    view.pose = pose;
    view.intr = intr;
    view.image = Tensor<float>({256, 3}, std::vector<float>(r.rgb.begin(), r.rgb.end()));
    scene.views.push_back(std::move(view));
    scene.masks.emplace_back(r.labels.begin(), r.labels.end());
  }

  TrainConfig tc;
  tc.scene_batch = 1;
  tc.ray_batch = 8;
  tc.lr = 3e-4;
  tc.warmup_steps = 2;
  tc.decay_steps = 100;
  tc.max_steps = 10;
  tc.mask_anneal_steps = 6;
  tc.locality_steps = 10;
  tc.seed = 31;

  SlotLifterModel<F> straight(mc);
  Trainer<F> t1(straight, tc);
  for (int s = 0; s < 10; ++s) t1.train_step({&scene});

  SlotLifterModel<F> first_half(mc);
  Trainer<F> t2(first_half, tc);
  for (int s = 0; s < 5; ++s) t2.train_step({&scene});
  auto dir = temp_dir("resume");
  fs::create_directories(dir);
  auto path = (dir / "mid.ckpt").string();
  std::ostringstream rs;
  rs << t2.rng;
  save_checkpoint(path, first_half.params, &t2.opt.momentum, t2.step, nlohmann::json{},
                  rs.str());

  SlotLifterModel<F> resumed(mc);
  Trainer<F> t3(resumed, tc);
  auto info = load_checkpoint(path, resumed.params, &t3.opt.momentum);
  t3.step = info.step;
  std::istringstream(info.rng_state) >> t3.rng;
  for (int s = 0; s < 5; ++s) t3.train_step({&scene});

  for (size_t i = 0; i < straight.params.params.size(); ++i)
    CHECK(resumed.params.params[i].second->value.data ==
          straight.params.params[i].second->value.data);
}
