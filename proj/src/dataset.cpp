#include "slotlifter/dataset.hpp"

#include <filesystem>
#include <fstream>
#include <nlohmann/json.hpp>

#include "slotlifter/png_io.hpp"
#include "slotlifter/toy_scene.hpp"

namespace sl {

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

std::string scene_dir(const std::string& root, long id) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "scene_%04ld", id);
  return (fs::path(root) / buf).string();
}

std::string view_name(const char* prefix, long v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%s_%04ld.png", prefix, v);
  return buf;
}

json pose_to_json(const geom::Pose& p) {
  // 4x4 row-major camera-to-world
  json m = json::array();
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) m.push_back(p.rot(r, c));
    m.push_back(p.trans[r]);
  }
  for (int c = 0; c < 3; ++c) m.push_back(0.0);
  m.push_back(1.0);
  return m;
}

geom::Pose pose_from_json(const json& m, const std::string& path) {
  if (!m.is_array() || m.size() != 16)
    throw std::runtime_error("manifest format error at " + path + ": expected 16 numbers");
  geom::Pose p;
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) p.rot(r, c) = m[r * 4 + c].get<double>();
    p.trans[r] = m[r * 4 + 3].get<double>();
  }
  p.validate();
  return p;
}

const json& require(const json& j, const std::string& key, const std::string& path) {
  auto it = j.find(key);
  if (it == j.end())
    throw std::runtime_error("manifest format error: missing field " + path + "." + key);
  return *it;
}

}  // namespace

void make_toy_dataset(const ToyDatasetSpec& spec, const std::string& dir) {
  if (spec.min_objects < 1 || spec.max_objects < spec.min_objects)
    throw std::invalid_argument("make_toy_dataset: bad object count range");
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir))
    throw std::runtime_error("cannot create dataset directory: " + dir);

  geom::Intrinsics intr;
  intr.width = intr.height = spec.image_size;
  intr.fx = intr.fy = 0.9 * spec.image_size;
  intr.cx = intr.cy = spec.image_size / 2.0;
  const Eigen::Vector3d target(0, 0.35, 0);
  const double ring_radius = 3.6, ring_height = 2.7;
  const double near = 1.0, far = 12.0;
  const Eigen::Vector3d bound_lo(-3.2, -0.1, -3.2), bound_hi(3.2, 2.8, 3.2);

  std::mt19937_64 rng(spec.seed);
  for (long s = 0; s < spec.n_scenes; ++s) {
    auto scene = toy::random_scene(spec.min_objects, spec.max_objects, rng);
    std::string sdir = scene_dir(dir, s);
    fs::create_directories(sdir);

    json manifest;
    manifest["scene_id"] = s;
    manifest["n_views"] = spec.n_views;
    manifest["n_train_views"] = spec.n_views - spec.n_holdout_views;
    manifest["n_objects"] = scene.objects.size();
    manifest["near"] = near;
    manifest["far"] = far;
    manifest["bound_lo"] = {bound_lo.x(), bound_lo.y(), bound_lo.z()};
    manifest["bound_hi"] = {bound_hi.x(), bound_hi.y(), bound_hi.z()};
    manifest["intrinsics"] = {{"fx", intr.fx}, {"fy", intr.fy}, {"cx", intr.cx},
                              {"cy", intr.cy}, {"width", intr.width}, {"height", intr.height}};
    manifest["poses"] = json::array();

    for (long v = 0; v < spec.n_views; ++v) {
      double angle = 2.0 * M_PI * v / spec.n_views;
      auto pose = toy::ring_pose(angle, ring_radius, ring_height, target);
      manifest["poses"].push_back(pose_to_json(pose));
      auto rendered = toy::render(scene, pose, intr);

      png::Image img;
      img.width = intr.width;
      img.height = intr.height;
      img.channels = 3;
      img.pixels.resize(rendered.rgb.size());
      for (size_t i = 0; i < rendered.rgb.size(); ++i)
        img.pixels[i] = static_cast<uint8_t>(std::lround(
            std::clamp(rendered.rgb[i], 0.0f, 1.0f) * 255.0f));
      png::write((fs::path(sdir) / view_name("view", v)).string(), img);

      png::Image mask;
      mask.width = intr.width;
      mask.height = intr.height;
      mask.channels = 1;
      mask.pixels.resize(rendered.labels.size());
      for (size_t i = 0; i < rendered.labels.size(); ++i)
        mask.pixels[i] = static_cast<uint8_t>(rendered.labels[i]);
      png::write((fs::path(sdir) / view_name("mask", v)).string(), mask);
    }
    std::ofstream out(fs::path(sdir) / "manifest.json");
    out << manifest.dump(2) << "\n";
    if (!out) throw std::runtime_error("cannot write manifest in " + sdir);
  }
  json top;
  top["n_scenes"] = spec.n_scenes;
  top["seed"] = spec.seed;
  top["image_size"] = spec.image_size;
  top["n_views"] = spec.n_views;
  std::ofstream out(fs::path(dir) / "dataset.json");
  out << top.dump(2) << "\n";
  if (!out) throw std::runtime_error("cannot write dataset manifest in " + dir);
}

long count_scenes(const std::string& dir) {
  std::ifstream in(fs::path(dir) / "dataset.json");
  if (!in) throw std::runtime_error("no dataset manifest in " + dir);
  json top = json::parse(in);
  return require(top, "n_scenes", "dataset").get<long>();
}

SceneData load_scene(const std::string& dir, long scene_id) {
  std::string sdir = scene_dir(dir, scene_id);
  std::ifstream in(fs::path(sdir) / "manifest.json");
  if (!in) throw std::runtime_error("scene not found: " + sdir);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("corrupt manifest in " + sdir + ": " + e.what());
  }

  SceneData scene;
  scene.scene_id = scene_id;
  long n_views = require(m, "n_views", "manifest").get<long>();
  scene.n_train_views = require(m, "n_train_views", "manifest").get<long>();
  scene.near = require(m, "near", "manifest").get<double>();
  scene.far = require(m, "far", "manifest").get<double>();
  auto lo = require(m, "bound_lo", "manifest");
  auto hi = require(m, "bound_hi", "manifest");
  for (int c = 0; c < 3; ++c) {
    scene.bound_lo[c] = lo.at(c).get<double>();
    scene.bound_hi[c] = hi.at(c).get<double>();
  }
  const auto& ij = require(m, "intrinsics", "manifest");
  geom::Intrinsics intr;
  intr.fx = require(ij, "fx", "manifest.intrinsics").get<double>();
  intr.fy = require(ij, "fy", "manifest.intrinsics").get<double>();
  intr.cx = require(ij, "cx", "manifest.intrinsics").get<double>();
  intr.cy = require(ij, "cy", "manifest.intrinsics").get<double>();
  intr.width = require(ij, "width", "manifest.intrinsics").get<long>();
  intr.height = require(ij, "height", "manifest.intrinsics").get<long>();
  intr.validate();

  const auto& poses = require(m, "poses", "manifest");
  if (static_cast<long>(poses.size()) != n_views)
    throw std::runtime_error("manifest format error: manifest.poses count mismatch");

  for (long v = 0; v < n_views; ++v) {
    CameraView<float> view;
    view.intr = intr;
    view.pose = pose_from_json(poses[v], "manifest.poses[" + std::to_string(v) + "]");

    auto img = png::read((fs::path(sdir) / view_name("view", v)).string());
    if (img.width != intr.width || img.height != intr.height || img.channels != 3)
      throw std::runtime_error("image shape mismatch in " + sdir);
    view.image = Tensor<float>({img.width * img.height, 3});
    for (long i = 0; i < view.image.size(); ++i)
      view.image[i] = img.pixels[i] / 255.0f;

    auto mask = png::read((fs::path(sdir) / view_name("mask", v)).string());
    if (mask.width != intr.width || mask.height != intr.height || mask.channels != 1)
      throw std::runtime_error("mask shape mismatch in " + sdir);
    std::vector<int> labels(mask.pixels.begin(), mask.pixels.end());

    scene.views.push_back(std::move(view));
    scene.masks.push_back(std::move(labels));
  }
  return scene;
}

}  // namespace sl
