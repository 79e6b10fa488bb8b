#pragma once

#include <string>

#include "slotlifter/model.hpp"

namespace sl {

// One multi-view scene as loaded from disk. The first `n_train_views` views
// are for training; the remainder are held out for novel-view evaluation.
struct SceneData {
  long scene_id = 0;
  long n_train_views = 0;
  std::vector<CameraView<float>> views;
  std::vector<std::vector<int>> masks;  // per view, H*W labels, 0 = background
  double near = 0, far = 0;
  Eigen::Vector3d bound_lo, bound_hi;  // locality box in world units
};

struct ToyDatasetSpec {
  long n_scenes = 32;
  long min_objects = 2, max_objects = 3;
  long image_size = 64;
  long n_views = 6;
  long n_holdout_views = 2;
  uint64_t seed = 0;
};

// Renders `n_scenes` random toy scenes from ring cameras into `dir`
// (per-scene view/mask PNGs plus a JSON manifest). Deterministic per seed.
void make_toy_dataset(const ToyDatasetSpec& spec, const std::string& dir);

long count_scenes(const std::string& dir);

SceneData load_scene(const std::string& dir, long scene_id);

}  // namespace sl
