#pragma once

#include <random>

#include "slotlifter/geometry.hpp"

namespace sl::toy {

// Lambertian primitive resting on the ground plane. Labels are 1-based;
// 0 is background (ground plane and sky).
struct Object {
  enum Kind { Sphere, Box } kind = Sphere;
  Eigen::Vector3d center = Eigen::Vector3d::Zero();
  double radius = 1.0;                              // spheres
  Eigen::Vector3d half = Eigen::Vector3d::Ones();   // boxes
  Eigen::Vector3d albedo = Eigen::Vector3d::Ones();
};

struct Scene {
  std::vector<Object> objects;
  Eigen::Vector3d ground_albedo = {0.45, 0.45, 0.45};
  double ground_half = 6.0;  // finite gray slab at y = 0
};

struct RenderedView {
  long width = 0, height = 0;
  std::vector<float> rgb;     // H*W*3 in [0,1]
  std::vector<int> labels;    // H*W instance ids, 0 = background
  std::vector<double> depth;  // H*W ray-hit distance, +inf for sky
};

// Nearest-hit distance along a ray; label receives 0 for ground, 1+i for
// object i, -1 for a miss (sky).
double hit_distance(const Scene& scene, const Eigen::Vector3d& origin,
                    const Eigen::Vector3d& dir, int* label);

Scene random_scene(long min_objects, long max_objects, std::mt19937_64& rng);

// Camera on a ring around `target`, x right / y down / z toward the target.
geom::Pose ring_pose(double angle, double radius, double height,
                     const Eigen::Vector3d& target);

RenderedView render(const Scene& scene, const geom::Pose& pose,
                    const geom::Intrinsics& intr);

}  // namespace sl::toy
