#pragma once

#include <Eigen/Dense>
#include <random>
#include <vector>

namespace sl::geom {

// Delta assigned to the last sample on a ray (far-plane cap).
constexpr double kFarDelta = 1e10;

struct Intrinsics {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  long width = 0, height = 0;
  void validate() const;
};

// Camera-to-world pose: x_world = rot * x_cam + trans.
struct Pose {
  Eigen::Matrix3d rot = Eigen::Matrix3d::Identity();
  Eigen::Vector3d trans = Eigen::Vector3d::Zero();
  void validate(double tol = 1e-6) const;
};

struct RayBatch {
  std::vector<Eigen::Vector3d> origins;
  std::vector<Eigen::Vector3d> dirs;  // unit length, world frame
  std::vector<long> pixel_ids;
  long size() const { return static_cast<long>(origins.size()); }
};

struct RaySamples {
  long n_rays = 0, n_samples = 0;
  std::vector<Eigen::Vector3d> points;  // n_rays * n_samples
  std::vector<double> depths;           // strictly increasing per ray
  std::vector<double> deltas;           // depths[i+1]-depths[i], last = kFarDelta
};

// Casts one ray per (row, col) through the pixel center (+0.5 offset).
// Coordinates may be fractional; out-of-bounds coordinates throw.
RayBatch generate_rays(const Pose& pose, const Intrinsics& intr,
                       const std::vector<std::pair<double, double>>& pixels);

RaySamples sample_stratified(const RayBatch& rays, double near, double far,
                             long n_samples, std::mt19937_64& rng);

// Inverse-CDF sampling over the piecewise-constant histogram spanned by
// consecutive coarse depths (bin i = [d_i, d_{i+1}) weighted by w_i). The
// n_fine draws are merged with the coarse depths and re-sorted. Rays whose
// weights sum to zero fall back to uniform sampling over the coarse range.
RaySamples sample_importance(const RayBatch& rays,
                             const std::vector<double>& coarse_depths,
                             const std::vector<double>& coarse_weights, long n_coarse,
                             long n_fine, std::mt19937_64& rng);

// Pinhole projection u = fx*x/z + cx, v = fy*y/z + cy in the camera frame.
// valid = positive depth and pixel inside image bounds.
void project(const std::vector<Eigen::Vector3d>& points, const Pose& pose,
             const Intrinsics& intr, std::vector<Eigen::Vector2d>& pixels,
             std::vector<bool>& valid);

}  // namespace sl::geom
