#include "slotlifter/geometry.hpp"

#include <algorithm>
#include <stdexcept>

namespace sl::geom {

void Intrinsics::validate() const {
  if (fx <= 0 || fy <= 0) throw std::invalid_argument("intrinsics: focal lengths must be positive");
  if (cx < 0 || cx >= width || cy < 0 || cy >= height)
    throw std::invalid_argument("intrinsics: principal point outside image");
}

void Pose::validate(double tol) const {
  Eigen::Matrix3d e = rot * rot.transpose() - Eigen::Matrix3d::Identity();
  if (e.cwiseAbs().maxCoeff() > tol || std::abs(rot.determinant() - 1.0) > tol)
    throw std::invalid_argument("pose: rotation is not orthonormal with det +1");
}

RayBatch generate_rays(const Pose& pose, const Intrinsics& intr,
                       const std::vector<std::pair<double, double>>& pixels) {
  RayBatch rb;
  rb.origins.reserve(pixels.size());
  rb.dirs.reserve(pixels.size());
  rb.pixel_ids.reserve(pixels.size());
  for (const auto& [row, col] : pixels) {
    if (row < 0 || row >= intr.height || col < 0 || col >= intr.width)
      throw std::invalid_argument("generate_rays: pixel coordinate out of bounds");
    Eigen::Vector3d dir_cam((col + 0.5 - intr.cx) / intr.fx,
                            (row + 0.5 - intr.cy) / intr.fy, 1.0);
    rb.origins.push_back(pose.trans);
    rb.dirs.push_back((pose.rot * dir_cam).normalized());
    rb.pixel_ids.push_back(static_cast<long>(row) * intr.width + static_cast<long>(col));
  }
  return rb;
}

static void fill_points_and_deltas(const RayBatch& rays, RaySamples& s) {
  long R = s.n_rays, N = s.n_samples;
  s.points.resize(R * N);
  s.deltas.resize(R * N);
  for (long r = 0; r < R; ++r) {
    for (long i = 0; i < N; ++i) {
      double d = s.depths[r * N + i];
      s.points[r * N + i] = rays.origins[r] + d * rays.dirs[r];
      s.deltas[r * N + i] =
          i + 1 < N ? s.depths[r * N + i + 1] - d : kFarDelta;
    }
  }
}

RaySamples sample_stratified(const RayBatch& rays, double near, double far,
                             long n_samples, std::mt19937_64& rng) {
  if (near <= 0 || near >= far)
    throw std::invalid_argument("sample_stratified: need 0 < near < far");
  if (n_samples < 1) throw std::invalid_argument("sample_stratified: n_samples >= 1");
  RaySamples s;
  s.n_rays = rays.size();
  s.n_samples = n_samples;
  s.depths.resize(s.n_rays * n_samples);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  double step = (far - near) / static_cast<double>(n_samples);
  for (long r = 0; r < s.n_rays; ++r)
    for (long i = 0; i < n_samples; ++i)
      s.depths[r * n_samples + i] = near + (static_cast<double>(i) + uni(rng)) * step;
  fill_points_and_deltas(rays, s);
  return s;
}

RaySamples sample_importance(const RayBatch& rays,
                             const std::vector<double>& coarse_depths,
                             const std::vector<double>& coarse_weights, long n_coarse,
                             long n_fine, std::mt19937_64& rng) {
  long R = rays.size();
  if (static_cast<long>(coarse_depths.size()) != R * n_coarse ||
      coarse_weights.size() != coarse_depths.size())
    throw std::invalid_argument("sample_importance: shape mismatch");
  RaySamples s;
  s.n_rays = R;
  s.n_samples = n_coarse + n_fine;
  s.depths.resize(R * s.n_samples);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  long n_bins = n_coarse - 1;
  std::vector<double> cdf(n_bins + 1);
  for (long r = 0; r < R; ++r) {
    const double* d = coarse_depths.data() + r * n_coarse;
    const double* w = coarse_weights.data() + r * n_coarse;
    cdf[0] = 0.0;
    for (long i = 0; i < n_bins; ++i) {
      if (w[i] < 0) throw std::invalid_argument("sample_importance: negative weight");
      cdf[i + 1] = cdf[i] + w[i];
    }
    double total = cdf[n_bins];
    double* out = s.depths.data() + r * s.n_samples;
    std::copy_n(d, n_coarse, out);
    for (long j = 0; j < n_fine; ++j) {
      double depth;
      if (total <= 0.0) {
        depth = d[0] + uni(rng) * (d[n_coarse - 1] - d[0]);
      } else {
        double u = uni(rng) * total;
        long bin = static_cast<long>(std::upper_bound(cdf.begin(), cdf.end() - 1, u) -
                                     cdf.begin()) -
                   1;
        bin = std::clamp(bin, 0L, n_bins - 1);
        double frac = w[bin] > 0 ? (u - cdf[bin]) / w[bin] : 0.5;
        depth = d[bin] + frac * (d[bin + 1] - d[bin]);
      }
      out[n_coarse + j] = depth;
    }
    std::sort(out, out + s.n_samples);
  }
  fill_points_and_deltas(rays, s);
  return s;
}

void project(const std::vector<Eigen::Vector3d>& points, const Pose& pose,
             const Intrinsics& intr, std::vector<Eigen::Vector2d>& pixels,
             std::vector<bool>& valid) {
  pixels.resize(points.size());
  valid.resize(points.size());
  Eigen::Matrix3d r_inv = pose.rot.transpose();
  for (size_t i = 0; i < points.size(); ++i) {
    Eigen::Vector3d pc = r_inv * (points[i] - pose.trans);
    if (pc.z() <= 0) {
      pixels[i] = Eigen::Vector2d::Zero();
      valid[i] = false;
      continue;
    }
    double u = intr.fx * pc.x() / pc.z() + intr.cx;
    double v = intr.fy * pc.y() / pc.z() + intr.cy;
    pixels[i] = Eigen::Vector2d(u, v);
    valid[i] = u >= 0 && u < intr.width && v >= 0 && v < intr.height;
  }
}

}  // namespace sl::geom
