#include "slotlifter/toy_scene.hpp"

#include <limits>

namespace sl::toy {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double intersect_sphere(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                        const Eigen::Vector3d& c, double r) {
  Eigen::Vector3d oc = o - c;
  double b = oc.dot(d);
  double disc = b * b - (oc.squaredNorm() - r * r);
  if (disc < 0) return kInf;
  double s = std::sqrt(disc);
  double t = -b - s;
  if (t > 1e-9) return t;
  t = -b + s;
  return t > 1e-9 ? t : kInf;
}

double intersect_box(const Eigen::Vector3d& o, const Eigen::Vector3d& d,
                     const Eigen::Vector3d& c, const Eigen::Vector3d& h, int* axis) {
  double tmin = -kInf, tmax = kInf;
  int enter_axis = -1;
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < 1e-12) {
      if (std::abs(o[a] - c[a]) > h[a]) return kInf;
      continue;
    }
    double t0 = (c[a] - h[a] - o[a]) / d[a];
    double t1 = (c[a] + h[a] - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    if (t0 > tmin) {
      tmin = t0;
      enter_axis = a;
    }
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return kInf;
  }
  if (tmin <= 1e-9) return kInf;  // origins inside the box don't occur here
  if (axis) *axis = enter_axis;
  return tmin;
}

Eigen::Vector3d shade(const Eigen::Vector3d& albedo, const Eigen::Vector3d& normal) {
  static const Eigen::Vector3d light = Eigen::Vector3d(-0.4, 1.0, -0.6).normalized();
  double diff = std::max(0.0, normal.dot(light));
  return (albedo * (0.35 + 0.65 * diff)).cwiseMin(1.0);
}

}  // namespace

double hit_distance(const Scene& scene, const Eigen::Vector3d& o,
                    const Eigen::Vector3d& d, int* label) {
  double best = kInf;
  int best_label = -1;

  if (std::abs(d.y()) > 1e-12) {
    double t = -o.y() / d.y();
    if (t > 1e-9) {
      Eigen::Vector3d p = o + t * d;
      if (std::abs(p.x()) <= scene.ground_half && std::abs(p.z()) <= scene.ground_half) {
        best = t;
        best_label = 0;
      }
    }
  }
  for (size_t i = 0; i < scene.objects.size(); ++i) {
    const auto& obj = scene.objects[i];
    double t;
    if (obj.kind == Object::Sphere) {
      t = intersect_sphere(o, d, obj.center, obj.radius);
    } else {
      t = intersect_box(o, d, obj.center, obj.half, nullptr);
    }
    if (t < best) {
      best = t;
      best_label = static_cast<int>(i) + 1;
    }
  }
  if (label) *label = best == kInf ? -1 : best_label;
  return best;
}

Scene random_scene(long min_objects, long max_objects, std::mt19937_64& rng) {
  static const Eigen::Vector3d palette[] = {
      {0.85, 0.15, 0.15}, {0.15, 0.65, 0.15}, {0.15, 0.25, 0.85},
      {0.9, 0.75, 0.1},   {0.75, 0.15, 0.75}, {0.1, 0.7, 0.7},
  };
  std::uniform_int_distribution<long> count(min_objects, max_objects);
  std::uniform_real_distribution<double> uni(0.0, 1.0);
  Scene scene;
  long n = count(rng);
  // shuffled palette keeps colors distinct within a scene
  std::vector<int> colors{0, 1, 2, 3, 4, 5};
  std::shuffle(colors.begin(), colors.end(), rng);
  for (long i = 0; i < n; ++i) {
    Object obj;
    obj.kind = uni(rng) < 0.5 ? Object::Sphere : Object::Box;
    // rejection-sample centers to keep objects separated
    for (int attempt = 0; attempt < 64; ++attempt) {
      double x = (uni(rng) * 2 - 1) * 2.0;
      double z = (uni(rng) * 2 - 1) * 2.0;
      bool ok = true;
      for (const auto& other : scene.objects)
        if ((Eigen::Vector2d(x, z) -
             Eigen::Vector2d(other.center.x(), other.center.z())).norm() < 2.3)
          ok = false;
      if (!ok) continue;
      obj.center.x() = x;
      obj.center.z() = z;
      break;
    }
    double size = 0.55 + uni(rng) * 0.3;
    if (obj.kind == Object::Sphere) {
      obj.radius = size;
      obj.center.y() = size;
    } else {
      obj.half = Eigen::Vector3d(size, size * (0.8 + 0.4 * uni(rng)), size);
      obj.center.y() = obj.half.y();
    }
    obj.albedo = palette[colors[i % 6]];
    scene.objects.push_back(obj);
  }
  return scene;
}

geom::Pose ring_pose(double angle, double radius, double height,
                     const Eigen::Vector3d& target) {
  geom::Pose pose;
  pose.trans = target + Eigen::Vector3d(radius * std::cos(angle), height,
                                        radius * std::sin(angle));
  Eigen::Vector3d zc = (target - pose.trans).normalized();
  Eigen::Vector3d up = Eigen::Vector3d::UnitY();
  Eigen::Vector3d xc = zc.cross(up);
  if (xc.norm() < 1e-9) xc = Eigen::Vector3d::UnitX();
  xc.normalize();
  Eigen::Vector3d yc = zc.cross(xc);
  pose.rot.col(0) = xc;
  pose.rot.col(1) = yc;
  pose.rot.col(2) = zc;
  return pose;
}

RenderedView render(const Scene& scene, const geom::Pose& pose,
                    const geom::Intrinsics& intr) {
  RenderedView out;
  out.width = intr.width;
  out.height = intr.height;
  out.rgb.assign(size_t(intr.width) * intr.height * 3, 0.0f);
  out.labels.assign(size_t(intr.width) * intr.height, 0);
  out.depth.assign(size_t(intr.width) * intr.height, kInf);

  std::vector<std::pair<double, double>> pixels;
  pixels.reserve(out.labels.size());
  for (long r = 0; r < intr.height; ++r)
    for (long c = 0; c < intr.width; ++c) pixels.emplace_back(double(r), double(c));
  auto rays = geom::generate_rays(pose, intr, pixels);

  for (long i = 0; i < rays.size(); ++i) {
    int label;
    double t = hit_distance(scene, rays.origins[i], rays.dirs[i], &label);
    if (label < 0) continue;  // sky stays black, label 0
    Eigen::Vector3d p = rays.origins[i] + t * rays.dirs[i];
    Eigen::Vector3d albedo, normal;
    if (label == 0) {
      albedo = scene.ground_albedo;
      normal = Eigen::Vector3d::UnitY();
    } else {
      const auto& obj = scene.objects[label - 1];
      albedo = obj.albedo;
      if (obj.kind == Object::Sphere) {
        normal = (p - obj.center).normalized();
      } else {
        // face normal from the dominant relative coordinate
        Eigen::Vector3d rel = (p - obj.center).cwiseQuotient(obj.half);
        int axis;
        rel.cwiseAbs().maxCoeff(&axis);
        normal = Eigen::Vector3d::Zero();
        normal[axis] = rel[axis] > 0 ? 1.0 : -1.0;
      }
    }
    Eigen::Vector3d c = shade(albedo, normal);
    for (int ch = 0; ch < 3; ++ch) out.rgb[i * 3 + ch] = static_cast<float>(c[ch]);
    out.labels[i] = label;
    out.depth[i] = t;
  }
  return out;
}

}  // namespace sl::toy
