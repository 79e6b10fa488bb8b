#pragma once

#include "slotlifter/config.hpp"
#include "slotlifter/geometry.hpp"
#include "slotlifter/nn.hpp"

namespace sl {

template <typename T>
struct LiftedFeatures {
  std::vector<ad::Var<T>> per_view;   // L entries, each [P, D_f]
  std::vector<std::vector<bool>> validity;  // L x P in-frustum flags
};

// Project each 3D sample point into a source view's feature grid and read it
// back by bilinear interpolation, zero padded outside. Invalid (behind-camera
// or out-of-frustum) points read exactly zero.
template <typename T>
LiftedFeatures<T> lift_features(const geom::RaySamples& samples,
                                const std::vector<ad::Var<T>>& grids,
                                const std::vector<geom::Pose>& poses,
                                const geom::Intrinsics& intr, long grid_stride) {
  if (grids.size() != poses.size())
    throw std::invalid_argument("lift_features: grids/poses mismatch");
  long P = static_cast<long>(samples.points.size());
  long gw = intr.width / grid_stride, gh = intr.height / grid_stride;
  LiftedFeatures<T> out;
  for (size_t l = 0; l < grids.size(); ++l) {
    std::vector<Eigen::Vector2d> px;
    std::vector<bool> valid;
    geom::project(samples.points, poses[l], intr, px, valid);
    // 4-tap bilinear gather; taps outside the grid contribute zero
    std::vector<long> i00(P, -1), i01(P, -1), i10(P, -1), i11(P, -1);
    Tensor<T> w00({P}), w01({P}), w10({P}), w11({P});
    for (long p = 0; p < P; ++p) {
      if (!valid[p]) continue;
      double gu = px[p].x() / grid_stride - 0.5;
      double gv = px[p].y() / grid_stride - 0.5;
      long x0 = static_cast<long>(std::floor(gu)), y0 = static_cast<long>(std::floor(gv));
      double fx = gu - x0, fy = gv - y0;
      auto cell = [&](long y, long x) -> long {
        return (x >= 0 && x < gw && y >= 0 && y < gh) ? y * gw + x : -1;
      };
      i00[p] = cell(y0, x0);
      i01[p] = cell(y0, x0 + 1);
      i10[p] = cell(y0 + 1, x0);
      i11[p] = cell(y0 + 1, x0 + 1);
      w00[p] = static_cast<T>((1 - fx) * (1 - fy));
      w01[p] = static_cast<T>(fx * (1 - fy));
      w10[p] = static_cast<T>((1 - fx) * fy);
      w11[p] = static_cast<T>(fx * fy);
    }
    const auto& g = grids[l];
    auto f = ad::add(ad::add(ad::scale_rows(ad::gather_rows(g, std::move(i00)), std::move(w00)),
                             ad::scale_rows(ad::gather_rows(g, std::move(i01)), std::move(w01))),
                     ad::add(ad::scale_rows(ad::gather_rows(g, std::move(i10)), std::move(w10)),
                             ad::scale_rows(ad::gather_rows(g, std::move(i11)), std::move(w11))));
    out.per_view.push_back(f);
    out.validity.push_back(std::move(valid));
  }
  return out;
}

// Multi-view pooling: MLP over [mean, variance] across views; single-view
// input drops the variance term entirely.
template <typename T>
struct MultiViewFusion {
  long n_views;
  nn::Mlp<T> mlp;

  MultiViewFusion(nn::ParamStore<T>& ps, const ModelConfig& cfg)
      : n_views(cfg.n_views),
        mlp(ps, "fuse.mlp", cfg.n_views > 1 ? 2 * cfg.feat_dim : cfg.feat_dim,
            cfg.fuse_hidden, cfg.dec_dim) {}

  ad::Var<T> operator()(const LiftedFeatures<T>& lifted) const {
    long L = static_cast<long>(lifted.per_view.size());
    if (L < 1) throw std::invalid_argument("fuse_multiview: need L >= 1");
    if (L == 1) return mlp(lifted.per_view[0]);
    auto sum = lifted.per_view[0];
    for (long l = 1; l < L; ++l) sum = ad::add(sum, lifted.per_view[l]);
    auto mean = ad::scale(sum, T(1) / static_cast<T>(L));
    ad::Var<T> var;
    for (long l = 0; l < L; ++l) {
      auto d = ad::sub(lifted.per_view[l], mean);
      auto sq = ad::mul(d, d);
      var = l == 0 ? sq : ad::add(var, sq);
    }
    var = ad::scale(var, T(1) / static_cast<T>(L));  // population variance
    return mlp(ad::concat_cols(mean, var));
  }
};

// Fourier features with frequencies 2^0..2^(F-1) (sin and cos) per
// coordinate, raw coordinate included: 3*(2F+1) values per 3-vector.
template <typename T>
Tensor<T> fourier_features(const std::vector<Eigen::Vector3d>& vecs, long n_freqs) {
  long P = static_cast<long>(vecs.size());
  long D = 3 * (2 * n_freqs + 1);
  Tensor<T> out({P, D});
  for (long p = 0; p < P; ++p) {
    long o = p * D;
    for (int c = 0; c < 3; ++c) out[o + c] = static_cast<T>(vecs[p][c]);
    o += 3;
    for (long f = 0; f < n_freqs; ++f) {
      double s = std::pow(2.0, static_cast<double>(f));
      for (int c = 0; c < 3; ++c) {
        out[o++] = static_cast<T>(std::sin(s * vecs[p][c]));
        out[o++] = static_cast<T>(std::cos(s * vecs[p][c]));
      }
    }
  }
  return out;
}

// E_p = MLP(concat(PosEmb(point), PosEmb(direction))).
template <typename T>
struct PositionalEmbedding {
  long n_freqs;
  nn::Mlp<T> mlp;

  PositionalEmbedding(nn::ParamStore<T>& ps, const ModelConfig& cfg)
      : n_freqs(cfg.n_freqs),
        mlp(ps, "posembed.mlp", 2 * 3 * (2 * cfg.n_freqs + 1), cfg.dec_dim, cfg.dec_dim) {}

  // points: P entries; dirs: one unit vector per ray, broadcast over samples.
  ad::Var<T> operator()(const std::vector<Eigen::Vector3d>& points,
                        const std::vector<Eigen::Vector3d>& dirs, long n_samples) const {
    long P = static_cast<long>(points.size());
    std::vector<Eigen::Vector3d> dir_per_point(P);
    for (long p = 0; p < P; ++p) dir_per_point[p] = dirs[p / n_samples];
    auto fp = ad::constant(fourier_features<T>(points, n_freqs));
    auto fd = ad::constant(fourier_features<T>(dir_per_point, n_freqs));
    return mlp(ad::concat_cols(fp, fd));
  }
};

}  // namespace sl
