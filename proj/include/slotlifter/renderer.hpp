#pragma once

#include "slotlifter/geometry.hpp"
#include "slotlifter/graph.hpp"

namespace sl {

template <typename T>
struct CompositeOutput {
  ad::Var<T> color;    // [R, 3]
  ad::Var<T> acc;      // [R, 1] accumulated opacity
  ad::Var<T> depth;    // [R, 1] expected depth (diagnostic)
  ad::Var<T> weights;  // [R, N] per-sample compositing weights
};

namespace detail {

// weights_i = T_i * (1 - exp(-sigma_i * delta_i)) with T_i the transmittance
// of everything in front, computed per ray.
template <typename T>
ad::Var<T> compositing_weights(const ad::Var<T>& sigma, const std::vector<double>& deltas,
                               long R, long N) {
  if (static_cast<long>(deltas.size()) != R * N)
    throw std::invalid_argument("composite: deltas size mismatch");
  for (long i = 0; i < R * N; ++i)
    if (sigma->value[i] < T(0)) throw std::invalid_argument("composite: negative sigma");
  Tensor<T> dt({R * N, 1});
  for (long i = 0; i < R * N; ++i) dt[i] = static_cast<T>(deltas[i]);
  auto sd = ad::reshape(ad::mul_const(sigma, dt), {R, N});
  auto trans = ad::exp_(ad::neg(ad::cumsum_cols_exclusive(sd)));
  auto alpha = ad::add_scalar(ad::neg(ad::exp_(ad::neg(sd))), T(1));
  return ad::mul(trans, alpha);
}

}  // namespace detail

// Discrete volume rendering: C(r) = sum_i T_i (1 - exp(-sigma_i delta_i)) c_i.
template <typename T>
CompositeOutput<T> composite(const ad::Var<T>& colors, const ad::Var<T>& sigma,
                             const geom::RaySamples& samples) {
  long R = samples.n_rays, N = samples.n_samples;
  CompositeOutput<T> out;
  out.weights = detail::compositing_weights(sigma, samples.deltas, R, N);
  auto wflat = ad::reshape(out.weights, {R * N, 1});
  out.color = ad::sum_mid(ad::reshape(ad::mul(ad::expand_cols(wflat, 3), colors), {R, N, 3}));
  out.acc = ad::sum_cols(out.weights);
  Tensor<T> d({R * N, 1});
  for (long i = 0; i < R * N; ++i) d[i] = static_cast<T>(samples.depths[i]);
  out.depth = ad::sum_cols(ad::reshape(ad::mul_const(wflat, d), {R, N}));
  return out;
}

// M(r) = sum_i T_i (1 - exp(-sigma_i delta_i)) W_p^i over the K object-slot
// columns; the empty channel (column 0) is dropped from the output.
template <typename T>
ad::Var<T> composite_masks(const ad::Var<T>& slot_weights, const ad::Var<T>& sigma,
                           const geom::RaySamples& samples) {
  long R = samples.n_rays, N = samples.n_samples;
  long K1 = slot_weights->value.last_dim();
  auto w = detail::compositing_weights(sigma, samples.deltas, R, N);
  auto wflat = ad::reshape(w, {R * N, 1});
  auto per_sample = ad::mul(ad::expand_cols(wflat, K1), slot_weights);
  auto channels = ad::sum_mid(ad::reshape(per_sample, {R, N, K1}));  // [R, K+1]
  return ad::slice_cols(channels, 1, K1 - 1);
}

}  // namespace sl
