#pragma once

#include <cstdint>

namespace sl {

// Architecture hyperparameters. Defaults follow the full-scale recipe;
// desk-scale runs shrink the sampling counts through the run config.
struct ModelConfig {
  long image_size = 64;
  long n_slots = 5;     // K object slots (one empty slot is added at decode)
  long slot_dim = 256;  // D_s
  long feat_dim = 64;   // D_f, encoder output channels
  long dec_dim = 64;    // decoder feature width
  long dec_layers = 4;
  long dec_heads = 4;
  long sa_iters = 3;
  long n_freqs = 10;  // Fourier embedding frequencies
  long fuse_hidden = 64;
  // encoder trunk channel widths (three downsampling stages)
  long enc_c1 = 32, enc_c2 = 64, enc_c3 = 96;
  long n_views = 1;  // L source views
  long n_coarse = 64;
  long n_fine = 64;
  uint64_t param_seed = 0;
};

}  // namespace sl
