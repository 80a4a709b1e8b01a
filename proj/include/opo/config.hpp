#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace opo::cfg {

// Flat, field-named run configuration. Parsed from "key value" lines;
// `dump` emits every field with its current value so ablation trials diff
// cleanly against the defaults.
struct Config {
  // model dimensions
  int feature_width = 16;   // channels of the scene feature volume
  int model_width = 16;     // renderer width; target layers are [width x width]
  int latent_width = 8;     // shared latent for the reconstruction loss
  int core_rank = 8;        // down-sized decoder output is rank x rank
  int decoder_hidden = 32;  // hidden width of the candidate decoders
  int patch_hidden = 16;    // hidden width of the per-pixel patch net
  int voxel_hidden = 16;    // hidden width of the per-voxel net
  int grid_x = 32, grid_y = 32, grid_z = 8;
  int pe_octaves_pos = 4;
  int pe_octaves_dir = 2;
  double init_code_std = 0.02;  // layer codes, thresholds, modulation
  double init_bias_std = 0.02;

  // training
  int ray_batch = 64;
  int samples_per_ray = 16;
  double learning_rate = 5e-4;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  // alpha weights the non-residual terms of the fused point feature and
  // gamma the reconstruction loss. (One figure caption in the source
  // material swaps the two assignments; 0.3/1.0 is the stated default.)
  double alpha = 0.3;
  double gamma = 1.0;
  double diversity_weight = 1e-5;
  int iterations = 2000;
  std::uint64_t seed = 1;
  int log_every = 25;

  // scene and rig generation
  int scene_objects = 5;
  int image_size = 48;
  int rig_cameras = 21;
  double rig_radius = 8.0;
  double rig_height = 2.5;
  double rig_arc_degrees = 120.0;
  double rig_focal = 44.0;
  double near = 3.0;
  double far = 14.0;
  std::vector<int> train_views = {0, 5, 10, 15, 20};
  int validation_view = 8;
  std::vector<int> bench_views = {2, 8, 14};

  // ablation switches (exactly one is flipped per trial)
  bool ab_no_adaptiveness = false;    // trial 1
  bool ab_no_probabilistic = false;   // trial 2
  bool ab_direct_regression = false;  // trials 3/4 pathway
  bool ab_ones_adaptiveness = false;  // trial 5
  bool ab_zero_mask = false;          // trial 6
  bool ab_soft_mask = false;          // trial 7
  bool ab_no_residual = false;        // trial 9
  bool ab_no_invariance = false;      // trial 10

  // benchmark protocol knobs
  int bench_steps = 10;
  double move_sigma = 0.5;
  double light_factor_min = 0.4;
  double light_factor_max = 1.6;
  double noise_sigma_feature = 0.3;
  // the image-noise magnitude is reported under two readings of its scale
  double noise_sigma_image_a = 1.5 / 255.0;
  double noise_sigma_image_b = 0.15;

  int target_layers() const { return 4; }  // Q, K, V, feed-forward
};

std::string dump(const Config& c);
Config parse_text(const std::string& text, const std::string& origin = "<inline>");
Config parse_file(const std::string& path);
void write_file(const std::string& path, const Config& c);

// FNV-1a hash of the canonical dump, as fixed-width hex.
std::string digest(const Config& c);

}  // namespace opo::cfg
