#pragma once

#include <memory>
#include <string>
#include <vector>

#include "opo/config.hpp"
#include "opo/tensor.hpp"

namespace opo::model {

// Learned state of one personalized target layer: the two candidate
// decoders (three fully-connected stages each), the shared up-scaling maps,
// the layer codes, the quantization thresholds and the full-size modulation
// matrix.
struct TargetLayer {
  ad::Tensor dw_w0, dw_b0, dw_w1, dw_b1, dw_w2, dw_b2;
  ad::Tensor dm_w0, dm_b0, dm_w1, dm_b1, dm_w2, dm_b2;
  ad::Tensor p_in, p_out;  // [d, rank], [rank, d]
  ad::Tensor e;            // [d, d] modulation
  ad::Tensor z;            // [d, d] layer-variant code blended by the mask
  ad::Tensor zcal;         // [d, d] personalization code blended per point
  ad::Tensor theta;        // [d, d] quantization thresholds
};

// Full trainable state. Parameters are leaves on the owned tape and also
// listed in `params` in a stable registry order for the optimizer and the
// checkpoint format. The tape lives behind a stable pointer so the model can
// move without invalidating the leaves' back-references.
struct Model {
  cfg::Config config;
  std::unique_ptr<ad::Tape> tape_ptr = std::make_unique<ad::Tape>();
  std::vector<ad::Tensor> params;

  ad::Tape& tape() const { return *tape_ptr; }

  // patch feature net (3x3 RGB neighborhood -> feature_width)
  ad::Tensor t_w0, t_b0, t_w1, t_b1;
  // voxel net (feature_width -> feature_width + L)
  ad::Tensor b_w0, b_b0, b_w1, b_b1;

  std::vector<TargetLayer> layers;

  // probabilistic point heads
  ad::Tensor inv_w0, inv_b0, inv_w1, inv_b1;
  ad::Tensor mu_w, mu_b, ls_w, ls_b;
  ad::Tensor enc_w, enc_b, dec_w, dec_b;
  ad::Tensor proj_w, proj_b;  // fused feature -> L
  ad::Tensor fus_w, fus_b;    // [a | proj] -> L
  ad::Tensor dreg_w, dreg_b;  // direct-regression pathway

  // shared renderer layers
  ad::Tensor emb_w, emb_b;
  ad::Tensor attn_out_w, attn_out_b;
  ad::Tensor rgb_w, rgb_b;
  ad::Tensor den_w, den_b;

  int embed_width() const {
    return 6 * config.pe_octaves_pos + 6 * config.pe_octaves_dir +
           config.feature_width;
  }

  ad::Tensor find_param(const std::string& name) const;
};

// Fresh model with seeded initialization derived from config.seed.
Model init_model(const cfg::Config& config);

}  // namespace opo::model
