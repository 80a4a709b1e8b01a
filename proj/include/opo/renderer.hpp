#pragma once

#include <array>
#include <vector>

#include "opo/model.hpp"
#include "opo/tensor.hpp"

namespace opo::render {

// sin/cos positional encoding at octave frequencies 2^0 .. 2^(octaves-1);
// input is constant geometry, output [B, 6*octaves].
ad::Tensor positional_encoding(const std::vector<std::array<double, 3>>& v,
                               int octaves);

// Single-point personalization: W_x = (1 - a) * W_a + a * Z.
ad::Tensor personalize_layer(const ad::Tensor& wa, const ad::Tensor& zcal,
                             double a);

// Batched personalized application: y_b = ((1 - a_b) W_a + a_b Z)^T h_b,
// evaluated as two shared matrix products blended per row. Equivalent to the
// per-point loop within floating-point reassociation error.
ad::Tensor apply_personalized(const ad::Tensor& h, const ad::Tensor& wa,
                              const ad::Tensor& zcal, const ad::Tensor& a_col);

struct TransformerOut {
  ad::Tensor color;  // [B, 3] in (0,1)
  ad::Tensor sigma;  // [B, 1] >= 0
};

// Personalized ray transformer: embedding, one single-head attention block
// over each ray's samples with personalized Q/K/V, residual, personalized
// feed-forward with residual, shared radiance/density heads.
// `emb_in` is [B, embed_width], `candidates` the per-layer W_a matrices,
// `adapt` the per-point factors [B, L].
TransformerOut ray_transformer(const model::Model& m, const ad::Tensor& emb_in,
                               const std::vector<ad::Tensor>& candidates,
                               const ad::Tensor& adapt, int rays, int samples);

}  // namespace opo::render
