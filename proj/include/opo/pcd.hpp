#pragma once

#include "opo/model.hpp"
#include "opo/tensor.hpp"

namespace opo::pcd {

// Pooled scene conditioning: channel-wise mean over all grid cells, [1, C].
ad::Tensor pool_scene(const ad::Tensor& f);

struct DecodeOpts {
  bool zero_mask = false;         // force M = 0 (candidates reduce to W_d)
  bool soft_mask = false;         // sigmoid(raw - theta) instead of the step
  bool freeze_quantizer = false;  // drop the surrogate (mask is detached)
  ad::Tensor mask_override;       // when defined, used verbatim as M
};

// Down-sized core (rank x rank) from the pooled feature through one of the
// two three-stage decoders of layer l.
ad::Tensor decode_core(const model::TargetLayer& tl, const ad::Tensor& pooled,
                       bool mask_path, int rank);

// W_d^l: core up-scaled to [d, d] by the layer's P_in/P_out maps, modulated
// element-wise by E^l.
ad::Tensor decode_soft_weights(const model::Model& m, int l,
                               const ad::Tensor& pooled);

// Raw (pre-quantization) mask logits on the same up-scale path, without the
// modulation matrix.
ad::Tensor decode_mask_raw(const model::Model& m, int l,
                           const ad::Tensor& pooled);

// Binary mask M^l (or its soft/forced variants under the ablation switches).
ad::Tensor decode_mask(const model::Model& m, int l, const ad::Tensor& pooled,
                       const DecodeOpts& opts = {});

// W_a^l = (J - M) .* W_d + M .* Z
ad::Tensor candidate_params(const model::Model& m, int l,
                            const ad::Tensor& pooled,
                            const DecodeOpts& opts = {});

}  // namespace opo::pcd
