#include "opo/pcd.hpp"

#include <cmath>
#include <stdexcept>

namespace opo::pcd {
namespace {

using ad::Tensor;

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  return ad::add(ad::matmul(x, w), ad::broadcast_rows(b, x.shape()[0]));
}

const model::TargetLayer& layer_of(const model::Model& m, int l) {
  if (l < 0 || l >= static_cast<int>(m.layers.size()))
    throw std::invalid_argument("target layer index " + std::to_string(l) +
                                " out of range");
  return m.layers[l];
}

}  // namespace

ad::Tensor pool_scene(const ad::Tensor& f) {
  for (const double v : f.value()) {
    if (!std::isfinite(v))
      throw std::invalid_argument("pool_scene: non-finite feature volume");
  }
  return ad::reshape(ad::mean_axis(f, 0), {1, f.shape()[1]});
}

ad::Tensor decode_core(const model::TargetLayer& tl, const ad::Tensor& pooled,
                       bool mask_path, int rank) {
  const Tensor& w0 = mask_path ? tl.dm_w0 : tl.dw_w0;
  const Tensor& b0 = mask_path ? tl.dm_b0 : tl.dw_b0;
  const Tensor& w1 = mask_path ? tl.dm_w1 : tl.dw_w1;
  const Tensor& b1 = mask_path ? tl.dm_b1 : tl.dw_b1;
  const Tensor& w2 = mask_path ? tl.dm_w2 : tl.dw_w2;
  const Tensor& b2 = mask_path ? tl.dm_b2 : tl.dw_b2;
  const Tensor h0 = ad::relu(dense(pooled, w0, b0));
  const Tensor h1 = ad::relu(dense(h0, w1, b1));
  return ad::reshape(dense(h1, w2, b2), {rank, rank});
}

ad::Tensor decode_soft_weights(const model::Model& m, int l,
                               const ad::Tensor& pooled) {
  const auto& tl = layer_of(m, l);
  const Tensor core = decode_core(tl, pooled, false, m.config.core_rank);
  const Tensor up = ad::matmul(ad::matmul(tl.p_in, core), tl.p_out);
  return ad::hadamard(up, tl.e);
}

ad::Tensor decode_mask_raw(const model::Model& m, int l,
                           const ad::Tensor& pooled) {
  const auto& tl = layer_of(m, l);
  const Tensor core = decode_core(tl, pooled, true, m.config.core_rank);
  return ad::matmul(ad::matmul(tl.p_in, core), tl.p_out);
}

ad::Tensor decode_mask(const model::Model& m, int l, const ad::Tensor& pooled,
                       const DecodeOpts& opts) {
  const auto& tl = layer_of(m, l);
  if (opts.mask_override.defined()) return opts.mask_override;
  if (opts.zero_mask) {
    return ad::zeros({m.config.model_width, m.config.model_width});
  }
  const Tensor raw = decode_mask_raw(m, l, pooled);
  if (opts.soft_mask) return ad::sigmoid(ad::sub(raw, tl.theta));
  return ad::step_quantize(raw, tl.theta, !opts.freeze_quantizer);
}

ad::Tensor candidate_params(const model::Model& m, int l,
                            const ad::Tensor& pooled, const DecodeOpts& opts) {
  const auto& tl = layer_of(m, l);
  const Tensor wd = decode_soft_weights(m, l, pooled);
  const Tensor mask = decode_mask(m, l, pooled, opts);
  const Tensor inv = ad::sub(ad::ones(mask.shape()), mask);
  return ad::add(ad::hadamard(inv, wd), ad::hadamard(mask, tl.z));
}

}  // namespace opo::pcd
