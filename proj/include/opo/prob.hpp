#pragma once

#include <utility>

#include "opo/model.hpp"
#include "opo/tensor.hpp"

namespace opo::prob {

// Deterministic invariance term, a 2-layer MLP over the interpolated point
// features. [B, C] -> [B, C].
ad::Tensor invariant_head(const model::Model& m, const ad::Tensor& f);

// Variational posterior heads: mu and sigma = exp(log-sigma), both [B, C].
std::pair<ad::Tensor, ad::Tensor> posterior(const model::Model& m,
                                            const ad::Tensor& f);

// Reparameterized draw mu + sigma .* eps with a fixed noise tensor; the
// gradient flows to mu and sigma only. Inference passes eps = 0.
ad::Tensor sample_variance(const ad::Tensor& mu, const ad::Tensor& sigma,
                           const ad::Tensor& eps);

// Mean KL(q || N(0, I)) per point: (1/2B) sum(mu^2 + sigma^2 - 1 - ln sigma^2).
ad::Tensor kl_loss(const ad::Tensor& mu, const ad::Tensor& sigma);

// (1/B) sum_i || Enc(f_i) - Dec(F_i) ||^2 in the shared latent width.
ad::Tensor rec_loss(const model::Model& m, const ad::Tensor& f,
                    const ad::Tensor& fused);

// F = f + alpha * (f_inv + f_var)
ad::Tensor fuse_point(const ad::Tensor& f, const ad::Tensor& f_inv,
                      const ad::Tensor& f_var, double alpha);

// A = sigmoid(fusion([a | proj(F)])), each component in (0, 1). [B, L].
ad::Tensor adaptiveness(const model::Model& m, const ad::Tensor& a,
                        const ad::Tensor& fused);

// Trial pathway: regress the fused feature directly, bypassing the fusion
// with the interpolated factor.
ad::Tensor adaptiveness_direct(const model::Model& m, const ad::Tensor& fused);

}  // namespace opo::prob
