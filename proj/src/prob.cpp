#include "opo/prob.hpp"

#include <stdexcept>

namespace opo::prob {
namespace {

using ad::Tensor;

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  return ad::add(ad::matmul(x, w), ad::broadcast_rows(b, x.shape()[0]));
}

}  // namespace

ad::Tensor invariant_head(const model::Model& m, const ad::Tensor& f) {
  const Tensor h = ad::relu(dense(f, m.inv_w0, m.inv_b0));
  return dense(h, m.inv_w1, m.inv_b1);
}

std::pair<ad::Tensor, ad::Tensor> posterior(const model::Model& m,
                                            const ad::Tensor& f) {
  const Tensor mu = dense(f, m.mu_w, m.mu_b);
  const Tensor sigma = ad::exp(dense(f, m.ls_w, m.ls_b));
  return {mu, sigma};
}

ad::Tensor sample_variance(const ad::Tensor& mu, const ad::Tensor& sigma,
                           const ad::Tensor& eps) {
  return ad::add(mu, ad::hadamard(sigma, ad::detach(eps)));
}

ad::Tensor kl_loss(const ad::Tensor& mu, const ad::Tensor& sigma) {
  for (const double s : sigma.value()) {
    if (!(s > 0.0))
      throw std::invalid_argument("kl_loss: sigma must be positive");
  }
  const int b = mu.shape()[0];
  // mu^2 + sigma^2 - 1 - ln sigma^2, summed, halved, averaged over points
  const Tensor term =
      ad::sub(ad::add(ad::square(mu), ad::square(sigma)),
              ad::add(ad::ones(mu.shape()), ad::scalar_mul(ad::log(sigma), 2.0)));
  return ad::scalar_mul(ad::sum(term), 0.5 / static_cast<double>(b));
}

ad::Tensor rec_loss(const model::Model& m, const ad::Tensor& f,
                    const ad::Tensor& fused) {
  if (f.shape() != fused.shape())
    throw std::invalid_argument("rec_loss: shape mismatch");
  const int b = f.shape()[0];
  const Tensor ef = dense(f, m.enc_w, m.enc_b);
  const Tensor df = dense(fused, m.dec_w, m.dec_b);
  return ad::scalar_mul(ad::sum(ad::square(ad::sub(ef, df))),
                        1.0 / static_cast<double>(b));
}

ad::Tensor fuse_point(const ad::Tensor& f, const ad::Tensor& f_inv,
                      const ad::Tensor& f_var, double alpha) {
  if (alpha < 0.0) throw std::invalid_argument("fuse_point: alpha must be >= 0");
  return ad::add(f, ad::scalar_mul(ad::add(f_inv, f_var), alpha));
}

ad::Tensor adaptiveness(const model::Model& m, const ad::Tensor& a,
                        const ad::Tensor& fused) {
  if (a.shape()[1] != m.config.target_layers())
    throw std::invalid_argument("adaptiveness: factor width must equal L");
  const Tensor proj = dense(fused, m.proj_w, m.proj_b);
  const Tensor cat = ad::concat({a, proj}, 1);
  return ad::sigmoid(dense(cat, m.fus_w, m.fus_b));
}

ad::Tensor adaptiveness_direct(const model::Model& m, const ad::Tensor& fused) {
  return ad::sigmoid(dense(fused, m.dreg_w, m.dreg_b));
}

}  // namespace opo::prob
