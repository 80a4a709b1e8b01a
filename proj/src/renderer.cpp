#include "opo/renderer.hpp"

#include <cmath>
#include <stdexcept>

namespace opo::render {
namespace {

using ad::Tensor;

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
  return ad::add(ad::matmul(x, w), ad::broadcast_rows(b, x.shape()[0]));
}

}  // namespace

ad::Tensor positional_encoding(const std::vector<std::array<double, 3>>& v,
                               int octaves) {
  const int b = static_cast<int>(v.size());
  const int width = 6 * octaves;
  std::vector<double> data(static_cast<std::size_t>(b) * width);
  for (int i = 0; i < b; ++i) {
    double* row = data.data() + static_cast<std::size_t>(i) * width;
    int o = 0;
    for (int oct = 0; oct < octaves; ++oct) {
      const double freq = std::ldexp(1.0, oct);  // 2^oct
      for (int a = 0; a < 3; ++a) {
        row[o++] = std::sin(freq * v[i][a]);
        row[o++] = std::cos(freq * v[i][a]);
      }
    }
  }
  return ad::constant({b, width}, std::move(data));
}

ad::Tensor personalize_layer(const ad::Tensor& wa, const ad::Tensor& zcal,
                             double a) {
  if (a < 0.0 || a > 1.0)
    throw std::invalid_argument("personalize_layer: factor must be in [0,1]");
  return ad::add(ad::scalar_mul(wa, 1.0 - a), ad::scalar_mul(zcal, a));
}

ad::Tensor apply_personalized(const ad::Tensor& h, const ad::Tensor& wa,
                              const ad::Tensor& zcal, const ad::Tensor& a_col) {
  if (a_col.shape()[0] != h.shape()[0])
    throw std::invalid_argument(
        "apply_personalized: one factor per point required (" +
        ad::shape_str(a_col.shape()) + " vs " + ad::shape_str(h.shape()) + ")");
  const Tensor via_wa = ad::matmul(h, wa);
  const Tensor via_z = ad::matmul(h, zcal);
  const Tensor ones = ad::ones(a_col.shape());
  return ad::add(ad::rowscale(via_wa, ad::sub(ones, a_col)),
                 ad::rowscale(via_z, a_col));
}

TransformerOut ray_transformer(const model::Model& m, const ad::Tensor& emb_in,
                               const std::vector<ad::Tensor>& candidates,
                               const ad::Tensor& adapt, int rays, int samples) {
  if (samples < 2)
    throw std::invalid_argument("ray_transformer: need at least 2 samples");
  const int b = rays * samples;
  if (emb_in.shape()[0] != b)
    throw std::invalid_argument("ray_transformer: batch size mismatch");
  if (static_cast<int>(candidates.size()) != m.config.target_layers())
    throw std::invalid_argument("ray_transformer: need one candidate per target layer");

  const Tensor h0 = dense(emb_in, m.emb_w, m.emb_b);

  const auto factor = [&](int l) { return ad::slice(adapt, 1, l, 1); };
  const Tensor q = apply_personalized(h0, candidates[0], m.layers[0].zcal, factor(0));
  const Tensor k = apply_personalized(h0, candidates[1], m.layers[1].zcal, factor(1));
  const Tensor v = apply_personalized(h0, candidates[2], m.layers[2].zcal, factor(2));

  const double scale = 1.0 / std::sqrt(static_cast<double>(m.config.model_width));
  std::vector<Tensor> per_ray;
  per_ray.reserve(rays);
  for (int r = 0; r < rays; ++r) {
    const Tensor qr = ad::slice(q, 0, r * samples, samples);
    const Tensor kr = ad::slice(k, 0, r * samples, samples);
    const Tensor vr = ad::slice(v, 0, r * samples, samples);
    const Tensor scores = ad::scalar_mul(ad::matmul(qr, ad::transpose(kr)), scale);
    per_ray.push_back(ad::matmul(ad::softmax(scores, 1), vr));
  }
  const Tensor attn = rays == 1 ? per_ray[0] : ad::concat(per_ray, 0);

  const Tensor h1 = ad::add(h0, dense(attn, m.attn_out_w, m.attn_out_b));
  const Tensor ff =
      apply_personalized(h1, candidates[3], m.layers[3].zcal, factor(3));
  const Tensor h2 = ad::add(h1, ad::relu(ff));

  TransformerOut out;
  out.color = ad::sigmoid(dense(h2, m.rgb_w, m.rgb_b));
  out.sigma = ad::softplus(dense(h2, m.den_w, m.den_b));
  return out;
}

}  // namespace opo::render
