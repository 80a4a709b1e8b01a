#include "opo/model.hpp"

#include <cmath>
#include <stdexcept>

#include "opo/rng.hpp"

namespace opo::model {
namespace {

// fan-in scaled Gaussian for weight matrices, zeros for biases
ad::Tensor weight(Model& m, rng::Stream& s, const std::string& name, int rows,
                  int cols, double stddev) {
  ad::Tensor t = m.tape().leaf({rows, cols}, s.normals(
                                               static_cast<std::size_t>(rows) * cols,
                                               0.0, stddev),
                             true, name);
  m.params.push_back(t);
  return t;
}

ad::Tensor fanin_weight(Model& m, rng::Stream& s, const std::string& name,
                        int rows, int cols) {
  return weight(m, s, name, rows, cols, 1.0 / std::sqrt(rows));
}

// Small random biases rather than zeros: exactly-zero pre-activations (from
// masked cost cells or out-of-grid features) would sit on the relu kink.
ad::Tensor bias(Model& m, rng::Stream& s, const std::string& name, int n,
                double stddev) {
  ad::Tensor t = m.tape().leaf({n}, s.normals(n, 0.0, stddev), true, name);
  m.params.push_back(t);
  return t;
}

}  // namespace

ad::Tensor Model::find_param(const std::string& name) const {
  for (const ad::Tensor& p : params) {
    if (p.name() == name) return p;
  }
  throw std::runtime_error("no such parameter: " + name);
}

Model init_model(const cfg::Config& config) {
  Model m;
  m.config = config;
  rng::Stream s = rng::Stream::derived(config.seed, "init");

  const int C = config.feature_width;
  const int L = config.target_layers();
  const int d = config.model_width;
  const int r = config.core_rank;
  const int h = config.decoder_hidden;

  m.t_w0 = fanin_weight(m, s, "tnet.w0", 27, config.patch_hidden);
  m.t_b0 = bias(m, s, "tnet.b0", config.patch_hidden, config.init_bias_std);
  m.t_w1 = fanin_weight(m, s, "tnet.w1", config.patch_hidden, C);
  m.t_b1 = bias(m, s, "tnet.b1", C, config.init_bias_std);

  m.b_w0 = fanin_weight(m, s, "bnet.w0", C, config.voxel_hidden);
  m.b_b0 = bias(m, s, "bnet.b0", config.voxel_hidden, config.init_bias_std);
  m.b_w1 = fanin_weight(m, s, "bnet.w1", config.voxel_hidden, C + L);
  m.b_b1 = bias(m, s, "bnet.b1", C + L, config.init_bias_std);

  const double code_std = config.init_code_std;
  const double up_std = 1.0 / std::sqrt(static_cast<double>(r));
  for (int l = 0; l < L; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    TargetLayer tl;
    tl.dw_w0 = fanin_weight(m, s, p + "dw.w0", C, h);
    tl.dw_b0 = bias(m, s, p + "dw.b0", h, config.init_bias_std);
    tl.dw_w1 = fanin_weight(m, s, p + "dw.w1", h, h);
    tl.dw_b1 = bias(m, s, p + "dw.b1", h, config.init_bias_std);
    tl.dw_w2 = fanin_weight(m, s, p + "dw.w2", h, r * r);
    tl.dw_b2 = bias(m, s, p + "dw.b2", r * r, config.init_bias_std);
    tl.dm_w0 = fanin_weight(m, s, p + "dm.w0", C, h);
    tl.dm_b0 = bias(m, s, p + "dm.b0", h, config.init_bias_std);
    tl.dm_w1 = fanin_weight(m, s, p + "dm.w1", h, h);
    tl.dm_b1 = bias(m, s, p + "dm.b1", h, config.init_bias_std);
    tl.dm_w2 = fanin_weight(m, s, p + "dm.w2", h, r * r);
    tl.dm_b2 = bias(m, s, p + "dm.b2", r * r, config.init_bias_std);
    tl.p_in = weight(m, s, p + "p_in", d, r, up_std);
    tl.p_out = weight(m, s, p + "p_out", r, d, up_std);
    tl.e = weight(m, s, p + "e", d, d, code_std);
    tl.z = weight(m, s, p + "z", d, d, code_std);
    tl.zcal = weight(m, s, p + "zcal", d, d, code_std);
    tl.theta = weight(m, s, p + "theta", d, d, code_std);
    m.layers.push_back(tl);
  }

  m.inv_w0 = fanin_weight(m, s, "prob.inv.w0", C, C);
  m.inv_b0 = bias(m, s, "prob.inv.b0", C, config.init_bias_std);
  m.inv_w1 = fanin_weight(m, s, "prob.inv.w1", C, C);
  m.inv_b1 = bias(m, s, "prob.inv.b1", C, config.init_bias_std);
  m.mu_w = fanin_weight(m, s, "prob.mu.w", C, C);
  m.mu_b = bias(m, s, "prob.mu.b", C, config.init_bias_std);
  m.ls_w = fanin_weight(m, s, "prob.logsigma.w", C, C);
  m.ls_b = bias(m, s, "prob.logsigma.b", C, config.init_bias_std);
  m.enc_w = fanin_weight(m, s, "prob.enc.w", C, config.latent_width);
  m.enc_b = bias(m, s, "prob.enc.b", config.latent_width, config.init_bias_std);
  m.dec_w = fanin_weight(m, s, "prob.dec.w", C, config.latent_width);
  m.dec_b = bias(m, s, "prob.dec.b", config.latent_width, config.init_bias_std);
  m.proj_w = fanin_weight(m, s, "prob.proj.w", C, L);
  m.proj_b = bias(m, s, "prob.proj.b", L, config.init_bias_std);
  m.fus_w = fanin_weight(m, s, "prob.fusion.w", 2 * L, L);
  m.fus_b = bias(m, s, "prob.fusion.b", L, config.init_bias_std);
  m.dreg_w = fanin_weight(m, s, "prob.dreg.w", C, L);
  m.dreg_b = bias(m, s, "prob.dreg.b", L, config.init_bias_std);

  m.emb_w = fanin_weight(m, s, "rend.embed.w", m.embed_width(), d);
  m.emb_b = bias(m, s, "rend.embed.b", d, config.init_bias_std);
  m.attn_out_w = fanin_weight(m, s, "rend.attn_out.w", d, d);
  m.attn_out_b = bias(m, s, "rend.attn_out.b", d, config.init_bias_std);
  m.rgb_w = fanin_weight(m, s, "rend.rgb.w", d, 3);
  m.rgb_b = bias(m, s, "rend.rgb.b", 3, config.init_bias_std);
  m.den_w = fanin_weight(m, s, "rend.density.w", d, 1);
  m.den_b = bias(m, s, "rend.density.b", 1, config.init_bias_std);

  return m;
}

}  // namespace opo::model
