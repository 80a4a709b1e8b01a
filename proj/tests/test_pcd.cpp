#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "opo/pcd.hpp"
#include "opo/rng.hpp"

using namespace opo;
using ad::Tensor;

namespace {

cfg::Config pcd_config() {
  cfg::Config c;
  c.feature_width = 6;
  c.model_width = 5;
  c.core_rank = 3;
  c.decoder_hidden = 8;
  c.seed = 4;
  return c;
}

void fill(Tensor t, double v) {
  std::fill(t.raw().begin(), t.raw().end(), v);
}

Tensor random_pooled(int c, std::uint64_t seed) {
  rng::Stream s(seed);
  std::vector<double> g(c);
  for (double& v : g) v = s.uniform(-1, 1);
  return ad::constant({1, c}, g);
}

// naive three-stage decode + upscale on plain doubles
std::vector<double> naive_soft_weights(const model::Model& m, int l,
                                       const Tensor& pooled) {
  const auto& tl = m.layers[l];
  const int c = m.config.feature_width, h = m.config.decoder_hidden;
  const int r = m.config.core_rank, d = m.config.model_width;
  std::vector<double> h0(h), h1(h), core(r * r);
  for (int j = 0; j < h; ++j) {
    double acc = tl.dw_b0[j];
    for (int i = 0; i < c; ++i) acc += pooled[i] * tl.dw_w0[i * h + j];
    h0[j] = acc > 0 ? acc : 0;
  }
  for (int j = 0; j < h; ++j) {
    double acc = tl.dw_b1[j];
    for (int i = 0; i < h; ++i) acc += h0[i] * tl.dw_w1[i * h + j];
    h1[j] = acc > 0 ? acc : 0;
  }
  for (int j = 0; j < r * r; ++j) {
    double acc = tl.dw_b2[j];
    for (int i = 0; i < h; ++i) acc += h1[i] * tl.dw_w2[i * r * r + j];
    core[j] = acc;
  }
  // P_in core P_out, then the elementwise modulation
  std::vector<double> up(static_cast<std::size_t>(d) * d, 0.0);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) {
      double acc = 0;
      for (int a = 0; a < r; ++a) {
        for (int b = 0; b < r; ++b) {
          acc += tl.p_in[i * r + a] * core[a * r + b] * tl.p_out[b * d + j];
        }
      }
      up[static_cast<std::size_t>(i) * d + j] = acc * tl.e[i * d + j];
    }
  }
  return up;
}

}  // namespace

TEST_CASE("pool_scene: constants, symmetry, loop oracle") {
  {
    const Tensor f = ad::constant({10, 3}, std::vector<double>(30, 0.75));
    const Tensor g = pcd::pool_scene(f);
    CHECK(g.shape() == std::vector<int>{1, 3});
    for (int j = 0; j < 3; ++j) CHECK(g[j] == doctest::Approx(0.75).epsilon(1e-15));
  }
  {
    std::vector<double> data(12);
    for (int i = 0; i < 6; ++i) {
      data[i] = 1.5;
      data[6 + i] = -1.5;
    }
    const Tensor f = ad::constant({4, 3}, data);
    const Tensor g = pcd::pool_scene(f);
    for (int j = 0; j < 3; ++j) CHECK(g[j] == doctest::Approx(0.0).epsilon(1e-15));
  }
  {
    rng::Stream s(7);
    std::vector<double> data(32 * 16);
    for (double& v : data) v = s.uniform(-2, 2);
    const Tensor f = ad::constant({32, 16}, data);
    const Tensor g = pcd::pool_scene(f);
    for (int j = 0; j < 16; ++j) {
      double acc = 0;
      for (int r = 0; r < 32; ++r) acc += data[r * 16 + j];
      CHECK(g[j] == doctest::Approx(acc / 32).epsilon(1e-12));
    }
  }
  CHECK_THROWS(pcd::pool_scene(
      ad::constant({2, 2}, {1.0, std::nan(""), 0.0, 0.0})));
}

TEST_CASE("decode_soft_weights: zero case, modulation identity, oracle") {
  const cfg::Config c = pcd_config();
  model::Model m = model::init_model(c);

  // zero pooled input with zero biases: core 0, so W_d = 0
  {
    model::Model z = model::init_model(c);
    for (auto& tl : z.layers) {
      fill(tl.dw_b0, 0.0);
      fill(tl.dw_b1, 0.0);
      fill(tl.dw_b2, 0.0);
    }
    const Tensor g = ad::constant({1, c.feature_width},
                                  std::vector<double>(c.feature_width, 0.0));
    const Tensor wd = pcd::decode_soft_weights(z, 0, g);
    for (int i = 0; i < wd.size(); ++i) CHECK(wd[i] == 0.0);
  }

  // all-ones modulation: the pure low-rank upscale
  {
    model::Model e1 = model::init_model(c);
    fill(e1.layers[1].e, 1.0);
    const Tensor g = random_pooled(c.feature_width, 2);
    const Tensor wd = pcd::decode_soft_weights(e1, 1, g);
    auto manual = naive_soft_weights(e1, 1, g);
    for (int i = 0; i < wd.size(); ++i)
      CHECK(wd[i] == doctest::Approx(manual[i]).epsilon(1e-12));
  }

  // random instance against the naive oracle
  {
    const Tensor g = random_pooled(c.feature_width, 3);
    for (int l = 0; l < 4; ++l) {
      const Tensor wd = pcd::decode_soft_weights(m, l, g);
      const auto want = naive_soft_weights(m, l, g);
      for (int i = 0; i < wd.size(); ++i)
        CHECK(wd[i] == doctest::Approx(want[i]).epsilon(1e-12));
    }
  }

  CHECK_THROWS(pcd::decode_soft_weights(m, 7, random_pooled(c.feature_width, 4)));
  CHECK_THROWS(pcd::decode_mask(m, -1, random_pooled(c.feature_width, 4)));
}

TEST_CASE("decode_mask: saturation, tie rule, comparison oracle") {
  const cfg::Config c = pcd_config();
  model::Model m = model::init_model(c);
  const Tensor g = random_pooled(c.feature_width, 11);

  // raw far above the threshold: all ones
  {
    model::Model low = model::init_model(c);
    fill(low.layers[0].theta, -1e6);
    const Tensor mask = pcd::decode_mask(low, 0, g);
    for (int i = 0; i < mask.size(); ++i) CHECK(mask[i] == 1.0);
  }
  // raw equal to the threshold: tie quantizes to 1
  {
    model::Model tie = model::init_model(c);
    const Tensor raw = pcd::decode_mask_raw(tie, 2, g);
    std::copy(raw.value().begin(), raw.value().end(),
              tie.layers[2].theta.raw().begin());
    const Tensor mask = pcd::decode_mask(tie, 2, g);
    for (int i = 0; i < mask.size(); ++i) CHECK(mask[i] == 1.0);
  }
  // elementwise agreement with a direct comparison
  {
    const Tensor raw = pcd::decode_mask_raw(m, 1, g);
    const Tensor mask = pcd::decode_mask(m, 1, g);
    bool seen_zero = false, seen_one = false;
    for (int i = 0; i < mask.size(); ++i) {
      const double want =
          raw[i] - m.layers[1].theta[i] >= 0.0 ? 1.0 : 0.0;
      CHECK(mask[i] == want);
      seen_zero = seen_zero || mask[i] == 0.0;
      seen_one = seen_one || mask[i] == 1.0;
    }
    CHECK((seen_zero || seen_one));
  }
}

TEST_CASE("candidate_params: blend limits and elementwise selection") {
  const cfg::Config c = pcd_config();
  const Tensor g = random_pooled(c.feature_width, 13);

  // forced zero mask: candidates reduce to the decoded soft weights
  {
    model::Model m = model::init_model(c);
    pcd::DecodeOpts opts;
    opts.zero_mask = true;
    const Tensor wa = pcd::candidate_params(m, 0, g, opts);
    const Tensor wd = pcd::decode_soft_weights(m, 0, g);
    for (int i = 0; i < wa.size(); ++i) CHECK(wa[i] == wd[i]);
  }
  // all-ones mask: candidates equal the layer code exactly
  {
    model::Model m = model::init_model(c);
    fill(m.layers[3].theta, -1e6);
    const Tensor wa = pcd::candidate_params(m, 3, g);
    for (int i = 0; i < wa.size(); ++i)
      CHECK(wa[i] == m.layers[3].z[i]);
  }
  // mixed mask: every element comes from exactly one of the two sources
  {
    model::Model m = model::init_model(c);
    const Tensor wa = pcd::candidate_params(m, 2, g);
    const Tensor wd = pcd::decode_soft_weights(m, 2, g);
    const Tensor mask = pcd::decode_mask(m, 2, g);
    for (int i = 0; i < wa.size(); ++i) {
      const double want = mask[i] == 1.0 ? m.layers[2].z[i] : wd[i];
      CHECK(wa[i] == want);
    }
  }
  // soft-mask trial: strictly interior blend values
  {
    model::Model m = model::init_model(c);
    pcd::DecodeOpts opts;
    opts.soft_mask = true;
    const Tensor mask = pcd::decode_mask(m, 1, g, opts);
    for (int i = 0; i < mask.size(); ++i) {
      CHECK(mask[i] > 0.0);
      CHECK(mask[i] < 1.0);
    }
  }
}

TEST_CASE("gradients reach every candidate-decoder parameter") {
  const cfg::Config c = pcd_config();
  model::Model m = model::init_model(c);
  m.tape().clear();
  for (auto& p : m.params) p.zero_grad();

  // pooled input built from a leaf so the graph is connected
  rng::Stream s(17);
  std::vector<double> fdata(8 * c.feature_width);
  for (double& v : fdata) v = s.uniform(-1, 1);
  const Tensor f = m.tape().leaf({8, c.feature_width}, fdata, true, "f");
  const Tensor pooled = pcd::pool_scene(f);

  Tensor loss;
  for (int l = 0; l < 4; ++l) {
    const Tensor wa = pcd::candidate_params(m, l, pooled);
    loss = l == 0 ? ad::sum(ad::square(wa))
                  : ad::add(loss, ad::sum(ad::square(wa)));
  }
  m.tape().backward(loss);

  const auto grad_norm = [](const ad::Tensor& p) {
    double acc = 0;
    for (const double v : p.grad()) acc += v * v;
    return std::sqrt(acc);
  };
  for (int l = 0; l < 4; ++l) {
    const auto& tl = m.layers[l];
    for (const ad::Tensor& p : {tl.dw_w0, tl.dw_w1, tl.dw_w2, tl.dm_w0,
                                tl.dm_w1, tl.dm_w2, tl.p_in, tl.p_out, tl.e,
                                tl.z, tl.theta}) {
      CHECK(p.has_grad());
      CHECK(grad_norm(p) > 0.0);
    }
  }
  m.tape().clear();
}
