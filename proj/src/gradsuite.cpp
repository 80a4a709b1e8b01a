#include "opo/gradsuite.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "opo/dataset.hpp"
#include "opo/pcd.hpp"
#include "opo/pipeline.hpp"
#include "opo/prob.hpp"
#include "opo/rng.hpp"
#include "opo/tensor.hpp"
#include "opo/train.hpp"

namespace opo::check {
namespace {

using ad::Tensor;

std::vector<double> random_vec(std::size_t n, std::uint64_t seed, double lo,
                               double hi) {
  rng::Stream s(seed);
  std::vector<double> v(n);
  for (auto& x : v) x = s.uniform(lo, hi);
  return v;
}

struct OpCase {
  const char* name;
  std::vector<int> shape;
  ad::ScalarFn fn;
  double lo = -2.0, hi = 2.0;
};

std::vector<OpCase> op_cases() {
  const auto taps = std::make_shared<ad::LinearTaps>();
  taps->in_rows = 4;
  taps->out_rows = 3;
  taps->offsets = {0, 2, 3, 5};
  taps->rows = {0, 2, 1, 3, 0};
  taps->weights = {0.25, 0.75, 1.0, -0.5, 0.125};

  return {
      {"matmul", {3, 4},
       [](ad::Tape&, const Tensor& x) {
         return ad::sum(ad::matmul(x, ad::constant({4, 2}, random_vec(8, 900, -2, 2))));
       }},
      {"add", {6},
       [](ad::Tape&, const Tensor& x) {
         return ad::sum(ad::add(x, ad::constant({6}, random_vec(6, 901, -2, 2))));
       }},
      {"sub", {6},
       [](ad::Tape&, const Tensor& x) {
         return ad::sum(ad::sub(ad::constant({6}, random_vec(6, 902, -2, 2)), x));
       }},
      {"hadamard", {6},
       [](ad::Tape&, const Tensor& x) {
         return ad::sum(ad::hadamard(x, ad::constant({6}, random_vec(6, 903, -2, 2))));
       }},
      {"scalar-mul", {6},
       [](ad::Tape&, const Tensor& x) { return ad::sum(ad::scalar_mul(x, 0.7)); }},
      {"sum", {2, 3},
       [](ad::Tape&, const Tensor& x) { return ad::sum(ad::square(x)); }},
      {"mean", {2, 3},
       [](ad::Tape&, const Tensor& x) { return ad::mean(ad::square(x)); }},
      {"sum-axis", {2, 3},
       [](ad::Tape&, const Tensor& x) { return ad::sum(ad::square(ad::sum_axis(x, 0))); }},
      {"mean-axis", {2, 3},
       [](ad::Tape&, const Tensor& x) { return ad::sum(ad::square(ad::mean_axis(x, 1))); }},
      {"exp", {5}, [](ad::Tape&, const Tensor& x) { return ad::sum(ad::exp(x)); }},
      {"log", {5}, [](ad::Tape&, const Tensor& x) { return ad::sum(ad::log(x)); }, 0.5, 3.0},
      {"sigmoid", {5}, [](ad::Tape&, const Tensor& x) { return ad::sum(ad::sigmoid(x)); }},
      {"relu", {5}, [](ad::Tape&, const Tensor& x) { return ad::sum(ad::relu(x)); }, 0.2, 2.0},
      {"softplus", {5}, [](ad::Tape&, const Tensor& x) { return ad::sum(ad::softplus(x)); }},
      {"square", {5}, [](ad::Tape&, const Tensor& x) { return ad::sum(ad::square(x)); }},
      {"sqrt", {5}, [](ad::Tape&, const Tensor& x) { return ad::sum(ad::sqrt(x)); }, 0.5, 3.0},
      {"softmax", {2, 4},
       [](ad::Tape&, const Tensor& x) {
         return ad::sum(ad::hadamard(ad::softmax(x, 1),
                                     ad::constant({2, 4}, random_vec(8, 904, -2, 2))));
       }},
      {"concat", {2, 3},
       [](ad::Tape&, const Tensor& x) {
         return ad::sum(ad::square(
             ad::concat({x, ad::constant({2, 2}, random_vec(4, 905, -2, 2))}, 1)));
       }},
      {"slice", {3, 4},
       [](ad::Tape&, const Tensor& x) { return ad::sum(ad::square(ad::slice(x, 1, 1, 2))); }},
      {"broadcast", {4},
       [](ad::Tape&, const Tensor& x) { return ad::sum(ad::square(ad::broadcast_rows(x, 3))); }},
      {"transpose", {3, 4},
       [](ad::Tape&, const Tensor& x) { return ad::sum(ad::square(ad::transpose(x))); }},
      {"reshape", {3, 4},
       [](ad::Tape&, const Tensor& x) { return ad::sum(ad::square(ad::reshape(x, {2, 6}))); }},
      {"rowscale", {3, 4},
       [](ad::Tape&, const Tensor& x) {
         return ad::sum(ad::rowscale(x, ad::constant({3}, random_vec(3, 906, -2, 2))));
       }},
      {"rownorm", {3, 4},
       [](ad::Tape&, const Tensor& x) { return ad::sum(ad::rownorm(x)); }, 0.5, 2.0},
      {"gather-linear", {4, 3},
       [taps](ad::Tape&, const Tensor& x) {
         return ad::sum(ad::square(ad::gather_linear(x, taps)));
       }},
      {"volume-render", {6, 3},
       [](ad::Tape&, const Tensor& x) {
         const Tensor sg = ad::constant({6, 1}, random_vec(6, 907, 0.1, 2.0));
         return ad::sum(ad::volume_render(ad::sigmoid(x), sg,
                                          {0.3, 0.3, 0.4, 0.3, 0.3, 0.4}, 2, 3,
                                          {0.2, 0.3, 0.4}));
       }},
  };
}

cfg::Config micro_config(std::uint64_t seed) {
  cfg::Config c;
  c.feature_width = 4;
  c.model_width = 4;
  c.latent_width = 2;
  c.core_rank = 2;
  c.decoder_hidden = 4;
  c.patch_hidden = 4;
  c.voxel_hidden = 4;
  c.grid_x = 4;
  c.grid_y = 4;
  c.grid_z = 2;
  c.pe_octaves_pos = 2;
  c.pe_octaves_dir = 1;
  c.init_code_std = 0.25;
  c.init_bias_std = 0.1;
  c.ray_batch = 2;
  c.samples_per_ray = 4;
  c.image_size = 8;
  c.rig_cameras = 2;
  c.rig_arc_degrees = 30.0;
  c.scene_objects = 2;
  c.train_views = {0, 1};
  c.seed = seed;
  return c;
}

}  // namespace

SuiteResult run_gradient_suite(std::uint64_t seed) {
  SuiteResult res;
  const auto report = [&res](const std::string& line, bool pass) {
    res.lines.push_back((pass ? "[ok]   " : "[FAIL] ") + line);
    res.ok = res.ok && pass;
  };

  // per-operation finite differences, 10 seeds each
  for (const OpCase& c : op_cases()) {
    std::int64_t n = 1;
    for (const int e : c.shape) n *= e;
    double worst = 0.0;
    for (std::uint64_t s = 1; s <= 10; ++s) {
      const auto x0 = random_vec(static_cast<std::size_t>(n),
                                 seed * 7919 + s * 131, c.lo, c.hi);
      worst = std::max(worst, ad::finite_difference_check(c.fn, c.shape, x0, 1e-5));
    }
    std::ostringstream os;
    os << "op " << c.name << ": max fd error " << worst;
    report(os.str(), worst < 1e-4);
  }

  // exact surrogate probes of the step quantizer
  {
    const double probes[] = {0.0, 0.2, -0.2, 0.4, -0.4, 0.7, -0.7, 1.0, -1.0, 1.5, -1.5};
    const double expect[] = {2.0, 1.2, 1.2, 0.4, 0.4, 0.4, 0.4, 0.4, 0.4, 0.0, 0.0};
    bool exact = true;
    for (int i = 0; i < 11; ++i)
      exact = exact && (ad::step_surrogate(probes[i]) == expect[i]);
    report("step quantizer surrogate exact at 11 probe points", exact);
  }

  // miniature end-to-end model: sweep every trainable tensor except the mask
  // decoder / thresholds (the binary mask is frozen during the sweep)
  {
    const cfg::Config mc = micro_config(seed);
    data::Dataset d = data::make_dataset(mc);
    model::Model m = model::init_model(mc);
    const train::TrainData td = data::train_data(d, mc);
    const enc::EncoderCache cache = enc::build_encoder_cache(
        mc, td.support, td.support_cams, td.near, td.far);

    pipe::RayBatch batch;
    std::vector<double> gt;
    for (int r = 0; r < 2; ++r) {
      const int px = 2 + 3 * r, py = 3 + r;
      batch.rays.push_back(
          cam::ray_for_pixel(td.support_cams[r], px, py, td.near, td.far));
      for (int c = 0; c < 3; ++c) gt.push_back(td.support[r].at(px, py, c));
    }
    batch.gt = gt;

    // the binary masks are pinned at their unperturbed values for the whole
    // sweep; otherwise a mask bit can flip mid-sweep and the loss jumps
    std::vector<ad::Tensor> fixed_masks;
    {
      ad::NoGradGuard ng;
      const enc::SceneVolumes vol = enc::encode_scene(m, cache);
      const ad::Tensor pooled = pcd::pool_scene(vol.f);
      for (int l = 0; l < mc.target_layers(); ++l)
        fixed_masks.push_back(pcd::decode_mask(m, l, pooled));
    }

    const auto build_loss = [&]() {
      const enc::SceneVolumes vol = enc::encode_scene(m, cache);
      pipe::ForwardOpts fo;
      fo.stratified = false;
      fo.mask_overrides = fixed_masks;
      fo.seed = mc.seed;
      fo.iteration = 0;
      const pipe::ForwardResult fr =
          pipe::forward_rays(m, vol, batch, td.background, fo);
      train::LossParts parts;
      parts.pho = train::photometric_loss(fr.pixels, ad::constant({2, 3}, batch.gt));
      parts.appr = prob::kl_loss(fr.mu, fr.sigma);
      parts.rec = prob::rec_loss(m, fr.f, fr.fused);
      rng::Stream shuffle = rng::Stream::derived(mc.seed, "fd-shuffle");
      parts.div = train::diversity_loss(fr.a_interp, 2, mc.samples_per_ray, shuffle);
      return train::total_loss(parts, mc.gamma, mc.diversity_weight);
    };

    std::vector<ad::Tensor> swept;
    for (const ad::Tensor& p : m.params) {
      const std::string& name = p.name();
      if (name.find(".dm.") != std::string::npos ||
          name.find(".theta") != std::string::npos) {
        continue;
      }
      swept.push_back(p);
    }
    const double worst = ad::finite_difference_check_params(
        m.tape(), build_loss, swept, 1e-4, -1, seed);
    std::ostringstream os;
    os << "end-to-end micro-instance (" << swept.size()
       << " tensors): max fd error " << worst;
    report(os.str(), worst < 1e-4);
  }

  return res;
}

}  // namespace opo::check
