#include "opo/pipeline.hpp"

#include <stdexcept>

#include "opo/pcd.hpp"
#include "opo/prob.hpp"
#include "opo/rng.hpp"
#include "opo/threads.hpp"

namespace opo::pipe {
namespace {

using ad::Tensor;

}  // namespace

ForwardResult forward_rays(const model::Model& m, const enc::SceneVolumes& vol,
                           const RayBatch& batch,
                           const std::array<double, 3>& background,
                           const ForwardOpts& opts) {
  const cfg::Config& cfg = m.config;
  const int rays = static_cast<int>(batch.rays.size());
  const int n = cfg.samples_per_ray;
  if (rays < 1) throw std::invalid_argument("forward_rays: empty batch");
  const int b = rays * n;

  // depth samples, positions, directions, segment lengths
  std::vector<std::array<double, 3>> positions(b), directions(b);
  std::vector<double> deltas(b);
  for (int r = 0; r < rays; ++r) {
    const cam::Ray& ray = batch.rays[r];
    std::vector<double> ts;
    if (opts.stratified) {
      rng::Stream ds = rng::Stream::derived(
          opts.seed, "depths", static_cast<std::uint64_t>(opts.iteration),
          static_cast<std::uint64_t>(r));
      ts = cam::sample_depths(ray.near, ray.far, n, true, ds);
    } else {
      rng::Stream unused(0);
      ts = cam::sample_depths(ray.near, ray.far, n, false, unused);
    }
    for (int i = 0; i < n; ++i) {
      const int bi = r * n + i;
      for (int a = 0; a < 3; ++a)
        positions[bi][a] = ray.origin[a] + ts[i] * ray.dir[a];
      directions[bi] = ray.dir;
      deltas[bi] = (i + 1 < n ? ts[i + 1] : ray.far) - ts[i];
    }
  }

  // point features and adaptiveness factors from the paired volumes
  const enc::InterpResult fi = enc::interpolate(vol.f, vol.map, positions);
  const enc::InterpResult ai = enc::interpolate(vol.a, vol.map, positions);

  ForwardResult res;
  res.f = fi.values;
  res.a_interp = ai.values;
  res.prob_enabled = !cfg.ab_no_probabilistic;

  // probabilistic decomposition of the point representation
  if (res.prob_enabled) {
    const Tensor f_inv = prob::invariant_head(m, res.f);
    auto [mu, sigma] = prob::posterior(m, res.f);
    Tensor eps;
    if (opts.inference) {
      eps = ad::zeros(mu.shape());
    } else {
      std::vector<double> noise(static_cast<std::size_t>(b) * cfg.feature_width);
      for (int r = 0; r < rays; ++r) {
        rng::Stream es = rng::Stream::derived(
            opts.seed, "eps", static_cast<std::uint64_t>(opts.iteration),
            static_cast<std::uint64_t>(r));
        const auto chunk = es.normals(static_cast<std::size_t>(n) * cfg.feature_width);
        std::copy(chunk.begin(), chunk.end(),
                  noise.begin() + static_cast<std::size_t>(r) * n * cfg.feature_width);
      }
      eps = ad::constant(mu.shape(), std::move(noise));
    }
    const Tensor f_var = prob::sample_variance(mu, sigma, eps);
    res.mu = mu;
    res.sigma = sigma;
    if (cfg.ab_no_residual) {
      res.fused = ad::scalar_mul(ad::add(f_inv, f_var), cfg.alpha);
    } else if (cfg.ab_no_invariance) {
      res.fused = ad::add(res.f, ad::scalar_mul(f_var, cfg.alpha));
    } else {
      res.fused = prob::fuse_point(res.f, f_inv, f_var, cfg.alpha);
    }
  } else {
    res.fused = res.f;
  }

  // per-point adaptiveness
  Tensor adapt;
  if (cfg.ab_ones_adaptiveness) {
    adapt = ad::ones({b, cfg.target_layers()});
  } else if (cfg.ab_direct_regression) {
    adapt = prob::adaptiveness_direct(m, res.fused);
  } else if (cfg.ab_no_adaptiveness) {
    adapt = prob::adaptiveness(m, ad::zeros({b, cfg.target_layers()}), res.fused);
  } else {
    adapt = prob::adaptiveness(m, res.a_interp, res.fused);
  }

  // layer-variant candidate weights
  const Tensor pooled = pcd::pool_scene(vol.f);
  std::vector<Tensor> candidates;
  candidates.reserve(cfg.target_layers());
  for (int l = 0; l < cfg.target_layers(); ++l) {
    pcd::DecodeOpts dopts;
    dopts.zero_mask = cfg.ab_zero_mask;
    dopts.soft_mask = cfg.ab_soft_mask;
    dopts.freeze_quantizer = opts.freeze_quantizer;
    if (!opts.mask_overrides.empty())
      dopts.mask_override = opts.mask_overrides[l];
    candidates.push_back(pcd::candidate_params(m, l, pooled, dopts));
  }

  // renderer input embedding
  const Tensor pe_x = render::positional_encoding(positions, cfg.pe_octaves_pos);
  const Tensor pe_d = render::positional_encoding(directions, cfg.pe_octaves_dir);
  const Tensor emb_in = ad::concat({pe_x, pe_d, res.fused}, 1);

  const render::TransformerOut to =
      render::ray_transformer(m, emb_in, candidates, adapt, rays, n);
  res.pixels = ad::volume_render(to.color, to.sigma, deltas, rays, n, background);
  return res;
}

img::Image render_view(const model::Model& m, const enc::SceneVolumes& vol,
                       const cam::Camera& query, double near, double far,
                       const std::array<double, 3>& background,
                       const RenderOpts& opts) {
  img::Image out(query.width, query.height);
  const std::int64_t total = static_cast<std::int64_t>(query.width) * query.height;
  const int chunk = std::max(1, opts.chunk);
  const std::int64_t chunks = (total + chunk - 1) / chunk;

  threads::parallel_for(chunks, opts.threads, [&](std::int64_t c0, std::int64_t c1) {
    ad::NoGradGuard ng;
    for (std::int64_t c = c0; c < c1; ++c) {
      const std::int64_t lo = c * chunk;
      const std::int64_t hi = std::min<std::int64_t>(total, lo + chunk);
      RayBatch batch;
      batch.rays.reserve(hi - lo);
      for (std::int64_t p = lo; p < hi; ++p) {
        const int x = static_cast<int>(p % query.width);
        const int y = static_cast<int>(p / query.width);
        batch.rays.push_back(cam::ray_for_pixel(query, x, y, near, far));
      }
      ForwardOpts fo;
      fo.stratified = opts.stratified;
      fo.inference = true;
      fo.seed = opts.seed;
      fo.iteration = c;  // stratified render chunks draw independent depths
      const ForwardResult fr = forward_rays(m, vol, batch, background, fo);
      for (std::int64_t p = lo; p < hi; ++p) {
        const std::int64_t r = p - lo;
        for (int ch = 0; ch < 3; ++ch)
          out.data[static_cast<std::size_t>(p) * 3 + ch] = fr.pixels[r * 3 + ch];
      }
    }
  });
  return out;
}

std::vector<img::Image> render_views(const model::Model& m,
                                     const std::vector<img::Image>& support,
                                     const std::vector<cam::Camera>& support_cams,
                                     const std::vector<cam::Camera>& queries,
                                     double near, double far,
                                     const std::array<double, 3>& background,
                                     const RenderOpts& opts) {
  ad::NoGradGuard ng;
  const enc::SceneVolumes vol = enc::encode_scene(m, support, support_cams, near, far);
  std::vector<img::Image> out;
  out.reserve(queries.size());
  for (const cam::Camera& q : queries)
    out.push_back(render_view(m, vol, q, near, far, background, opts));
  return out;
}

}  // namespace opo::pipe
