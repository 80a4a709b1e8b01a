#include "opo/train.hpp"

#include "opo/prob.hpp"

#include <cmath>
#include <fstream>
#include <ostream>
#include <stdexcept>

namespace opo::train {
namespace {

using ad::Tensor;

std::shared_ptr<const ad::LinearTaps> permutation_taps(const std::vector<int>& perm) {
  auto taps = std::make_shared<ad::LinearTaps>();
  const int n = static_cast<int>(perm.size());
  taps->in_rows = n;
  taps->out_rows = n;
  taps->offsets.resize(n + 1);
  taps->rows.resize(n);
  taps->weights.assign(n, 1.0);
  for (int i = 0; i < n; ++i) {
    taps->offsets[i] = i;
    taps->rows[i] = perm[i];
  }
  taps->offsets[n] = n;
  return taps;
}

std::vector<int> non_identity_permutation(int n, rng::Stream& s) {
  std::vector<int> p = s.permutation(n);
  if (n > 1) {
    bool identity = true;
    while (true) {
      identity = true;
      for (int i = 0; i < n; ++i) {
        if (p[i] != i) {
          identity = false;
          break;
        }
      }
      if (!identity) break;
      p = s.permutation(n);
    }
  }
  return p;
}

double finite_or_throw(const Tensor& t, const char* name) {
  const double v = t.item();
  if (!std::isfinite(v))
    throw std::runtime_error(std::string("non-finite loss part: ") + name +
                             " = " + std::to_string(v));
  return v;
}

}  // namespace

ad::Tensor photometric_loss(const ad::Tensor& pred, const ad::Tensor& gt) {
  if (pred.shape() != gt.shape())
    throw std::invalid_argument("photometric_loss: shape mismatch");
  const int rays = pred.shape()[0];
  if (rays < 1) throw std::invalid_argument("photometric_loss: empty batch");
  return ad::scalar_mul(ad::sum(ad::square(ad::sub(pred, gt))),
                        1.0 / static_cast<double>(rays));
}

ad::Tensor diversity_loss(const ad::Tensor& a, int rays, int samples,
                          rng::Stream& shuffle) {
  if (rays < 2 || samples < 2)
    throw std::invalid_argument("diversity_loss: needs >= 2 rays and samples");
  if (a.shape()[0] != rays * samples)
    throw std::invalid_argument("diversity_loss: grid size mismatch");
  const int width = a.shape()[1];
  const Tensor grid = ad::reshape(a, {rays, samples, width});
  const Tensor mu_ray = ad::mean_axis(grid, 1);     // [rays, L]
  const Tensor mu_sample = ad::mean_axis(grid, 0);  // [samples, L]

  const auto perm_r = non_identity_permutation(rays, shuffle);
  const auto perm_s = non_identity_permutation(samples, shuffle);
  const Tensor mu_ray_sh = ad::gather_linear(mu_ray, permutation_taps(perm_r));
  const Tensor mu_sample_sh =
      ad::gather_linear(mu_sample, permutation_taps(perm_s));

  const Tensor term_r = ad::mean(ad::rownorm(ad::sub(mu_ray, mu_ray_sh)));
  const Tensor term_s = ad::mean(ad::rownorm(ad::sub(mu_sample, mu_sample_sh)));
  return ad::scalar_mul(ad::add(term_r, term_s), -1.0);
}

ad::Tensor total_loss(const LossParts& parts, double gamma,
                      double diversity_weight) {
  finite_or_throw(parts.pho, "photometric");
  finite_or_throw(parts.appr, "approximation");
  finite_or_throw(parts.rec, "reconstruction");
  finite_or_throw(parts.div, "diversity");
  Tensor total = ad::add(parts.pho, parts.appr);
  total = ad::add(total, ad::scalar_mul(parts.rec, gamma));
  return ad::add(total, ad::scalar_mul(parts.div, diversity_weight));
}

OptimState OptimState::init(std::span<const ad::Tensor> params) {
  OptimState st;
  st.m1.reserve(params.size());
  st.m2.reserve(params.size());
  for (const ad::Tensor& p : params) {
    st.m1.emplace_back(p.size(), 0.0);
    st.m2.emplace_back(p.size(), 0.0);
  }
  return st;
}

void optimizer_step(std::span<const ad::Tensor> params, OptimState& st,
                    double lr, double beta1, double beta2, double eps) {
  if (st.m1.size() != params.size())
    throw std::invalid_argument("optimizer state does not match parameters");
  st.step += 1;
  const double c1 = 1.0 - std::pow(beta1, static_cast<double>(st.step));
  const double c2 = 1.0 - std::pow(beta2, static_cast<double>(st.step));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ad::Tensor p = params[pi];
    auto& value = p.raw();
    auto& m1 = st.m1[pi];
    auto& m2 = st.m2[pi];
    const auto g = p.grad();
    for (std::size_t i = 0; i < value.size(); ++i) {
      const double gi = i < g.size() ? g[i] : 0.0;
      m1[i] = beta1 * m1[i] + (1.0 - beta1) * gi;
      m2[i] = beta2 * m2[i] + (1.0 - beta2) * gi * gi;
      const double mh = m1[i] / c1;
      const double vh = m2[i] / c2;
      value[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
}

TrainResult run_training(model::Model& m, const TrainData& data,
                         std::ostream* log) {
  const cfg::Config& cfg = m.config;
  if (data.support.size() < 2)
    throw std::invalid_argument("training needs at least 2 views");
  if (cfg.ray_batch < 2 || cfg.samples_per_ray < 2)
    throw std::invalid_argument("ray_batch and samples_per_ray must be >= 2");

  const enc::EncoderCache cache = enc::build_encoder_cache(
      cfg, data.support, data.support_cams, data.near, data.far);

  OptimState optim = OptimState::init(m.params);
  rng::Stream ray_stream = rng::Stream::derived(cfg.seed, "rays");
  rng::Stream shuffle_stream = rng::Stream::derived(cfg.seed, "shuffle");

  TrainResult result;
  std::vector<std::vector<double>> last_good;
  last_good.reserve(m.params.size());
  for (const ad::Tensor& p : m.params)
    last_good.emplace_back(p.value().begin(), p.value().end());

  const int views = static_cast<int>(data.support.size());
  const int w = data.support[0].width, h = data.support[0].height;

  for (int iter = 0; iter < cfg.iterations; ++iter) {
    m.tape().clear();
    for (ad::Tensor& p : m.params) p.zero_grad();

    pipe::RayBatch batch;
    batch.rays.reserve(cfg.ray_batch);
    batch.gt.reserve(static_cast<std::size_t>(cfg.ray_batch) * 3);
    for (int r = 0; r < cfg.ray_batch; ++r) {
      const int view = static_cast<int>(ray_stream.below(views));
      const int px = static_cast<int>(ray_stream.below(w));
      const int py = static_cast<int>(ray_stream.below(h));
      batch.rays.push_back(cam::ray_for_pixel(data.support_cams[view], px, py,
                                              data.near, data.far));
      for (int c = 0; c < 3; ++c)
        batch.gt.push_back(data.support[view].at(px, py, c));
    }

    try {
      const enc::SceneVolumes vol = enc::encode_scene(m, cache);

      pipe::ForwardOpts fo;
      fo.stratified = true;
      fo.seed = cfg.seed;
      fo.iteration = iter;
      const pipe::ForwardResult fr =
          pipe::forward_rays(m, vol, batch, data.background, fo);

      const Tensor gt = ad::constant({cfg.ray_batch, 3}, batch.gt);
      LossParts parts;
      parts.pho = photometric_loss(fr.pixels, gt);
      if (fr.prob_enabled) {
        parts.appr = prob::kl_loss(fr.mu, fr.sigma);
        parts.rec = prob::rec_loss(m, fr.f, fr.fused);
      } else {
        parts.appr = ad::scalar(0.0);
        parts.rec = ad::scalar(0.0);
      }
      if (cfg.diversity_weight != 0.0) {
        parts.div = diversity_loss(fr.a_interp, cfg.ray_batch,
                                   cfg.samples_per_ray, shuffle_stream);
      } else {
        parts.div = ad::scalar(0.0);
      }
      const Tensor total = total_loss(parts, cfg.gamma, cfg.diversity_weight);

      if (iter % cfg.log_every == 0 || iter + 1 == cfg.iterations) {
        LossRow row;
        row.iteration = iter;
        row.pho = parts.pho.item();
        row.appr = parts.appr.item();
        row.rec = parts.rec.item();
        row.div = parts.div.item();
        row.total = total.item();
        result.curve.push_back(row);
        if (log) {
          (*log) << "iter " << iter << " total " << row.total << " pho "
                 << row.pho << " appr " << row.appr << " rec " << row.rec
                 << " div " << row.div << "\n";
        }
      }

      m.tape().backward(total);
      optimizer_step(m.params, optim, cfg.learning_rate, cfg.adam_beta1,
                     cfg.adam_beta2, cfg.adam_eps);

      for (std::size_t pi = 0; pi < m.params.size(); ++pi) {
        last_good[pi].assign(m.params[pi].value().begin(),
                             m.params[pi].value().end());
      }
    } catch (const std::runtime_error& e) {
      for (std::size_t pi = 0; pi < m.params.size(); ++pi)
        m.params[pi].raw() = last_good[pi];
      result.aborted = true;
      result.abort_reason =
          "iteration " + std::to_string(iter) + ": " + e.what();
      if (log) (*log) << "aborted: " << result.abort_reason << "\n";
      break;
    }
  }
  m.tape().clear();
  return result;
}

void write_loss_csv(const std::string& path, const std::vector<LossRow>& curve) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << "iteration,pho,appr,rec,div,total\n";
  f.precision(17);
  for (const LossRow& r : curve) {
    f << r.iteration << "," << r.pho << "," << r.appr << "," << r.rec << ","
      << r.div << "," << r.total << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

}  // namespace opo::train
