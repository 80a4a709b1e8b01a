#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "opo/prob.hpp"
#include "opo/rng.hpp"

using namespace opo;
using ad::Tensor;

namespace {

cfg::Config prob_config() {
  cfg::Config c;
  c.feature_width = 5;
  c.latent_width = 3;
  c.seed = 6;
  return c;
}

Tensor random_batch(int rows, int cols, std::uint64_t seed, double lo = -1,
                    double hi = 1) {
  rng::Stream s(seed);
  std::vector<double> v(static_cast<std::size_t>(rows) * cols);
  for (double& x : v) x = s.uniform(lo, hi);
  return ad::constant({rows, cols}, v);
}

void fill(Tensor t, double v) {
  std::fill(t.raw().begin(), t.raw().end(), v);
}

}  // namespace

TEST_CASE("invariant head: determinism, zero weights, naive oracle") {
  const cfg::Config c = prob_config();
  model::Model m = model::init_model(c);
  const Tensor f = random_batch(4, c.feature_width, 31);

  const Tensor a = prob::invariant_head(m, f);
  const Tensor b = prob::invariant_head(m, f);
  for (int i = 0; i < a.size(); ++i) CHECK(a[i] == b[i]);

  model::Model z = model::init_model(c);
  for (const Tensor& p : {z.inv_w0, z.inv_b0, z.inv_w1, z.inv_b1}) fill(p, 0.0);
  const Tensor out = prob::invariant_head(z, f);
  for (int i = 0; i < out.size(); ++i) CHECK(out[i] == 0.0);

  // naive two-layer evaluation
  const int cw = c.feature_width;
  for (int r = 0; r < 4; ++r) {
    std::vector<double> h(cw);
    for (int j = 0; j < cw; ++j) {
      double acc = m.inv_b0[j];
      for (int i = 0; i < cw; ++i) acc += f[r * cw + i] * m.inv_w0[i * cw + j];
      h[j] = acc > 0 ? acc : 0;
    }
    for (int j = 0; j < cw; ++j) {
      double acc = m.inv_b1[j];
      for (int i = 0; i < cw; ++i) acc += h[i] * m.inv_w1[i * cw + j];
      CHECK(a[r * cw + j] == doctest::Approx(acc).epsilon(1e-12));
    }
  }
}

TEST_CASE("posterior: zero heads give the unit Gaussian; sigma positive") {
  const cfg::Config c = prob_config();
  model::Model z = model::init_model(c);
  for (const Tensor& p : {z.mu_w, z.mu_b, z.ls_w, z.ls_b}) fill(p, 0.0);
  const Tensor f = random_batch(3, c.feature_width, 32);
  const auto [mu, sigma] = prob::posterior(z, f);
  for (int i = 0; i < mu.size(); ++i) {
    CHECK(mu[i] == 0.0);
    CHECK(sigma[i] == 1.0);
  }

  model::Model m = model::init_model(c);
  const Tensor g = random_batch(16, c.feature_width, 33, -5, 5);
  const auto [mu2, sigma2] = prob::posterior(m, g);
  for (int i = 0; i < sigma2.size(); ++i) CHECK(sigma2[i] > 0.0);

  // oracle: linear head then exp
  const int cw = c.feature_width;
  for (int r = 0; r < 16; ++r) {
    for (int j = 0; j < cw; ++j) {
      double accm = m.mu_b[j], accs = m.ls_b[j];
      for (int i = 0; i < cw; ++i) {
        accm += g[r * cw + i] * m.mu_w[i * cw + j];
        accs += g[r * cw + i] * m.ls_w[i * cw + j];
      }
      CHECK(mu2[r * cw + j] == doctest::Approx(accm).epsilon(1e-12));
      CHECK(sigma2[r * cw + j] == doctest::Approx(std::exp(accs)).epsilon(1e-12));
    }
  }
}

TEST_CASE("sample_variance: mean sample, Monte-Carlo stats, determinism") {
  // eps = 0 reduces to the mean
  {
    const Tensor mu = random_batch(5, 3, 41);
    const Tensor sg = random_batch(5, 3, 42, 0.1, 2.0);
    const Tensor eps = ad::zeros({5, 3});
    const Tensor v = prob::sample_variance(mu, sg, eps);
    for (int i = 0; i < v.size(); ++i) CHECK(v[i] == mu[i]);
  }
  // 1e5 draws at mu=1, sigma=2
  {
    const int n = 100000;
    const Tensor mu = ad::constant({n, 1}, std::vector<double>(n, 1.0));
    const Tensor sg = ad::constant({n, 1}, std::vector<double>(n, 2.0));
    rng::Stream s(43);
    const Tensor eps = ad::constant({n, 1}, s.normals(n));
    const Tensor v = prob::sample_variance(mu, sg, eps);
    double mean = 0;
    for (int i = 0; i < n; ++i) mean += v[i];
    mean /= n;
    double var = 0;
    for (int i = 0; i < n; ++i) var += (v[i] - mean) * (v[i] - mean);
    const double sd = std::sqrt(var / n);
    CHECK(mean == doctest::Approx(1.0).epsilon(0.02));
    CHECK(sd == doctest::Approx(2.0).epsilon(0.02));
  }
  // fixed seed twice: identical
  {
    rng::Stream a = rng::Stream::derived(7, "eps", 3, 1);
    rng::Stream b = rng::Stream::derived(7, "eps", 3, 1);
    CHECK(a.normals(64) == b.normals(64));
  }
}

TEST_CASE("kl_loss: matched prior, closed form, non-negativity") {
  {
    const Tensor mu = ad::zeros({4, 3});
    const Tensor sg = ad::ones({4, 3});
    CHECK(prob::kl_loss(mu, sg).item() == 0.0);
  }
  {
    // mu=1, sigma=1, D=1, B=1: KL = (mu^2 + sigma^2 - 1 - ln sigma^2)/2 = 0.5
    const Tensor mu = ad::constant({1, 1}, {1.0});
    const Tensor sg = ad::constant({1, 1}, {1.0});
    CHECK(prob::kl_loss(mu, sg).item() == doctest::Approx(0.5).epsilon(1e-15));
  }
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Tensor mu = random_batch(6, 4, seed * 3, -2, 2);
    const Tensor sg = random_batch(6, 4, seed * 3 + 1, 0.2, 3.0);
    CHECK(prob::kl_loss(mu, sg).item() >= -1e-12);
  }
  // zero iff the posterior matches the prior (within 1e-10)
  {
    const Tensor mu = ad::constant({1, 2}, {1e-3, 0.0});
    const Tensor sg = ad::ones({1, 2});
    CHECK(prob::kl_loss(mu, sg).item() > 1e-10);
  }
  CHECK_THROWS(prob::kl_loss(ad::zeros({1, 1}), ad::constant({1, 1}, {0.0})));
}

TEST_CASE("rec_loss: zero maps, identical latents, loop oracle") {
  const cfg::Config c = prob_config();
  {
    model::Model z = model::init_model(c);
    for (const Tensor& p : {z.enc_w, z.enc_b, z.dec_w, z.dec_b}) fill(p, 0.0);
    const Tensor f = random_batch(4, c.feature_width, 51);
    const Tensor g = random_batch(4, c.feature_width, 52);
    CHECK(prob::rec_loss(z, f, g).item() == 0.0);
  }
  {
    // identical maps and identical inputs: latents agree exactly
    model::Model m = model::init_model(c);
    m.dec_w.raw() = m.enc_w.raw();
    m.dec_b.raw() = m.enc_b.raw();
    const Tensor f = random_batch(4, c.feature_width, 53);
    CHECK(prob::rec_loss(m, f, f).item() == 0.0);
  }
  {
    model::Model m = model::init_model(c);
    const Tensor f = random_batch(4, c.feature_width, 54);
    const Tensor g = random_batch(4, c.feature_width, 55);
    const double got = prob::rec_loss(m, f, g).item();
    const int cw = c.feature_width, lw = c.latent_width;
    double want = 0;
    for (int r = 0; r < 4; ++r) {
      for (int j = 0; j < lw; ++j) {
        double ef = m.enc_b[j], df = m.dec_b[j];
        for (int i = 0; i < cw; ++i) {
          ef += f[r * cw + i] * m.enc_w[i * lw + j];
          df += g[r * cw + i] * m.dec_w[i * lw + j];
        }
        want += (ef - df) * (ef - df);
      }
    }
    want /= 4;
    CHECK(got == doctest::Approx(want).epsilon(1e-12));
  }
}

TEST_CASE("fuse_point: residual-only limits and arithmetic") {
  const Tensor f = random_batch(3, 4, 61);
  const Tensor zero = ad::zeros({3, 4});
  {
    const Tensor out = prob::fuse_point(f, random_batch(3, 4, 62),
                                        random_batch(3, 4, 63), 0.0);
    for (int i = 0; i < out.size(); ++i) CHECK(out[i] == f[i]);
  }
  {
    const Tensor out = prob::fuse_point(f, zero, zero, 0.7);
    for (int i = 0; i < out.size(); ++i) CHECK(out[i] == f[i]);
  }
  {
    const Tensor ones = ad::ones({3, 4});
    const Tensor out = prob::fuse_point(ones, ones, ones, 0.3);
    for (int i = 0; i < out.size(); ++i)
      CHECK(out[i] == doctest::Approx(1.6).epsilon(1e-15));
  }
  CHECK_THROWS(prob::fuse_point(f, zero, zero, -0.1));
}

TEST_CASE("adaptiveness: zero head gives 0.5, range, oracle") {
  const cfg::Config c = prob_config();
  const Tensor a = random_batch(6, 4, 71);
  const Tensor f = random_batch(6, c.feature_width, 72);
  {
    model::Model z = model::init_model(c);
    for (const Tensor& p : {z.fus_w, z.fus_b}) fill(p, 0.0);
    const Tensor out = prob::adaptiveness(z, a, f);
    for (int i = 0; i < out.size(); ++i) CHECK(out[i] == 0.5);
  }
  {
    model::Model m = model::init_model(c);
    const Tensor out = prob::adaptiveness(m, a, f);
    CHECK(out.shape() == std::vector<int>{6, 4});
    for (int i = 0; i < out.size(); ++i) {
      CHECK(out[i] > 0.0);
      CHECK(out[i] < 1.0);
    }
    // oracle: projection, concatenation, linear, sigmoid
    const int cw = c.feature_width, L = 4;
    for (int r = 0; r < 6; ++r) {
      double cat[8];
      for (int j = 0; j < L; ++j) cat[j] = a[r * L + j];
      for (int j = 0; j < L; ++j) {
        double acc = m.proj_b[j];
        for (int i = 0; i < cw; ++i) acc += f[r * cw + i] * m.proj_w[i * L + j];
        cat[L + j] = acc;
      }
      for (int j = 0; j < L; ++j) {
        double acc = m.fus_b[j];
        for (int i = 0; i < 2 * L; ++i) acc += cat[i] * m.fus_w[i * L + j];
        const double want = 1.0 / (1.0 + std::exp(-acc));
        CHECK(out[r * L + j] == doctest::Approx(want).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("derivatives of the KL and reconstruction losses pass FD") {
  const cfg::Config c = prob_config();
  model::Model m = model::init_model(c);
  const Tensor f_const = random_batch(5, c.feature_width, 81);
  rng::Stream es(82);
  const Tensor eps =
      ad::constant({5, c.feature_width}, es.normals(5 * c.feature_width));

  const auto build_loss = [&]() {
    const Tensor f_inv = prob::invariant_head(m, f_const);
    const auto [mu, sigma] = prob::posterior(m, f_const);
    const Tensor f_var = prob::sample_variance(mu, sigma, eps);
    const Tensor fused = prob::fuse_point(f_const, f_inv, f_var, 0.3);
    return ad::add(prob::kl_loss(mu, sigma),
                   ad::scalar_mul(prob::rec_loss(m, f_const, fused), 1.0));
  };
  std::vector<Tensor> heads = {m.inv_w0, m.inv_b0, m.inv_w1, m.inv_b1,
                               m.mu_w,  m.mu_b,  m.ls_w,  m.ls_b,
                               m.enc_w, m.enc_b, m.dec_w, m.dec_b};
  const double worst =
      ad::finite_difference_check_params(m.tape(), build_loss, heads, 1e-5);
  CHECK(worst < 1e-4);
}
