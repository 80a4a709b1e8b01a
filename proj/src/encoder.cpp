#include "opo/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace opo::enc {
namespace {

using ad::Tensor;

int reflect(int i, int n) {
  if (i < 0) return -i;
  if (i >= n) return 2 * n - 2 - i;
  return i;
}

// floor split with the upper boundary folded into the last cell so that a
// coordinate of exactly dim-1 still has full bilinear support
void cell_of(double x, int dim, int& i0, double& frac) {
  i0 = static_cast<int>(std::floor(x));
  frac = x - i0;
  if (i0 == dim - 1) {
    i0 = dim - 2;
    frac = 1.0;
  }
}

Tensor tile_mask(const std::vector<double>& per_row, int cols) {
  const int rows = static_cast<int>(per_row.size());
  std::vector<double> data(static_cast<std::size_t>(rows) * cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) data[static_cast<std::size_t>(r) * cols + c] = per_row[r];
  return ad::constant({rows, cols}, std::move(data));
}

Tensor dense_layer(const Tensor& x, const Tensor& w, const Tensor& b) {
  return ad::add(ad::matmul(x, w), ad::broadcast_rows(b, x.shape()[0]));
}

}  // namespace

bool VolumeMapping::grid_coords(const std::array<double, 3>& world,
                                std::array<double, 3>& out) const {
  const auto pc = ref.to_camera(world);
  if (!(pc[2] > 0.0)) return false;
  const double u = ref.fx * pc[0] / pc[2] + ref.cx;
  const double v = ref.fy * pc[1] / pc[2] + ref.cy;
  out[0] = u / ref.width * gx - 0.5;
  out[1] = v / ref.height * gy - 0.5;
  out[2] = (pc[2] - near) / (far - near) * gz - 0.5;
  return true;
}

ad::Tensor im2col3x3(const img::Image& im) {
  if (im.width < 3 || im.height < 3)
    throw std::invalid_argument("patch extraction needs at least 3x3 images");
  const int w = im.width, h = im.height;
  std::vector<double> data(static_cast<std::size_t>(w) * h * 27);
  std::size_t o = 0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int ky = -1; ky <= 1; ++ky) {
        for (int kx = -1; kx <= 1; ++kx) {
          const int sy = reflect(y + ky, h);
          const int sx = reflect(x + kx, w);
          for (int c = 0; c < 3; ++c) data[o++] = im.at(sx, sy, c);
        }
      }
    }
  }
  return ad::constant({w * h, 27}, std::move(data));
}

ad::Tensor extract_2d_features(const model::Model& m, const ad::Tensor& patches) {
  const Tensor hidden = ad::relu(dense_layer(patches, m.t_w0, m.t_b0));
  return dense_layer(hidden, m.t_w1, m.t_b1);
}

ad::Tensor extract_2d_features(const model::Model& m, const img::Image& im) {
  return extract_2d_features(m, im2col3x3(im));
}

std::shared_ptr<const ad::LinearTaps> warp_taps(const cam::Mat3& h, int src_w,
                                                int src_h, int gx, int gy,
                                                std::vector<std::uint8_t>* valid) {
  auto taps = std::make_shared<ad::LinearTaps>();
  taps->in_rows = src_w * src_h;
  taps->out_rows = gx * gy;
  taps->offsets.assign(1, 0);
  if (valid) valid->assign(static_cast<std::size_t>(gx) * gy, 0);
  for (int iy = 0; iy < gy; ++iy) {
    for (int ix = 0; ix < gx; ++ix) {
      // grid cells live on the reference pixel lattice
      const double u = (ix + 0.5) * static_cast<double>(src_w) / gx;
      const double v = (iy + 0.5) * static_cast<double>(src_h) / gy;
      const auto s = cam::apply_homography(h, u, v);
      const double px = s[0] - 0.5;
      const double py = s[1] - 0.5;
      if (px >= 0.0 && px <= src_w - 1 && py >= 0.0 && py <= src_h - 1) {
        int x0, y0;
        double fx, fy;
        cell_of(px, src_w, x0, fx);
        cell_of(py, src_h, y0, fy);
        const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy);
        const double w01 = (1 - fx) * fy, w11 = fx * fy;
        taps->rows.insert(taps->rows.end(),
                          {y0 * src_w + x0, y0 * src_w + x0 + 1,
                           (y0 + 1) * src_w + x0, (y0 + 1) * src_w + x0 + 1});
        taps->weights.insert(taps->weights.end(), {w00, w10, w01, w11});
        if (valid) (*valid)[static_cast<std::size_t>(iy) * gx + ix] = 1;
      }
      taps->offsets.push_back(static_cast<std::int32_t>(taps->rows.size()));
    }
  }
  return taps;
}

ad::Tensor warp_features(const ad::Tensor& features, const cam::Mat3& h,
                         int src_w, int src_h, int gx, int gy,
                         std::vector<std::uint8_t>* valid) {
  if (features.shape().size() != 2 || features.shape()[0] != src_w * src_h) {
    throw std::invalid_argument("warp_features: feature rows do not match view size");
  }
  return ad::gather_linear(features, warp_taps(h, src_w, src_h, gx, gy, valid));
}

ad::Tensor cost_volume(const std::vector<ad::Tensor>& warped,
                       const std::vector<std::vector<std::uint8_t>>& valid) {
  const int k = static_cast<int>(warped.size());
  if (k < 2) throw std::invalid_argument("cost_volume needs at least 2 views");
  if (valid.size() != warped.size())
    throw std::invalid_argument("cost_volume: validity count mismatch");
  const int rows = warped[0].shape()[0];
  const int cols = warped[0].shape()[1];

  std::vector<double> counts(rows, 0.0);
  for (int v = 0; v < k; ++v) {
    if (warped[v].shape() != warped[0].shape())
      throw std::invalid_argument("cost_volume: warped shape mismatch");
    if (static_cast<int>(valid[v].size()) != rows)
      throw std::invalid_argument("cost_volume: validity size mismatch");
    for (int r = 0; r < rows; ++r) counts[r] += valid[v][r] ? 1.0 : 0.0;
  }
  std::vector<double> inv(rows, 0.0);
  for (int r = 0; r < rows; ++r) inv[r] = counts[r] >= 2.0 ? 1.0 / counts[r] : 0.0;
  const Tensor inv_t = tile_mask(inv, cols);

  std::vector<Tensor> masks(k);
  for (int v = 0; v < k; ++v) {
    std::vector<double> mv(rows);
    for (int r = 0; r < rows; ++r) mv[r] = valid[v][r] ? 1.0 : 0.0;
    masks[v] = tile_mask(mv, cols);
  }

  Tensor sum1 = ad::hadamard(warped[0], masks[0]);
  for (int v = 1; v < k; ++v)
    sum1 = ad::add(sum1, ad::hadamard(warped[v], masks[v]));
  const Tensor mean = ad::hadamard(sum1, inv_t);

  Tensor sum2 = ad::hadamard(ad::square(ad::sub(warped[0], mean)), masks[0]);
  for (int v = 1; v < k; ++v)
    sum2 = ad::add(sum2, ad::hadamard(ad::square(ad::sub(warped[v], mean)), masks[v]));
  return ad::hadamard(sum2, inv_t);
}

EncoderCache build_encoder_cache(const cfg::Config& config,
                                 const std::vector<img::Image>& support,
                                 const std::vector<cam::Camera>& cameras,
                                 double near, double far) {
  if (support.empty() || support.size() != cameras.size())
    throw std::invalid_argument("encoder cache: need one camera per support image");
  const int w = support[0].width, h = support[0].height;
  for (const auto& im : support) {
    if (im.width != w || im.height != h)
      throw std::invalid_argument("encoder cache: mismatched image sizes");
  }

  EncoderCache cache;
  cache.views = static_cast<int>(support.size());
  cache.map.ref = cameras[0];
  cache.map.near = near;
  cache.map.far = far;
  cache.map.gx = config.grid_x;
  cache.map.gy = config.grid_y;
  cache.map.gz = config.grid_z;

  for (const auto& im : support) cache.patches.push_back(im2col3x3(im));

  const int grid = config.grid_x * config.grid_y;
  cache.taps.resize(cache.views);
  cache.masks.resize(config.grid_z);
  std::vector<std::vector<std::vector<std::uint8_t>>> valid(
      config.grid_z, std::vector<std::vector<std::uint8_t>>(cache.views));
  for (int v = 0; v < cache.views; ++v) cache.taps[v].resize(config.grid_z);

  for (int z = 0; z < config.grid_z; ++z) {
    const double depth = near + (z + 0.5) * (far - near) / config.grid_z;
    for (int v = 0; v < cache.views; ++v) {
      const cam::Mat3 hm = cam::homography(cameras[v], cameras[0], depth);
      cache.taps[v][z] = warp_taps(hm, w, h, config.grid_x, config.grid_y,
                                   &valid[z][v]);
    }
  }

  for (int z = 0; z < config.grid_z; ++z) {
    std::vector<double> counts(grid, 0.0);
    cache.masks[z].resize(cache.views);
    for (int v = 0; v < cache.views; ++v) {
      std::vector<double> mv(grid);
      for (int r = 0; r < grid; ++r) {
        mv[r] = valid[z][v][r] ? 1.0 : 0.0;
        counts[r] += mv[r];
      }
      cache.masks[z][v] = tile_mask(mv, config.feature_width);
    }
    std::vector<double> inv(grid, 0.0);
    for (int r = 0; r < grid; ++r)
      inv[r] = counts[r] >= 2.0 ? 1.0 / counts[r] : 0.0;
    cache.inv_counts.push_back(tile_mask(inv, config.feature_width));
  }
  return cache;
}

SceneVolumes encode_scene(const model::Model& m, const EncoderCache& cache) {
  const cfg::Config& cfg = m.config;
  const int C = cfg.feature_width;
  const int L = cfg.target_layers();

  std::vector<Tensor> feats;
  feats.reserve(cache.views);
  for (int v = 0; v < cache.views; ++v)
    feats.push_back(extract_2d_features(m, cache.patches[v]));

  std::vector<Tensor> planes;
  planes.reserve(cfg.grid_z);
  for (int z = 0; z < cfg.grid_z; ++z) {
    Tensor sum1, sum2;
    std::vector<Tensor> warped(cache.views);
    for (int v = 0; v < cache.views; ++v) {
      warped[v] = ad::gather_linear(feats[v], cache.taps[v][z]);
      const Tensor masked = ad::hadamard(warped[v], cache.masks[z][v]);
      sum1 = v == 0 ? masked : ad::add(sum1, masked);
    }
    const Tensor mean = ad::hadamard(sum1, cache.inv_counts[z]);
    for (int v = 0; v < cache.views; ++v) {
      const Tensor dev = ad::hadamard(ad::square(ad::sub(warped[v], mean)),
                                      cache.masks[z][v]);
      sum2 = v == 0 ? dev : ad::add(sum2, dev);
    }
    planes.push_back(ad::hadamard(sum2, cache.inv_counts[z]));
  }
  const Tensor cost = planes.size() == 1 ? planes[0] : ad::concat(planes, 0);

  const int rows = cache.map.rows();
  const Tensor hidden = ad::relu(dense_layer(cost, m.b_w0, m.b_b0));
  const Tensor out = dense_layer(hidden, m.b_w1, m.b_b1);

  SceneVolumes vol;
  vol.map = cache.map;
  const Tensor f_raw = ad::slice(out, 1, 0, C);
  vol.a = ad::slice(out, 1, C, L);
  vol.f = ad::gather_linear(f_raw, smoothing_taps(cache.map.gx, cache.map.gy,
                                                  cache.map.gz));
  (void)rows;
  return vol;
}

SceneVolumes encode_scene(const model::Model& m,
                          const std::vector<img::Image>& support,
                          const std::vector<cam::Camera>& cameras, double near,
                          double far) {
  return encode_scene(m, build_encoder_cache(m.config, support, cameras, near, far));
}

InterpResult interpolate(const ad::Tensor& volume, const VolumeMapping& map,
                         const std::vector<std::array<double, 3>>& points) {
  if (volume.shape().size() != 2 || volume.shape()[0] != map.rows())
    throw std::invalid_argument("interpolate: volume rows do not match grid");
  auto taps = std::make_shared<ad::LinearTaps>();
  taps->in_rows = map.rows();
  taps->out_rows = static_cast<int>(points.size());
  taps->offsets.assign(1, 0);
  InterpResult res;
  res.inside.assign(points.size(), 0);

  const auto row_of = [&map](int ix, int iy, int iz) {
    return (iz * map.gy + iy) * map.gx + ix;
  };

  for (std::size_t p = 0; p < points.size(); ++p) {
    std::array<double, 3> g;
    const bool front = map.grid_coords(points[p], g);
    const bool inside = front && g[0] >= 0.0 && g[0] <= map.gx - 1 &&
                        g[1] >= 0.0 && g[1] <= map.gy - 1 && g[2] >= 0.0 &&
                        g[2] <= map.gz - 1;
    if (inside) {
      res.inside[p] = 1;
      int x0, y0, z0;
      double fx, fy, fz;
      cell_of(g[0], map.gx, x0, fx);
      cell_of(g[1], map.gy, y0, fy);
      cell_of(g[2], map.gz, z0, fz);
      for (int dz = 0; dz < 2; ++dz) {
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const double w = (dx ? fx : 1 - fx) * (dy ? fy : 1 - fy) *
                             (dz ? fz : 1 - fz);
            taps->rows.push_back(row_of(x0 + dx, y0 + dy, z0 + dz));
            taps->weights.push_back(w);
          }
        }
      }
    }
    taps->offsets.push_back(static_cast<std::int32_t>(taps->rows.size()));
  }
  res.values = ad::gather_linear(volume, taps);
  return res;
}

std::shared_ptr<const ad::LinearTaps> smoothing_taps(int gx, int gy, int gz) {
  auto taps = std::make_shared<ad::LinearTaps>();
  const int rows = gx * gy * gz;
  taps->in_rows = rows;
  taps->out_rows = rows;
  taps->offsets.assign(1, 0);
  const auto row_of = [&](int ix, int iy, int iz) {
    return (iz * gy + iy) * gx + ix;
  };
  for (int iz = 0; iz < gz; ++iz) {
    for (int iy = 0; iy < gy; ++iy) {
      for (int ix = 0; ix < gx; ++ix) {
        std::vector<std::int32_t> nb = {row_of(ix, iy, iz)};
        if (ix > 0) nb.push_back(row_of(ix - 1, iy, iz));
        if (ix < gx - 1) nb.push_back(row_of(ix + 1, iy, iz));
        if (iy > 0) nb.push_back(row_of(ix, iy - 1, iz));
        if (iy < gy - 1) nb.push_back(row_of(ix, iy + 1, iz));
        if (iz > 0) nb.push_back(row_of(ix, iy, iz - 1));
        if (iz < gz - 1) nb.push_back(row_of(ix, iy, iz + 1));
        const double w = 1.0 / nb.size();
        for (const std::int32_t r : nb) {
          taps->rows.push_back(r);
          taps->weights.push_back(w);
        }
        taps->offsets.push_back(static_cast<std::int32_t>(taps->rows.size()));
      }
    }
  }
  return taps;
}

}  // namespace opo::enc
