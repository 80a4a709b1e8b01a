#pragma once

#include <memory>
#include <vector>

#include "opo/camera.hpp"
#include "opo/image.hpp"
#include "opo/model.hpp"
#include "opo/tensor.hpp"

namespace opo::enc {

// Reference-frustum grid: cells are centered on a (gx, gy) sub-sampling of
// the reference image plane and gz depth planes spaced linearly in [near,
// far]. Row index is (iz * gy + iy) * gx + ix.
struct VolumeMapping {
  cam::Camera ref;
  double near = 0, far = 0;
  int gx = 0, gy = 0, gz = 0;

  int rows() const { return gx * gy * gz; }
  // Continuous grid coordinates of a world point; false when the point has
  // non-positive depth in the reference camera.
  bool grid_coords(const std::array<double, 3>& world,
                   std::array<double, 3>& out) const;
};

// Paired feature/adaptiveness volumes over the same grid.
struct SceneVolumes {
  ad::Tensor f;  // [rows, feature_width]
  ad::Tensor a;  // [rows, L]
  VolumeMapping map;
};

// Constant structure shared by every encode over a fixed rig + image set:
// patch matrices, homography warp taps, validity masks and variance
// normalizers. Rebuilding it is only needed when support images change.
struct EncoderCache {
  int views = 0;
  std::vector<ad::Tensor> patches;  // per view, [H*W, 27]
  // taps[k][z] samples view k's feature rows onto the grid plane z
  std::vector<std::vector<std::shared_ptr<const ad::LinearTaps>>> taps;
  // per plane z: mask [grid, C] (1 where that view lands in frame) and the
  // variance normalizer [grid, C] (1/n for n >= 2 valid views, else 0)
  std::vector<std::vector<ad::Tensor>> masks;
  std::vector<ad::Tensor> inv_counts;
  VolumeMapping map;
};

// Reflect-padded 3x3 RGB neighborhoods, one row per pixel.
ad::Tensor im2col3x3(const img::Image& im);

// Shared per-pixel patch network over an [H*W, 27] patch matrix.
ad::Tensor extract_2d_features(const model::Model& m, const ad::Tensor& patches);
ad::Tensor extract_2d_features(const model::Model& m, const img::Image& im);

// Bilinear warp taps for one homography; `valid` marks grid cells whose
// source sample lies fully inside the view.
std::shared_ptr<const ad::LinearTaps> warp_taps(const cam::Mat3& h, int src_w,
                                                int src_h, int gx, int gy,
                                                std::vector<std::uint8_t>* valid);

// Bilinear resample of per-pixel features through a homography.
ad::Tensor warp_features(const ad::Tensor& features, const cam::Mat3& h,
                         int src_w, int src_h, int gx, int gy,
                         std::vector<std::uint8_t>* valid = nullptr);

// Per-cell population variance across >= 2 valid views; masked cells with
// fewer than 2 valid views are zero.
ad::Tensor cost_volume(const std::vector<ad::Tensor>& warped,
                       const std::vector<std::vector<std::uint8_t>>& valid);

EncoderCache build_encoder_cache(const cfg::Config& config,
                                 const std::vector<img::Image>& support,
                                 const std::vector<cam::Camera>& cameras,
                                 double near, double far);

// Full geometry encoder: patch features, homography warps, cross-view
// variance, per-voxel net, neighbor smoothing on the feature channels, then
// the split into the paired volumes.
SceneVolumes encode_scene(const model::Model& m, const EncoderCache& cache);

// Convenience overload building the cache on the fly.
SceneVolumes encode_scene(const model::Model& m,
                          const std::vector<img::Image>& support,
                          const std::vector<cam::Camera>& cameras, double near,
                          double far);

struct InterpResult {
  ad::Tensor values;                 // [B, channels]
  std::vector<std::uint8_t> inside;  // per point
};

// Trilinear interpolation of a gridded volume at world points; outside the
// grid the value is zero and the flag cleared. Differentiable w.r.t. the
// volume (the taps are constant).
InterpResult interpolate(const ad::Tensor& volume, const VolumeMapping& map,
                         const std::vector<std::array<double, 3>>& points);

// 6-neighbor averaging taps (cell + available neighbors, equal weights).
std::shared_ptr<const ad::LinearTaps> smoothing_taps(int gx, int gy, int gz);

}  // namespace opo::enc
