#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "opo/rng.hpp"

namespace opo::cam {

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<double, 9>;  // row-major

// Pinhole camera with world-to-camera extrinsics. The camera looks down +z
// with x right and y down in image coordinates.
struct Camera {
  double fx = 0, fy = 0, cx = 0, cy = 0;
  Mat3 rot{};   // world-to-camera rotation
  Vec3 trans{};  // world-to-camera translation
  int width = 0, height = 0;

  Vec3 center() const;             // camera origin in world space
  Vec3 to_camera(const Vec3& w) const;
  Vec3 axis() const;               // optical axis in world space
};

struct Ray {
  Vec3 origin{};
  Vec3 dir{};  // unit
  double near = 0, far = 0;
};

// Orthonormal look-at constructor; `up` is a world-space hint.
Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
               double fy, int width, int height);

// Ray through the center of pixel (u, v). Rejects out-of-range pixels.
Ray ray_for_pixel(const Camera& c, int u, int v, double near, double far);

// N strictly increasing depths; bin midpoints when stratified == false,
// otherwise one uniform draw per bin from the stream.
std::vector<double> sample_depths(double near, double far, int n,
                                  bool stratified, rng::Stream& stream);
std::vector<double> sample_depths(double near, double far, int n,
                                  bool stratified, std::uint64_t seed);

// Plane-induced homography mapping homogeneous reference pixels onto the
// support view `k` through the fronto-parallel plane at depth z in the
// reference frame. Row-major 3x3.
Mat3 homography(const Camera& k, const Camera& ref, double z);

// p' = H [u, v, 1]^T, dehomogenized.
std::array<double, 2> apply_homography(const Mat3& h, double u, double v);

// Cameras on a circular arc in the x-z plane at the given height, all
// looking at `target`.
std::vector<Camera> arc_rig(int count, double radius, double height,
                            double arc_degrees, double focal, int width,
                            int height_px, const Vec3& target = {0, 0, 0});

struct Rig {
  std::vector<Camera> cameras;
  double near = 0, far = 0;
};

void save_rig(const std::string& path, const Rig& rig);
Rig load_rig(const std::string& path);

}  // namespace opo::cam
