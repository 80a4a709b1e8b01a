#include <cmath>
#include <cstdio>

#include "doctest.h"
#include "opo/camera.hpp"

using namespace opo;
using cam::Camera;
using cam::Vec3;

namespace {

double dot3(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

}  // namespace

TEST_CASE("ray_for_pixel: optical axis, adjacent-pixel angle, origin") {
  // odd image size puts one pixel center exactly on the principal point
  const Camera c = cam::look_at({0, 0, -5}, {0, 0, 1}, {0, 1, 0}, 40, 40, 49, 49);
  const cam::Ray r = cam::ray_for_pixel(c, 24, 24, 1.0, 10.0);
  CHECK(r.dir[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.dir[1] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.dir[2] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(r.origin[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(r.origin[2] == doctest::Approx(-5.0).epsilon(1e-12));

  // adjacent pixels are about 1/fx radians apart
  const cam::Ray r2 = cam::ray_for_pixel(c, 25, 24, 1.0, 10.0);
  const double angle = std::acos(dot3(r.dir, r2.dir));
  CHECK(angle == doctest::Approx(1.0 / 40.0).epsilon(2e-3));

  // identity extrinsics: origin at the world origin
  Camera ident;
  ident.fx = ident.fy = 40;
  ident.cx = ident.cy = 24.5;
  ident.width = ident.height = 49;
  ident.rot = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  ident.trans = {0, 0, 0};
  const cam::Ray r3 = cam::ray_for_pixel(ident, 3, 7, 1.0, 10.0);
  CHECK(r3.origin[0] == 0.0);
  CHECK(r3.origin[1] == 0.0);
  CHECK(r3.origin[2] == 0.0);

  CHECK_THROWS(cam::ray_for_pixel(c, -1, 0, 1.0, 10.0));
  CHECK_THROWS(cam::ray_for_pixel(c, 0, 49, 1.0, 10.0));
  CHECK_THROWS(cam::ray_for_pixel(c, 0, 0, 10.0, 1.0));
}

TEST_CASE("all pixel rays look forward") {
  const auto cams = cam::arc_rig(5, 8.0, 2.5, 120.0, 44.0, 32, 32);
  for (const Camera& c : cams) {
    const Vec3 axis = c.axis();
    for (int v = 0; v < c.height; ++v) {
      for (int u = 0; u < c.width; ++u) {
        const cam::Ray r = cam::ray_for_pixel(c, u, v, 1.0, 10.0);
        CHECK(dot3(r.dir, axis) > 0.0);
      }
    }
  }
}

TEST_CASE("arc rig rotations are orthonormal") {
  const auto cams = cam::arc_rig(21, 8.0, 2.5, 120.0, 44.0, 48, 48);
  CHECK(cams.size() == 21);
  for (const Camera& c : cams) {
    // R R^T = I within 1e-9
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) {
        double v = 0;
        for (int k = 0; k < 3; ++k) v += c.rot[i * 3 + k] * c.rot[j * 3 + k];
        CHECK(v == doctest::Approx(i == j ? 1.0 : 0.0).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("sample_depths: midpoints, determinism, bins") {
  const auto mid = cam::sample_depths(0.0, 1.0, 4, false, std::uint64_t{0});
  CHECK(mid.size() == 4);
  CHECK(mid[0] == doctest::Approx(0.125).epsilon(1e-15));
  CHECK(mid[1] == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(mid[2] == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(mid[3] == doctest::Approx(0.875).epsilon(1e-15));

  const auto s1 = cam::sample_depths(2.0, 6.0, 8, true, std::uint64_t{42});
  const auto s2 = cam::sample_depths(2.0, 6.0, 8, true, std::uint64_t{42});
  CHECK(s1 == s2);
  for (std::size_t i = 0; i + 1 < s1.size(); ++i) CHECK(s1[i] < s1[i + 1]);
  const double step = 4.0 / 8;
  for (std::size_t i = 0; i < s1.size(); ++i) {
    CHECK(s1[i] >= 2.0 + i * step);
    CHECK(s1[i] <= 2.0 + (i + 1) * step);
  }

  CHECK_THROWS(cam::sample_depths(1.0, 1.0, 4, false, std::uint64_t{0}));
  CHECK_THROWS(cam::sample_depths(0.0, 1.0, 1, false, std::uint64_t{0}));
}

TEST_CASE("stratified depths: per-bin empirical means near bin centers") {
  rng::Stream s(777);
  const int n = 4;
  std::vector<double> acc(n, 0.0);
  const int draws = 10000;
  for (int d = 0; d < draws; ++d) {
    const auto t = cam::sample_depths(0.0, 1.0, n, true, s);
    for (int i = 0; i < n; ++i) acc[i] += t[i];
  }
  for (int i = 0; i < n; ++i) {
    const double center = (i + 0.5) / n;
    CHECK(acc[i] / draws == doctest::Approx(center).epsilon(0.02));
  }
}

TEST_CASE("homography: self-warp, stereo disparity, plane at infinity") {
  const auto cams = cam::arc_rig(3, 8.0, 2.5, 60.0, 44.0, 48, 48);
  const Camera& ref = cams[1];

  // self-warp: identity on pixels within 1e-9
  const cam::Mat3 hself = cam::homography(ref, ref, 5.0);
  for (const auto& px : {std::array<double, 2>{0.5, 0.5},
                         std::array<double, 2>{47.5, 3.25},
                         std::array<double, 2>{24.0, 24.0}}) {
    const auto q = cam::apply_homography(hself, px[0], px[1]);
    CHECK(q[0] == doctest::Approx(px[0]).epsilon(1e-9));
    CHECK(q[1] == doctest::Approx(px[1]).epsilon(1e-9));
  }

  // pure depth-axis translation: disparity = fx * baseline / z
  Camera a;
  a.fx = a.fy = 50;
  a.cx = a.cy = 24;
  a.width = a.height = 48;
  a.rot = {1, 0, 0, 0, 1, 0, 0, 0, 1};
  a.trans = {0, 0, 0};
  Camera b = a;
  const double baseline = 0.4;
  b.trans = {-baseline, 0, 0};  // camera center moved +x by the baseline
  const double z = 5.0;
  const cam::Mat3 hs = cam::homography(b, a, z);
  const auto shifted = cam::apply_homography(hs, 24.0, 24.0);
  CHECK(shifted[0] == doctest::Approx(24.0 - 50 * baseline / z).epsilon(1e-12));
  CHECK(shifted[1] == doctest::Approx(24.0).epsilon(1e-12));

  // z -> infinity reduces to the rotation-only homography K R K^-1
  const Camera& k = cams[2];
  const cam::Mat3 hfar = cam::homography(k, ref, 1e12);
  // rotation-only reference, built here independently
  cam::Mat3 rrel{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double v = 0;
      for (int l = 0; l < 3; ++l) v += k.rot[i * 3 + l] * ref.rot[j * 3 + l];
      rrel[i * 3 + j] = v;
    }
  const cam::Mat3 kk = {k.fx, 0, k.cx, 0, k.fy, k.cy, 0, 0, 1};
  const cam::Mat3 kri = {1 / ref.fx, 0, -ref.cx / ref.fx,
                         0, 1 / ref.fy, -ref.cy / ref.fy,
                         0, 0, 1};
  cam::Mat3 tmp{}, want{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double v = 0;
      for (int l = 0; l < 3; ++l) v += rrel[i * 3 + l] * kri[l * 3 + j];
      tmp[i * 3 + j] = v;
    }
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) {
      double v = 0;
      for (int l = 0; l < 3; ++l) v += kk[i * 3 + l] * tmp[l * 3 + j];
      want[i * 3 + j] = v;
    }
  for (int i = 0; i < 9; ++i) CHECK(hfar[i] == doctest::Approx(want[i]).epsilon(1e-6));

  CHECK_THROWS(cam::homography(k, ref, 0.0));
  Camera sing = ref;
  sing.fx = 0;
  CHECK_THROWS(cam::homography(sing, ref, 1.0));
}

TEST_CASE("rig file round trip") {
  cam::Rig rig;
  rig.cameras = cam::arc_rig(4, 7.0, 1.5, 90.0, 40.0, 32, 24);
  rig.near = 2.5;
  rig.far = 12.0;
  cam::save_rig("/tmp/opo_rig_rt.txt", rig);
  const cam::Rig r2 = cam::load_rig("/tmp/opo_rig_rt.txt");
  CHECK(r2.near == rig.near);
  CHECK(r2.far == rig.far);
  REQUIRE(r2.cameras.size() == rig.cameras.size());
  for (std::size_t i = 0; i < rig.cameras.size(); ++i) {
    CHECK(r2.cameras[i].fx == rig.cameras[i].fx);
    for (int j = 0; j < 9; ++j)
      CHECK(r2.cameras[i].rot[j] == rig.cameras[i].rot[j]);
    for (int j = 0; j < 3; ++j)
      CHECK(r2.cameras[i].trans[j] == rig.cameras[i].trans[j]);
  }
}
