#include <cmath>
#include <cstring>
#include <sstream>

#include "doctest.h"
#include "opo/scene.hpp"

using namespace opo;
using scene::Scene;
using scene::Vec3;

namespace {

std::string scene_text(const Scene& s) {
  const std::string path = "/tmp/opo_scene_test.txt";
  scene::save_scene(path, s);
  std::ifstream f(path);
  std::ostringstream os;
  os << f.rdbuf();
  return os.str();
}

}  // namespace

TEST_CASE("generate_scene determinism and preconditions") {
  const Scene a = scene::generate_scene(5, 7);
  const Scene b = scene::generate_scene(5, 7);
  CHECK(scene_text(a) == scene_text(b));

  CHECK_THROWS(scene::generate_scene(0, 1));
  CHECK_THROWS(scene::generate_scene(17, 1));

  const Scene c = scene::generate_scene(7, 3);
  CHECK(c.objects.size() == 7);
  for (const auto& o : c.objects) CHECK(c.bounds.contains(o.center));
}

TEST_CASE("trace_ray_gt: miss, ambient-only and quadratic-root oracle") {
  Scene s;
  s.bounds = {{-3, -3, -3}, {3, 3, 3}};
  s.background = {0.2, 0.4, 0.6};
  s.light = {{0, 5, 0}, 0.0, 1.0};  // ambient-only shading
  scene::SceneObject sphere;
  sphere.kind = scene::ShapeKind::sphere;
  sphere.center = {0, 0, 2};
  sphere.size = 0.5;
  sphere.albedo = {0.3, 0.7, 0.9};
  s.objects.push_back(sphere);

  // miss
  const Vec3 miss = scene::trace_ray_gt(s, {0, 0, -5}, {0, 1, 0});
  CHECK(miss[0] == s.background[0]);
  CHECK(miss[1] == s.background[1]);
  CHECK(miss[2] == s.background[2]);

  // head-on hit with ambient 1, intensity 0: exactly the albedo
  const Vec3 hit = scene::trace_ray_gt(s, {0, 0, -5}, {0, 0, 1});
  CHECK(hit[0] == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(hit[1] == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(hit[2] == doctest::Approx(0.9).epsilon(1e-12));

  // hit distance equals the closed-form quadratic root
  const auto h = scene::intersect(s, {0, 0, -5}, {0, 0, 1});
  REQUIRE(h.has_value());
  // |o + t d - c|^2 = r^2 along the axis: t = (5 - 0.5) hand-derived, and
  // via the abc formula as an independent check
  const double oc = -5.0 - 2.0;  // z offset
  const double bq = oc;          // d.(o-c)
  const double cq = oc * oc - 0.25;
  const double root = -bq - std::sqrt(bq * bq - cq);
  CHECK(h->t == doctest::Approx(root).epsilon(1e-14));
  CHECK(h->t == doctest::Approx(4.5).epsilon(1e-14));
}

TEST_CASE("render_gt_view basics and determinism") {
  const Scene s = scene::generate_scene(4, 11);
  const auto cams1 =
      cam::arc_rig(1, 8.0, 2.5, 120.0, 44.0, 1, 1);
  // 1x1 image pointing at the scene from far away may hit; force a miss by
  // looking away
  Scene empty = s;
  empty.objects.clear();
  const img::Image one = scene::render_gt_view(empty, cams1[0]);
  CHECK(one.width == 1);
  CHECK(one.at(0, 0, 0) == empty.background[0]);

  const auto cams = cam::arc_rig(3, 8.0, 2.5, 120.0, 44.0, 48, 48);
  const img::Image a = scene::render_gt_view(s, cams[1]);
  const img::Image b = scene::render_gt_view(s, cams[1], 2);  // threaded
  CHECK(std::memcmp(a.data.data(), b.data.data(),
                    a.data.size() * sizeof(double)) == 0);

  for (const double v : a.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}

TEST_CASE("48x48 render of the seed-7 scene matches the frozen golden hash") {
  const Scene s = scene::generate_scene(5, 7);
  const auto cams = cam::arc_rig(21, 8.0, 2.5, 120.0, 44.0, 48, 48);
  const img::Image im = scene::render_gt_view(s, cams[10]);
  // Frozen from the analytic tracer itself (see tools: scene-gen).
  CHECK(img::image_hash(im) == 0x46b1a27d7a4a0157ull);
}

TEST_CASE("perturb: purity, identities, round trip, errors") {
  const Scene s = scene::generate_scene(5, 3);
  const std::string before = scene_text(s);

  scene::Perturbation move;
  move.kind = scene::PerturbKind::move_object;
  move.object_index = 2;
  move.translation = {0, 0, 0};
  const Scene moved = scene::perturb(s, move);
  CHECK(scene_text(moved) == before);  // zero translation: unchanged
  CHECK(scene_text(s) == before);      // input untouched

  scene::Perturbation light;
  light.kind = scene::PerturbKind::scale_light;
  light.light_factor = 1.0;
  CHECK(scene_text(scene::perturb(s, light)) == before);

  scene::Perturbation add;
  add.kind = scene::PerturbKind::add_object;
  add.seed = 99;
  const Scene added = scene::perturb(s, add);
  CHECK(added.objects.size() == s.objects.size() + 1);
  scene::Perturbation rem;
  rem.kind = scene::PerturbKind::remove_object;
  rem.object_index = static_cast<int>(added.objects.size()) - 1;
  const Scene removed = scene::perturb(added, rem);
  CHECK(removed.objects.size() == s.objects.size());

  // repeated application of the same perturbation gives identical outputs
  CHECK(scene_text(scene::perturb(s, add)) == scene_text(added));

  scene::Perturbation bad;
  bad.kind = scene::PerturbKind::move_object;
  bad.object_index = 99;
  CHECK_THROWS(scene::perturb(s, bad));
  scene::Perturbation badlight;
  badlight.kind = scene::PerturbKind::scale_light;
  badlight.light_factor = 0.0;
  CHECK_THROWS(scene::perturb(s, badlight));

  // noise kinds leave the scene untouched
  scene::Perturbation fn;
  fn.kind = scene::PerturbKind::feature_noise;
  fn.sigma = 0.3;
  CHECK(scene_text(scene::perturb(s, fn)) == before);
}

TEST_CASE("scale-light scales the diffuse term exactly (unclamped, ambient 0)") {
  Scene s = scene::generate_scene(3, 5);
  s.light.ambient = 0.0;
  s.light.intensity = 0.8;  // small enough that nothing clamps

  scene::Perturbation p;
  p.kind = scene::PerturbKind::scale_light;
  p.light_factor = 1.75;
  const Scene scaled = scene::perturb(s, p);

  const auto cams = cam::arc_rig(1, 8.0, 2.5, 120.0, 44.0, 32, 32);
  const img::Image a = scene::render_gt_view(s, cams[0]);
  const img::Image c = scene::render_gt_view(scaled, cams[0]);
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    CHECK(c.data[i] == doctest::Approx(a.data[i] * 1.75).epsilon(1e-12));
  }
}

TEST_CASE("add_noise statistics and determinism") {
  std::vector<double> base(100000, 0.0);

  auto buf = base;
  scene::add_noise(buf, 0.0, 5);
  CHECK(buf == base);

  auto n1 = base;
  scene::add_noise(n1, 0.3, 5);
  auto n2 = base;
  scene::add_noise(n2, 0.3, 5);
  CHECK(n1 == n2);

  double mean = 0;
  for (const double v : n1) mean += v;
  mean /= n1.size();
  double var = 0;
  for (const double v : n1) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n1.size());
  CHECK(sd == doctest::Approx(0.3).epsilon(0.05));

  // image buffers clamp back into [0,1]
  img::Image im(16, 16);
  for (double& v : im.data) v = 0.5;
  scene::add_noise(im, 1.5, 9);
  for (const double v : im.data) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }

  CHECK_THROWS(scene::add_noise(n1, -0.1, 1));
}

TEST_CASE("scene file round trip") {
  const Scene s = scene::generate_scene(6, 21);
  scene::save_scene("/tmp/opo_scene_rt.txt", s);
  const Scene t = scene::load_scene("/tmp/opo_scene_rt.txt");
  CHECK(scene_text(s) == scene_text(t));
  CHECK_THROWS(scene::load_scene("/tmp/definitely_missing_scene.txt"));
}
