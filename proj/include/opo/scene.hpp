#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "opo/camera.hpp"
#include "opo/image.hpp"

namespace opo::scene {

using Vec3 = std::array<double, 3>;

enum class ShapeKind { sphere, box };

struct SceneObject {
  ShapeKind kind = ShapeKind::sphere;
  Vec3 center{};
  double size = 0.5;  // sphere radius or box half-extent
  Vec3 albedo{};
};

struct Light {
  Vec3 position{};
  double intensity = 0;
  double ambient = 0;
};

struct Bounds {
  Vec3 lo{};
  Vec3 hi{};
  bool contains(const Vec3& p) const {
    for (int i = 0; i < 3; ++i)
      if (p[i] < lo[i] || p[i] > hi[i]) return false;
    return true;
  }
};

// Procedural emissive-primitive world. Everything needed to re-derive a
// ground-truth render analytically.
struct Scene {
  std::vector<SceneObject> objects;
  Light light;
  Vec3 background{};
  Bounds bounds;
  std::uint64_t seed = 0;
};

enum class PerturbKind {
  move_object,
  scale_light,
  add_object,
  remove_object,
  image_noise,
  feature_noise
};

struct Perturbation {
  PerturbKind kind = PerturbKind::move_object;
  int object_index = -1;
  Vec3 translation{};
  double light_factor = 1.0;
  double sigma = 0.0;
  std::uint64_t seed = 0;
};

// Deterministic under seed; objects placed by rejection sampling (at most
// 1000 tries per object). Throws when placement fails or count is outside
// [1, 16].
Scene generate_scene(int object_count, std::uint64_t seed);

struct Hit {
  double t = 0;
  int object = -1;
  Vec3 point{};
  Vec3 normal{};
};

std::optional<Hit> intersect(const Scene& s, const Vec3& origin,
                             const Vec3& dir);

// Nearest-hit shading: albedo * (ambient + intensity * max(0, n.l)/(1+d^2)),
// clamped to [0,1]; misses return the background color.
Vec3 trace_ray_gt(const Scene& s, const Vec3& origin, const Vec3& dir);

img::Image render_gt_view(const Scene& s, const cam::Camera& camera,
                          int threads = 1);

// Pure: returns an edited copy, never touches the input. Noise kinds return
// the scene unchanged (they apply to buffers downstream).
Scene perturb(const Scene& s, const Perturbation& p);

// I.i.d. zero-mean Gaussian. Image buffers are clamped back to [0,1].
void add_noise(img::Image& im, double sigma, std::uint64_t seed);
void add_noise(std::vector<double>& buffer, double sigma, std::uint64_t seed);

void save_scene(const std::string& path, const Scene& s);
Scene load_scene(const std::string& path);

}  // namespace opo::scene
