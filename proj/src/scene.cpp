#include "opo/scene.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <stdexcept>

#include "opo/threads.hpp"

namespace opo::scene {
namespace {

constexpr double kRayEps = 1e-9;

double clamp01(double v) { return v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v); }

double dot3(const Vec3& a, const Vec3& b) {
  return a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
}

Vec3 sub3(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

// nearest positive root of the ray/sphere quadratic
std::optional<double> hit_sphere(const Vec3& o, const Vec3& d, const Vec3& c,
                                 double r) {
  const Vec3 oc = sub3(o, c);
  const double b = dot3(d, oc);
  const double q = dot3(oc, oc) - r * r;
  const double disc = b * b - q;
  if (disc < 0.0) return std::nullopt;
  const double s = std::sqrt(disc);
  const double t0 = -b - s;
  if (t0 > kRayEps) return t0;
  const double t1 = -b + s;
  if (t1 > kRayEps) return t1;
  return std::nullopt;
}

// slab test for the axis-aligned box [c - h, c + h]
std::optional<double> hit_box(const Vec3& o, const Vec3& d, const Vec3& c,
                              double h) {
  double tmin = -std::numeric_limits<double>::infinity();
  double tmax = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    const double lo = c[a] - h, hi = c[a] + h;
    if (d[a] == 0.0) {
      if (o[a] < lo || o[a] > hi) return std::nullopt;
      continue;
    }
    double t0 = (lo - o[a]) / d[a];
    double t1 = (hi - o[a]) / d[a];
    if (t0 > t1) std::swap(t0, t1);
    tmin = std::max(tmin, t0);
    tmax = std::min(tmax, t1);
    if (tmin > tmax) return std::nullopt;
  }
  if (tmin > kRayEps) return tmin;
  if (tmax > kRayEps) return tmax;
  return std::nullopt;
}

Vec3 box_normal(const Vec3& p, const Vec3& c, double h) {
  // dominant axis of the offset, scaled to the half-extent
  const Vec3 q = sub3(p, c);
  int axis = 0;
  double best = 0.0;
  for (int a = 0; a < 3; ++a) {
    const double v = std::abs(q[a]) / h;
    if (v > best) {
      best = v;
      axis = a;
    }
  }
  Vec3 n{0, 0, 0};
  n[axis] = q[axis] >= 0.0 ? 1.0 : -1.0;
  return n;
}

}  // namespace

Scene generate_scene(int object_count, std::uint64_t seed) {
  if (object_count < 1 || object_count > 16) {
    throw std::invalid_argument("object count must be in [1,16], got " +
                                std::to_string(object_count));
  }
  rng::Stream s = rng::Stream::derived(seed, "scene-gen");
  Scene sc;
  sc.seed = seed;
  sc.bounds = {{-3, -3, -3}, {3, 3, 3}};
  sc.background = {s.uniform(0.05, 0.30), s.uniform(0.05, 0.30),
                   s.uniform(0.05, 0.30)};
  sc.light.position = {s.uniform(-2.0, 2.0), s.uniform(3.5, 5.5),
                       s.uniform(-2.0, 2.0)};
  sc.light.intensity = s.uniform(15.0, 35.0);
  sc.light.ambient = s.uniform(0.20, 0.45);

  for (int i = 0; i < object_count; ++i) {
    bool placed = false;
    for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
      SceneObject obj;
      obj.kind = s.uniform() < 0.6 ? ShapeKind::sphere : ShapeKind::box;
      obj.size = s.uniform(0.35, 0.8);
      const double margin = obj.size + 0.2;
      for (int a = 0; a < 3; ++a) {
        obj.center[a] =
            s.uniform(sc.bounds.lo[a] + margin, sc.bounds.hi[a] - margin);
      }
      obj.albedo = {s.uniform(0.15, 0.95), s.uniform(0.15, 0.95),
                    s.uniform(0.15, 0.95)};
      bool overlap = false;
      for (const SceneObject& other : sc.objects) {
        const Vec3 d = sub3(obj.center, other.center);
        if (std::sqrt(dot3(d, d)) < obj.size + other.size + 0.15) {
          overlap = true;
          break;
        }
      }
      if (!overlap) {
        sc.objects.push_back(obj);
        placed = true;
      }
    }
    if (!placed) {
      throw std::runtime_error("failed to place object " + std::to_string(i) +
                               " of " + std::to_string(object_count) +
                               " after 1000 tries");
    }
  }
  return sc;
}

std::optional<Hit> intersect(const Scene& s, const Vec3& origin,
                             const Vec3& dir) {
  std::optional<Hit> best;
  for (std::size_t i = 0; i < s.objects.size(); ++i) {
    const SceneObject& obj = s.objects[i];
    std::optional<double> t;
    if (obj.kind == ShapeKind::sphere) {
      t = hit_sphere(origin, dir, obj.center, obj.size);
    } else {
      t = hit_box(origin, dir, obj.center, obj.size);
    }
    if (t && (!best || *t < best->t)) {
      Hit h;
      h.t = *t;
      h.object = static_cast<int>(i);
      for (int a = 0; a < 3; ++a) h.point[a] = origin[a] + dir[a] * *t;
      if (obj.kind == ShapeKind::sphere) {
        const Vec3 q = sub3(h.point, obj.center);
        const double n = std::sqrt(dot3(q, q));
        h.normal = {q[0] / n, q[1] / n, q[2] / n};
      } else {
        h.normal = box_normal(h.point, obj.center, obj.size);
      }
      best = h;
    }
  }
  return best;
}

Vec3 trace_ray_gt(const Scene& s, const Vec3& origin, const Vec3& dir) {
  const auto hit = intersect(s, origin, dir);
  if (!hit) return s.background;
  const SceneObject& obj = s.objects[hit->object];
  const Vec3 to_light = sub3(s.light.position, hit->point);
  const double dist = std::sqrt(dot3(to_light, to_light));
  const Vec3 l = {to_light[0] / dist, to_light[1] / dist, to_light[2] / dist};
  const double lambert = std::max(0.0, dot3(hit->normal, l));
  const double shade =
      s.light.ambient + s.light.intensity * lambert / (1.0 + dist * dist);
  return {clamp01(obj.albedo[0] * shade), clamp01(obj.albedo[1] * shade),
          clamp01(obj.albedo[2] * shade)};
}

img::Image render_gt_view(const Scene& s, const cam::Camera& camera,
                          int threads) {
  img::Image im(camera.width, camera.height);
  threads::parallel_for(camera.height, threads, [&](std::int64_t y0,
                                                    std::int64_t y1) {
    for (std::int64_t y = y0; y < y1; ++y) {
      for (int x = 0; x < camera.width; ++x) {
        const cam::Ray r =
            cam::ray_for_pixel(camera, x, static_cast<int>(y), 0.1, 100.0);
        const Vec3 c = trace_ray_gt(s, r.origin, r.dir);
        for (int ch = 0; ch < 3; ++ch)
          im.at(x, static_cast<int>(y), ch) = c[ch];
      }
    }
  });
  return im;
}

Scene perturb(const Scene& s, const Perturbation& p) {
  Scene out = s;
  switch (p.kind) {
    case PerturbKind::move_object: {
      if (p.object_index < 0 ||
          p.object_index >= static_cast<int>(out.objects.size())) {
        throw std::invalid_argument("move_object: index out of range");
      }
      Vec3& c = out.objects[p.object_index].center;
      for (int a = 0; a < 3; ++a) {
        c[a] = std::clamp(c[a] + p.translation[a], out.bounds.lo[a],
                          out.bounds.hi[a]);
      }
      break;
    }
    case PerturbKind::scale_light: {
      if (!(p.light_factor > 0))
        throw std::invalid_argument("scale_light: factor must be positive");
      out.light.intensity *= p.light_factor;
      break;
    }
    case PerturbKind::add_object: {
      rng::Stream s2 = rng::Stream::derived(p.seed, "add-object");
      bool placed = false;
      for (int attempt = 0; attempt < 1000 && !placed; ++attempt) {
        SceneObject obj;
        obj.kind = s2.uniform() < 0.6 ? ShapeKind::sphere : ShapeKind::box;
        obj.size = s2.uniform(0.35, 0.8);
        const double margin = obj.size + 0.2;
        for (int a = 0; a < 3; ++a) {
          obj.center[a] = s2.uniform(out.bounds.lo[a] + margin,
                                     out.bounds.hi[a] - margin);
        }
        obj.albedo = {s2.uniform(0.15, 0.95), s2.uniform(0.15, 0.95),
                      s2.uniform(0.15, 0.95)};
        bool overlap = false;
        for (const SceneObject& other : out.objects) {
          const Vec3 d = sub3(obj.center, other.center);
          if (std::sqrt(dot3(d, d)) < obj.size + other.size + 0.15) {
            overlap = true;
            break;
          }
        }
        if (!overlap) {
          out.objects.push_back(obj);
          placed = true;
        }
      }
      if (!placed) throw std::runtime_error("add_object: no free placement");
      break;
    }
    case PerturbKind::remove_object: {
      if (p.object_index < 0 ||
          p.object_index >= static_cast<int>(out.objects.size())) {
        throw std::invalid_argument("remove_object: index out of range");
      }
      out.objects.erase(out.objects.begin() + p.object_index);
      break;
    }
    case PerturbKind::image_noise:
    case PerturbKind::feature_noise:
      break;  // applied to buffers downstream
  }
  return out;
}

void add_noise(img::Image& im, double sigma, std::uint64_t seed) {
  if (sigma < 0) throw std::invalid_argument("noise sigma must be >= 0");
  if (sigma == 0) return;
  rng::Stream s = rng::Stream::derived(seed, "image-noise");
  for (double& v : im.data) v = clamp01(v + sigma * s.normal());
}

void add_noise(std::vector<double>& buffer, double sigma, std::uint64_t seed) {
  if (sigma < 0) throw std::invalid_argument("noise sigma must be >= 0");
  if (sigma == 0) return;
  rng::Stream s = rng::Stream::derived(seed, "feature-noise");
  for (double& v : buffer) v += sigma * s.normal();
}

void save_scene(const std::string& path, const Scene& s) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.precision(17);
  f << "opo-scene v1\n";
  f << "seed " << s.seed << "\n";
  f << "background " << s.background[0] << " " << s.background[1] << " "
    << s.background[2] << "\n";
  f << "bounds " << s.bounds.lo[0] << " " << s.bounds.lo[1] << " "
    << s.bounds.lo[2] << " " << s.bounds.hi[0] << " " << s.bounds.hi[1] << " "
    << s.bounds.hi[2] << "\n";
  f << "light " << s.light.position[0] << " " << s.light.position[1] << " "
    << s.light.position[2] << " " << s.light.intensity << " "
    << s.light.ambient << "\n";
  f << "objects " << s.objects.size() << "\n";
  for (const SceneObject& o : s.objects) {
    f << "object " << (o.kind == ShapeKind::sphere ? "sphere" : "box") << " "
      << o.center[0] << " " << o.center[1] << " " << o.center[2] << " "
      << o.size << " " << o.albedo[0] << " " << o.albedo[1] << " "
      << o.albedo[2] << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

Scene load_scene(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string word, version;
  f >> word >> version;
  if (word != "opo-scene" || version != "v1")
    throw std::runtime_error("unsupported scene file: " + path);
  Scene s;
  std::size_t count = 0;
  while (f >> word) {
    if (word == "seed") {
      f >> s.seed;
    } else if (word == "background") {
      f >> s.background[0] >> s.background[1] >> s.background[2];
    } else if (word == "bounds") {
      f >> s.bounds.lo[0] >> s.bounds.lo[1] >> s.bounds.lo[2] >>
          s.bounds.hi[0] >> s.bounds.hi[1] >> s.bounds.hi[2];
    } else if (word == "light") {
      f >> s.light.position[0] >> s.light.position[1] >> s.light.position[2] >>
          s.light.intensity >> s.light.ambient;
    } else if (word == "objects") {
      f >> count;
    } else if (word == "object") {
      SceneObject o;
      std::string kind;
      f >> kind;
      if (kind == "sphere") {
        o.kind = ShapeKind::sphere;
      } else if (kind == "box") {
        o.kind = ShapeKind::box;
      } else {
        throw std::runtime_error("unknown object kind: " + kind);
      }
      f >> o.center[0] >> o.center[1] >> o.center[2] >> o.size >>
          o.albedo[0] >> o.albedo[1] >> o.albedo[2];
      s.objects.push_back(o);
    } else {
      throw std::runtime_error("unknown scene field: " + word);
    }
  }
  if (s.objects.size() != count)
    throw std::runtime_error("scene object count mismatch in " + path);
  return s;
}

}  // namespace opo::scene
