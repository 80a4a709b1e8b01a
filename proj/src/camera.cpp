#include "opo/camera.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <stdexcept>

namespace opo::cam {
namespace {

Vec3 sub3(const Vec3& a, const Vec3& b) {
  return {a[0] - b[0], a[1] - b[1], a[2] - b[2]};
}

Vec3 cross3(const Vec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2],
          a[0] * b[1] - a[1] * b[0]};
}

double norm3(const Vec3& a) {
  return std::sqrt(a[0] * a[0] + a[1] * a[1] + a[2] * a[2]);
}

Vec3 normalize3(const Vec3& a) {
  const double n = norm3(a);
  if (n == 0.0) throw std::invalid_argument("cannot normalize zero vector");
  return {a[0] / n, a[1] / n, a[2] / n};
}

Mat3 mul3(const Mat3& a, const Mat3& b) {
  Mat3 c{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) c[i * 3 + j] += a[i * 3 + k] * b[k * 3 + j];
  return c;
}

Vec3 matvec3(const Mat3& m, const Vec3& v) {
  return {m[0] * v[0] + m[1] * v[1] + m[2] * v[2],
          m[3] * v[0] + m[4] * v[1] + m[5] * v[2],
          m[6] * v[0] + m[7] * v[1] + m[8] * v[2]};
}

Mat3 transpose3(const Mat3& m) {
  return {m[0], m[3], m[6], m[1], m[4], m[7], m[2], m[5], m[8]};
}

}  // namespace

Vec3 Camera::center() const {
  // x_cam = R x_world + t  =>  center = -R^T t
  const Mat3 rt = transpose3(rot);
  const Vec3 c = matvec3(rt, trans);
  return {-c[0], -c[1], -c[2]};
}

Vec3 Camera::to_camera(const Vec3& w) const {
  const Vec3 r = matvec3(rot, w);
  return {r[0] + trans[0], r[1] + trans[1], r[2] + trans[2]};
}

Vec3 Camera::axis() const {
  return {rot[6], rot[7], rot[8]};  // third row of R, world direction of +z
}

Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up, double fx,
               double fy, int width, int height) {
  if (fx <= 0 || fy <= 0) throw std::invalid_argument("focal must be positive");
  const Vec3 fwd = normalize3(sub3(target, eye));
  const Vec3 right = normalize3(cross3(up, fwd));
  const Vec3 down = normalize3(cross3(right, fwd));  // y grows downward
  Camera c;
  c.fx = fx;
  c.fy = fy;
  c.cx = width / 2.0;
  c.cy = height / 2.0;
  c.width = width;
  c.height = height;
  c.rot = {right[0], right[1], right[2], down[0], down[1],
           down[2],  fwd[0],   fwd[1],   fwd[2]};
  const Vec3 re = matvec3(c.rot, eye);
  c.trans = {-re[0], -re[1], -re[2]};
  return c;
}

Ray ray_for_pixel(const Camera& c, int u, int v, double near, double far) {
  if (u < 0 || u >= c.width || v < 0 || v >= c.height) {
    throw std::invalid_argument("pixel (" + std::to_string(u) + "," +
                                std::to_string(v) + ") outside " +
                                std::to_string(c.width) + "x" +
                                std::to_string(c.height));
  }
  if (!(near > 0) || !(near < far))
    throw std::invalid_argument("invalid near/far");
  const Vec3 dir_cam = {(u + 0.5 - c.cx) / c.fx, (v + 0.5 - c.cy) / c.fy, 1.0};
  const Mat3 rt = transpose3(c.rot);
  Ray r;
  r.origin = c.center();
  r.dir = normalize3(matvec3(rt, dir_cam));
  r.near = near;
  r.far = far;
  return r;
}

std::vector<double> sample_depths(double near, double far, int n,
                                  bool stratified, rng::Stream& stream) {
  if (n < 2) throw std::invalid_argument("need at least 2 depth samples");
  if (!(near < far)) throw std::invalid_argument("near must be below far");
  const double step = (far - near) / n;
  std::vector<double> t(n);
  for (int i = 0; i < n; ++i) {
    const double u = stratified ? stream.uniform() : 0.5;
    t[i] = near + (i + u) * step;
  }
  return t;
}

std::vector<double> sample_depths(double near, double far, int n,
                                  bool stratified, std::uint64_t seed) {
  rng::Stream s(seed);
  return sample_depths(near, far, n, stratified, s);
}

Mat3 homography(const Camera& k, const Camera& ref, double z) {
  if (!(z > 0)) throw std::invalid_argument("homography needs z > 0");
  if (k.fx == 0 || k.fy == 0 || ref.fx == 0 || ref.fy == 0)
    throw std::invalid_argument("singular intrinsics");
  // relative pose: x_k = R_rel x_ref + t_rel
  const Mat3 r_rel = mul3(k.rot, transpose3(ref.rot));
  const Vec3 rt = matvec3(r_rel, ref.trans);
  const Vec3 t_rel = {k.trans[0] - rt[0], k.trans[1] - rt[1],
                      k.trans[2] - rt[2]};
  // plane n^T x = z with n the reference optical axis (0,0,1)
  Mat3 m = r_rel;
  m[2] += t_rel[0] / z;
  m[5] += t_rel[1] / z;
  m[8] += t_rel[2] / z;
  const Mat3 kk = {k.fx, 0, k.cx, 0, k.fy, k.cy, 0, 0, 1};
  const Mat3 kri = {1.0 / ref.fx, 0, -ref.cx / ref.fx,
                    0, 1.0 / ref.fy, -ref.cy / ref.fy,
                    0, 0, 1};
  return mul3(kk, mul3(m, kri));
}

std::array<double, 2> apply_homography(const Mat3& h, double u, double v) {
  const double x = h[0] * u + h[1] * v + h[2];
  const double y = h[3] * u + h[4] * v + h[5];
  const double w = h[6] * u + h[7] * v + h[8];
  return {x / w, y / w};
}

std::vector<Camera> arc_rig(int count, double radius, double height,
                            double arc_degrees, double focal, int width,
                            int height_px, const Vec3& target) {
  std::vector<Camera> cams;
  cams.reserve(count);
  const double arc = arc_degrees * std::numbers::pi / 180.0;
  for (int i = 0; i < count; ++i) {
    const double a = count == 1 ? 0.0 : -arc / 2 + arc * i / (count - 1);
    const Vec3 eye = {radius * std::sin(a), height, -radius * std::cos(a)};
    cams.push_back(
        look_at(eye, target, {0, 1, 0}, focal, focal, width, height_px));
  }
  return cams;
}

void save_rig(const std::string& path, const Rig& rig) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f.precision(17);
  f << "opo-rig v1\n";
  f << "near " << rig.near << "\n";
  f << "far " << rig.far << "\n";
  f << "cameras " << rig.cameras.size() << "\n";
  for (const Camera& c : rig.cameras) {
    f << "camera " << c.fx << " " << c.fy << " " << c.cx << " " << c.cy << " "
      << c.width << " " << c.height;
    for (const double r : c.rot) f << " " << r;
    for (const double t : c.trans) f << " " << t;
    f << "\n";
  }
  if (!f) throw std::runtime_error("write failed: " + path);
}

Rig load_rig(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open: " + path);
  std::string word, version;
  f >> word >> version;
  if (word != "opo-rig" || version != "v1")
    throw std::runtime_error("unsupported rig file: " + path);
  Rig rig;
  std::size_t count = 0;
  while (f >> word) {
    if (word == "near") {
      f >> rig.near;
    } else if (word == "far") {
      f >> rig.far;
    } else if (word == "cameras") {
      f >> count;
    } else if (word == "camera") {
      Camera c;
      f >> c.fx >> c.fy >> c.cx >> c.cy >> c.width >> c.height;
      for (double& r : c.rot) f >> r;
      for (double& t : c.trans) f >> t;
      rig.cameras.push_back(c);
    } else {
      throw std::runtime_error("unknown rig field: " + word);
    }
  }
  if (rig.cameras.size() != count)
    throw std::runtime_error("rig camera count mismatch in " + path);
  return rig;
}

}  // namespace opo::cam
