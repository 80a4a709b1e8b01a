#include "opo/dataset.hpp"

#include <filesystem>
#include <stdexcept>

namespace opo::data {
namespace fs = std::filesystem;

Dataset make_dataset(const cfg::Config& c, int threads) {
  Dataset d;
  d.world = scene::generate_scene(c.scene_objects, c.seed);
  d.rig.cameras = cam::arc_rig(c.rig_cameras, c.rig_radius, c.rig_height,
                               c.rig_arc_degrees, c.rig_focal, c.image_size,
                               c.image_size);
  d.rig.near = c.near;
  d.rig.far = c.far;
  d.views.reserve(d.rig.cameras.size());
  for (const cam::Camera& camera : d.rig.cameras)
    d.views.push_back(scene::render_gt_view(d.world, camera, threads));
  return d;
}

std::vector<img::Image> render_gt_views(const scene::Scene& world,
                                        const cam::Rig& rig,
                                        const std::vector<int>& view_ids,
                                        int threads) {
  std::vector<img::Image> out;
  out.reserve(view_ids.size());
  for (const int v : view_ids) {
    if (v < 0 || v >= static_cast<int>(rig.cameras.size()))
      throw std::invalid_argument("view index out of range: " + std::to_string(v));
    out.push_back(scene::render_gt_view(world, rig.cameras[v], threads));
  }
  return out;
}

void save_dataset(const std::string& dir, const Dataset& d,
                  const std::string& image_ext) {
  fs::create_directories(fs::path(dir) / "views");
  scene::save_scene((fs::path(dir) / "scene.txt").string(), d.world);
  cam::save_rig((fs::path(dir) / "rig.txt").string(), d.rig);
  char name[32];
  for (std::size_t i = 0; i < d.views.size(); ++i) {
    std::snprintf(name, sizeof(name), "view_%02zu.%s", i, image_ext.c_str());
    img::write_image((fs::path(dir) / "views" / name).string(), d.views[i]);
  }
}

Dataset load_dataset(const std::string& dir) {
  Dataset d;
  d.world = scene::load_scene((fs::path(dir) / "scene.txt").string());
  d.rig = cam::load_rig((fs::path(dir) / "rig.txt").string());
  d.views.reserve(d.rig.cameras.size());
  char ppm[32], png[32];
  for (std::size_t i = 0; i < d.rig.cameras.size(); ++i) {
    std::snprintf(ppm, sizeof(ppm), "view_%02zu.ppm", i);
    std::snprintf(png, sizeof(png), "view_%02zu.png", i);
    const fs::path p_ppm = fs::path(dir) / "views" / ppm;
    const fs::path p_png = fs::path(dir) / "views" / png;
    if (fs::exists(p_ppm)) {
      d.views.push_back(img::read_image(p_ppm.string()));
    } else if (fs::exists(p_png)) {
      d.views.push_back(img::read_image(p_png.string()));
    } else {
      throw std::runtime_error("missing view image: " + p_ppm.string());
    }
  }
  return d;
}

std::vector<cam::Camera> cameras_for(const Dataset& d,
                                     const std::vector<int>& view_ids) {
  std::vector<cam::Camera> out;
  out.reserve(view_ids.size());
  for (const int v : view_ids) {
    if (v < 0 || v >= static_cast<int>(d.rig.cameras.size()))
      throw std::invalid_argument("view index out of range: " + std::to_string(v));
    out.push_back(d.rig.cameras[v]);
  }
  return out;
}

std::vector<img::Image> images_for(const Dataset& d,
                                   const std::vector<int>& view_ids) {
  std::vector<img::Image> out;
  out.reserve(view_ids.size());
  for (const int v : view_ids) {
    if (v < 0 || v >= static_cast<int>(d.views.size()))
      throw std::invalid_argument("view index out of range: " + std::to_string(v));
    out.push_back(d.views[v]);
  }
  return out;
}

train::TrainData train_data(const Dataset& d, const cfg::Config& c) {
  train::TrainData td;
  td.support = images_for(d, c.train_views);
  td.support_cams = cameras_for(d, c.train_views);
  td.background = d.world.background;
  td.near = d.rig.near;
  td.far = d.rig.far;
  return td;
}

}  // namespace opo::data
