#pragma once

#include <string>
#include <vector>

#include "opo/camera.hpp"
#include "opo/config.hpp"
#include "opo/image.hpp"
#include "opo/scene.hpp"
#include "opo/train.hpp"

namespace opo::data {

// One benchmark world: the procedural scene, the camera arc and the
// ground-truth renders of every rig view at the unperturbed timeframe.
struct Dataset {
  scene::Scene world;
  cam::Rig rig;
  std::vector<img::Image> views;
};

Dataset make_dataset(const cfg::Config& c, int threads = 1);

// Ground-truth views of an arbitrary scene under the dataset's rig.
std::vector<img::Image> render_gt_views(const scene::Scene& world,
                                        const cam::Rig& rig,
                                        const std::vector<int>& view_ids,
                                        int threads = 1);

void save_dataset(const std::string& dir, const Dataset& d,
                  const std::string& image_ext = "ppm");
Dataset load_dataset(const std::string& dir);

std::vector<cam::Camera> cameras_for(const Dataset& d,
                                     const std::vector<int>& view_ids);
std::vector<img::Image> images_for(const Dataset& d,
                                   const std::vector<int>& view_ids);

// Training inputs: the evenly-indexed support views of frame 0.
train::TrainData train_data(const Dataset& d, const cfg::Config& c);

}  // namespace opo::data
