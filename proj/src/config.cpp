#include "opo/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace opo::cfg {
namespace {

std::string join_ints(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

struct Field {
  std::function<std::string(const Config&)> get;
  std::function<void(Config&, const std::string&)> set;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> f = [] {
    std::vector<std::pair<std::string, Field>> v;
    const auto add_int = [&v](const char* name, int Config::* p) {
      v.push_back({name,
                   {[p](const Config& c) { return std::to_string(c.*p); },
                    [p](Config& c, const std::string& s) { c.*p = std::stoi(s); }}});
    };
    const auto add_double = [&v](const char* name, double Config::* p) {
      v.push_back({name,
                   {[p](const Config& c) { return fmt(c.*p); },
                    [p](Config& c, const std::string& s) { c.*p = std::stod(s); }}});
    };
    const auto add_bool = [&v](const char* name, bool Config::* p) {
      v.push_back({name,
                   {[p](const Config& c) { return c.*p ? "true" : "false"; },
                    [p](Config& c, const std::string& s) {
                      if (s == "true" || s == "1") {
                        c.*p = true;
                      } else if (s == "false" || s == "0") {
                        c.*p = false;
                      } else {
                        throw std::invalid_argument("expected true/false");
                      }
                    }}});
    };
    const auto add_ints = [&v](const char* name, std::vector<int> Config::* p) {
      v.push_back({name,
                   {[p](const Config& c) { return join_ints(c.*p); },
                    [p](Config& c, const std::string& s) { c.*p = split_ints(s); }}});
    };
    const auto add_u64 = [&v](const char* name, std::uint64_t Config::* p) {
      v.push_back({name,
                   {[p](const Config& c) { return std::to_string(c.*p); },
                    [p](Config& c, const std::string& s) { c.*p = std::stoull(s); }}});
    };

    add_int("feature_width", &Config::feature_width);
    add_int("model_width", &Config::model_width);
    add_int("latent_width", &Config::latent_width);
    add_int("core_rank", &Config::core_rank);
    add_int("decoder_hidden", &Config::decoder_hidden);
    add_int("patch_hidden", &Config::patch_hidden);
    add_int("voxel_hidden", &Config::voxel_hidden);
    add_int("grid_x", &Config::grid_x);
    add_int("grid_y", &Config::grid_y);
    add_int("grid_z", &Config::grid_z);
    add_int("pe_octaves_pos", &Config::pe_octaves_pos);
    add_int("pe_octaves_dir", &Config::pe_octaves_dir);
    add_double("init_code_std", &Config::init_code_std);
    add_double("init_bias_std", &Config::init_bias_std);
    add_int("ray_batch", &Config::ray_batch);
    add_int("samples_per_ray", &Config::samples_per_ray);
    add_double("learning_rate", &Config::learning_rate);
    add_double("adam_beta1", &Config::adam_beta1);
    add_double("adam_beta2", &Config::adam_beta2);
    add_double("adam_eps", &Config::adam_eps);
    add_double("alpha", &Config::alpha);
    add_double("gamma", &Config::gamma);
    add_double("diversity_weight", &Config::diversity_weight);
    add_int("iterations", &Config::iterations);
    add_u64("seed", &Config::seed);
    add_int("log_every", &Config::log_every);
    add_int("scene_objects", &Config::scene_objects);
    add_int("image_size", &Config::image_size);
    add_int("rig_cameras", &Config::rig_cameras);
    add_double("rig_radius", &Config::rig_radius);
    add_double("rig_height", &Config::rig_height);
    add_double("rig_arc_degrees", &Config::rig_arc_degrees);
    add_double("rig_focal", &Config::rig_focal);
    add_double("near", &Config::near);
    add_double("far", &Config::far);
    add_ints("train_views", &Config::train_views);
    add_int("validation_view", &Config::validation_view);
    add_ints("bench_views", &Config::bench_views);
    add_bool("ab_no_adaptiveness", &Config::ab_no_adaptiveness);
    add_bool("ab_no_probabilistic", &Config::ab_no_probabilistic);
    add_bool("ab_direct_regression", &Config::ab_direct_regression);
    add_bool("ab_ones_adaptiveness", &Config::ab_ones_adaptiveness);
    add_bool("ab_zero_mask", &Config::ab_zero_mask);
    add_bool("ab_soft_mask", &Config::ab_soft_mask);
    add_bool("ab_no_residual", &Config::ab_no_residual);
    add_bool("ab_no_invariance", &Config::ab_no_invariance);
    add_int("bench_steps", &Config::bench_steps);
    add_double("move_sigma", &Config::move_sigma);
    add_double("light_factor_min", &Config::light_factor_min);
    add_double("light_factor_max", &Config::light_factor_max);
    add_double("noise_sigma_feature", &Config::noise_sigma_feature);
    add_double("noise_sigma_image_a", &Config::noise_sigma_image_a);
    add_double("noise_sigma_image_b", &Config::noise_sigma_image_b);
    return v;
  }();
  return f;
}

}  // namespace

std::string dump(const Config& c) {
  std::ostringstream os;
  os << "# opo-config v1\n";
  for (const auto& [name, field] : fields()) {
    os << name << " " << field.get(c) << "\n";
  }
  return os.str();
}

Config parse_text(const std::string& text, const std::string& origin) {
  Config c;
  std::map<std::string, const Field*> lookup;
  for (const auto& [name, field] : fields()) lookup[name] = &field;

  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    std::istringstream ls(line);
    std::string key, value;
    if (!(ls >> key)) continue;  // blank
    if (!(ls >> value)) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": field '" + key + "' missing a value");
    }
    std::string extra;
    if (ls >> extra) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": trailing tokens after '" + key + "'");
    }
    const auto it = lookup.find(key);
    if (it == lookup.end()) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": unknown field '" + key + "'");
    }
    try {
      it->second->set(c, value);
    } catch (const std::exception& e) {
      throw std::invalid_argument(origin + ":" + std::to_string(lineno) +
                                  ": bad value for '" + key + "': " + e.what());
    }
  }
  return c;
}

Config parse_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config: " + path);
  std::ostringstream os;
  os << f.rdbuf();
  return parse_text(os.str(), path);
}

void write_file(const std::string& path, const Config& c) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot open for writing: " + path);
  f << dump(c);
  if (!f) throw std::runtime_error("write failed: " + path);
}

std::string digest(const Config& c) {
  const std::string text = dump(c);
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const char ch : text) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace opo::cfg
