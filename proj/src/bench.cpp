#include "opo/bench.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

#include "opo/metrics.hpp"
#include "opo/pipeline.hpp"
#include "opo/rng.hpp"

namespace opo::bench {
namespace fs = std::filesystem;
namespace {

void write_pair(const BenchOpts& opts, const std::string& rel,
                const img::Image& pred, const img::Image& gt) {
  if (opts.outdir.empty()) return;
  const fs::path base = fs::path(opts.outdir) / rel;
  fs::create_directories(base.parent_path());
  img::write_image(base.string() + "_pred." + opts.image_ext, pred);
  img::write_image(base.string() + "_gt." + opts.image_ext, gt);
}

struct EvalOut {
  double mean_psnr = 0;
  double mean_ssim = 0;
};

// Renders the model against a (possibly perturbed) world: support images are
// re-rendered from the training cameras of that world, queries compared to
// its ground truth.
EvalOut eval_scene(const model::Model& m, const scene::Scene& world,
                   const data::Dataset& d, const std::vector<int>& view_ids,
                   const std::string& variant, int step,
                   BenchmarkReport& report, const BenchOpts& opts,
                   const std::vector<img::Image>* support_override = nullptr,
                   double feature_noise_sigma = -1.0,
                   std::uint64_t feature_noise_seed = 0) {
  const cfg::Config& cfg = m.config;
  const auto support_cams = data::cameras_for(d, cfg.train_views);
  std::vector<img::Image> support;
  if (support_override) {
    support = *support_override;
  } else {
    support = data::render_gt_views(world, d.rig, cfg.train_views, opts.threads);
  }

  ad::NoGradGuard ng;
  enc::SceneVolumes vol =
      enc::encode_scene(m, support, support_cams, d.rig.near, d.rig.far);
  if (feature_noise_sigma >= 0.0)
    scene::add_noise(vol.f.raw(), feature_noise_sigma, feature_noise_seed);

  pipe::RenderOpts ropts;
  ropts.threads = opts.threads;

  EvalOut out;
  for (const int v : view_ids) {
    const img::Image pred =
        pipe::render_view(m, vol, d.rig.cameras[v], d.rig.near, d.rig.far,
                          world.background, ropts);
    const img::Image gt = scene::render_gt_view(world, d.rig.cameras[v], opts.threads);
    MetricRow row;
    row.protocol = protocol_name(report.protocol);
    row.variant = variant;
    row.step = step;
    row.view = v;
    row.psnr = metrics::psnr(pred, gt);
    row.ssim = metrics::ssim(pred, gt);
    report.rows.push_back(row);
    out.mean_psnr += row.psnr;
    out.mean_ssim += row.ssim;
    write_pair(opts,
               row.protocol + "/" + variant + "/view_" + std::to_string(v),
               pred, gt);
  }
  out.mean_psnr /= static_cast<double>(view_ids.size());
  out.mean_ssim /= static_cast<double>(view_ids.size());
  return out;
}

}  // namespace

cfg::Config ablation(int trial_id, const cfg::Config& base) {
  cfg::Config c = base;
  switch (trial_id) {
    case 1:
      c.ab_no_adaptiveness = true;
      break;
    case 2:
      c.ab_no_probabilistic = true;
      break;
    case 5:
      c.ab_ones_adaptiveness = true;
      break;
    case 6:
      c.ab_zero_mask = true;
      break;
    case 7:
      c.ab_soft_mask = true;
      break;
    case 8:
      c.diversity_weight = 0.0;
      break;
    case 9:
      c.ab_no_residual = true;
      break;
    case 10:
      c.ab_no_invariance = true;
      break;
    default:
      throw std::invalid_argument("unknown ablation trial id " +
                                  std::to_string(trial_id));
  }
  return c;
}

Protocol protocol_from_name(const std::string& name) {
  if (name == "move") return Protocol::move;
  if (name == "light") return Protocol::light;
  if (name == "existence") return Protocol::existence;
  if (name == "noise") return Protocol::noise;
  throw std::invalid_argument("unknown benchmark protocol: " + name);
}

std::string protocol_name(Protocol p) {
  switch (p) {
    case Protocol::move: return "move";
    case Protocol::light: return "light";
    case Protocol::existence: return "existence";
    case Protocol::noise: return "noise";
  }
  return "?";
}

BenchmarkReport run_benchmark(Protocol protocol, const model::Model& m,
                              const data::Dataset& d, const BenchOpts& opts) {
  if (protocol == Protocol::existence)
    return run_existence_benchmark(m.config, opts);

  const cfg::Config& cfg = m.config;
  BenchmarkReport report;
  report.protocol = protocol;
  report.config_digest = cfg::digest(cfg);
  report.seed = cfg.seed;

  if (protocol == Protocol::move || protocol == Protocol::light) {
    const EvalOut base =
        eval_scene(m, d.world, d, cfg.bench_views, "baseline", 0, report, opts);
    report.validation_psnr = base.mean_psnr;
    report.validation_ssim = base.mean_ssim;

    double acc = 0;
    for (int step = 1; step <= cfg.bench_steps; ++step) {
      rng::Stream ps = rng::Stream::derived(
          cfg.seed, protocol == Protocol::move ? "bench-move" : "bench-light",
          static_cast<std::uint64_t>(step));
      scene::Perturbation p;
      if (protocol == Protocol::move) {
        p.kind = scene::PerturbKind::move_object;
        p.object_index = static_cast<int>(ps.below(d.world.objects.size()));
        for (int a = 0; a < 3; ++a)
          p.translation[a] = cfg.move_sigma * ps.normal();
      } else {
        p.kind = scene::PerturbKind::scale_light;
        p.light_factor = ps.uniform(cfg.light_factor_min, cfg.light_factor_max);
      }
      const scene::Scene world = scene::perturb(d.world, p);
      const EvalOut e = eval_scene(m, world, d, cfg.bench_views,
                                   "step" + std::to_string(step), step, report,
                                   opts);
      acc += e.mean_psnr;
    }
    report.perturbed_mean_psnr = acc / cfg.bench_steps;
    return report;
  }

  // noise protocol: image-level (two magnitude readings) and feature-level
  const std::vector<int> views = {cfg.validation_view};
  const EvalOut base = eval_scene(m, d.world, d, views, "clean", 0, report, opts);
  report.validation_psnr = base.mean_psnr;
  report.validation_ssim = base.mean_ssim;

  const auto degradation = [&](double noisy) {
    return (noisy - base.mean_psnr) / base.mean_psnr * 100.0;
  };

  int variant_id = 1;
  for (const double sigma : {cfg.noise_sigma_image_a, cfg.noise_sigma_image_b}) {
    std::vector<img::Image> support =
        data::images_for(d, cfg.train_views);
    for (std::size_t i = 0; i < support.size(); ++i) {
      scene::add_noise(support[i], sigma,
                       rng::derive_seed(cfg.seed, "bench-noise-img",
                                        static_cast<std::uint64_t>(variant_id), i));
    }
    char tag[48];
    std::snprintf(tag, sizeof(tag), "image-sigma%g", sigma);
    const EvalOut e =
        eval_scene(m, d.world, d, views, tag, variant_id, report, opts, &support);
    report.degradation_pct.emplace_back(tag, degradation(e.mean_psnr));
    ++variant_id;
  }
  {
    char tag[48];
    std::snprintf(tag, sizeof(tag), "feature-sigma%g", cfg.noise_sigma_feature);
    const EvalOut e = eval_scene(m, d.world, d, views, tag, variant_id, report,
                                 opts, nullptr, cfg.noise_sigma_feature,
                                 rng::derive_seed(cfg.seed, "bench-noise-feat"));
    report.degradation_pct.emplace_back(tag, degradation(e.mean_psnr));
  }
  return report;
}

BenchmarkReport run_existence_benchmark(const cfg::Config& config,
                                        const BenchOpts& opts) {
  BenchmarkReport report;
  report.protocol = Protocol::existence;
  report.config_digest = cfg::digest(config);
  report.seed = config.seed;
  report.existence_counts = {5, 6, 7};

  // nested scenes: the 5- and 6-object worlds drop the tail of the 7-object
  // one, so crossing train/test counts is exactly object insertion/removal
  cfg::Config base_cfg = config;
  base_cfg.scene_objects = 7;
  const scene::Scene base =
      scene::generate_scene(7, rng::derive_seed(config.seed, "existence"));
  const auto truncated = [&base](int count) {
    scene::Scene s = base;
    s.objects.resize(count);
    return s;
  };

  report.existence_grid.assign(3, std::vector<double>(3, 0.0));
  for (int ti = 0; ti < 3; ++ti) {
    const int train_count = report.existence_counts[ti];
    data::Dataset d;
    d.world = truncated(train_count);
    d.rig.cameras = cam::arc_rig(config.rig_cameras, config.rig_radius,
                                 config.rig_height, config.rig_arc_degrees,
                                 config.rig_focal, config.image_size,
                                 config.image_size);
    d.rig.near = config.near;
    d.rig.far = config.far;
    for (const cam::Camera& c : d.rig.cameras)
      d.views.push_back(scene::render_gt_view(d.world, c, opts.threads));

    model::Model m = model::init_model(config);
    train::TrainData td = data::train_data(d, config);
    train::run_training(m, td);

    for (int si = 0; si < 3; ++si) {
      const int test_count = report.existence_counts[si];
      const scene::Scene world = truncated(test_count);
      const EvalOut e = eval_scene(
          m, world, d, config.bench_views,
          "train" + std::to_string(train_count) + "_test" +
              std::to_string(test_count),
          si, report, opts);
      report.existence_grid[ti][si] = e.mean_psnr;
    }
  }
  return report;
}

void write_report(const std::string& outdir, const BenchmarkReport& report) {
  fs::create_directories(outdir);
  {
    std::ofstream csv(fs::path(outdir) / "report.csv");
    if (!csv) throw std::runtime_error("cannot write report.csv");
    csv << "protocol,variant,step,view,psnr,ssim\n";
    csv.precision(10);
    for (const MetricRow& r : report.rows) {
      csv << r.protocol << "," << r.variant << "," << r.step << "," << r.view
          << "," << r.psnr << "," << r.ssim << "\n";
    }
  }
  std::ofstream txt(fs::path(outdir) / "report.txt");
  if (!txt) throw std::runtime_error("cannot write report.txt");
  txt.precision(6);
  txt << "protocol: " << protocol_name(report.protocol) << "\n";
  txt << "config digest: " << report.config_digest << "\n";
  txt << "seed: " << report.seed << "\n";
  if (report.protocol == Protocol::existence) {
    txt << "PSNR grid (rows: trained on, cols: tested on; counts";
    for (const int c : report.existence_counts) txt << " " << c;
    txt << ")\n";
    for (std::size_t i = 0; i < report.existence_grid.size(); ++i) {
      txt << "  trained-" << report.existence_counts[i] << ":";
      for (const double v : report.existence_grid[i]) txt << "  " << v;
      txt << "\n";
    }
  } else {
    txt << "validation PSNR: " << report.validation_psnr
        << "  SSIM: " << report.validation_ssim << "\n";
    if (report.protocol == Protocol::move || report.protocol == Protocol::light) {
      txt << "perturbed mean PSNR: " << report.perturbed_mean_psnr << "\n";
    }
    for (const auto& [tag, pct] : report.degradation_pct) {
      txt << "degradation " << tag << ": " << pct << "%\n";
    }
  }
}

}  // namespace opo::bench
