#include <filesystem>
#include <iostream>

#include "CLI11.hpp"
#include "opo/bench.hpp"
#include "opo/checkpoint.hpp"
#include "opo/dataset.hpp"
#include "opo/gradsuite.hpp"
#include "opo/metrics.hpp"
#include "opo/pipeline.hpp"
#include "opo/threads.hpp"
#include "opo/train.hpp"

namespace fs = std::filesystem;
using namespace opo;

namespace {

cfg::Config load_config_or_default(const std::string& path) {
  if (path.empty()) return cfg::Config{};
  return cfg::parse_file(path);
}

ckpt::RngStates collect_rng_states(const cfg::Config& c) {
  ckpt::RngStates states;
  states.emplace_back("rays", rng::Stream::derived(c.seed, "rays").state());
  states.emplace_back("shuffle", rng::Stream::derived(c.seed, "shuffle").state());
  return states;
}

int cmd_scene_gen(const std::string& out, const std::string& config_path,
                  int objects, long long seed, int size,
                  const std::string& format, int threads) {
  cfg::Config c = load_config_or_default(config_path);
  if (objects > 0) c.scene_objects = objects;
  if (seed >= 0) c.seed = static_cast<std::uint64_t>(seed);
  if (size > 0) c.image_size = size;
  const data::Dataset d = data::make_dataset(c, threads::resolve(threads));
  data::save_dataset(out, d, format);
  cfg::write_file((fs::path(out) / "config.txt").string(), c);
  std::cout << "wrote scene, rig and " << d.views.size() << " views to " << out
            << "\n";
  return 0;
}

int cmd_train(const std::string& data_dir, const std::string& out,
              const std::string& config_path) {
  const cfg::Config c = load_config_or_default(config_path);
  const data::Dataset d = data::load_dataset(data_dir);
  model::Model m = model::init_model(c);
  const train::TrainData td = data::train_data(d, c);
  const train::TrainResult r = train::run_training(m, td, &std::cout);
  fs::create_directories(out);
  ckpt::save_checkpoint((fs::path(out) / "checkpoint.opo").string(), m,
                        collect_rng_states(c));
  train::write_loss_csv((fs::path(out) / "loss.csv").string(), r.curve);
  if (r.aborted) {
    std::cerr << "training aborted (" << r.abort_reason
              << "); last-good checkpoint written\n";
    return 2;
  }
  std::cout << "checkpoint and loss curve written to " << out << "\n";
  return 0;
}

int cmd_render(const std::string& ckpt_path, const std::string& data_dir,
               int view, const std::string& out, int threads,
               bool stratified, long long seed) {
  ckpt::Loaded loaded = ckpt::load_checkpoint(ckpt_path);
  const data::Dataset d = data::load_dataset(data_dir);
  const cfg::Config& c = loaded.model.config;
  if (view < 0 || view >= static_cast<int>(d.rig.cameras.size()))
    throw std::runtime_error("view index out of range");
  pipe::RenderOpts ro;
  ro.threads = threads::resolve(threads);
  ro.stratified = stratified;
  ro.seed = seed >= 0 ? static_cast<std::uint64_t>(seed) : c.seed;
  const auto imgs = pipe::render_views(
      loaded.model, data::images_for(d, c.train_views),
      data::cameras_for(d, c.train_views), {d.rig.cameras[view]}, d.rig.near,
      d.rig.far, d.world.background, ro);
  img::write_image(out, imgs[0]);
  std::cout << "rendered view " << view << " -> " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& a, const std::string& b,
             const std::string& ckpt_path, const std::string& data_dir,
             int view, int threads) {
  img::Image ia, ib;
  if (!ckpt_path.empty()) {
    ckpt::Loaded loaded = ckpt::load_checkpoint(ckpt_path);
    const data::Dataset d = data::load_dataset(data_dir);
    const cfg::Config& c = loaded.model.config;
    const int v = view >= 0 ? view : c.validation_view;
    pipe::RenderOpts ro;
    ro.threads = threads::resolve(threads);
    ia = pipe::render_views(loaded.model, data::images_for(d, c.train_views),
                            data::cameras_for(d, c.train_views),
                            {d.rig.cameras[v]}, d.rig.near, d.rig.far,
                            d.world.background, ro)[0];
    ib = d.views[v];
  } else {
    ia = img::read_image(a);
    ib = img::read_image(b);
  }
  std::cout << "PSNR " << metrics::psnr(ia, ib) << "\n";
  std::cout << "SSIM " << metrics::ssim(ia, ib) << "\n";
  return 0;
}

int cmd_bench(const std::string& protocol_name, const std::string& ckpt_path,
              const std::string& data_dir, const std::string& out,
              const std::string& config_path, int threads) {
  const bench::Protocol protocol = bench::protocol_from_name(protocol_name);
  bench::BenchOpts opts;
  opts.threads = threads::resolve(threads);
  opts.outdir = out;

  bench::BenchmarkReport report;
  if (protocol == bench::Protocol::existence) {
    const cfg::Config c = load_config_or_default(config_path);
    report = bench::run_existence_benchmark(c, opts);
  } else {
    if (ckpt_path.empty())
      throw std::runtime_error("this protocol needs --checkpoint");
    ckpt::Loaded loaded = ckpt::load_checkpoint(ckpt_path);
    const data::Dataset d = data::load_dataset(data_dir);
    report = bench::run_benchmark(protocol, loaded.model, d, opts);
  }
  bench::write_report(out, report);
  std::cout << "benchmark report written to " << out << "\n";
  return 0;
}

int cmd_ablate(int trial, const std::string& out) {
  const cfg::Config c = bench::ablation(trial);
  if (out.empty()) {
    std::cout << cfg::dump(c);
  } else {
    cfg::write_file(out, c);
    std::cout << "trial " << trial << " config written to " << out << "\n";
  }
  return 0;
}

int cmd_gradcheck(long long seed) {
  const check::SuiteResult r =
      check::run_gradient_suite(seed >= 0 ? static_cast<std::uint64_t>(seed) : 1);
  for (const std::string& line : r.lines) std::cout << line << "\n";
  std::cout << (r.ok ? "gradient suite: PASS" : "gradient suite: FAIL") << "\n";
  return r.ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"point-personalized neural renderer"};
  app.require_subcommand(1);

  int threads = 0;
  app.add_option("--threads", threads, "worker cap (default: OPO_THREADS or 1)");

  // scene-gen
  auto* sg = app.add_subcommand("scene-gen", "generate scene, rig and views");
  std::string sg_out = "data", sg_cfg, sg_format = "ppm";
  int sg_objects = 0, sg_size = 0;
  long long sg_seed = -1;
  sg->add_option("--out", sg_out, "output directory");
  sg->add_option("--config", sg_cfg, "config file");
  sg->add_option("--objects", sg_objects, "object count");
  sg->add_option("--seed", sg_seed, "scene seed");
  sg->add_option("--size", sg_size, "image size in pixels");
  sg->add_option("--format", sg_format, "image format (ppm|png)")
      ->check(CLI::IsMember({"ppm", "png"}));

  // train
  auto* tr = app.add_subcommand("train", "train a model on a generated scene");
  std::string tr_data = "data", tr_out = "run", tr_cfg;
  bool tr_defaults = false;
  tr->add_option("--data", tr_data, "dataset directory (from scene-gen)");
  tr->add_option("--out", tr_out, "output directory");
  tr->add_option("--config", tr_cfg, "config file");
  tr->add_flag("--print-defaults", tr_defaults, "dump the default config");

  // render
  auto* rd = app.add_subcommand("render", "render a view from a checkpoint");
  std::string rd_ckpt, rd_data = "data", rd_out = "render.ppm";
  int rd_view = 0;
  bool rd_strat = false;
  long long rd_seed = -1;
  rd->add_option("--checkpoint", rd_ckpt)->required();
  rd->add_option("--data", rd_data);
  rd->add_option("--view", rd_view);
  rd->add_option("--out", rd_out);
  rd->add_flag("--stratified", rd_strat, "stratified depth sampling");
  rd->add_option("--seed", rd_seed);

  // eval
  auto* ev = app.add_subcommand("eval", "PSNR/SSIM of two images, or of a "
                                        "checkpoint render against ground truth");
  std::string ev_a, ev_b, ev_ckpt, ev_data = "data";
  int ev_view = -1;
  ev->add_option("--a", ev_a, "first image");
  ev->add_option("--b", ev_b, "second image");
  ev->add_option("--checkpoint", ev_ckpt);
  ev->add_option("--data", ev_data);
  ev->add_option("--view", ev_view, "view index (default: validation view)");

  // bench
  auto* bn = app.add_subcommand("bench", "perturbation benchmark protocols");
  std::string bn_protocol, bn_ckpt, bn_data = "data", bn_out = "bench", bn_cfg;
  bn->add_option("--protocol", bn_protocol, "move|light|existence|noise")
      ->required();
  bn->add_option("--checkpoint", bn_ckpt);
  bn->add_option("--data", bn_data);
  bn->add_option("--out", bn_out);
  bn->add_option("--config", bn_cfg, "config (existence protocol)");

  // ablate
  auto* ab = app.add_subcommand("ablate", "emit an ablation-trial config");
  int ab_trial = 0;
  std::string ab_out;
  ab->add_option("--trial", ab_trial, "trial id (1,2,5,6,7,8,9,10)")->required();
  ab->add_option("--out", ab_out, "config file to write (default: stdout)");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference suite");
  long long gc_seed = -1;
  gc->add_option("--seed", gc_seed);

  CLI11_PARSE(app, argc, argv);

  try {
    if (sg->parsed())
      return cmd_scene_gen(sg_out, sg_cfg, sg_objects, sg_seed, sg_size,
                           sg_format, threads);
    if (tr->parsed()) {
      if (tr_defaults) {
        std::cout << cfg::dump(cfg::Config{});
        return 0;
      }
      return cmd_train(tr_data, tr_out, tr_cfg);
    }
    if (rd->parsed())
      return cmd_render(rd_ckpt, rd_data, rd_view, rd_out, threads, rd_strat,
                        rd_seed);
    if (ev->parsed()) {
      if (ev_ckpt.empty() && (ev_a.empty() || ev_b.empty()))
        throw std::runtime_error("eval needs --a/--b images or --checkpoint");
      return cmd_eval(ev_a, ev_b, ev_ckpt, ev_data, ev_view, threads);
    }
    if (bn->parsed())
      return cmd_bench(bn_protocol, bn_ckpt, bn_data, bn_out, bn_cfg, threads);
    if (ab->parsed()) return cmd_ablate(ab_trial, ab_out);
    if (gc->parsed()) return cmd_gradcheck(gc_seed);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
