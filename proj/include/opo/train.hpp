#pragma once

#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "opo/model.hpp"
#include "opo/pipeline.hpp"
#include "opo/rng.hpp"

namespace opo::train {

// Mean squared pixel error over the ray batch: (1/|R|) sum ||pred - gt||^2.
ad::Tensor photometric_loss(const ad::Tensor& pred, const ad::Tensor& gt);

// Diversity of the adaptiveness factors: per-ray and per-sample-index mean
// vectors are each compared against a seeded random shuffle of themselves
// (identity permutations are redrawn); the negated mean L2 distances are
// summed. `a` is [rays * samples, L].
ad::Tensor diversity_loss(const ad::Tensor& a, int rays, int samples,
                          rng::Stream& shuffle);

struct LossParts {
  ad::Tensor pho, appr, rec, div;
};

// pho + appr + gamma * rec + diversity_weight * div. Throws on non-finite
// parts so a training step can abort cleanly.
ad::Tensor total_loss(const LossParts& parts, double gamma,
                      double diversity_weight);

// Adaptive-moment optimizer state (first/second moments, step counter).
struct OptimState {
  std::vector<std::vector<double>> m1, m2;
  std::int64_t step = 0;
  static OptimState init(std::span<const ad::Tensor> params);
};

void optimizer_step(std::span<const ad::Tensor> params, OptimState& st,
                    double lr, double beta1, double beta2, double eps);

struct LossRow {
  int iteration = 0;
  double pho = 0, appr = 0, rec = 0, div = 0, total = 0;
};

struct TrainResult {
  std::vector<LossRow> curve;
  bool aborted = false;
  std::string abort_reason;
};

// Inputs for a training run: the support/training views of the frozen
// timeframe plus the camera and compositing context.
struct TrainData {
  std::vector<img::Image> support;
  std::vector<cam::Camera> support_cams;
  std::array<double, 3> background{};
  double near = 0, far = 0;
};

// Deterministic training loop. Rays are sampled uniformly over the training
// views from a seeded stream; one optimizer step per iteration; aborts and
// restores the previous parameters if the loss turns non-finite.
TrainResult run_training(model::Model& m, const TrainData& data,
                         std::ostream* log = nullptr);

void write_loss_csv(const std::string& path,
                    const std::vector<LossRow>& curve);

}  // namespace opo::train
