#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "mvharm/autodiff.hpp"
#include "mvharm/grid.hpp"
#include "mvharm/isp.hpp"
#include "mvharm/model.hpp"
#include "mvharm/optim.hpp"

namespace mvharm {

struct AugmentToggles {
  bool flip = true;
  bool scale = true;
  bool blur = true;
};

struct TrainConfig {
  double alpha = 0.1;        // confidence-loss weight
  double lambda_tv = 1e-3;   // grid smoothness weight
  double lr = 2e-4;
  double lr_min = 1e-5;      // cosine decay floor
  double weight_decay = 1e-4;
  int iterations = 5000;
  int frames_per_batch = 10;
  double clip_norm = 1.0;
  uint64_t seed = 0;
  double severity = 0.7;
  bool augment = true;
  AugmentToggles toggles;
  int log_every = 10;
};

// ---- Losses ----

// mean over pixels of [ conf * sum_channels |target - corrected|
//                       - alpha * log conf ]
double confidence_loss(const Image& corrected, const Image& target,
                       const ConfidenceMap& conf, double alpha);

// Mean over source frames of confidence_loss + lambda_tv * (tv of affine
// grid + tv of confidence grid).
double total_loss(const std::vector<Image>& corrected,
                  const std::vector<Image>& targets,
                  const std::vector<ConfidenceMap>& confs,
                  const std::vector<BilateralGrid>& grids,
                  const std::vector<ConfidenceGrid>& conf_grids,
                  double alpha, double lambda_tv);

// Differentiable batch loss; sources/targets at model resolution.
struct BatchLoss {
  ad::Tensor total;      // scalar
  double conf_component = 0.0;  // mean confidence loss over frames
  double tv_component = 0.0;    // mean (unweighted) tv sum over frames
};
BatchLoss batch_loss_ad(const ForwardGrids& grids, const std::vector<Image>& sources,
                        const std::vector<Image>& targets, const ModelConfig& cfg,
                        double alpha, double lambda_tv);

// ---- Gradient utilities ----

// Global L2 norm over all parameter gradients; grads untouched.
double global_grad_norm(const std::vector<ad::Tensor>& params);

// Scales all gradients by clip_norm/norm when norm exceeds clip_norm.
// Returns the pre-clip norm. Throws on non-finite gradients.
double clip_gradients(std::vector<ad::Tensor>& params, double clip_norm);
double clip_gradients_raw(std::vector<std::vector<double>>& grads, double clip_norm);

// ---- Augmentation ----

// One draw per sequence, applied identically to every input and target
// frame so cross-view correspondence survives.
struct AugmentDraws {
  bool flip = false;
  double scale = 1.0;  // [1.0, 1.3]; upscale then center-crop
  bool blur = false;
  double sigma = 0.0;  // [0.3, 1.2]
};
AugmentDraws sample_augment(uint64_t seed, const AugmentToggles& toggles = {});
Image apply_augment_image(const Image& img, const AugmentDraws& d);
TrainingPair apply_augment(const TrainingPair& pair, const AugmentDraws& d);
TrainingPair augment_sequence(const TrainingPair& pair, uint64_t seed);

// ---- Training ----

struct TrainScene {
  std::vector<Image> frames;  // appearance-consistent sequence
};
using Dataset = std::vector<TrainScene>;

Dataset synthetic_dataset(int scenes, int frames_per_scene, int h, int w,
                          uint64_t seed);
// Scans dir for subdirectories holding manifest.json; uses the
// ground-truth sequence when present, the frame sequence otherwise.
Dataset load_scene_dirs(const std::string& dir);

struct MetricsRow {
  int step = 0;
  double loss = 0, conf_loss = 0, tv_loss = 0, grad_norm = 0, lr = 0;
};

struct TrainResult {
  ModelParams params;
  std::vector<MetricsRow> log;
};

// Per iteration: pick a scene, corrupt it into a training pair, augment,
// run the model at model resolution, step AdamW under gradient clipping
// with cosine lr decay. Deterministic for a fixed seed. Throws on
// non-finite loss, reporting the offending pair seed.
TrainResult train(const Dataset& data, const ModelConfig& mcfg,
                  const TrainConfig& tcfg);

std::string metrics_csv(const std::vector<MetricsRow>& rows);

// ---- Gradient checking ----

struct FdCoord {
  int tensor = 0;
  size_t index = 0;
};

// Central differences of loss_fn at the given parameter coordinates vs the
// analytic gradients. Returns the max relative error with denominator
// max(|analytic|, |fd|, 1e-8).
double finite_diff_check(std::vector<ad::Tensor> params,
                         const std::function<ad::Tensor()>& loss_fn,
                         const std::vector<FdCoord>& coords, double step);

// Samples up to per_tensor coordinates from every parameter tensor.
std::vector<FdCoord> sample_fd_coords(const std::vector<ad::Tensor>& params,
                                      int per_tensor, uint64_t seed);

}  // namespace mvharm
