#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mvharm/image.hpp"

namespace mvharm {

// One sampled set of camera-pipeline perturbations. Applied in linear light:
// white balance and exposure gains, a row-normalized color matrix, a smooth
// spatially varying shadow/highlight gain field, then a gamma tweak after
// re-encoding.
struct IspParams {
  double wb_gain_r = 1.0;
  double wb_gain_b = 1.0;
  double exposure_ev = 0.0;                     // digital gain 2^ev
  std::array<double, 9> ccm{1, 0, 0, 0, 1, 0, 0, 0, 1};  // rows sum to 1
  double gamma = 1.0;
  double shadow_lift = 0.0;       // [0, 0.3]
  double highlight_compress = 0.0;  // [0, 0.5]
  uint64_t tone_field_seed = 0;
  double tone_field_strength = 0.0;  // [0, 1]
};

// Paired corrupted/clean multi-view data. inputs[0] is the reference (only
// the shared reference transform applied); inputs[i>=1] carry an extra
// per-frame corruption. targets[i] is the clean appearance for inputs[i+1].
// params[0] is the reference transform, params[i>=1] the per-source one.
struct TrainingPair {
  std::vector<Image> inputs;
  std::vector<Image> targets;
  std::vector<IspParams> params;
};

// Exact sRGB transfer curves. Decoding clamps negatives to zero; encoding
// clamps its input at zero so downstream gamma stays real-valued.
double srgb_decode(double v);
double srgb_encode(double v);
Image srgb_to_linear(const Image& img);
Image linear_to_srgb(const Image& img);

// Severity in [0,1] scales every parameter range around its neutral value;
// severity 0 yields exactly neutral parameters. Same seed, same params.
IspParams sample_isp_params(uint64_t seed, double severity);

// Smooth field in [-1,1]: 4x4 uniform knots, bilinearly upsampled.
std::array<double, 16> sample_tone_knots(uint64_t seed);
std::vector<double> tone_field_from_knots(const std::array<double, 16>& knots,
                                          int h, int w);
std::vector<double> spatial_tone_field(uint64_t seed, int h, int w);

Image apply_isp_variation(const Image& img, const IspParams& p);

TrainingPair generate_training_pair(const std::vector<Image>& sequence,
                                    uint64_t seed, double severity);

// Procedural test scene: one 2H x 2W canvas (smooth gradient plus random
// rectangles/ellipses), emitted as N overlapping H x W crops with jittered
// offsets. Consecutive crops overlap by at least half their area.
std::vector<Image> synth_scene(uint64_t seed, int n, int h, int w,
                               std::vector<std::pair<int, int>>* offsets = nullptr);

}  // namespace mvharm
