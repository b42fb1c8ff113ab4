#pragma once

#include <array>
#include <vector>

#include "mvharm/image.hpp"

namespace mvharm {

// 10*log10(1/MSE) over clamped inputs; identical images report the 99 dB cap.
double psnr(const Image& a, const Image& b);

// Single-scale structural similarity: 11x11 Gaussian window (sigma 1.5),
// K1=0.01, K2=0.03, L=1, per channel over the valid convolution region.
double ssim(const Image& a, const Image& b);

// Global 3x4 affine color map, row-major [A|b].
struct ColorAffine {
  std::array<double, 12> m{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0};
};

// Least-squares fit of M mapping render -> gt (normal equations with 1e-8
// Tikhonov damping). A constant render degenerates to a bias-only solution.
ColorAffine fit_color_correction(const Image& render, const Image& gt);

Image apply_color_affine(const Image& img, const ColorAffine& m);

struct EvalReport {
  struct Frame {
    double psnr = 0, ssim = 0, psnr_cc = 0, ssim_cc = 0;
  };
  std::vector<Frame> frames;
  Frame mean;
  int count = 0;
};

// Raw metrics per frame plus color-corrected variants (per-frame affine fit,
// applied and clamped before re-measuring).
EvalReport evaluate_sequence(const std::vector<Image>& renders,
                             const std::vector<Image>& gts);

}  // namespace mvharm
