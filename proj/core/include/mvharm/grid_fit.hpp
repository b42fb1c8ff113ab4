#pragma once

#include <vector>

#include "mvharm/grid.hpp"
#include "mvharm/image.hpp"

namespace mvharm {

struct FitConfig {
  int steps = 2000;
  double lr = 1e-2;
  double lambda_tv = 1e-3;
  int h_s = 8, w_s = 8, d = 8;
};

struct FitResult {
  BilateralGrid grid;
  std::vector<double> loss_history;  // one entry per step
};

// Fits one bilateral grid mapping source -> target by Adam, minimizing
// masked mean absolute error plus lambda_tv * tv_loss. Pixels with any
// channel >= 0.999 in source or target are excluded from the data term
// (clamping breaks the affine relation there). Starts from the identity
// grid.
FitResult fit_grid_pair(const Image& source, const Image& target,
                        const FitConfig& cfg);

// Fraction of pixels excluded by the saturation mask (diagnostic).
double saturation_fraction(const Image& source, const Image& target);

// Masked mean absolute error, same mask as the fitting loss.
double masked_mae(const Image& a, const Image& b, const Image& mask_src,
                  const Image& mask_tgt);

}  // namespace mvharm
