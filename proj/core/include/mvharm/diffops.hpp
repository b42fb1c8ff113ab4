#pragma once

#include <memory>
#include <vector>

#include "mvharm/autodiff.hpp"
#include "mvharm/grid.hpp"
#include "mvharm/image.hpp"

namespace mvharm {

// Per-pixel interpolation footprint of an image over a (h_s, w_s, d) grid.
// The guidance coordinate comes from the source image only, so for a fixed
// image the slice is a sparse linear map of the grid parameters; computing
// the footprint once makes repeated slicing (optimization loops) cheap.
// Pixel colors are copied in so the footprint is self-contained.
struct SliceFootprint {
  int img_h = 0, img_w = 0;
  int h_s = 0, w_s = 0, d = 0;
  std::vector<int32_t> vertex;  // 8 per pixel, flat (y*w_s + x)*d + z
  std::vector<double> weight;   // 8 per pixel, >= 0, sums to 1
  std::vector<double> rgb;      // 3 per pixel

  size_t pixel_count() const { return size_t(img_h) * img_w; }
};

SliceFootprint compute_slice_footprint(const Image& img, int h_s, int w_s, int d);

// Differentiable slicing of an affine grid tensor, rows = h_s*w_s*d,
// cols = 12. Output is (H*W) x 3, unclamped.
ad::Tensor slice_affine_ad(const ad::Tensor& grid,
                           std::shared_ptr<const SliceFootprint> fp);

// Differentiable interpolation of a 1-channel grid tensor (rows = vertices,
// cols = 1) -> (H*W) x 1. No exp applied; compose with ad::exp_op.
ad::Tensor slice_value_ad(const ad::Tensor& grid,
                          std::shared_ptr<const SliceFootprint> fp);

// Differentiable counterpart of tv_loss for a (h_s*w_s*d) x p grid tensor.
ad::Tensor tv_ad(const ad::Tensor& grid, int h_s, int w_s, int d);

// Conversions between public float grids and tensors.
ad::Tensor tensor_from_grid(const BilateralGrid& g, bool requires_grad = true);
BilateralGrid grid_from_tensor(const ad::Tensor& t, int h_s, int w_s, int d);
ConfidenceGrid confidence_grid_from_tensor(const ad::Tensor& t, int h_s, int w_s, int d);

}  // namespace mvharm
