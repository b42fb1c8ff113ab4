#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "mvharm/image.hpp"

namespace mvharm {

// 3D grid of local affine color transforms over (image y, image x,
// luminance). Each vertex stores the row-major flattening of a 3x4 matrix
// [A|b]: params[...] = [a00,a01,a02,b0, a10,a11,a12,b1, a20,a21,a22,b2].
// Storage is float so the on-disk format round-trips bit-exactly.
struct BilateralGrid {
  int h_s = 0;  // vertices along image height
  int w_s = 0;  // vertices along image width
  int d = 0;    // luminance bins
  std::vector<float> params;  // (h_s, w_s, d, 12) row-major

  BilateralGrid() = default;
  BilateralGrid(int hs, int ws, int dd)
      : h_s(hs), w_s(ws), d(dd), params(size_t(hs) * ws * dd * 12, 0.0f) {}

  size_t vertex_count() const { return size_t(h_s) * w_s * d; }
  size_t index(int y, int x, int z, int p) const {
    return ((size_t(y) * w_s + x) * d + z) * 12 + p;
  }
};

// Per-vertex log-confidence companion grid.
struct ConfidenceGrid {
  int h_s = 0;
  int w_s = 0;
  int d = 0;
  std::vector<float> values;  // (h_s, w_s, d) row-major

  ConfidenceGrid() = default;
  ConfidenceGrid(int hs, int ws, int dd)
      : h_s(hs), w_s(ws), d(dd), values(size_t(hs) * ws * dd, 0.0f) {}

  size_t vertex_count() const { return size_t(h_s) * w_s * d; }
  size_t index(int y, int x, int z) const {
    return (size_t(y) * w_s + x) * d + z;
  }
};

// Full-resolution sliced confidence; strictly positive.
struct ConfidenceMap {
  int height = 0;
  int width = 0;
  std::vector<double> values;  // height*width

  ConfidenceMap() = default;
  ConfidenceMap(int h, int w) : height(h), width(w), values(size_t(h) * w, 1.0) {}

  double& at(int y, int x) { return values[size_t(y) * width + x]; }
  double at(int y, int x) const { return values[size_t(y) * width + x]; }
};

// Grid whose every vertex is the identity transform (A=I, b=0).
BilateralGrid identity_grid(int h_s, int w_s, int d);

// Rec. 709 luma of nonlinear RGB: 0.2126 R + 0.7152 G + 0.0722 B.
std::vector<double> luminance(const Image& img);
double luminance(double r, double g, double b);

// Continuous grid coordinates of one pixel. Half-pixel-centered spatial
// mapping with clamped borders; the guidance coordinate is luma*(d-1).
struct GridCoord {
  int y0, y1, x0, x1, z0, z1;
  double fy, fx, fz;
};
GridCoord grid_coord(int y, int x, double luma, int img_h, int img_w,
                     int h_s, int w_s, int d);

// The 8 vertices (flat index without the parameter axis) and their
// trilinear weights. Weights are >= 0 and sum to 1.
std::array<std::pair<size_t, double>, 8> vertex_weights(const GridCoord& gc,
                                                        int w_s, int d);

// Interpolated per-pixel transform parameters, (H*W*12).
std::vector<double> slice_params(const BilateralGrid& grid, const Image& img);

// Applies the interpolated affine transform at every pixel. Output is NOT
// clamped. Interior constant regions interpolate exactly (nested lerps), so
// an identity grid reproduces the input bit-for-bit.
Image slice_affine(const BilateralGrid& grid, const Image& img);

// Same interpolation as slice_affine over a 1-channel grid, then exp().
ConfidenceMap slice_confidence(const ConfidenceGrid& grid, const Image& img);

// Smoothness penalty: for each grid axis, the mean over adjacent vertex
// pairs of the squared L2 parameter difference; the three axis means are
// summed. Zero iff the grid is constant along every axis.
double tv_loss(const BilateralGrid& grid);
double tv_loss(const ConfidenceGrid& grid);
double tv_loss_raw(const float* params, int h_s, int w_s, int d, int p);

}  // namespace mvharm
