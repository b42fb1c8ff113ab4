#include "mvharm/grid.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvharm {

namespace {

inline double lerp(double a, double b, double t) { return a + t * (b - a); }

void check_grid_dims(int h_s, int w_s, int d) {
  if (h_s < 1 || w_s < 1 || d < 2) {
    throw std::invalid_argument("grid dims must satisfy h_s,w_s >= 1, d >= 2");
  }
}

void check_finite(const std::vector<float>& v, const char* what) {
  for (float x : v) {
    if (!std::isfinite(x)) throw std::invalid_argument(std::string(what) + ": non-finite value");
  }
}

}  // namespace

BilateralGrid identity_grid(int h_s, int w_s, int d) {
  check_grid_dims(h_s, w_s, d);
  BilateralGrid g(h_s, w_s, d);
  for (size_t v = 0; v < g.vertex_count(); ++v) {
    float* p = g.params.data() + v * 12;
    p[0] = 1.0f;
    p[5] = 1.0f;
    p[10] = 1.0f;
  }
  return g;
}

double luminance(double r, double g, double b) {
  return 0.2126 * r + 0.7152 * g + 0.0722 * b;
}

std::vector<double> luminance(const Image& img) {
  std::vector<double> out(img.pixel_count());
  for (size_t p = 0; p < img.pixel_count(); ++p) {
    out[p] = luminance(img.data[p * 3], img.data[p * 3 + 1], img.data[p * 3 + 2]);
  }
  return out;
}

GridCoord grid_coord(int y, int x, double luma, int img_h, int img_w,
                     int h_s, int w_s, int d) {
  GridCoord gc;
  double gy = std::clamp((y + 0.5) / img_h * h_s - 0.5, 0.0, double(h_s - 1));
  double gx = std::clamp((x + 0.5) / img_w * w_s - 0.5, 0.0, double(w_s - 1));
  double gz = std::clamp(luma, 0.0, 1.0) * (d - 1);
  gc.y0 = static_cast<int>(gy);
  gc.x0 = static_cast<int>(gx);
  gc.z0 = static_cast<int>(gz);
  gc.y1 = std::min(gc.y0 + 1, h_s - 1);
  gc.x1 = std::min(gc.x0 + 1, w_s - 1);
  gc.z1 = std::min(gc.z0 + 1, d - 1);
  gc.fy = gy - gc.y0;
  gc.fx = gx - gc.x0;
  gc.fz = gz - gc.z0;
  return gc;
}

std::array<std::pair<size_t, double>, 8> vertex_weights(const GridCoord& gc,
                                                        int w_s, int d) {
  auto flat = [&](int y, int x, int z) {
    return (size_t(y) * w_s + x) * d + z;
  };
  const double wy0 = 1.0 - gc.fy, wy1 = gc.fy;
  const double wx0 = 1.0 - gc.fx, wx1 = gc.fx;
  const double wz0 = 1.0 - gc.fz, wz1 = gc.fz;
  return {{
      {flat(gc.y0, gc.x0, gc.z0), wy0 * wx0 * wz0},
      {flat(gc.y0, gc.x0, gc.z1), wy0 * wx0 * wz1},
      {flat(gc.y0, gc.x1, gc.z0), wy0 * wx1 * wz0},
      {flat(gc.y0, gc.x1, gc.z1), wy0 * wx1 * wz1},
      {flat(gc.y1, gc.x0, gc.z0), wy1 * wx0 * wz0},
      {flat(gc.y1, gc.x0, gc.z1), wy1 * wx0 * wz1},
      {flat(gc.y1, gc.x1, gc.z0), wy1 * wx1 * wz0},
      {flat(gc.y1, gc.x1, gc.z1), wy1 * wx1 * wz1},
  }};
}

namespace {

// Trilinear interpolation of `pcount` consecutive values per vertex,
// structured as nested lerps so constant neighborhoods interpolate exactly.
inline void interpolate_vertex(const float* params, const GridCoord& gc,
                               int w_s, int d, int pcount, double* out) {
  auto base = [&](int y, int x, int z) {
    return ((size_t(y) * w_s + x) * d + z) * pcount;
  };
  const size_t v000 = base(gc.y0, gc.x0, gc.z0);
  const size_t v001 = base(gc.y0, gc.x0, gc.z1);
  const size_t v010 = base(gc.y0, gc.x1, gc.z0);
  const size_t v011 = base(gc.y0, gc.x1, gc.z1);
  const size_t v100 = base(gc.y1, gc.x0, gc.z0);
  const size_t v101 = base(gc.y1, gc.x0, gc.z1);
  const size_t v110 = base(gc.y1, gc.x1, gc.z0);
  const size_t v111 = base(gc.y1, gc.x1, gc.z1);
  for (int p = 0; p < pcount; ++p) {
    double c00 = lerp(params[v000 + p], params[v001 + p], gc.fz);
    double c01 = lerp(params[v010 + p], params[v011 + p], gc.fz);
    double c10 = lerp(params[v100 + p], params[v101 + p], gc.fz);
    double c11 = lerp(params[v110 + p], params[v111 + p], gc.fz);
    double c0 = lerp(c00, c01, gc.fx);
    double c1 = lerp(c10, c11, gc.fx);
    out[p] = lerp(c0, c1, gc.fy);
  }
}

}  // namespace

std::vector<double> slice_params(const BilateralGrid& grid, const Image& img) {
  check_grid_dims(grid.h_s, grid.w_s, grid.d);
  check_finite(grid.params, "slice_params");
  std::vector<double> out(img.pixel_count() * 12);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      size_t px = size_t(y) * img.width + x;
      double luma = luminance(img.data[px * 3], img.data[px * 3 + 1], img.data[px * 3 + 2]);
      GridCoord gc = grid_coord(y, x, luma, img.height, img.width, grid.h_s, grid.w_s, grid.d);
      interpolate_vertex(grid.params.data(), gc, grid.w_s, grid.d, 12, out.data() + px * 12);
    }
  }
  return out;
}

Image slice_affine(const BilateralGrid& grid, const Image& img) {
  check_grid_dims(grid.h_s, grid.w_s, grid.d);
  check_finite(grid.params, "slice_affine");
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      size_t px = size_t(y) * img.width + x;
      const double r = img.data[px * 3], g = img.data[px * 3 + 1], b = img.data[px * 3 + 2];
      GridCoord gc = grid_coord(y, x, luminance(r, g, b), img.height, img.width,
                                grid.h_s, grid.w_s, grid.d);
      double theta[12];
      interpolate_vertex(grid.params.data(), gc, grid.w_s, grid.d, 12, theta);
      for (int c = 0; c < 3; ++c) {
        out.data[px * 3 + c] =
            theta[4 * c] * r + theta[4 * c + 1] * g + theta[4 * c + 2] * b + theta[4 * c + 3];
      }
    }
  }
  return out;
}

ConfidenceMap slice_confidence(const ConfidenceGrid& grid, const Image& img) {
  check_grid_dims(grid.h_s, grid.w_s, grid.d);
  check_finite(grid.values, "slice_confidence");
  ConfidenceMap out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      size_t px = size_t(y) * img.width + x;
      double luma = luminance(img.data[px * 3], img.data[px * 3 + 1], img.data[px * 3 + 2]);
      GridCoord gc = grid_coord(y, x, luma, img.height, img.width, grid.h_s, grid.w_s, grid.d);
      double v;
      interpolate_vertex(grid.values.data(), gc, grid.w_s, grid.d, 1, &v);
      out.values[px] = std::exp(v);
    }
  }
  return out;
}

double tv_loss_raw(const float* params, int h_s, int w_s, int d, int pcount) {
  auto base = [&](int y, int x, int z) {
    return ((size_t(y) * w_s + x) * d + z) * pcount;
  };
  auto pair_sq = [&](size_t a, size_t b) {
    double s = 0.0;
    for (int p = 0; p < pcount; ++p) {
      double diff = double(params[a + p]) - double(params[b + p]);
      s += diff * diff;
    }
    return s;
  };
  double total = 0.0;
  // height axis
  if (h_s > 1) {
    double s = 0.0;
    for (int y = 0; y + 1 < h_s; ++y)
      for (int x = 0; x < w_s; ++x)
        for (int z = 0; z < d; ++z) s += pair_sq(base(y, x, z), base(y + 1, x, z));
    total += s / (double(h_s - 1) * w_s * d);
  }
  // width axis
  if (w_s > 1) {
    double s = 0.0;
    for (int y = 0; y < h_s; ++y)
      for (int x = 0; x + 1 < w_s; ++x)
        for (int z = 0; z < d; ++z) s += pair_sq(base(y, x, z), base(y, x + 1, z));
    total += s / (double(h_s) * (w_s - 1) * d);
  }
  // guidance axis
  if (d > 1) {
    double s = 0.0;
    for (int y = 0; y < h_s; ++y)
      for (int x = 0; x < w_s; ++x)
        for (int z = 0; z + 1 < d; ++z) s += pair_sq(base(y, x, z), base(y, x, z + 1));
    total += s / (double(h_s) * w_s * (d - 1));
  }
  return total;
}

double tv_loss(const BilateralGrid& grid) {
  return tv_loss_raw(grid.params.data(), grid.h_s, grid.w_s, grid.d, 12);
}

double tv_loss(const ConfidenceGrid& grid) {
  return tv_loss_raw(grid.values.data(), grid.h_s, grid.w_s, grid.d, 1);
}

}  // namespace mvharm
