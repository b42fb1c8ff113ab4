#include "mvharm/diffops.hpp"

#include <cmath>
#include <stdexcept>

#include "mvharm/common.hpp"

namespace mvharm {

SliceFootprint compute_slice_footprint(const Image& img, int h_s, int w_s, int d) {
  if (h_s < 1 || w_s < 1 || d < 2) {
    throw std::invalid_argument("compute_slice_footprint: bad grid dims");
  }
  SliceFootprint fp;
  fp.img_h = img.height;
  fp.img_w = img.width;
  fp.h_s = h_s;
  fp.w_s = w_s;
  fp.d = d;
  const size_t n = img.pixel_count();
  fp.vertex.resize(n * 8);
  fp.weight.resize(n * 8);
  fp.rgb.assign(img.data.begin(), img.data.end());
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      size_t px = size_t(y) * img.width + x;
      double luma = luminance(img.data[px * 3], img.data[px * 3 + 1], img.data[px * 3 + 2]);
      GridCoord gc = grid_coord(y, x, luma, img.height, img.width, h_s, w_s, d);
      auto vw = vertex_weights(gc, w_s, d);
      for (int k = 0; k < 8; ++k) {
        fp.vertex[px * 8 + k] = int32_t(vw[k].first);
        fp.weight[px * 8 + k] = vw[k].second;
      }
    }
  }
  return fp;
}

ad::Tensor slice_affine_ad(const ad::Tensor& grid,
                           std::shared_ptr<const SliceFootprint> fp) {
  if (grid.cols() != 12 ||
      grid.rows() != fp->h_s * fp->w_s * fp->d) {
    throw std::invalid_argument("slice_affine_ad: grid shape mismatch");
  }
  const int n = int(fp->pixel_count());
  ad::Tensor out = ad::make_op(n, 3, {grid}, [fp, n](ad::Node& self) {
    auto& ng = *self.inputs[0];
    if (!ng.requires_grad) return;
    double* g = ng.grad_data();
    // Scatter into grid parameters; serial per frame (frames run in
    // parallel at the batch level, each into its own grid).
    for (int px = 0; px < n; ++px) {
      const double r = fp->rgb[size_t(px) * 3];
      const double gg = fp->rgb[size_t(px) * 3 + 1];
      const double bb = fp->rgb[size_t(px) * 3 + 2];
      const double* go = self.grad.data() + size_t(px) * 3;
      for (int k = 0; k < 8; ++k) {
        const double w = fp->weight[size_t(px) * 8 + k];
        if (w == 0.0) continue;
        double* vp = g + size_t(fp->vertex[size_t(px) * 8 + k]) * 12;
        for (int c = 0; c < 3; ++c) {
          const double gw = go[c] * w;
          vp[4 * c + 0] += gw * r;
          vp[4 * c + 1] += gw * gg;
          vp[4 * c + 2] += gw * bb;
          vp[4 * c + 3] += gw;
        }
      }
    }
  });
  const double* pg = grid.data();
  double* po = out.data();
  parallel_for(n, 2048, [&](int64_t lo, int64_t hi) {
    for (int64_t px = lo; px < hi; ++px) {
      double theta[12] = {0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0, 0};
      for (int k = 0; k < 8; ++k) {
        const double w = fp->weight[size_t(px) * 8 + k];
        const double* vp = pg + size_t(fp->vertex[size_t(px) * 8 + k]) * 12;
        for (int p = 0; p < 12; ++p) theta[p] += w * vp[p];
      }
      const double r = fp->rgb[size_t(px) * 3];
      const double g = fp->rgb[size_t(px) * 3 + 1];
      const double b = fp->rgb[size_t(px) * 3 + 2];
      for (int c = 0; c < 3; ++c) {
        po[size_t(px) * 3 + c] =
            theta[4 * c] * r + theta[4 * c + 1] * g + theta[4 * c + 2] * b + theta[4 * c + 3];
      }
    }
  });
  return out;
}

ad::Tensor slice_value_ad(const ad::Tensor& grid,
                          std::shared_ptr<const SliceFootprint> fp) {
  if (grid.cols() != 1 || grid.rows() != fp->h_s * fp->w_s * fp->d) {
    throw std::invalid_argument("slice_value_ad: grid shape mismatch");
  }
  const int n = int(fp->pixel_count());
  ad::Tensor out = ad::make_op(n, 1, {grid}, [fp, n](ad::Node& self) {
    auto& ng = *self.inputs[0];
    if (!ng.requires_grad) return;
    double* g = ng.grad_data();
    for (int px = 0; px < n; ++px) {
      const double go = self.grad[px];
      for (int k = 0; k < 8; ++k) {
        g[fp->vertex[size_t(px) * 8 + k]] += go * fp->weight[size_t(px) * 8 + k];
      }
    }
  });
  const double* pg = grid.data();
  double* po = out.data();
  parallel_for(n, 4096, [&](int64_t lo, int64_t hi) {
    for (int64_t px = lo; px < hi; ++px) {
      double acc = 0.0;
      for (int k = 0; k < 8; ++k) {
        acc += fp->weight[size_t(px) * 8 + k] * pg[fp->vertex[size_t(px) * 8 + k]];
      }
      po[px] = acc;
    }
  });
  return out;
}

ad::Tensor tv_ad(const ad::Tensor& grid, int h_s, int w_s, int d) {
  const int p = grid.cols();
  if (grid.rows() != h_s * w_s * d) {
    throw std::invalid_argument("tv_ad: grid shape mismatch");
  }
  auto base = [w_s, d, p](int y, int x, int z) {
    return ((size_t(y) * w_s + x) * d + z) * p;
  };
  struct Axis {
    double norm;
    int dy, dx, dz;
    int ny, nx, nz;  // iteration extents
  };
  std::vector<Axis> axes;
  if (h_s > 1) axes.push_back({1.0 / (double(h_s - 1) * w_s * d), 1, 0, 0, h_s - 1, w_s, d});
  if (w_s > 1) axes.push_back({1.0 / (double(h_s) * (w_s - 1) * d), 0, 1, 0, h_s, w_s - 1, d});
  if (d > 1) axes.push_back({1.0 / (double(h_s) * w_s * (d - 1)), 0, 0, 1, h_s, w_s, d - 1});

  ad::Tensor out = ad::make_op(1, 1, {grid}, [axes, base, p](ad::Node& self) {
    auto& ng = *self.inputs[0];
    if (!ng.requires_grad) return;
    double* g = ng.grad_data();
    const double go = self.grad[0];
    for (const Axis& ax : axes) {
      const double coef = 2.0 * go * ax.norm;
      for (int y = 0; y < ax.ny; ++y) {
        for (int x = 0; x < ax.nx; ++x) {
          for (int z = 0; z < ax.nz; ++z) {
            size_t a = base(y, x, z);
            size_t b = base(y + ax.dy, x + ax.dx, z + ax.dz);
            for (int q = 0; q < p; ++q) {
              double diff = ng.value[a + q] - ng.value[b + q];
              g[a + q] += coef * diff;
              g[b + q] -= coef * diff;
            }
          }
        }
      }
    }
  });
  double total = 0.0;
  const double* pg = grid.data();
  for (const Axis& ax : axes) {
    double s = 0.0;
    for (int y = 0; y < ax.ny; ++y) {
      for (int x = 0; x < ax.nx; ++x) {
        for (int z = 0; z < ax.nz; ++z) {
          size_t a = base(y, x, z);
          size_t b = base(y + ax.dy, x + ax.dx, z + ax.dz);
          for (int q = 0; q < p; ++q) {
            double diff = pg[a + q] - pg[b + q];
            s += diff * diff;
          }
        }
      }
    }
    total += s * ax.norm;
  }
  out.data()[0] = total;
  return out;
}

ad::Tensor tensor_from_grid(const BilateralGrid& g, bool requires_grad) {
  ad::Tensor t = ad::Tensor::leaf(int(g.vertex_count()), 12, requires_grad);
  for (size_t i = 0; i < g.params.size(); ++i) t.data()[i] = double(g.params[i]);
  return t;
}

BilateralGrid grid_from_tensor(const ad::Tensor& t, int h_s, int w_s, int d) {
  BilateralGrid g(h_s, w_s, d);
  if (t.size() != g.params.size()) {
    throw std::invalid_argument("grid_from_tensor: size mismatch");
  }
  for (size_t i = 0; i < g.params.size(); ++i) g.params[i] = float(t.data()[i]);
  return g;
}

ConfidenceGrid confidence_grid_from_tensor(const ad::Tensor& t, int h_s, int w_s, int d) {
  ConfidenceGrid g(h_s, w_s, d);
  if (t.size() != g.values.size()) {
    throw std::invalid_argument("confidence_grid_from_tensor: size mismatch");
  }
  for (size_t i = 0; i < g.values.size(); ++i) g.values[i] = float(t.data()[i]);
  return g;
}

}  // namespace mvharm
