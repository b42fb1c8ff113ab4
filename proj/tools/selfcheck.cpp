// Built-in sanity checks: slicing vs a direct 8-vertex enumeration, finite
// difference gradient checks, and the soft-threshold truth table.

#include <cmath>
#include <cstdio>
#include <memory>
#include <vector>

#include "mvharm/autodiff.hpp"
#include "mvharm/common.hpp"
#include "mvharm/diffops.hpp"
#include "mvharm/grid.hpp"
#include "mvharm/model.hpp"
#include "mvharm/train.hpp"
#include "mvharm/uncertainty.hpp"

namespace mvharm {

namespace {

// Straight-line trilinear enumeration, written independently of the grid
// module's nested-lerp implementation.
void enumerate_slice(const BilateralGrid& grid, const Image& img, int y, int x,
                     double out[3]) {
  size_t px = size_t(y) * img.width + x;
  double r = img.data[px * 3], g = img.data[px * 3 + 1], b = img.data[px * 3 + 2];
  double luma = 0.2126 * r + 0.7152 * g + 0.0722 * b;
  double gy = (y + 0.5) / img.height * grid.h_s - 0.5;
  double gx = (x + 0.5) / img.width * grid.w_s - 0.5;
  gy = std::fmin(std::fmax(gy, 0.0), double(grid.h_s - 1));
  gx = std::fmin(std::fmax(gx, 0.0), double(grid.w_s - 1));
  double gz = std::fmin(std::fmax(luma, 0.0), 1.0) * (grid.d - 1);
  int y0 = int(gy), x0 = int(gx), z0 = int(gz);
  int y1 = std::min(y0 + 1, grid.h_s - 1);
  int x1 = std::min(x0 + 1, grid.w_s - 1);
  int z1 = std::min(z0 + 1, grid.d - 1);
  double fy = gy - y0, fx = gx - x0, fz = gz - z0;
  double theta[12] = {0};
  const int ys[2] = {y0, y1}, xs[2] = {x0, x1}, zs[2] = {z0, z1};
  const double wy[2] = {1 - fy, fy}, wx[2] = {1 - fx, fx}, wz[2] = {1 - fz, fz};
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      for (int k = 0; k < 2; ++k) {
        double w = wy[i] * wx[j] * wz[k];
        for (int p = 0; p < 12; ++p) {
          theta[p] += w * grid.params[grid.index(ys[i], xs[j], zs[k], p)];
        }
      }
    }
  }
  for (int c = 0; c < 3; ++c) {
    out[c] = theta[4 * c] * r + theta[4 * c + 1] * g + theta[4 * c + 2] * b + theta[4 * c + 3];
  }
}

bool check(bool ok, const char* what) {
  std::printf("[%s] selfcheck: %s\n", ok ? "PASS" : "FAIL", what);
  return ok;
}

Image random_image(Rng& rng, int h, int w) {
  Image img(h, w);
  for (double& v : img.data) v = rng.uniform();
  return img;
}

}  // namespace

int run_selfcheck(int cases) {
  bool all = true;
  Rng rng(20240801);

  {  // slicing vs enumeration
    double worst = 0.0;
    for (int t = 0; t < cases; ++t) {
      BilateralGrid grid(2 + int(rng.next_u64() % 3), 2 + int(rng.next_u64() % 3),
                         2 + int(rng.next_u64() % 3));
      for (float& p : grid.params) p = float(rng.uniform(-1.5, 1.5));
      Image img = random_image(rng, 6, 7);
      Image sliced = slice_affine(grid, img);
      int y = int(rng.next_u64() % 6), x = int(rng.next_u64() % 7);
      double expect[3];
      enumerate_slice(grid, img, y, x, expect);
      for (int c = 0; c < 3; ++c) {
        worst = std::fmax(worst, std::fabs(sliced.at(y, x, c) - expect[c]));
      }
    }
    all &= check(worst < 1e-6, "slicing matches direct trilinear enumeration");
  }

  {  // slice gradient vs central differences
    Image img = random_image(rng, 4, 4);
    auto fp = std::make_shared<const SliceFootprint>(compute_slice_footprint(img, 2, 2, 2));
    ad::Tensor grid = tensor_from_grid(identity_grid(2, 2, 2));
    for (size_t i = 0; i < grid.size(); ++i) grid.data()[i] += 0.3 * rng.normal();
    std::vector<double> coeffs(img.pixel_count() * 3);
    for (double& c : coeffs) c = rng.uniform(-1.0, 1.0);
    ad::Tensor coef = ad::Tensor::constant(coeffs, int(img.pixel_count()), 3);
    auto loss_fn = [&]() {
      return ad::sum(ad::mul(coef, slice_affine_ad(grid, fp)));
    };
    double err = finite_diff_check({grid}, loss_fn, sample_fd_coords({grid}, 24, 1), 1e-4);
    all &= check(err < 1e-4, "slice gradient matches finite differences");
  }

  {  // tv gradient
    ad::Tensor grid = ad::Tensor::leaf(2 * 3 * 2, 12);
    for (size_t i = 0; i < grid.size(); ++i) grid.data()[i] = rng.normal();
    auto loss_fn = [&]() { return tv_ad(grid, 2, 3, 2); };
    double err = finite_diff_check({grid}, loss_fn, sample_fd_coords({grid}, 24, 2), 1e-4);
    all &= check(err < 1e-4, "tv gradient matches finite differences");
  }

  {  // tiny model end-to-end
    ModelConfig cfg;
    cfg.image_h = cfg.image_w = 16;
    cfg.patch_h = cfg.patch_w = 8;
    cfg.embed_dim = 16;
    cfg.heads = 2;
    cfg.enc_blocks = 1;
    cfg.dec_blocks = 1;
    cfg.guidance_bins = 4;
    ModelParams params = init_params(cfg, 7);
    randomize_head(params, 8);
    std::vector<Image> frames = {random_image(rng, 16, 16), random_image(rng, 16, 16),
                                 random_image(rng, 16, 16)};
    std::vector<Image> sources(frames.begin() + 1, frames.end());
    std::vector<Image> targets = {random_image(rng, 16, 16), random_image(rng, 16, 16)};
    std::vector<ad::Tensor> tensors;
    params.for_each([&](const std::string&, ad::Tensor& t) { tensors.push_back(t); });
    auto loss_fn = [&]() {
      ForwardGrids g = model_forward(frames, params);
      return batch_loss_ad(g, sources, targets, cfg, 0.1, 1e-3).total;
    };
    double err = finite_diff_check(tensors, loss_fn, sample_fd_coords(tensors, 2, 3), 1e-4);
    all &= check(err < 1e-3, "model gradient matches finite differences");
  }

  {  // soft-threshold truth table
    ConfidenceMap constant(2, 2);
    std::fill(constant.values.begin(), constant.values.end(), 0.4);
    auto [mu_c, var_c] = confidence_stats(constant);
    ConfidenceMap thr_c = soft_threshold(constant, mu_c, var_c);
    bool ones = true;
    for (double v : thr_c.values) ones &= v == 1.0;

    ConfidenceMap two(1, 2);
    two.values = {0.2, 0.8};
    ConfidenceMap thr2 = soft_threshold(two, 0.5, 0.09);
    all &= check(ones && thr2.values[0] == 0.2 && thr2.values[1] == 1.0,
                 "soft-threshold truth table");
  }

  std::printf("selfcheck: %s\n", all ? "all checks passed" : "FAILURES detected");
  return all ? 0 : 2;
}

}  // namespace mvharm
