#include "mvharm/grid_fit.hpp"

#include <cmath>
#include <memory>
#include <stdexcept>

#include "mvharm/autodiff.hpp"
#include "mvharm/diffops.hpp"
#include "mvharm/optim.hpp"

namespace mvharm {

namespace {

constexpr double kSaturated = 0.999;

// (H*W) x 3 mask, 0 where either image has a near-clamped channel.
std::vector<double> saturation_mask(const Image& src, const Image& tgt, size_t* kept) {
  std::vector<double> mask(src.data.size(), 1.0);
  size_t n = 0;
  for (size_t px = 0; px < src.pixel_count(); ++px) {
    bool sat = false;
    for (int c = 0; c < 3; ++c) {
      if (src.data[px * 3 + c] >= kSaturated || tgt.data[px * 3 + c] >= kSaturated) {
        sat = true;
        break;
      }
    }
    if (sat) {
      mask[px * 3] = mask[px * 3 + 1] = mask[px * 3 + 2] = 0.0;
    } else {
      ++n;
    }
  }
  *kept = n;
  return mask;
}

}  // namespace

double saturation_fraction(const Image& source, const Image& target) {
  size_t kept = 0;
  saturation_mask(source, target, &kept);
  return 1.0 - double(kept) / double(source.pixel_count());
}

double masked_mae(const Image& a, const Image& b, const Image& mask_src,
                  const Image& mask_tgt) {
  size_t kept = 0;
  std::vector<double> mask = saturation_mask(mask_src, mask_tgt, &kept);
  if (kept == 0) return 0.0;
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    acc += mask[i] * std::abs(a.data[i] - b.data[i]);
  }
  return acc / (3.0 * double(kept));
}

FitResult fit_grid_pair(const Image& source, const Image& target,
                        const FitConfig& cfg) {
  if (!source.same_dims(target)) {
    throw std::invalid_argument("fit_grid_pair: dimension mismatch");
  }
  if (cfg.steps < 1 || cfg.lr <= 0.0 || cfg.lambda_tv < 0.0) {
    throw std::invalid_argument("fit_grid_pair: bad config");
  }

  auto fp = std::make_shared<const SliceFootprint>(
      compute_slice_footprint(source, cfg.h_s, cfg.w_s, cfg.d));

  size_t kept = 0;
  std::vector<double> mask = saturation_mask(source, target, &kept);
  const double data_scale = kept > 0 ? 1.0 / (3.0 * double(kept)) : 0.0;
  const int n = int(source.pixel_count());

  ad::Tensor grid = tensor_from_grid(identity_grid(cfg.h_s, cfg.w_s, cfg.d));
  ad::Tensor target_t = ad::Tensor::constant(target.data.data(), n, 3);
  ad::Tensor mask_t = ad::Tensor::constant(mask.data(), n, 3);

  AdamW adam(grid.size());
  FitResult result;
  result.loss_history.reserve(cfg.steps);
  for (int step = 0; step < cfg.steps; ++step) {
    grid.zero_grad();
    ad::Tensor out = slice_affine_ad(grid, fp);
    ad::Tensor data_term =
        ad::scale(ad::sum(ad::mul(mask_t, ad::abs_op(ad::sub(out, target_t)))), data_scale);
    ad::Tensor loss = ad::add(data_term,
                              ad::scale(tv_ad(grid, cfg.h_s, cfg.w_s, cfg.d), cfg.lambda_tv));
    result.loss_history.push_back(loss.item());
    ad::backward(loss);
    adam.step(grid.data(), grid.grad(), grid.size(), cfg.lr);
  }
  result.grid = grid_from_tensor(grid, cfg.h_s, cfg.w_s, cfg.d);
  return result;
}

}  // namespace mvharm
