#include "mvharm/uncertainty.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mvharm/optim.hpp"

namespace mvharm {

std::vector<ConfidenceMap> normalize_confidences(const std::vector<ConfidenceMap>& maps) {
  if (maps.empty()) throw std::invalid_argument("normalize_confidences: empty set");
  double lo = maps[0].values[0], hi = lo;
  for (const ConfidenceMap& m : maps) {
    for (double v : m.values) {
      if (!std::isfinite(v)) throw std::invalid_argument("normalize_confidences: non-finite");
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
  }
  std::vector<ConfidenceMap> out = maps;
  if (hi == lo) {
    for (ConfidenceMap& m : out) {
      std::fill(m.values.begin(), m.values.end(), 1.0);
    }
    return out;
  }
  const double inv = 1.0 / (hi - lo);
  for (ConfidenceMap& m : out) {
    for (double& v : m.values) v = (v - lo) * inv;
  }
  return out;
}

std::pair<double, double> confidence_stats(const ConfidenceMap& map) {
  const size_t n = map.values.size();
  double mu = 0.0;
  for (double v : map.values) mu += v;
  mu /= double(n);
  double var = 0.0;
  for (double v : map.values) var += (v - mu) * (v - mu);
  var /= double(n);
  return {mu, var};
}

ConfidenceMap soft_threshold(const ConfidenceMap& map, double mu, double sigma2) {
  const double thr = mu - sigma2;
  ConfidenceMap out = map;
  for (double& v : out.values) {
    v = v >= thr ? 1.0 : std::max(v, 1e-6);
  }
  return out;
}

double weighted_recon_loss(const Image& render, const Image& target,
                           const ConfidenceMap& weights) {
  if (!render.same_dims(target) || weights.height != render.height ||
      weights.width != render.width) {
    throw std::invalid_argument("weighted_recon_loss: shape mismatch");
  }
  double acc = 0.0;
  for (size_t px = 0; px < render.pixel_count(); ++px) {
    double l1 = 0.0;
    for (int c = 0; c < 3; ++c) {
      l1 += std::abs(target.data[px * 3 + c] - render.data[px * 3 + c]);
    }
    acc += weights.values[px] * l1;
  }
  return acc / double(render.pixel_count());
}

int stage1_step_count(int iters, double weighted_fraction) {
  return int(std::ceil(weighted_fraction * iters));
}

namespace {

Image pixel_median(const std::vector<Image>& frames) {
  Image out(frames[0].height, frames[0].width);
  std::vector<double> vals(frames.size());
  for (size_t i = 0; i < out.data.size(); ++i) {
    for (size_t f = 0; f < frames.size(); ++f) vals[f] = frames[f].data[i];
    std::sort(vals.begin(), vals.end());
    const size_t n = vals.size();
    out.data[i] = n % 2 == 1 ? vals[n / 2] : 0.5 * (vals[n / 2 - 1] + vals[n / 2]);
  }
  return out;
}

}  // namespace

ReconResult toy_reconstruct(const std::vector<Image>& frames,
                            const std::vector<ConfidenceMap>& weights, int iters,
                            double weighted_fraction) {
  if (frames.empty()) throw std::invalid_argument("toy_reconstruct: no frames");
  if (weights.size() != frames.size()) {
    throw std::invalid_argument("toy_reconstruct: weights/frames count mismatch");
  }
  for (const Image& f : frames) {
    if (!f.same_dims(frames[0])) {
      throw std::invalid_argument("toy_reconstruct: frame dim mismatch");
    }
  }
  if (weighted_fraction <= 0.0 || weighted_fraction > 1.0) {
    throw std::invalid_argument("toy_reconstruct: weighted_fraction outside (0,1]");
  }

  ReconResult result;
  result.stage1_steps = stage1_step_count(iters, weighted_fraction);
  Image latent = pixel_median(frames);
  result.latent_stage1 = latent;

  const size_t n = latent.data.size();
  const double pix_inv = 1.0 / double(latent.pixel_count());
  std::vector<double> grad(n);
  AdamW adam(n);
  for (int step = 0; step < iters; ++step) {
    const bool weighted = step < result.stage1_steps;
    std::fill(grad.begin(), grad.end(), 0.0);
    double loss = 0.0;
    for (size_t f = 0; f < frames.size(); ++f) {
      const Image& img = frames[f];
      for (size_t px = 0; px < latent.pixel_count(); ++px) {
        const double w = weighted ? weights[f].values[px] : 1.0;
        for (int c = 0; c < 3; ++c) {
          const double diff = latent.data[px * 3 + c] - img.data[px * 3 + c];
          loss += w * std::abs(diff) * pix_inv;
          const double s = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
          grad[px * 3 + c] += w * s * pix_inv;
        }
      }
    }
    result.loss_history.push_back(loss);
    adam.step(latent.data.data(), grad.data(), n, 0.05);
    if (step + 1 == result.stage1_steps) result.latent_stage1 = latent;
  }
  result.latent = std::move(latent);
  return result;
}

}  // namespace mvharm
