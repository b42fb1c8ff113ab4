#pragma once

#include <utility>
#include <vector>

#include "mvharm/grid.hpp"
#include "mvharm/image.hpp"

namespace mvharm {

// Joint min-max normalization over the whole set of maps. All values map
// to 1 when the set is constant.
std::vector<ConfidenceMap> normalize_confidences(const std::vector<ConfidenceMap>& maps);

// Per-image mean and biased variance of a normalized map.
std::pair<double, double> confidence_stats(const ConfidenceMap& map);

// Values at or above mu - sigma^2 become 1; values below keep their own
// confidence (floored at 1e-6 so weights stay strictly positive).
ConfidenceMap soft_threshold(const ConfidenceMap& map, double mu, double sigma2);

// mean over pixels of weight * sum_channels |target - render|. Weights are
// constants; no gradient flows through them.
double weighted_recon_loss(const Image& render, const Image& target,
                           const ConfidenceMap& weights);

int stage1_step_count(int iters, double weighted_fraction);

struct ReconResult {
  Image latent;
  Image latent_stage1;  // snapshot when the weighted stage ends
  std::vector<double> loss_history;
  int stage1_steps = 0;
};

// Fits a single latent image to the (aligned) frames by Adam (lr 0.05),
// starting from the per-pixel median. The first weighted_fraction of the
// iterations uses the confidence-weighted loss, the remainder plain L1.
ReconResult toy_reconstruct(const std::vector<Image>& frames,
                            const std::vector<ConfidenceMap>& weights, int iters,
                            double weighted_fraction);

}  // namespace mvharm
