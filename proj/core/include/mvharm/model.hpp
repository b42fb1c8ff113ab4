#pragma once

#include <functional>
#include <string>
#include <vector>

#include "mvharm/autodiff.hpp"
#include "mvharm/diffops.hpp"
#include "mvharm/grid.hpp"
#include "mvharm/image.hpp"

namespace mvharm {

struct ModelConfig {
  int image_h = 64, image_w = 64;
  int patch_h = 16, patch_w = 16;
  int embed_dim = 64;
  int heads = 4;
  int enc_blocks = 3;
  int dec_blocks = 3;
  int guidance_bins = 8;
  int mlp_ratio = 4;

  int patches_y() const { return image_h / patch_h; }
  int patches_x() const { return image_w / patch_w; }
  int patch_count() const { return patches_y() * patches_x(); }
  int patch_dim() const { return patch_h * patch_w * 3; }
  int head_out_dim() const { return guidance_bins * 13; }  // 12 affine + 1 log-conf per bin
  void validate() const;
};

// Plain row-major matrix for the non-differentiable public surface.
struct Mat {
  int rows = 0, cols = 0;
  std::vector<double> v;

  Mat() = default;
  Mat(int r, int c) : rows(r), cols(c), v(size_t(r) * c, 0.0) {}
  double& at(int r, int c) { return v[size_t(r) * cols + c]; }
  double at(int r, int c) const { return v[size_t(r) * cols + c]; }
};

// Token batch: rows are grouped by frame, n_frames * n_patches rows total.
struct TokenSequence {
  int n_frames = 0;
  int n_patches = 0;
  int channels = 0;
  Mat tokens;
};

struct LnParams {
  ad::Tensor gamma, beta;  // 1 x C
};
struct AttnParams {
  ad::Tensor wq, bq, wk, bk, wv, bv, wo, bo;  // C x C weights, 1 x C biases
};
struct MlpParams {
  ad::Tensor w1, b1, w2, b2;  // C x H, 1 x H, H x C, 1 x C
};
// Pre-norm residual unit: x += attn(LN1(x)); x += mlp(LN2(x)).
struct SubBlock {
  LnParams ln1;
  AttnParams attn;
  LnParams ln2;
  MlpParams mlp;
};

// All learnable state. Weights are N(0, 0.02), biases zero, layer norms
// unit/zero, and the final head layer zero so a fresh model is exactly the
// identity operator on every frame.
struct ModelParams {
  ModelConfig cfg;
  ad::Tensor embed_w, embed_b;  // patch_dim x C, 1 x C
  ad::Tensor pos_embed;         // J x C, shared across frames (no frame index)
  std::vector<SubBlock> enc_frame, enc_global;  // enc_blocks each
  std::vector<SubBlock> dec_self, dec_cross;    // dec_blocks each
  ad::Tensor head_w1, head_b1, head_w2, head_b2;  // C x C, 1 x C, C x 13D, 1 x 13D

  void for_each(const std::function<void(const std::string&, ad::Tensor&)>& fn);
  size_t parameter_count();
};

ModelParams init_params(const ModelConfig& cfg, uint64_t seed);
// Re-draws the final head layer with small random values; used by gradient
// checks, where the zero-initialized head would zero out upstream gradients.
void randomize_head(ModelParams& params, uint64_t seed);

// ---- Forward building blocks (plain-value public surface) ----

// Non-overlapping patches, row-major over the patch grid; within a patch
// row-major pixels, channels interleaved.
Mat patchify(const Image& img, const ModelConfig& cfg);
Image unpatchify(const Mat& patches, const ModelConfig& cfg);

// token_j = embed_w^T patch_j + embed_b + pos_embed_j
Mat embed(const Mat& patches, ModelParams& params);

// Multi-head scaled dot-product attention with q/k/v/output projections.
Mat attention(const Mat& queries, const Mat& keys_values, const AttnParams& p,
              int heads);

// enc_blocks repetitions of (frame-wise self-attention unit, global
// self-attention unit over all frames' tokens jointly).
TokenSequence encoder_forward(const TokenSequence& tokens, ModelParams& params);

// dec_blocks repetitions of (frame-wise self-attention unit, cross-attention
// unit with queries from each source frame and keys/values from the
// reference tokens).
TokenSequence decoder_forward(const Mat& ref_tokens, const TokenSequence& src_tokens,
                              ModelParams& params);

// Head output per token, reshaped into per-frame grids. The affine part is
// added to the identity transform; the last D values per token are
// log-confidence. Grid vertex (row, col) corresponds to patch (row, col).
std::vector<std::pair<BilateralGrid, ConfidenceGrid>> predict_grids(
    const TokenSequence& decoded, ModelParams& params);

// ---- Differentiable full pipeline ----

struct ForwardGrids {
  std::vector<ad::Tensor> affine;  // per source frame, (h_s*w_s*d) x 12
  std::vector<ad::Tensor> conf;    // per source frame, (h_s*w_s*d) x 1
};

// frames[0] is the reference; all frames must already be at model
// resolution. Gradients flow to every parameter.
ForwardGrids model_forward(const std::vector<Image>& frames, ModelParams& params);

// ---- Inference ----

struct HarmonizeResult {
  std::vector<Image> harmonized;  // unclamped
  std::vector<ConfidenceMap> confidence;
  std::vector<BilateralGrid> grids;
  std::vector<ConfidenceGrid> conf_grids;
};

// Resizes inputs to model resolution for the network, then slices the
// predicted grids against the original full-resolution sources.
HarmonizeResult harmonize_sequence(const Image& ref, const std::vector<Image>& sources,
                                   ModelParams& params);

// ---- Checkpoint format ----
// magic "BGTX" | u32 version=1 | 10 u32 config fields | per tensor:
// u32 name length, name bytes, u32 rank, u32 dims, f32 LE data.
void save_checkpoint(ModelParams& params, const std::string& path);
ModelParams load_checkpoint(const std::string& path);

}  // namespace mvharm
