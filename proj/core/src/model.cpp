#include "mvharm/model.hpp"

#include <cmath>
#include <cstring>
#include <map>
#include <stdexcept>

#include "mvharm/common.hpp"
#include "mvharm/io.hpp"

namespace mvharm {

void ModelConfig::validate() const {
  if (image_h <= 0 || image_w <= 0 || patch_h <= 0 || patch_w <= 0) {
    throw std::invalid_argument("ModelConfig: non-positive dims");
  }
  if (image_h % patch_h != 0 || image_w % patch_w != 0) {
    throw std::invalid_argument("ModelConfig: image dims not divisible by patch dims");
  }
  if (embed_dim <= 0 || heads <= 0 || embed_dim % heads != 0) {
    throw std::invalid_argument("ModelConfig: embed_dim must be divisible by heads");
  }
  if (enc_blocks < 1 || dec_blocks < 1 || guidance_bins < 2 || mlp_ratio < 1) {
    throw std::invalid_argument("ModelConfig: bad block/bin counts");
  }
}

namespace {

ad::Tensor normal_tensor(Rng& rng, int rows, int cols, double stddev) {
  ad::Tensor t = ad::Tensor::leaf(rows, cols);
  for (size_t i = 0; i < t.size(); ++i) t.data()[i] = stddev * rng.normal();
  return t;
}

ad::Tensor const_tensor(int rows, int cols, double fill, bool requires_grad = true) {
  ad::Tensor t = ad::Tensor::leaf(rows, cols, requires_grad);
  std::fill(t.data(), t.data() + t.size(), fill);
  return t;
}

SubBlock init_sub_block(Rng& rng, int c, int hidden) {
  constexpr double kStd = 0.02;
  SubBlock b;
  b.ln1 = {const_tensor(1, c, 1.0), const_tensor(1, c, 0.0)};
  b.attn = {normal_tensor(rng, c, c, kStd), const_tensor(1, c, 0.0),
            normal_tensor(rng, c, c, kStd), const_tensor(1, c, 0.0),
            normal_tensor(rng, c, c, kStd), const_tensor(1, c, 0.0),
            normal_tensor(rng, c, c, kStd), const_tensor(1, c, 0.0)};
  b.ln2 = {const_tensor(1, c, 1.0), const_tensor(1, c, 0.0)};
  b.mlp = {normal_tensor(rng, c, hidden, kStd), const_tensor(1, hidden, 0.0),
           normal_tensor(rng, hidden, c, kStd), const_tensor(1, c, 0.0)};
  return b;
}

ad::Tensor tensor_from_mat(const Mat& m, bool requires_grad = false) {
  ad::Tensor t = ad::Tensor::leaf(m.rows, m.cols, requires_grad);
  std::copy(m.v.begin(), m.v.end(), t.data());
  return t;
}

Mat mat_from_tensor(const ad::Tensor& t) {
  Mat m(t.rows(), t.cols());
  std::copy(t.data(), t.data() + t.size(), m.v.begin());
  return m;
}

}  // namespace

ModelParams init_params(const ModelConfig& cfg, uint64_t seed) {
  cfg.validate();
  constexpr double kStd = 0.02;
  Rng rng(mix_seed(seed, 0xd0de1));
  const int c = cfg.embed_dim;
  const int hidden = c * cfg.mlp_ratio;
  ModelParams p;
  p.cfg = cfg;
  p.embed_w = normal_tensor(rng, cfg.patch_dim(), c, kStd);
  p.embed_b = const_tensor(1, c, 0.0);
  p.pos_embed = normal_tensor(rng, cfg.patch_count(), c, kStd);
  for (int i = 0; i < cfg.enc_blocks; ++i) {
    p.enc_frame.push_back(init_sub_block(rng, c, hidden));
    p.enc_global.push_back(init_sub_block(rng, c, hidden));
  }
  for (int i = 0; i < cfg.dec_blocks; ++i) {
    p.dec_self.push_back(init_sub_block(rng, c, hidden));
    p.dec_cross.push_back(init_sub_block(rng, c, hidden));
  }
  p.head_w1 = normal_tensor(rng, c, c, kStd);
  p.head_b1 = const_tensor(1, c, 0.0);
  // Zero final layer: a fresh model predicts exactly identity grids.
  p.head_w2 = const_tensor(c, cfg.head_out_dim(), 0.0);
  p.head_b2 = const_tensor(1, cfg.head_out_dim(), 0.0);
  return p;
}

void randomize_head(ModelParams& params, uint64_t seed) {
  Rng rng(mix_seed(seed, 0xead));
  for (size_t i = 0; i < params.head_w2.size(); ++i) {
    params.head_w2.data()[i] = 0.02 * rng.normal();
  }
  for (size_t i = 0; i < params.head_b2.size(); ++i) {
    params.head_b2.data()[i] = 0.02 * rng.normal();
  }
}

void ModelParams::for_each(
    const std::function<void(const std::string&, ad::Tensor&)>& fn) {
  fn("embed.weight", embed_w);
  fn("embed.bias", embed_b);
  fn("pos_embed", pos_embed);
  auto visit_block = [&](const std::string& prefix, SubBlock& b) {
    fn(prefix + ".ln1.gamma", b.ln1.gamma);
    fn(prefix + ".ln1.beta", b.ln1.beta);
    fn(prefix + ".attn.wq", b.attn.wq);
    fn(prefix + ".attn.bq", b.attn.bq);
    fn(prefix + ".attn.wk", b.attn.wk);
    fn(prefix + ".attn.bk", b.attn.bk);
    fn(prefix + ".attn.wv", b.attn.wv);
    fn(prefix + ".attn.bv", b.attn.bv);
    fn(prefix + ".attn.wo", b.attn.wo);
    fn(prefix + ".attn.bo", b.attn.bo);
    fn(prefix + ".ln2.gamma", b.ln2.gamma);
    fn(prefix + ".ln2.beta", b.ln2.beta);
    fn(prefix + ".mlp.w1", b.mlp.w1);
    fn(prefix + ".mlp.b1", b.mlp.b1);
    fn(prefix + ".mlp.w2", b.mlp.w2);
    fn(prefix + ".mlp.b2", b.mlp.b2);
  };
  for (size_t i = 0; i < enc_frame.size(); ++i) {
    visit_block("enc." + std::to_string(i) + ".frame", enc_frame[i]);
    visit_block("enc." + std::to_string(i) + ".global", enc_global[i]);
  }
  for (size_t i = 0; i < dec_self.size(); ++i) {
    visit_block("dec." + std::to_string(i) + ".self", dec_self[i]);
    visit_block("dec." + std::to_string(i) + ".cross", dec_cross[i]);
  }
  fn("head.w1", head_w1);
  fn("head.b1", head_b1);
  fn("head.w2", head_w2);
  fn("head.b2", head_b2);
}

size_t ModelParams::parameter_count() {
  size_t n = 0;
  for_each([&](const std::string&, ad::Tensor& t) { n += t.size(); });
  return n;
}

// ---------------------------------------------------------------------------
// Forward blocks (differentiable)

namespace {

ad::Tensor mha_ad(const ad::Tensor& q_in, const ad::Tensor& kv_in,
                  const AttnParams& p, int heads) {
  const int c = q_in.cols();
  const int dh = c / heads;
  const double scl = 1.0 / std::sqrt(double(dh));
  ad::Tensor q = ad::add_rowvec(ad::matmul(q_in, p.wq), p.bq);
  ad::Tensor k = ad::add_rowvec(ad::matmul(kv_in, p.wk), p.bk);
  ad::Tensor v = ad::add_rowvec(ad::matmul(kv_in, p.wv), p.bv);
  std::vector<ad::Tensor> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    ad::Tensor qh = ad::slice_cols(q, h * dh, (h + 1) * dh);
    ad::Tensor kh = ad::slice_cols(k, h * dh, (h + 1) * dh);
    ad::Tensor vh = ad::slice_cols(v, h * dh, (h + 1) * dh);
    ad::Tensor probs = ad::softmax_rows(ad::scale(ad::matmul_nt(qh, kh), scl));
    outs.push_back(ad::matmul(probs, vh));
  }
  return ad::add_rowvec(ad::matmul(ad::concat_cols(outs), p.wo), p.bo);
}

using AttnApply = std::function<ad::Tensor(const ad::Tensor&)>;

ad::Tensor sub_block_ad(const ad::Tensor& x, const SubBlock& b, const AttnApply& attn) {
  ad::Tensor x1 = ad::add(x, attn(ad::layer_norm(x, b.ln1.gamma, b.ln1.beta)));
  ad::Tensor h = ad::gelu(ad::add_rowvec(
      ad::matmul(ad::layer_norm(x1, b.ln2.gamma, b.ln2.beta), b.mlp.w1), b.mlp.b1));
  return ad::add(x1, ad::add_rowvec(ad::matmul(h, b.mlp.w2), b.mlp.b2));
}

// Self-attention restricted to each frame's rows.
AttnApply framewise_attn(const SubBlock& b, int n_frames, int j, int heads) {
  return [&b, n_frames, j, heads](const ad::Tensor& normed) {
    std::vector<ad::Tensor> parts;
    parts.reserve(n_frames);
    for (int f = 0; f < n_frames; ++f) {
      ad::Tensor rows = ad::slice_rows(normed, f * j, (f + 1) * j);
      parts.push_back(mha_ad(rows, rows, b.attn, heads));
    }
    return ad::concat_rows(parts);
  };
}

ad::Tensor encoder_ad(const ad::Tensor& tokens, ModelParams& p, int n_frames) {
  const int j = p.cfg.patch_count();
  ad::Tensor x = tokens;
  for (int blk = 0; blk < p.cfg.enc_blocks; ++blk) {
    SubBlock& fb = p.enc_frame[blk];
    SubBlock& gb = p.enc_global[blk];
    x = sub_block_ad(x, fb, framewise_attn(fb, n_frames, j, p.cfg.heads));
    x = sub_block_ad(x, gb, [&gb, &p](const ad::Tensor& normed) {
      return mha_ad(normed, normed, gb.attn, p.cfg.heads);
    });
  }
  return x;
}

ad::Tensor decoder_ad(const ad::Tensor& ref_tokens, const ad::Tensor& src_tokens,
                      ModelParams& p, int n_sources) {
  const int j = p.cfg.patch_count();
  ad::Tensor y = src_tokens;
  for (int blk = 0; blk < p.cfg.dec_blocks; ++blk) {
    SubBlock& sb = p.dec_self[blk];
    SubBlock& cb = p.dec_cross[blk];
    y = sub_block_ad(y, sb, framewise_attn(sb, n_sources, j, p.cfg.heads));
    // Queries come from each source frame; keys/values from the reference.
    y = sub_block_ad(y, cb, [&cb, &ref_tokens, n_sources, j, &p](const ad::Tensor& normed) {
      std::vector<ad::Tensor> parts;
      parts.reserve(n_sources);
      for (int f = 0; f < n_sources; ++f) {
        ad::Tensor rows = ad::slice_rows(normed, f * j, (f + 1) * j);
        parts.push_back(mha_ad(rows, ref_tokens, cb.attn, p.cfg.heads));
      }
      return ad::concat_rows(parts);
    });
  }
  return y;
}

ad::Tensor head_ad(const ad::Tensor& decoded, ModelParams& p) {
  ad::Tensor h = ad::gelu(ad::add_rowvec(ad::matmul(decoded, p.head_w1), p.head_b1));
  return ad::add_rowvec(ad::matmul(h, p.head_w2), p.head_b2);
}

// Identity [A|b] pattern repeated for every vertex; constant, no gradient.
ad::Tensor identity_offsets(const ModelConfig& cfg) {
  const int v = cfg.patch_count() * cfg.guidance_bins;
  ad::Tensor t = ad::Tensor::leaf(v, 12, /*requires_grad=*/false);
  for (int i = 0; i < v; ++i) {
    double* row = t.data() + size_t(i) * 12;
    row[0] = 1.0;
    row[5] = 1.0;
    row[10] = 1.0;
  }
  return t;
}

// Index maps from one frame's head output (J x 13D, flattened) into grid
// layout ((J*D) x 12 and (J*D) x 1).
void build_gather_maps(const ModelConfig& cfg, std::vector<int>* affine_idx,
                       std::vector<int>* conf_idx) {
  const int j = cfg.patch_count();
  const int d = cfg.guidance_bins;
  const int w = cfg.head_out_dim();
  affine_idx->resize(size_t(j) * d * 12);
  conf_idx->resize(size_t(j) * d);
  for (int t = 0; t < j; ++t) {
    for (int k = 0; k < d; ++k) {
      for (int q = 0; q < 12; ++q) {
        (*affine_idx)[(size_t(t) * d + k) * 12 + q] = t * w + k * 12 + q;
      }
      (*conf_idx)[size_t(t) * d + k] = t * w + 12 * d + k;
    }
  }
}

ForwardGrids grids_from_head(const ad::Tensor& head_out, ModelParams& p, int n_sources) {
  const ModelConfig& cfg = p.cfg;
  const int j = cfg.patch_count();
  const int v = j * cfg.guidance_bins;
  std::vector<int> affine_idx, conf_idx;
  build_gather_maps(cfg, &affine_idx, &conf_idx);
  ad::Tensor ident = identity_offsets(cfg);
  ForwardGrids out;
  for (int f = 0; f < n_sources; ++f) {
    ad::Tensor tok = ad::slice_rows(head_out, f * j, (f + 1) * j);
    out.affine.push_back(ad::add(ad::gather(tok, affine_idx, v, 12), ident));
    out.conf.push_back(ad::gather(tok, conf_idx, v, 1));
  }
  return out;
}

ad::Tensor patches_tensor(const std::vector<Image>& frames, const ModelConfig& cfg) {
  const int j = cfg.patch_count();
  const int pd = cfg.patch_dim();
  ad::Tensor t = ad::Tensor::leaf(int(frames.size()) * j, pd, /*requires_grad=*/false);
  double* dst = t.data();
  for (const Image& img : frames) {
    Mat m = patchify(img, cfg);
    std::copy(m.v.begin(), m.v.end(), dst);
    dst += m.v.size();
  }
  return t;
}

ad::Tensor embed_tokens_ad(const ad::Tensor& patches, ModelParams& p, int n_frames) {
  std::vector<ad::Tensor> pe_tiles(n_frames, p.pos_embed);
  ad::Tensor pe = n_frames == 1 ? p.pos_embed : ad::concat_rows(pe_tiles);
  return ad::add(ad::add_rowvec(ad::matmul(patches, p.embed_w), p.embed_b), pe);
}

}  // namespace

ForwardGrids model_forward(const std::vector<Image>& frames, ModelParams& params) {
  const ModelConfig& cfg = params.cfg;
  cfg.validate();
  if (frames.size() < 2) {
    throw std::invalid_argument("model_forward: need a reference and at least one source");
  }
  for (const Image& img : frames) {
    if (img.height != cfg.image_h || img.width != cfg.image_w) {
      throw std::invalid_argument("model_forward: frame not at model resolution");
    }
  }
  const int n = int(frames.size());
  const int j = cfg.patch_count();
  ad::Tensor tokens = embed_tokens_ad(patches_tensor(frames, cfg), params, n);
  ad::Tensor enc = encoder_ad(tokens, params, n);
  ad::Tensor ref = ad::slice_rows(enc, 0, j);
  ad::Tensor src = ad::slice_rows(enc, j, n * j);
  ad::Tensor dec = decoder_ad(ref, src, params, n - 1);
  return grids_from_head(head_ad(dec, params), params, n - 1);
}

// ---------------------------------------------------------------------------
// Plain-value public surface

Mat patchify(const Image& img, const ModelConfig& cfg) {
  if (img.height % cfg.patch_h != 0 || img.width % cfg.patch_w != 0) {
    throw std::invalid_argument("patchify: image dims not divisible by patch dims");
  }
  const int py = img.height / cfg.patch_h;
  const int px = img.width / cfg.patch_w;
  Mat out(py * px, cfg.patch_h * cfg.patch_w * 3);
  for (int gy = 0; gy < py; ++gy) {
    for (int gx = 0; gx < px; ++gx) {
      double* row = out.v.data() + size_t(gy * px + gx) * out.cols;
      for (int y = 0; y < cfg.patch_h; ++y) {
        for (int x = 0; x < cfg.patch_w; ++x) {
          for (int c = 0; c < 3; ++c) {
            row[(size_t(y) * cfg.patch_w + x) * 3 + c] =
                img.at(gy * cfg.patch_h + y, gx * cfg.patch_w + x, c);
          }
        }
      }
    }
  }
  return out;
}

Image unpatchify(const Mat& patches, const ModelConfig& cfg) {
  const int py = cfg.patches_y();
  const int px = cfg.patches_x();
  if (patches.rows != py * px || patches.cols != cfg.patch_dim()) {
    throw std::invalid_argument("unpatchify: shape mismatch");
  }
  Image img(cfg.image_h, cfg.image_w);
  for (int gy = 0; gy < py; ++gy) {
    for (int gx = 0; gx < px; ++gx) {
      const double* row = patches.v.data() + size_t(gy * px + gx) * patches.cols;
      for (int y = 0; y < cfg.patch_h; ++y) {
        for (int x = 0; x < cfg.patch_w; ++x) {
          for (int c = 0; c < 3; ++c) {
            img.at(gy * cfg.patch_h + y, gx * cfg.patch_w + x, c) =
                row[(size_t(y) * cfg.patch_w + x) * 3 + c];
          }
        }
      }
    }
  }
  return img;
}

Mat embed(const Mat& patches, ModelParams& params) {
  if (patches.rows != params.cfg.patch_count() || patches.cols != params.cfg.patch_dim()) {
    throw std::invalid_argument("embed: patch matrix shape mismatch");
  }
  ad::Tensor t = tensor_from_mat(patches);
  return mat_from_tensor(embed_tokens_ad(t, params, 1));
}

Mat attention(const Mat& queries, const Mat& keys_values, const AttnParams& p,
              int heads) {
  if (queries.cols != keys_values.cols || queries.cols % heads != 0) {
    throw std::invalid_argument("attention: bad shapes");
  }
  for (double v : queries.v) {
    if (!std::isfinite(v)) throw std::invalid_argument("attention: non-finite input");
  }
  for (double v : keys_values.v) {
    if (!std::isfinite(v)) throw std::invalid_argument("attention: non-finite input");
  }
  return mat_from_tensor(
      mha_ad(tensor_from_mat(queries), tensor_from_mat(keys_values), p, heads));
}

TokenSequence encoder_forward(const TokenSequence& tokens, ModelParams& params) {
  if (tokens.n_patches != params.cfg.patch_count() ||
      tokens.channels != params.cfg.embed_dim ||
      tokens.tokens.rows != tokens.n_frames * tokens.n_patches) {
    throw std::invalid_argument("encoder_forward: shape mismatch");
  }
  ad::Tensor x = tensor_from_mat(tokens.tokens);
  TokenSequence out = tokens;
  out.tokens = mat_from_tensor(encoder_ad(x, params, tokens.n_frames));
  return out;
}

TokenSequence decoder_forward(const Mat& ref_tokens, const TokenSequence& src_tokens,
                              ModelParams& params) {
  if (ref_tokens.rows != params.cfg.patch_count() ||
      ref_tokens.cols != params.cfg.embed_dim ||
      src_tokens.tokens.rows != src_tokens.n_frames * src_tokens.n_patches) {
    throw std::invalid_argument("decoder_forward: shape mismatch");
  }
  ad::Tensor ref = tensor_from_mat(ref_tokens);
  ad::Tensor src = tensor_from_mat(src_tokens.tokens);
  TokenSequence out = src_tokens;
  out.tokens = mat_from_tensor(decoder_ad(ref, src, params, src_tokens.n_frames));
  return out;
}

std::vector<std::pair<BilateralGrid, ConfidenceGrid>> predict_grids(
    const TokenSequence& decoded, ModelParams& params) {
  const ModelConfig& cfg = params.cfg;
  if (decoded.n_patches != cfg.patch_count() || decoded.channels != cfg.embed_dim) {
    throw std::invalid_argument("predict_grids: shape mismatch");
  }
  ad::Tensor head_out = head_ad(tensor_from_mat(decoded.tokens), params);
  ForwardGrids fg = grids_from_head(head_out, params, decoded.n_frames);
  std::vector<std::pair<BilateralGrid, ConfidenceGrid>> out;
  const int hs = cfg.patches_y(), ws = cfg.patches_x(), d = cfg.guidance_bins;
  for (int f = 0; f < decoded.n_frames; ++f) {
    out.emplace_back(grid_from_tensor(fg.affine[f], hs, ws, d),
                     confidence_grid_from_tensor(fg.conf[f], hs, ws, d));
  }
  return out;
}

HarmonizeResult harmonize_sequence(const Image& ref, const std::vector<Image>& sources,
                                   ModelParams& params) {
  const ModelConfig& cfg = params.cfg;
  if (sources.empty()) throw std::invalid_argument("harmonize_sequence: no source frames");
  for (const Image& s : sources) {
    if (!s.same_dims(sources[0])) {
      throw std::invalid_argument("harmonize_sequence: source dim mismatch");
    }
  }
  std::vector<Image> model_frames;
  model_frames.reserve(sources.size() + 1);
  model_frames.push_back(resize_bilinear(ref, cfg.image_h, cfg.image_w));
  for (const Image& s : sources) {
    model_frames.push_back(resize_bilinear(s, cfg.image_h, cfg.image_w));
  }
  ForwardGrids fg = model_forward(model_frames, params);

  const int hs = cfg.patches_y(), ws = cfg.patches_x(), d = cfg.guidance_bins;
  HarmonizeResult out;
  for (size_t i = 0; i < sources.size(); ++i) {
    out.grids.push_back(grid_from_tensor(fg.affine[i], hs, ws, d));
    out.conf_grids.push_back(confidence_grid_from_tensor(fg.conf[i], hs, ws, d));
    // Grids are predicted at model resolution but sliced at native
    // resolution; slicing cost is independent of grid size.
    out.harmonized.push_back(slice_affine(out.grids.back(), sources[i]));
    out.confidence.push_back(slice_confidence(out.conf_grids.back(), sources[i]));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O

namespace {

constexpr char kCkptMagic[4] = {'B', 'G', 'T', 'X'};
constexpr uint32_t kCkptVersion = 1;

void put_u32(std::string& out, uint32_t v) {
  out.push_back(char(v & 0xff));
  out.push_back(char((v >> 8) & 0xff));
  out.push_back(char((v >> 16) & 0xff));
  out.push_back(char((v >> 24) & 0xff));
}

uint32_t get_u32(const std::string& s, size_t& off) {
  if (off + 4 > s.size()) throw std::runtime_error("checkpoint: truncated");
  uint32_t v = uint32_t(uint8_t(s[off])) | (uint32_t(uint8_t(s[off + 1])) << 8) |
               (uint32_t(uint8_t(s[off + 2])) << 16) |
               (uint32_t(uint8_t(s[off + 3])) << 24);
  off += 4;
  return v;
}

}  // namespace

void save_checkpoint(ModelParams& params, const std::string& path) {
  std::string out;
  out.append(kCkptMagic, 4);
  put_u32(out, kCkptVersion);
  const ModelConfig& c = params.cfg;
  for (int v : {c.image_h, c.image_w, c.patch_h, c.patch_w, c.embed_dim, c.heads,
                c.enc_blocks, c.dec_blocks, c.guidance_bins, c.mlp_ratio}) {
    put_u32(out, uint32_t(v));
  }
  params.for_each([&](const std::string& name, ad::Tensor& t) {
    put_u32(out, uint32_t(name.size()));
    out.append(name);
    put_u32(out, 2);
    put_u32(out, uint32_t(t.rows()));
    put_u32(out, uint32_t(t.cols()));
    for (size_t i = 0; i < t.size(); ++i) {
      float f = float(t.data()[i]);
      uint32_t bits;
      std::memcpy(&bits, &f, 4);
      put_u32(out, bits);
    }
  });
  write_file_bytes(path, out);
}

ModelParams load_checkpoint(const std::string& path) {
  std::string s = read_file_bytes(path);
  size_t off = 0;
  if (s.size() < 8 || std::memcmp(s.data(), kCkptMagic, 4) != 0) {
    throw std::runtime_error("checkpoint: magic mismatch in " + path);
  }
  off = 4;
  if (get_u32(s, off) != kCkptVersion) {
    throw std::runtime_error("checkpoint: unsupported version in " + path);
  }
  ModelConfig cfg;
  cfg.image_h = int(get_u32(s, off));
  cfg.image_w = int(get_u32(s, off));
  cfg.patch_h = int(get_u32(s, off));
  cfg.patch_w = int(get_u32(s, off));
  cfg.embed_dim = int(get_u32(s, off));
  cfg.heads = int(get_u32(s, off));
  cfg.enc_blocks = int(get_u32(s, off));
  cfg.dec_blocks = int(get_u32(s, off));
  cfg.guidance_bins = int(get_u32(s, off));
  cfg.mlp_ratio = int(get_u32(s, off));
  cfg.validate();

  std::map<std::string, std::vector<double>> tensors;
  std::map<std::string, std::pair<int, int>> shapes;
  while (off < s.size()) {
    uint32_t name_len = get_u32(s, off);
    if (off + name_len > s.size()) throw std::runtime_error("checkpoint: truncated name");
    std::string name = s.substr(off, name_len);
    off += name_len;
    uint32_t rank = get_u32(s, off);
    if (rank != 2) throw std::runtime_error("checkpoint: unexpected tensor rank");
    int rows = int(get_u32(s, off));
    int cols = int(get_u32(s, off));
    std::vector<double> data(size_t(rows) * cols);
    for (double& d : data) {
      uint32_t bits = get_u32(s, off);
      float f;
      std::memcpy(&f, &bits, 4);
      d = double(f);
    }
    if (!tensors.emplace(name, std::move(data)).second) {
      throw std::runtime_error("checkpoint: duplicate tensor " + name);
    }
    shapes[name] = {rows, cols};
  }

  ModelParams params = init_params(cfg, 0);
  size_t used = 0;
  params.for_each([&](const std::string& name, ad::Tensor& t) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw std::runtime_error("checkpoint: missing tensor " + name);
    auto shape = shapes[name];
    if (shape.first != t.rows() || shape.second != t.cols()) {
      throw std::runtime_error("checkpoint: shape mismatch for " + name);
    }
    std::copy(it->second.begin(), it->second.end(), t.data());
    ++used;
  });
  if (used != tensors.size()) {
    throw std::runtime_error("checkpoint: file contains unknown tensors");
  }
  return params;
}

}  // namespace mvharm
