#include "mvharm/isp.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "mvharm/common.hpp"
#include "mvharm/grid.hpp"

namespace mvharm {

double srgb_decode(double v) {
  if (v <= 0.0) return 0.0;
  if (v <= 0.04045) return v / 12.92;
  return std::pow((v + 0.055) / 1.055, 2.4);
}

double srgb_encode(double v) {
  if (v <= 0.0) return 0.0;
  if (v <= 0.0031308) return v * 12.92;
  return 1.055 * std::pow(v, 1.0 / 2.4) - 0.055;
}

Image srgb_to_linear(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = srgb_decode(v);
  return out;
}

Image linear_to_srgb(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = srgb_encode(v);
  return out;
}

IspParams sample_isp_params(uint64_t seed, double severity) {
  if (severity < 0.0 || severity > 1.0) {
    throw std::invalid_argument("sample_isp_params: severity outside [0,1]");
  }
  Rng rng(mix_seed(seed, 0x15b));
  const double s = severity;
  IspParams p;
  // Ranges interpolate toward the neutral point as severity drops, so
  // severity 0 collapses every draw to the neutral value exactly.
  p.wb_gain_r = rng.uniform(1.0 - 0.5 * s, 1.0 + 1.0 * s);
  p.wb_gain_b = rng.uniform(1.0 - 0.5 * s, 1.0 + 1.0 * s);
  p.exposure_ev = rng.uniform(-2.5 * s, 2.5 * s);
  for (int r = 0; r < 3; ++r) {
    double off0 = rng.uniform(-0.15 * s, 0.15 * s);
    double off1 = rng.uniform(-0.15 * s, 0.15 * s);
    int c0 = (r + 1) % 3, c1 = (r + 2) % 3;
    p.ccm[r * 3 + c0] = off0;
    p.ccm[r * 3 + c1] = off1;
    p.ccm[r * 3 + r] = 1.0 - off0 - off1;  // row sums to 1
  }
  p.gamma = rng.uniform(1.0 - 0.3 * s, 1.0 + 0.4 * s);
  p.shadow_lift = rng.uniform(0.0, 0.3 * s);
  p.highlight_compress = rng.uniform(0.0, 0.5 * s);
  p.tone_field_seed = rng.next_u64();
  p.tone_field_strength = rng.uniform(0.0, s);
  return p;
}

std::array<double, 16> sample_tone_knots(uint64_t seed) {
  Rng rng(mix_seed(seed, 0x70e));
  std::array<double, 16> knots;
  for (double& k : knots) k = rng.uniform(-1.0, 1.0);
  return knots;
}

std::vector<double> tone_field_from_knots(const std::array<double, 16>& knots,
                                          int h, int w) {
  if (h <= 0 || w <= 0) throw std::invalid_argument("tone_field: bad dims");
  std::vector<double> field(size_t(h) * w);
  for (int y = 0; y < h; ++y) {
    double gy = std::clamp((y + 0.5) / h * 4.0 - 0.5, 0.0, 3.0);
    int y0 = int(gy);
    int y1 = std::min(y0 + 1, 3);
    double ty = gy - y0;
    for (int x = 0; x < w; ++x) {
      double gx = std::clamp((x + 0.5) / w * 4.0 - 0.5, 0.0, 3.0);
      int x0 = int(gx);
      int x1 = std::min(x0 + 1, 3);
      double tx = gx - x0;
      double top = knots[y0 * 4 + x0] + tx * (knots[y0 * 4 + x1] - knots[y0 * 4 + x0]);
      double bot = knots[y1 * 4 + x0] + tx * (knots[y1 * 4 + x1] - knots[y1 * 4 + x0]);
      field[size_t(y) * w + x] = top + ty * (bot - top);
    }
  }
  return field;
}

std::vector<double> spatial_tone_field(uint64_t seed, int h, int w) {
  return tone_field_from_knots(sample_tone_knots(seed), h, w);
}

Image apply_isp_variation(const Image& img, const IspParams& p) {
  const double gain = std::exp2(p.exposure_ev);
  const double gr = p.wb_gain_r * gain;
  const double gg = gain;
  const double gb = p.wb_gain_b * gain;
  const bool tone = p.tone_field_strength != 0.0 &&
                    (p.shadow_lift != 0.0 || p.highlight_compress != 0.0);
  std::vector<double> field;
  if (tone) field = spatial_tone_field(p.tone_field_seed, img.height, img.width);

  Image out(img.height, img.width);
  for (size_t px = 0; px < img.pixel_count(); ++px) {
    double r = srgb_decode(img.data[px * 3 + 0]) * gr;
    double g = srgb_decode(img.data[px * 3 + 1]) * gg;
    double b = srgb_decode(img.data[px * 3 + 2]) * gb;
    double r2 = p.ccm[0] * r + p.ccm[1] * g + p.ccm[2] * b;
    double g2 = p.ccm[3] * r + p.ccm[4] * g + p.ccm[5] * b;
    double b2 = p.ccm[6] * r + p.ccm[7] * g + p.ccm[8] * b;
    if (tone) {
      double y = luminance(r2, g2, b2);
      double t = 1.0 + p.tone_field_strength * field[px] *
                           (p.shadow_lift * (1.0 - y) - p.highlight_compress * y);
      r2 *= t;
      g2 *= t;
      b2 *= t;
    }
    double rs = std::pow(srgb_encode(r2), p.gamma);
    double gs = std::pow(srgb_encode(g2), p.gamma);
    double bs = std::pow(srgb_encode(b2), p.gamma);
    if (!std::isfinite(rs) || !std::isfinite(gs) || !std::isfinite(bs)) {
      throw std::runtime_error("apply_isp_variation: non-finite intermediate");
    }
    out.data[px * 3 + 0] = std::clamp(rs, 0.0, 1.0);
    out.data[px * 3 + 1] = std::clamp(gs, 0.0, 1.0);
    out.data[px * 3 + 2] = std::clamp(bs, 0.0, 1.0);
  }
  return out;
}

TrainingPair generate_training_pair(const std::vector<Image>& sequence,
                                    uint64_t seed, double severity) {
  if (sequence.size() < 2) {
    throw std::invalid_argument("generate_training_pair: need at least 2 frames");
  }
  const size_t n = sequence.size();
  TrainingPair pair;
  pair.params.resize(n);
  // One shared transform defines the target appearance of the whole
  // sequence; the reference frame receives only this transform.
  pair.params[0] = sample_isp_params(mix_seed(seed, 0), severity * 0.5);
  for (size_t i = 1; i < n; ++i) {
    pair.params[i] = sample_isp_params(mix_seed(seed, i), severity);
  }

  pair.inputs.reserve(n);
  pair.targets.reserve(n - 1);
  pair.inputs.push_back(apply_isp_variation(sequence[0], pair.params[0]));
  for (size_t i = 1; i < n; ++i) {
    Image clean = apply_isp_variation(sequence[i], pair.params[0]);
    pair.inputs.push_back(apply_isp_variation(clean, pair.params[i]));
    pair.targets.push_back(std::move(clean));
  }
  return pair;
}

namespace {

void fill_gradient(Image& canvas, Rng& rng) {
  double c00[3], c01[3], c10[3], c11[3];
  for (int c = 0; c < 3; ++c) {
    c00[c] = rng.uniform(0.1, 0.9);
    c01[c] = rng.uniform(0.1, 0.9);
    c10[c] = rng.uniform(0.1, 0.9);
    c11[c] = rng.uniform(0.1, 0.9);
  }
  for (int y = 0; y < canvas.height; ++y) {
    double ty = canvas.height > 1 ? double(y) / (canvas.height - 1) : 0.0;
    for (int x = 0; x < canvas.width; ++x) {
      double tx = canvas.width > 1 ? double(x) / (canvas.width - 1) : 0.0;
      for (int c = 0; c < 3; ++c) {
        double top = c00[c] + tx * (c01[c] - c00[c]);
        double bot = c10[c] + tx * (c11[c] - c10[c]);
        canvas.at(y, x, c) = top + ty * (bot - top);
      }
    }
  }
}

void draw_shapes(Image& canvas, Rng& rng) {
  int count = rng.uniform_int(5, 15);
  for (int s = 0; s < count; ++s) {
    bool ellipse = rng.uniform() < 0.5;
    int cy = rng.uniform_int(0, canvas.height - 1);
    int cx = rng.uniform_int(0, canvas.width - 1);
    int ry = rng.uniform_int(canvas.height / 16 + 1, canvas.height / 4 + 1);
    int rx = rng.uniform_int(canvas.width / 16 + 1, canvas.width / 4 + 1);
    double col[3] = {rng.uniform(0.02, 0.98), rng.uniform(0.02, 0.98),
                     rng.uniform(0.02, 0.98)};
    int y0 = std::max(0, cy - ry), y1 = std::min(canvas.height - 1, cy + ry);
    int x0 = std::max(0, cx - rx), x1 = std::min(canvas.width - 1, cx + rx);
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        if (ellipse) {
          double dy = double(y - cy) / ry, dx = double(x - cx) / rx;
          if (dy * dy + dx * dx > 1.0) continue;
        }
        for (int c = 0; c < 3; ++c) canvas.at(y, x, c) = col[c];
      }
    }
  }
}

}  // namespace

std::vector<Image> synth_scene(uint64_t seed, int n, int h, int w,
                               std::vector<std::pair<int, int>>* offsets) {
  if (n < 1 || h <= 0 || w <= 0) throw std::invalid_argument("synth_scene: bad dims");
  Rng rng(mix_seed(seed, 0x5ce));
  Image canvas(2 * h, 2 * w);
  fill_gradient(canvas, rng);
  draw_shapes(canvas, rng);
  // Mild blur keeps luminance locally smooth across crops.
  canvas = gaussian_blur(canvas, 1.0);

  // Jittered crop walk; step <= quarter extent keeps consecutive overlap
  // at (3/4)^2 > 50% of the crop area.
  int max_y = canvas.height - h;
  int max_x = canvas.width - w;
  int y = max_y / 2, x = max_x / 2;
  std::vector<Image> frames;
  frames.reserve(n);
  if (offsets) offsets->clear();
  for (int i = 0; i < n; ++i) {
    if (i > 0) {
      int dy = rng.uniform_int(-h / 4, h / 4);
      int dx = rng.uniform_int(-w / 4, w / 4);
      y = std::clamp(y + dy, 0, max_y);
      x = std::clamp(x + dx, 0, max_x);
    }
    Image crop(h, w);
    for (int yy = 0; yy < h; ++yy) {
      for (int xx = 0; xx < w; ++xx) {
        for (int c = 0; c < 3; ++c) crop.at(yy, xx, c) = canvas.at(y + yy, x + xx, c);
      }
    }
    frames.push_back(std::move(crop));
    if (offsets) offsets->emplace_back(y, x);
  }
  return frames;
}

}  // namespace mvharm
