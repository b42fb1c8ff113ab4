#include "mvharm/image.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvharm {

namespace {

inline double lerp(double a, double b, double t) { return a + t * (b - a); }

}  // namespace

Image Image::filled(int h, int w, double r, double g, double b) {
  Image out(h, w);
  for (size_t p = 0; p < out.pixel_count(); ++p) {
    out.data[p * 3 + 0] = r;
    out.data[p * 3 + 1] = g;
    out.data[p * 3 + 2] = b;
  }
  return out;
}

void validate_manifest(const SequenceManifest& m) {
  if (m.frame_paths.empty()) {
    throw std::invalid_argument("manifest: frame list is empty");
  }
  if (m.reference_index < 0 ||
      m.reference_index >= static_cast<int>(m.frame_paths.size())) {
    throw std::invalid_argument("manifest: reference index out of range");
  }
  if (!m.ground_truth_paths.empty() &&
      m.ground_truth_paths.size() != m.frame_paths.size()) {
    throw std::invalid_argument(
        "manifest: ground-truth list length differs from frame list");
  }
}

Image resize_bilinear(const Image& img, int out_h, int out_w) {
  if (out_h <= 0 || out_w <= 0) {
    throw std::invalid_argument("resize_bilinear: non-positive output dims");
  }
  if (out_h == img.height && out_w == img.width) return img;
  Image out(out_h, out_w);
  const double sy = double(img.height) / out_h;
  const double sx = double(img.width) / out_w;
  for (int y = 0; y < out_h; ++y) {
    double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, double(img.height - 1));
    int y0 = static_cast<int>(fy);
    int y1 = std::min(y0 + 1, img.height - 1);
    double ty = fy - y0;
    for (int x = 0; x < out_w; ++x) {
      double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, double(img.width - 1));
      int x0 = static_cast<int>(fx);
      int x1 = std::min(x0 + 1, img.width - 1);
      double tx = fx - x0;
      for (int c = 0; c < 3; ++c) {
        double top = lerp(img.at(y0, x0, c), img.at(y0, x1, c), tx);
        double bot = lerp(img.at(y1, x0, c), img.at(y1, x1, c), tx);
        out.at(y, x, c) = lerp(top, bot, ty);
      }
    }
  }
  return out;
}

Image center_crop(const Image& img, int out_h, int out_w) {
  if (out_h > img.height || out_w > img.width || out_h <= 0 || out_w <= 0) {
    throw std::invalid_argument("center_crop: bad output dims");
  }
  int y0 = (img.height - out_h) / 2;
  int x0 = (img.width - out_w) / 2;
  Image out(out_h, out_w);
  for (int y = 0; y < out_h; ++y) {
    for (int x = 0; x < out_w; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y0 + y, x0 + x, c);
    }
  }
  return out;
}

Image flip_horizontal(const Image& img) {
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y, img.width - 1 - x, c);
    }
  }
  return out;
}

Image gaussian_blur(const Image& img, double sigma) {
  if (sigma <= 0.0) return img;
  int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * (i * i) / (sigma * sigma));
    sum += k[i + radius];
  }
  for (double& v : k) v /= sum;

  Image tmp(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          int xi = std::clamp(x + i, 0, img.width - 1);
          acc += k[i + radius] * img.at(y, xi, c);
        }
        tmp.at(y, x, c) = acc;
      }
    }
  }
  Image out(img.height, img.width);
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        double acc = 0.0;
        for (int i = -radius; i <= radius; ++i) {
          int yi = std::clamp(y + i, 0, img.height - 1);
          acc += k[i + radius] * tmp.at(yi, x, c);
        }
        out.at(y, x, c) = acc;
      }
    }
  }
  return out;
}

Image upsample_nearest(const Image& img, int factor) {
  if (factor < 1) throw std::invalid_argument("upsample_nearest: factor < 1");
  Image out(img.height * factor, img.width * factor);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = img.at(y / factor, x / factor, c);
    }
  }
  return out;
}

Image clamp01(const Image& img) {
  Image out = img;
  for (double& v : out.data) v = std::clamp(v, 0.0, 1.0);
  return out;
}

double mean_abs_diff(const Image& a, const Image& b) {
  if (!a.same_dims(b)) {
    throw std::invalid_argument("mean_abs_diff: dimension mismatch");
  }
  double acc = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) acc += std::abs(a.data[i] - b.data[i]);
  return acc / double(a.data.size());
}

}  // namespace mvharm
