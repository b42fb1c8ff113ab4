#pragma once

#include <string>
#include <vector>

namespace mvharm {

// RGB image, row-major, channel-interleaved. Values live in [0,1] at load
// and save boundaries; intermediate results (linear-light pipelines,
// unclamped grid outputs) may leave that range.
struct Image {
  int height = 0;
  int width = 0;
  std::vector<double> data;  // height*width*3, R,G,B per pixel

  Image() = default;
  Image(int h, int w) : height(h), width(w), data(size_t(h) * w * 3, 0.0) {}

  double& at(int y, int x, int c) { return data[(size_t(y) * width + x) * 3 + c]; }
  double at(int y, int x, int c) const { return data[(size_t(y) * width + x) * 3 + c]; }

  bool same_dims(const Image& o) const {
    return height == o.height && width == o.width;
  }
  size_t pixel_count() const { return size_t(height) * width; }

  static Image filled(int h, int w, double r, double g, double b);
};

// Ordered multi-view sequence description. `ground_truth_paths` is empty
// when no reference appearance is available.
struct SequenceManifest {
  std::string scene_id;
  int reference_index = 0;
  std::vector<std::string> frame_paths;
  std::vector<std::string> ground_truth_paths;
};

// Throws std::invalid_argument when an invariant is broken.
void validate_manifest(const SequenceManifest& m);

// Geometry helpers shared by augmentation, model-resolution resizing and
// tests. All use half-pixel-centered sampling with clamped borders.
Image resize_bilinear(const Image& img, int out_h, int out_w);
Image center_crop(const Image& img, int out_h, int out_w);
Image flip_horizontal(const Image& img);
Image gaussian_blur(const Image& img, double sigma);
Image upsample_nearest(const Image& img, int factor);
Image clamp01(const Image& img);

double mean_abs_diff(const Image& a, const Image& b);

}  // namespace mvharm
