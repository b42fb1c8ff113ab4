#include "mvharm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace mvharm {

namespace {

constexpr double kPsnrCap = 99.0;

}  // namespace

double psnr(const Image& a, const Image& b) {
  if (!a.same_dims(b)) throw std::invalid_argument("psnr: dimension mismatch");
  double mse = 0.0;
  for (size_t i = 0; i < a.data.size(); ++i) {
    double da = std::clamp(a.data[i], 0.0, 1.0);
    double db = std::clamp(b.data[i], 0.0, 1.0);
    mse += (da - db) * (da - db);
  }
  mse /= double(a.data.size());
  if (mse <= 0.0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

namespace {

std::vector<double> gaussian_kernel_11() {
  std::vector<double> k(11);
  const double sigma = 1.5;
  double sum = 0.0;
  for (int i = 0; i < 11; ++i) {
    double d = i - 5;
    k[i] = std::exp(-0.5 * d * d / (sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable valid-region convolution of one channel.
std::vector<double> conv_valid(const std::vector<double>& img, int h, int w,
                               const std::vector<double>& k) {
  const int r = int(k.size()) / 2;
  const int vw = w - 2 * r;
  const int vh = h - 2 * r;
  std::vector<double> tmp(size_t(h) * vw);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < vw; ++x) {
      double acc = 0.0;
      for (int i = 0; i < int(k.size()); ++i) acc += k[i] * img[size_t(y) * w + x + i];
      tmp[size_t(y) * vw + x] = acc;
    }
  }
  std::vector<double> out(size_t(vh) * vw);
  for (int y = 0; y < vh; ++y) {
    for (int x = 0; x < vw; ++x) {
      double acc = 0.0;
      for (int i = 0; i < int(k.size()); ++i) acc += k[i] * tmp[size_t(y + i) * vw + x];
      out[size_t(y) * vw + x] = acc;
    }
  }
  return out;
}

}  // namespace

double ssim(const Image& a, const Image& b) {
  if (!a.same_dims(b)) throw std::invalid_argument("ssim: dimension mismatch");
  if (a.height < 11 || a.width < 11) {
    throw std::invalid_argument("ssim: image smaller than 11x11 window");
  }
  const double c1 = 0.01 * 0.01;
  const double c2 = 0.03 * 0.03;
  const std::vector<double> kern = gaussian_kernel_11();
  const int h = a.height, w = a.width;
  const size_t n = size_t(h) * w;

  double total = 0.0;
  for (int ch = 0; ch < 3; ++ch) {
    std::vector<double> xa(n), xb(n), xaa(n), xbb(n), xab(n);
    for (size_t px = 0; px < n; ++px) {
      double va = std::clamp(a.data[px * 3 + ch], 0.0, 1.0);
      double vb = std::clamp(b.data[px * 3 + ch], 0.0, 1.0);
      xa[px] = va;
      xb[px] = vb;
      xaa[px] = va * va;
      xbb[px] = vb * vb;
      xab[px] = va * vb;
    }
    auto mu_a = conv_valid(xa, h, w, kern);
    auto mu_b = conv_valid(xb, h, w, kern);
    auto m_aa = conv_valid(xaa, h, w, kern);
    auto m_bb = conv_valid(xbb, h, w, kern);
    auto m_ab = conv_valid(xab, h, w, kern);
    double acc = 0.0;
    for (size_t i = 0; i < mu_a.size(); ++i) {
      double ma = mu_a[i], mb = mu_b[i];
      double va = m_aa[i] - ma * ma;
      double vb = m_bb[i] - mb * mb;
      double cov = m_ab[i] - ma * mb;
      acc += ((2 * ma * mb + c1) * (2 * cov + c2)) /
             ((ma * ma + mb * mb + c1) * (va + vb + c2));
    }
    total += acc / double(mu_a.size());
  }
  return total / 3.0;
}

ColorAffine fit_color_correction(const Image& render, const Image& gt) {
  if (!render.same_dims(gt)) {
    throw std::invalid_argument("fit_color_correction: dimension mismatch");
  }
  const size_t n = render.pixel_count();
  if (n < 4) throw std::invalid_argument("fit_color_correction: needs >= 4 pixels");

  // Degenerate constant render: only the bias is identifiable.
  double mins[3] = {1e300, 1e300, 1e300}, maxs[3] = {-1e300, -1e300, -1e300};
  for (size_t px = 0; px < n; ++px) {
    for (int c = 0; c < 3; ++c) {
      mins[c] = std::min(mins[c], render.data[px * 3 + c]);
      maxs[c] = std::max(maxs[c], render.data[px * 3 + c]);
    }
  }
  if (maxs[0] - mins[0] < 1e-12 && maxs[1] - mins[1] < 1e-12 &&
      maxs[2] - mins[2] < 1e-12) {
    ColorAffine m;
    m.m.fill(0.0);
    double mean[3] = {0, 0, 0};
    for (size_t px = 0; px < n; ++px) {
      for (int c = 0; c < 3; ++c) mean[c] += gt.data[px * 3 + c];
    }
    for (int c = 0; c < 3; ++c) m.m[c * 4 + 3] = mean[c] / double(n);
    return m;
  }

  // Normal equations over x = [r, g, b, 1], one 4x4 solve shared by the
  // three output channels.
  double xtx[4][4] = {};
  double xtg[4][3] = {};
  for (size_t px = 0; px < n; ++px) {
    const double x[4] = {render.data[px * 3], render.data[px * 3 + 1],
                         render.data[px * 3 + 2], 1.0};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) xtx[i][j] += x[i] * x[j];
      for (int c = 0; c < 3; ++c) xtg[i][c] += x[i] * gt.data[px * 3 + c];
    }
  }
  for (int i = 0; i < 4; ++i) xtx[i][i] += 1e-8;  // Tikhonov damping

  // Gaussian elimination with partial pivoting on [xtx | xtg].
  double aug[4][7];
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) aug[i][j] = xtx[i][j];
    for (int c = 0; c < 3; ++c) aug[i][4 + c] = xtg[i][c];
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r) {
      if (std::abs(aug[r][col]) > std::abs(aug[piv][col])) piv = r;
    }
    std::swap(aug[col], aug[piv]);
    double d = aug[col][col];
    for (int j = col; j < 7; ++j) aug[col][j] /= d;
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      double f = aug[r][col];
      if (f == 0.0) continue;
      for (int j = col; j < 7; ++j) aug[r][j] -= f * aug[col][j];
    }
  }

  ColorAffine m;
  for (int c = 0; c < 3; ++c) {
    for (int i = 0; i < 4; ++i) m.m[c * 4 + i] = aug[i][4 + c];
  }
  return m;
}

Image apply_color_affine(const Image& img, const ColorAffine& m) {
  Image out(img.height, img.width);
  for (size_t px = 0; px < img.pixel_count(); ++px) {
    const double r = img.data[px * 3], g = img.data[px * 3 + 1], b = img.data[px * 3 + 2];
    for (int c = 0; c < 3; ++c) {
      out.data[px * 3 + c] =
          m.m[c * 4] * r + m.m[c * 4 + 1] * g + m.m[c * 4 + 2] * b + m.m[c * 4 + 3];
    }
  }
  return out;
}

EvalReport evaluate_sequence(const std::vector<Image>& renders,
                             const std::vector<Image>& gts) {
  if (renders.size() != gts.size() || renders.empty()) {
    throw std::invalid_argument("evaluate_sequence: list length mismatch");
  }
  EvalReport report;
  report.count = int(renders.size());
  for (size_t i = 0; i < renders.size(); ++i) {
    EvalReport::Frame f;
    f.psnr = psnr(renders[i], gts[i]);
    f.ssim = ssim(renders[i], gts[i]);
    // Fit on the clamped render: raw metrics clamp too, so the identity
    // transform is always in the feasible set and CC can never lose.
    Image base = clamp01(renders[i]);
    ColorAffine cc = fit_color_correction(base, gts[i]);
    Image corrected = clamp01(apply_color_affine(base, cc));
    f.psnr_cc = psnr(corrected, gts[i]);
    f.ssim_cc = ssim(corrected, gts[i]);
    report.mean.psnr += f.psnr;
    report.mean.ssim += f.ssim;
    report.mean.psnr_cc += f.psnr_cc;
    report.mean.ssim_cc += f.ssim_cc;
    report.frames.push_back(f);
  }
  report.mean.psnr /= report.count;
  report.mean.ssim /= report.count;
  report.mean.psnr_cc /= report.count;
  report.mean.ssim_cc /= report.count;
  return report;
}

}  // namespace mvharm
