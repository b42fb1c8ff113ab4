#include "mvharm/train.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "mvharm/common.hpp"
#include "mvharm/diffops.hpp"
#include "mvharm/io.hpp"

namespace mvharm {

double confidence_loss(const Image& corrected, const Image& target,
                       const ConfidenceMap& conf, double alpha) {
  if (!corrected.same_dims(target) || conf.height != corrected.height ||
      conf.width != corrected.width) {
    throw std::invalid_argument("confidence_loss: shape mismatch");
  }
  double acc = 0.0;
  for (size_t px = 0; px < corrected.pixel_count(); ++px) {
    double c = conf.values[px];
    if (!(c > 0.0)) throw std::invalid_argument("confidence_loss: non-positive confidence");
    double l1 = 0.0;
    for (int ch = 0; ch < 3; ++ch) {
      l1 += std::abs(target.data[px * 3 + ch] - corrected.data[px * 3 + ch]);
    }
    acc += c * l1 - alpha * std::log(c);
  }
  return acc / double(corrected.pixel_count());
}

double total_loss(const std::vector<Image>& corrected,
                  const std::vector<Image>& targets,
                  const std::vector<ConfidenceMap>& confs,
                  const std::vector<BilateralGrid>& grids,
                  const std::vector<ConfidenceGrid>& conf_grids,
                  double alpha, double lambda_tv) {
  const size_t n = corrected.size();
  if (targets.size() != n || confs.size() != n || grids.size() != n ||
      conf_grids.size() != n || n == 0) {
    throw std::invalid_argument("total_loss: batch size mismatch");
  }
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    acc += confidence_loss(corrected[i], targets[i], confs[i], alpha) +
           lambda_tv * (tv_loss(grids[i]) + tv_loss(conf_grids[i]));
  }
  return acc / double(n);
}

BatchLoss batch_loss_ad(const ForwardGrids& grids, const std::vector<Image>& sources,
                        const std::vector<Image>& targets, const ModelConfig& cfg,
                        double alpha, double lambda_tv) {
  const size_t n = sources.size();
  if (grids.affine.size() != n || targets.size() != n || n == 0) {
    throw std::invalid_argument("batch_loss_ad: batch size mismatch");
  }
  const int hs = cfg.patches_y(), ws = cfg.patches_x(), d = cfg.guidance_bins;
  ad::Tensor conf_sum, tv_sum;
  for (size_t i = 0; i < n; ++i) {
    auto fp = std::make_shared<const SliceFootprint>(
        compute_slice_footprint(sources[i], hs, ws, d));
    ad::Tensor corrected = slice_affine_ad(grids.affine[i], fp);
    ad::Tensor log_conf = slice_value_ad(grids.conf[i], fp);
    ad::Tensor conf = ad::exp_op(log_conf);
    ad::Tensor target = ad::Tensor::constant(targets[i].data.data(),
                                             int(targets[i].pixel_count()), 3);
    ad::Tensor l1 = ad::row_sum(ad::abs_op(ad::sub(corrected, target)));
    ad::Tensor frame_conf = ad::sub(ad::mean(ad::mul(conf, l1)),
                                    ad::scale(ad::mean(log_conf), alpha));
    ad::Tensor frame_tv = ad::add(tv_ad(grids.affine[i], hs, ws, d),
                                  tv_ad(grids.conf[i], hs, ws, d));
    conf_sum = conf_sum.valid() ? ad::add(conf_sum, frame_conf) : frame_conf;
    tv_sum = tv_sum.valid() ? ad::add(tv_sum, frame_tv) : frame_tv;
  }
  const double inv = 1.0 / double(n);
  BatchLoss out;
  out.conf_component = conf_sum.item() * inv;
  out.tv_component = tv_sum.item() * inv;
  out.total = ad::scale(ad::add(conf_sum, ad::scale(tv_sum, lambda_tv)), inv);
  return out;
}

double global_grad_norm(const std::vector<ad::Tensor>& params) {
  double sq = 0.0;
  for (const ad::Tensor& t : params) {
    for (double g : t.grad_vector()) sq += g * g;
  }
  return std::sqrt(sq);
}

double clip_gradients(std::vector<ad::Tensor>& params, double clip_norm) {
  if (clip_norm <= 0.0) throw std::invalid_argument("clip_gradients: clip_norm <= 0");
  double sq = 0.0;
  for (ad::Tensor& t : params) {
    for (double g : t.grad_vector()) {
      if (!std::isfinite(g)) throw std::runtime_error("clip_gradients: non-finite gradient");
      sq += g * g;
    }
  }
  double norm = std::sqrt(sq);
  if (norm > clip_norm) {
    double s = clip_norm / norm;
    for (ad::Tensor& t : params) {
      if (!t.has_grad()) continue;
      double* g = t.grad();
      for (size_t i = 0; i < t.size(); ++i) g[i] *= s;
    }
  }
  return norm;
}

double clip_gradients_raw(std::vector<std::vector<double>>& grads, double clip_norm) {
  if (clip_norm <= 0.0) throw std::invalid_argument("clip_gradients: clip_norm <= 0");
  double sq = 0.0;
  for (const auto& g : grads) {
    for (double v : g) {
      if (!std::isfinite(v)) throw std::runtime_error("clip_gradients: non-finite gradient");
      sq += v * v;
    }
  }
  double norm = std::sqrt(sq);
  if (norm > clip_norm) {
    double s = clip_norm / norm;
    for (auto& g : grads) {
      for (double& v : g) v *= s;
    }
  }
  return norm;
}

// ---------------------------------------------------------------------------
// Augmentation

AugmentDraws sample_augment(uint64_t seed, const AugmentToggles& toggles) {
  Rng rng(mix_seed(seed, 0xa06));
  // Fixed draw count keeps the stream layout independent of toggles.
  double u_flip = rng.uniform();
  double u_scale = rng.uniform();
  double u_blur = rng.uniform();
  double u_sigma = rng.uniform();
  AugmentDraws d;
  if (toggles.flip) d.flip = u_flip < 0.5;
  if (toggles.scale) d.scale = 1.0 + 0.3 * u_scale;
  if (toggles.blur) {
    d.blur = u_blur < 0.3;
    d.sigma = 0.3 + 0.9 * u_sigma;
  }
  return d;
}

Image apply_augment_image(const Image& img, const AugmentDraws& d) {
  Image out = img;
  if (d.flip) out = flip_horizontal(out);
  if (d.scale != 1.0) {
    int up_h = int(std::lround(img.height * d.scale));
    int up_w = int(std::lround(img.width * d.scale));
    if (up_h > img.height || up_w > img.width) {
      out = center_crop(resize_bilinear(out, up_h, up_w), img.height, img.width);
    }
  }
  if (d.blur) out = gaussian_blur(out, d.sigma);
  return out;
}

TrainingPair apply_augment(const TrainingPair& pair, const AugmentDraws& d) {
  TrainingPair out;
  out.params = pair.params;
  out.inputs.reserve(pair.inputs.size());
  out.targets.reserve(pair.targets.size());
  for (const Image& img : pair.inputs) out.inputs.push_back(apply_augment_image(img, d));
  for (const Image& img : pair.targets) out.targets.push_back(apply_augment_image(img, d));
  return out;
}

TrainingPair augment_sequence(const TrainingPair& pair, uint64_t seed) {
  return apply_augment(pair, sample_augment(seed));
}

// ---------------------------------------------------------------------------
// Datasets

Dataset synthetic_dataset(int scenes, int frames_per_scene, int h, int w,
                          uint64_t seed) {
  Dataset out;
  out.reserve(scenes);
  for (int i = 0; i < scenes; ++i) {
    out.push_back({synth_scene(mix_seed(seed, 0xdada00 + uint64_t(i)),
                               frames_per_scene, h, w)});
  }
  return out;
}

Dataset load_scene_dirs(const std::string& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) {
    throw std::runtime_error("load_scene_dirs: not a directory: " + dir);
  }
  std::vector<fs::path> subdirs;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.json")) {
      subdirs.push_back(entry.path());
    }
  }
  if (fs::exists(fs::path(dir) / "manifest.json")) subdirs.push_back(dir);
  std::sort(subdirs.begin(), subdirs.end());
  Dataset out;
  for (const fs::path& scene_dir : subdirs) {
    SequenceManifest m = load_manifest((scene_dir / "manifest.json").string());
    const auto& paths = m.ground_truth_paths.empty() ? m.frame_paths : m.ground_truth_paths;
    TrainScene scene;
    for (const std::string& rel : paths) {
      fs::path p(rel);
      if (p.is_relative()) p = scene_dir / p;
      scene.frames.push_back(load_image(p.string()));
    }
    out.push_back(std::move(scene));
  }
  if (out.empty()) throw std::runtime_error("load_scene_dirs: no scenes found in " + dir);
  return out;
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

std::vector<Image> to_model_res(const std::vector<Image>& imgs, const ModelConfig& cfg) {
  std::vector<Image> out;
  out.reserve(imgs.size());
  for (const Image& img : imgs) out.push_back(resize_bilinear(img, cfg.image_h, cfg.image_w));
  return out;
}

std::vector<Image> pick_frames(const TrainScene& scene, int count, Rng& rng) {
  const int n = int(scene.frames.size());
  if (n <= count) return scene.frames;
  std::vector<int> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  for (int i = 0; i < count; ++i) {
    int j = rng.uniform_int(i, n - 1);
    std::swap(idx[i], idx[j]);
  }
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  std::vector<Image> out;
  out.reserve(count);
  for (int i : idx) out.push_back(scene.frames[i]);
  return out;
}

}  // namespace

TrainResult train(const Dataset& data, const ModelConfig& mcfg,
                  const TrainConfig& tcfg) {
  if (data.empty()) throw std::invalid_argument("train: empty dataset");
  for (const TrainScene& s : data) {
    if (s.frames.size() < 2) throw std::invalid_argument("train: scene with < 2 frames");
  }
  if (tcfg.alpha <= 0.0 || tcfg.lambda_tv < 0.0 || tcfg.clip_norm <= 0.0 ||
      tcfg.frames_per_batch < 2) {
    throw std::invalid_argument("train: bad config");
  }

  TrainResult result{init_params(mcfg, tcfg.seed), {}};
  ModelParams& params = result.params;
  std::vector<ad::Tensor> tensors;
  params.for_each([&](const std::string&, ad::Tensor& t) { tensors.push_back(t); });
  std::vector<AdamW> opts;
  opts.reserve(tensors.size());
  for (const ad::Tensor& t : tensors) opts.emplace_back(t.size());

  Rng master(mix_seed(tcfg.seed, 0x17a12));
  for (int step = 0; step < tcfg.iterations; ++step) {
    const int scene_idx = master.uniform_int(0, int(data.size()) - 1);
    const uint64_t pair_seed = master.next_u64();
    const uint64_t aug_seed = master.next_u64();

    std::vector<Image> frames = pick_frames(data[scene_idx], tcfg.frames_per_batch, master);
    TrainingPair pair = generate_training_pair(frames, pair_seed, tcfg.severity);
    if (tcfg.augment) pair = apply_augment(pair, sample_augment(aug_seed, tcfg.toggles));

    std::vector<Image> inputs = to_model_res(pair.inputs, mcfg);
    std::vector<Image> targets = to_model_res(pair.targets, mcfg);
    std::vector<Image> sources(inputs.begin() + 1, inputs.end());

    for (ad::Tensor& t : tensors) t.zero_grad();
    ForwardGrids grids = model_forward(inputs, params);
    BatchLoss loss = batch_loss_ad(grids, sources, targets, mcfg, tcfg.alpha, tcfg.lambda_tv);
    const double loss_value = loss.total.item();
    if (!std::isfinite(loss_value)) {
      throw std::runtime_error("train: non-finite loss at step " + std::to_string(step) +
                               " (pair seed " + std::to_string(pair_seed) + ")");
    }
    ad::backward(loss.total);
    const double grad_norm = clip_gradients(tensors, tcfg.clip_norm);

    const double t01 = tcfg.iterations > 0 ? double(step) / double(tcfg.iterations) : 0.0;
    const double lr = tcfg.lr_min +
                      0.5 * (tcfg.lr - tcfg.lr_min) * (1.0 + std::cos(3.14159265358979323846 * t01));
    for (size_t i = 0; i < tensors.size(); ++i) {
      if (!tensors[i].has_grad()) continue;
      opts[i].step(tensors[i].data(), tensors[i].grad(), tensors[i].size(), lr,
                   tcfg.weight_decay);
    }

    if (step % std::max(1, tcfg.log_every) == 0 || step + 1 == tcfg.iterations) {
      result.log.push_back({step, loss_value, loss.conf_component, loss.tv_component,
                            grad_norm, lr});
    }
  }
  return result;
}

std::string metrics_csv(const std::vector<MetricsRow>& rows) {
  std::ostringstream ss;
  ss << "step,loss,conf_loss,tv_loss,grad_norm,lr\n";
  ss.precision(10);
  for (const MetricsRow& r : rows) {
    ss << r.step << ',' << r.loss << ',' << r.conf_loss << ',' << r.tv_loss << ','
       << r.grad_norm << ',' << r.lr << '\n';
  }
  return ss.str();
}

// ---------------------------------------------------------------------------
// Finite differences

double finite_diff_check(std::vector<ad::Tensor> params,
                         const std::function<ad::Tensor()>& loss_fn,
                         const std::vector<FdCoord>& coords, double step) {
  for (ad::Tensor& t : params) t.zero_grad();
  ad::Tensor loss = loss_fn();
  ad::backward(loss);
  std::vector<double> analytic;
  analytic.reserve(coords.size());
  for (const FdCoord& c : coords) {
    const auto& g = params[c.tensor].grad_vector();
    analytic.push_back(g.empty() ? 0.0 : g[c.index]);
  }

  double max_rel = 0.0;
  for (size_t i = 0; i < coords.size(); ++i) {
    double* p = params[coords[i].tensor].data() + coords[i].index;
    const double saved = *p;
    *p = saved + step;
    double plus = loss_fn().item();
    *p = saved - step;
    double minus = loss_fn().item();
    *p = saved;
    double fd = (plus - minus) / (2.0 * step);
    double denom = std::max({std::abs(analytic[i]), std::abs(fd), 1e-8});
    max_rel = std::max(max_rel, std::abs(analytic[i] - fd) / denom);
  }
  return max_rel;
}

std::vector<FdCoord> sample_fd_coords(const std::vector<ad::Tensor>& params,
                                      int per_tensor, uint64_t seed) {
  Rng rng(mix_seed(seed, 0xfdc));
  std::vector<FdCoord> coords;
  for (int t = 0; t < int(params.size()); ++t) {
    const size_t n = params[t].size();
    for (int k = 0; k < per_tensor && size_t(k) < n; ++k) {
      coords.push_back({t, size_t(rng.next_u64() % n)});
    }
  }
  return coords;
}

}  // namespace mvharm
