#include "lpm/pipeline.h"

#include <Eigen/Geometry>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

#include "lpm/conv.h"

namespace lpm {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

constexpr float kLeakySlope = 0.1f;

OffsetMode offset_mode(bool adaptive, const CoefficientSet* set, const std::string& group) {
  if (!adaptive) return OffsetMode::fixed;
  if (set && set->has_group(group)) return OffsetMode::coefficients;
  return OffsetMode::feature_guided;
}

PointwiseNet net_if_present(const CoefficientSet* set, const std::string& group,
                            PointwiseNet (*make)(const CoefficientSet&)) {
  if (set && set->has_group(group)) return make(*set);
  return {};
}

void clamp_depth(Grid& depth, const DepthRange& range) {
  for (float& d : depth.data()) {
    d = std::isfinite(d) ? range.clamp(d) : static_cast<float>(range.max);
  }
}

}  // namespace

PipelineConfig PipelineConfig::defaults() {
  PipelineConfig cfg;
  StageConfig& s3 = cfg.stage(3);
  s3.stage = 3;
  s3.iterations = 2;
  s3.perturb_hypotheses = 16;
  s3.perturb_range = 0.38;
  s3.propagation_samples = 16;
  StageConfig& s2 = cfg.stage(2);
  s2.stage = 2;
  s2.iterations = 2;
  s2.perturb_hypotheses = 8;
  s2.perturb_range = 0.09;
  s2.propagation_samples = 8;
  StageConfig& s1 = cfg.stage(1);
  s1.stage = 1;
  s1.iterations = 1;
  s1.perturb_hypotheses = 8;
  s1.perturb_range = 0.04;
  s1.propagation_samples = 0;
  return cfg;
}

void PipelineConfig::validate() const {
  for (int k = 1; k <= 3; ++k) {
    const StageConfig& s = stage(k);
    const std::string where = "stage " + std::to_string(k) + ": ";
    if (s.iterations < 1) throw std::invalid_argument(where + "iterations must be at least 1");
    if (s.perturb_hypotheses < 1) throw std::invalid_argument(where + "N_k must be at least 1");
    if (s.init_hypotheses < 1) throw std::invalid_argument(where + "D_f must be at least 1");
    if (!(s.perturb_range > 0.0)) throw std::invalid_argument(where + "R_k must be positive");
    if (s.groups < 1) throw std::invalid_argument(where + "G must be at least 1");
    if (s.propagation_samples != 0 && s.propagation_samples != 8 && s.propagation_samples != 16) {
      throw std::invalid_argument(where + "K_p must be 0, 8 or 16");
    }
    if (s.evaluation_samples != 9) throw std::invalid_argument(where + "K_e must be 9");
  }
  if (!(stage(3).perturb_range > stage(2).perturb_range &&
        stage(2).perturb_range > stage(1).perturb_range)) {
    throw std::invalid_argument("perturbation ranges must shrink from stage 3 to stage 1");
  }
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (!(match_sharpness > 0.0f)) throw std::invalid_argument("match sharpness must be positive");
}

StageOutput run_stage(const StageInput& in, const PipelineConfig& cfg) {
  const int k = in.stage;
  const StageConfig& sc = cfg.stage(k);
  if (in.features.size() < 2) throw std::invalid_argument("run_stage: need at least two views");
  if (in.cameras.size() != in.features.size()) {
    throw std::invalid_argument("run_stage: one camera per feature map required");
  }
  if (!in.prev_depth && k != 3) {
    throw std::invalid_argument("run_stage: stage " + std::to_string(k) +
                                " needs the depth map of the previous stage");
  }
  const std::size_t sources = in.features.size() - 1;
  if (!in.view_weights.empty() && in.view_weights.size() != sources) {
    throw std::invalid_argument("run_stage: one view weight map per source view required");
  }
  const Grid& f0 = in.features[0];
  for (const Grid& f : in.features) {
    if (!f.same_shape(f0)) throw ShapeError("run_stage: feature maps differ in shape");
  }
  if (in.prev_depth && !in.prev_depth->same_size(f0)) {
    throw ShapeError("run_stage: previous depth does not match the stage resolution");
  }

  const CoefficientSet* coeffs = cfg.coefficients.get();
  const int w = f0.width();
  const int h = f0.height();
  std::vector<RelativePose> rel(sources);
  for (std::size_t i = 0; i < sources; ++i) rel[i] = relative_pose(in.cameras[0], in.cameras[i + 1]);

  const OffsetField prop = propagation_offsets(
      f0, sc.propagation_samples,
      offset_mode(cfg.adaptive_propagation, coeffs, "prop.stage" + std::to_string(k)), coeffs, k,
      sc.propagation_dilation, cfg.snap);
  const OffsetField eval = eval_offsets(
      f0, sc.evaluation_samples,
      offset_mode(cfg.adaptive_evaluation, coeffs, "eval.stage" + std::to_string(k)), coeffs, k,
      sc.evaluation_dilation, cfg.snap);
  const PointwiseNet view_net = net_if_present(coeffs, "viewweight.", &PointwiseNet::view_weight);
  const PointwiseNet score_net = net_if_present(coeffs, "score.", &PointwiseNet::score);
  const PointwiseNet spatial_net =
      net_if_present(coeffs, "spatialweight.", &PointwiseNet::spatial_weight);
  SpatialWeightParams spatial = cfg.spatial;
  spatial.groups = sc.groups;

  StageOutput out;
  out.view_weights.assign(in.view_weights.begin(), in.view_weights.end());
  const std::vector<Grid> unit_weights(sources, Grid(w, h, 1, 1.0f));
  Grid current = in.prev_depth ? *in.prev_depth : Grid();

  for (int it = 0; it < sc.iterations; ++it) {
    const auto t0 = Clock::now();
    const RngKey key{cfg.seed, k, it};
    const bool init = !in.prev_depth && it == 0;
    const bool last = in.final_stage && it == sc.iterations - 1;

    HypothesisVolume hyp = init ? init_random(w, h, in.range, sc.init_hypotheses, key)
                                : perturb(current, sc.perturb_range, sc.perturb_hypotheses,
                                          in.range, key);
    if (!init && !last && sc.propagation_samples > 0) hyp = concat(hyp, propagate(current, prop));

    std::vector<SimilarityVolume> sims(sources);
    for (std::size_t i = 0; i < sources; ++i) {
      const WarpedVolume warped = warp_feature_map(in.features[i + 1], hyp, in.cameras[0].K,
                                                   rel[i], in.cameras[i + 1].K);
      sims[i] = group_similarity(f0, warped, sc.groups);
    }
    if (init && cfg.view_weighting && out.view_weights.empty()) {
      for (const auto& s : sims) out.view_weights.push_back(view_weight(s, &view_net));
    }
    const bool weighted = cfg.view_weighting && !out.view_weights.empty();
    const SimilarityVolume agg =
        aggregate_views(sims, weighted ? std::span<const Grid>(out.view_weights)
                                       : std::span<const Grid>(unit_weights));
    sims.clear();
    const CostVolume score = similarity_to_score(agg, &score_net);
    const SpatialWeights sw = spatial_weights(f0, eval, hyp, in.range, spatial, &spatial_net);
    const CostVolume cost = aggregate_spatial(score, eval, sw);

    if (last) {
      out.prob = softmax_scores(cost, cfg.temperature);
      out.depth = regress_inverse_depth(out.prob, hyp);
      clamp_depth(out.depth, in.range);
      out.confidence = confidence(out.prob, hyp, out.depth);
    } else {
      Regression r = regress_depth(cost, hyp, cfg.temperature);
      out.depth = std::move(r.depth);
      out.prob = std::move(r.prob);
      clamp_depth(out.depth, in.range);
    }
    current = out.depth;

    IterationRecord rec;
    rec.stage = k;
    rec.iteration = it;
    rec.hypotheses = hyp.count();
    rec.hypothesis_bytes = hyp.storage_bytes();
    rec.seconds = seconds_since(t0);
    rec.depth = out.depth;
    out.iterations.push_back(std::move(rec));
    out.hypotheses = std::move(hyp);
  }
  return out;
}

bool degenerate_baseline(std::span<const CameraModel> cameras) {
  if (cameras.size() < 2) return true;
  const CameraModel& ref = cameras[0];
  for (std::size_t i = 1; i < cameras.size(); ++i) {
    const double shift = (cameras[i].center() - ref.center()).norm();
    const Eigen::AngleAxisd rot(cameras[i].R * ref.R.transpose());
    if (shift > 1e-6 || std::abs(rot.angle()) > 1e-6) return false;
  }
  return true;
}

namespace {

// depth is at half resolution; guide and the bilinear fallback at full resolution.
Grid joint_bilateral_upsample(const Grid& depth, const Grid& bilinear, const Grid& guide,
                              const RefineParams& p) {
  const int lw = depth.width();
  const int lh = depth.height();
  const int w = guide.width();
  const int h = guide.height();
  const int c = guide.channels();
  const Grid pooled = downsample_x2(guide);
  const int r = std::max(1, p.radius);
  const float range_scale = static_cast<float>(-1.0 / (2.0 * p.sigma_range * p.sigma_range * c));
  Grid out(w, h, 1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    const double uy = (y + 0.5) / 2.0 - 0.5;
    const int y0 = static_cast<int>(std::floor(uy));
    for (int x = 0; x < w; ++x) {
      const double ux = (x + 0.5) / 2.0 - 0.5;
      const int x0 = static_cast<int>(std::floor(ux));
      const float* g0 = guide.pixel(x, y).data();
      double num = 0.0;
      double den = 0.0;
      for (int qy = y0 - r + 1; qy <= y0 + r; ++qy) {
        const double wy = 1.0 - std::abs(qy - uy) / r;
        if (qy < 0 || qy >= lh || wy <= 0.0) continue;
        for (int qx = x0 - r + 1; qx <= x0 + r; ++qx) {
          const double wx = 1.0 - std::abs(qx - ux) / r;
          if (qx < 0 || qx >= lw || wx <= 0.0) continue;
          const float* g1 = pooled.pixel(qx, qy).data();
          float dist2 = 0.0f;
          for (int ch = 0; ch < c; ++ch) dist2 += (g1[ch] - g0[ch]) * (g1[ch] - g0[ch]);
          const double wt = wx * wy * std::exp(range_scale * dist2);
          num += wt * depth.at(qx, qy);
          den += wt;
        }
      }
      // Every sample so unlike the guide that its weight underflows: plain bilinear.
      out.at(x, y) = den > 1e-12 ? static_cast<float>(num / den) : bilinear.at(x, y);
    }
  }
  return out;
}

Grid conv_leaky(const Grid& in, const CoefficientSet& set, const std::string& base, bool act) {
  Grid out = conv2d(in, set.require(base + ".weight"), set.find(base + ".bias"), 1, 1);
  if (act) leaky_relu_inplace(out, kLeakySlope);
  return out;
}

Grid rgb_guide(const Grid& image) {
  if (image.channels() == 3) return image;
  Grid out(image.width(), image.height(), 3);
  for (std::size_t i = 0; i < image.pixel_count(); ++i) {
    for (int c = 0; c < 3; ++c) out.data()[i * 3 + c] = image.data()[i * image.channels()];
  }
  return out;
}

}  // namespace

Grid refine(const Grid& depth_half, const Grid& image, const DepthRange& range,
            const RefineParams& params, const CoefficientSet* coefficients) {
  if (depth_half.channels() != 1) throw ShapeError("refine: depth must be single-channel");
  if (image.width() != 2 * depth_half.width() || image.height() != 2 * depth_half.height()) {
    throw ShapeError("refine: image must be twice the depth resolution");
  }
  const double span = range.max - range.min;
  Grid scaled(depth_half.width(), depth_half.height(), 1);
  for (std::size_t i = 0; i < scaled.data().size(); ++i) {
    scaled.data()[i] = static_cast<float>((depth_half.data()[i] - range.min) / span);
  }
  const Grid up = upsample_x2(scaled);
  Grid refined;
  if (coefficients && coefficients->has_group("refine.")) {
    const CoefficientSet& set = *coefficients;
    const Grid fd = conv_leaky(scaled, set, "refine.depth", true);
    Grid fdu = conv_transpose2d(fd, set.require("refine.depth_up.weight"),
                                set.find("refine.depth_up.bias"), 2, 1);
    leaky_relu_inplace(fdu, kLeakySlope);
    const Grid fi = conv_leaky(rgb_guide(image), set, "refine.image", true);
    const Grid h0 = conv_leaky(concat_channels(fdu, fi), set, "refine.fuse0", true);
    const Grid h1 = conv_leaky(h0, set, "refine.fuse1", true);
    const Grid residual = conv_leaky(h1, set, "refine.residual", false);
    refined = up;
    for (std::size_t i = 0; i < refined.data().size(); ++i) refined.data()[i] += residual.data()[i];
  } else {
    refined = joint_bilateral_upsample(scaled, up, image, params);
  }
  for (float& v : refined.data()) v = range.clamp(range.min + static_cast<double>(v) * span);
  return refined;
}

DepthResult run_cascade(std::span<const Grid> images, std::span<const CameraModel> cameras,
                        const PipelineConfig& cfg) {
  cfg.validate();
  if (images.size() < 2) throw std::invalid_argument("run_cascade: need at least two views");
  if (cameras.size() != images.size()) {
    throw std::invalid_argument("run_cascade: " + std::to_string(images.size()) + " images but " +
                                std::to_string(cameras.size()) + " cameras");
  }
  const int width = images[0].width();
  const int height = images[0].height();
  for (std::size_t i = 0; i < images.size(); ++i) {
    if (images[i].width() != width || images[i].height() != height) {
      throw ShapeError("run_cascade: view " + std::to_string(i) + " differs in size from view 0");
    }
    cameras[i].validate();
  }
  const DepthRange range{cameras[0].depth_min, cameras[0].depth_max};
  const int pw = (width + 7) / 8 * 8;
  const int ph = (height + 7) / 8 * 8;

  DepthResult result;
  const bool degenerate = degenerate_baseline(cameras);
  if (degenerate) {
    result.warnings.push_back("degenerate baseline: every source camera coincides with the reference");
  }

  const CoefficientSet* coeffs = cfg.coefficients.get();
  const bool learned_features = coeffs && coeffs->has_group("fpn.");
  std::vector<Grid> padded(images.size());
  std::array<std::vector<Grid>, 3> features;
  for (std::size_t i = 0; i < images.size(); ++i) {
    padded[i] = (pw == width && ph == height) ? images[i] : pad_to(images[i], pw, ph);
    FeaturePyramid pyr = extract_pyramid(
        padded[i], learned_features ? FeatureMode::coefficients : FeatureMode::handcrafted, coeffs);
    for (int k = 1; k <= 3; ++k) {
      features[k - 1].push_back(learned_features ? std::move(pyr.stage(k))
                                                 : normalize_for_matching(pyr.stage(k),
                                                                          cfg.match_sharpness));
    }
  }

  Grid prev;
  std::vector<Grid> weights;
  StageOutput last;
  for (int k = 3; k >= 1; --k) {
    const auto t0 = Clock::now();
    std::vector<CameraModel> scaled;
    for (const auto& cam : cameras) scaled.push_back(cam.scaled_to_level(k));
    StageInput in;
    in.stage = k;
    in.prev_depth = prev.empty() ? nullptr : &prev;
    in.features = features[k - 1];
    in.cameras = scaled;
    in.view_weights = weights;
    in.range = range;
    in.final_stage = k == 1;
    StageOutput out = run_stage(in, cfg);
    result.stages.push_back({k, seconds_since(t0)});
    for (auto& rec : out.iterations) result.iterations.push_back(std::move(rec));
    out.iterations.clear();
    result.stage_depths[k - 1] = out.depth;
    if (k == 3) result.view_weights = out.view_weights;
    if (k > 1) {
      prev = upsample_x2(out.depth);
      weights.clear();
      for (const auto& wmap : out.view_weights) weights.push_back(upsample_x2(wmap));
    } else {
      last = std::move(out);
    }
  }

  const auto t_refine = Clock::now();
  Grid full_depth = upsample_x2(last.depth);
  result.unrefined = crop(full_depth, width, height);
  if (cfg.refine) {
    full_depth = refine(last.depth, padded[0], range, cfg.refinement, coeffs);
  }
  result.refine_seconds = seconds_since(t_refine);
  result.depth = crop(full_depth, width, height);
  result.confidence = crop(upsample_x2(last.confidence), width, height);
  for (float& c : result.confidence.data()) c = std::clamp(c, 0.0f, 1.0f);
  if (degenerate) std::fill(result.confidence.data().begin(), result.confidence.data().end(), 0.0f);
  return result;
}

}  // namespace lpm
