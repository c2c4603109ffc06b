#include "lpm/cost.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace lpm {

namespace {

PointwiseNet build_net(const CoefficientSet& set, const std::string& group,
                       std::initializer_list<DenseLayer::Activation> acts) {
  PointwiseNet net;
  int i = 0;
  int prev_out = -1;
  for (auto act : acts) {
    const std::string base = group + "." + std::to_string(i++);
    DenseLayer layer;
    layer.weight = &set.require(base + ".weight");
    layer.bias = set.find(base + ".bias");
    layer.activation = act;
    if (layer.weight->shape.size() != 2 || (prev_out >= 0 && layer.weight->shape[1] != prev_out)) {
      throw CoefficientError(CoefficientErrc::shape_mismatch, base + ".weight",
                             "tensor '" + base + ".weight' does not chain with its input");
    }
    prev_out = layer.weight->shape[0];
    net.layers.push_back(layer);
  }
  return net;
}

void check_net_input(const PointwiseNet* net, int groups) {
  if (net && !net->empty() && net->input_size() != groups) {
    throw CoefficientError(CoefficientErrc::shape_mismatch, "",
                           "network expects " + std::to_string(net->input_size()) +
                               " groups, volume has " + std::to_string(groups));
  }
}

}  // namespace

PointwiseNet PointwiseNet::view_weight(const CoefficientSet& set) {
  using A = DenseLayer::Activation;
  return build_net(set, "viewweight", {A::relu, A::sigmoid});
}

PointwiseNet PointwiseNet::score(const CoefficientSet& set) {
  using A = DenseLayer::Activation;
  return build_net(set, "score", {A::relu, A::relu, A::none});
}

PointwiseNet PointwiseNet::spatial_weight(const CoefficientSet& set) {
  using A = DenseLayer::Activation;
  return build_net(set, "spatialweight", {A::relu, A::sigmoid});
}

SimilarityVolume group_similarity(const Grid& ref_features, const WarpedVolume& warped,
                                  int groups) {
  const int c = ref_features.channels();
  if (groups < 1 || c % groups != 0) {
    throw std::invalid_argument("group_similarity: " + std::to_string(c) +
                                " channels are not divisible into " + std::to_string(groups) +
                                " groups");
  }
  if (warped.channels != c || warped.width != ref_features.width() ||
      warped.height != ref_features.height()) {
    throw ShapeError("group_similarity: warped volume does not match reference features");
  }
  SimilarityVolume s;
  s.width = warped.width;
  s.height = warped.height;
  s.depth = warped.depth;
  s.groups = groups;
  s.values.assign(static_cast<std::size_t>(s.width) * s.height * s.depth * groups, 0.0f);
  s.valid = warped.valid;
  const int per = c / groups;
  const float scale = static_cast<float>(groups) / static_cast<float>(c);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const float* f0 = ref_features.pixel(x, y).data();
      for (int j = 0; j < s.depth; ++j) {
        const std::size_t cell = s.cell(x, y, j);
        if (!s.valid[cell]) continue;
        const float* fi = warped.values.data() + cell * c;
        float* out = s.values.data() + cell * groups;
        for (int g = 0; g < groups; ++g) {
          float dot = 0.0f;
          for (int k = g * per; k < (g + 1) * per; ++k) dot += f0[k] * fi[k];
          out[g] = scale * dot;
        }
      }
    }
  }
  return s;
}

Grid view_weight(const SimilarityVolume& s, const PointwiseNet* net) {
  check_net_input(net, s.groups);
  const bool learned = net && !net->empty();
  Grid w(s.width, s.height, 1);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < s.height; ++y) {
    std::vector<float> a, b;
    for (int x = 0; x < s.width; ++x) {
      float best = 0.0f;
      for (int j = 0; j < s.depth; ++j) {
        const float* g = s.groups_at(x, y, j);
        float p;
        if (learned) {
          p = (*net)({g, static_cast<std::size_t>(s.groups)}, a, b);
        } else {
          float mean = 0.0f;
          for (int k = 0; k < s.groups; ++k) mean += g[k];
          p = logistic(mean / static_cast<float>(s.groups));
        }
        best = std::max(best, p);
      }
      w.at(x, y) = std::clamp(best, 0.0f, 1.0f);
    }
  }
  return w;
}

SimilarityVolume aggregate_views(std::span<const SimilarityVolume> views,
                                 std::span<const Grid> weights, double eps) {
  if (views.empty()) throw std::invalid_argument("aggregate_views: no source views");
  if (weights.size() != views.size()) {
    throw std::invalid_argument("aggregate_views: one weight map per view required");
  }
  const SimilarityVolume& first = views.front();
  for (std::size_t i = 0; i < views.size(); ++i) {
    const auto& v = views[i];
    if (v.width != first.width || v.height != first.height || v.depth != first.depth ||
        v.groups != first.groups) {
      throw ShapeError("aggregate_views: similarity volumes differ in shape");
    }
    if (weights[i].width() != first.width || weights[i].height() != first.height ||
        weights[i].channels() != 1) {
      throw ShapeError("aggregate_views: weight map does not match the volume");
    }
  }
  SimilarityVolume out;
  out.width = first.width;
  out.height = first.height;
  out.depth = first.depth;
  out.groups = first.groups;
  out.values.assign(first.values.size(), 0.0f);
  out.valid.assign(first.valid.size(), 0);
  const int G = out.groups;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < out.height; ++y) {
    std::vector<double> acc(G);
    for (int x = 0; x < out.width; ++x) {
      for (int j = 0; j < out.depth; ++j) {
        const std::size_t cell = out.cell(x, y, j);
        std::fill(acc.begin(), acc.end(), 0.0);
        double wsum = 0.0;
        bool any = false;
        for (std::size_t i = 0; i < views.size(); ++i) {
          if (!views[i].valid[cell]) continue;
          any = true;
          const double wi = weights[i].at(x, y);
          const float* g = views[i].values.data() + cell * G;
          for (int k = 0; k < G; ++k) acc[k] += wi * g[k];
          wsum += wi;
        }
        if (!any) continue;
        out.valid[cell] = 1;
        float* dst = out.values.data() + cell * G;
        for (int k = 0; k < G; ++k) dst[k] = static_cast<float>(acc[k] / (wsum + eps));
      }
    }
  }
  return out;
}

CostVolume similarity_to_score(const SimilarityVolume& s, const PointwiseNet* net) {
  check_net_input(net, s.groups);
  const bool learned = net && !net->empty();
  CostVolume score(s.width, s.height, s.depth);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < s.height; ++y) {
    std::vector<float> a, b;
    for (int x = 0; x < s.width; ++x) {
      float* out = score.pixel(x, y).data();
      for (int j = 0; j < s.depth; ++j) {
        const float* g = s.groups_at(x, y, j);
        if (learned) {
          out[j] = (*net)({g, static_cast<std::size_t>(s.groups)}, a, b);
        } else {
          float mean = 0.0f;
          for (int k = 0; k < s.groups; ++k) mean += g[k];
          out[j] = mean / static_cast<float>(s.groups);
        }
      }
    }
  }
  return score;
}

OffsetField eval_offsets(const Grid& ref_features, int count, OffsetMode mode,
                         const CoefficientSet* coefficients, int stage, int dilation,
                         const SnapParams& snap) {
  if (count != 9) {
    throw std::invalid_argument("evaluation supports a 9-sample grid, not " +
                                std::to_string(count));
  }
  return compute_offsets(ref_features, count, dilation, mode, coefficients, "eval", stage, snap);
}

SpatialWeights spatial_weights(const Grid& ref_features, const OffsetField& offsets,
                               const HypothesisVolume& hyp, const DepthRange& range,
                               const SpatialWeightParams& params, const PointwiseNet* net) {
  const int C = ref_features.channels();
  const int G = params.groups;
  if (G < 1 || C % G != 0) throw std::invalid_argument("spatial_weights: bad group count");
  if (!ref_features.same_size(hyp.depths) || offsets.width != hyp.width() ||
      offsets.height != hyp.height()) {
    throw ShapeError("spatial_weights: inputs differ in size");
  }
  check_net_input(net, G);
  const bool learned = net && !net->empty();
  SpatialWeights sw;
  sw.width = hyp.width();
  sw.height = hyp.height();
  sw.samples = offsets.count();
  sw.depth = hyp.count();
  const std::size_t n = static_cast<std::size_t>(sw.width) * sw.height * sw.samples;
  sw.feature.assign(n, 0.0f);
  sw.depth_weight.assign(n * sw.depth, 0.0f);
  sw.valid.assign(n, 0);
  const int per = C / G;
  const float group_scale = static_cast<float>(G) / static_cast<float>(C);
  const double inv_len = 1.0 / range.inverse_length();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < sw.height; ++y) {
    std::vector<float> fq(C), dq(sw.depth), corr(G), a, b;
    for (int x = 0; x < sw.width; ++x) {
      const float* f0 = ref_features.pixel(x, y).data();
      const float* d0 = hyp.depths.pixel(x, y).data();
      for (int k = 0; k < sw.samples; ++k) {
        const Offset2& o = offsets.base[k];
        const Offset2& dl = offsets.delta(x, y, k);
        const double qx = x + o.dx + dl.dx;
        const double qy = y + o.dy + dl.dy;
        const std::size_t si = sw.sample_index(x, y, k);
        if (!bilinear_sample_into(ref_features, qx, qy, fq)) continue;
        bilinear_sample_into(hyp.depths, qx, qy, dq);
        sw.valid[si] = 1;
        for (int g = 0; g < G; ++g) {
          float dot = 0.0f;
          for (int c = g * per; c < (g + 1) * per; ++c) dot += fq[c] * f0[c];
          corr[g] = group_scale * dot;
        }
        if (learned) {
          sw.feature[si] = (*net)(corr, a, b);
        } else {
          const float mean = std::accumulate(corr.begin(), corr.end(), 0.0f) / G;
          sw.feature[si] = logistic(mean);
        }
        float* dk = sw.depth_weight.data() + si * sw.depth;
        for (int j = 0; j < sw.depth; ++j) {
          const double diff = std::abs(1.0 / dq[j] - 1.0 / d0[j]) * inv_len;
          dk[j] = logistic(static_cast<float>(params.sigma_d - params.beta * diff));
        }
      }
    }
  }
  return sw;
}

CostVolume aggregate_spatial(const CostVolume& score, const OffsetField& offsets,
                             const SpatialWeights& weights) {
  if (weights.width != score.width() || weights.height != score.height() ||
      weights.depth != score.channels() || weights.samples != offsets.count() ||
      offsets.width != score.width() || offsets.height != score.height()) {
    throw ShapeError("aggregate_spatial: inputs differ in shape");
  }
  const int D = score.channels();
  CostVolume out(score.width(), score.height(), D);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < score.height(); ++y) {
    std::vector<float> sq(D);
    std::vector<double> num(D), den(D);
    for (int x = 0; x < score.width(); ++x) {
      std::fill(num.begin(), num.end(), 0.0);
      std::fill(den.begin(), den.end(), 0.0);
      for (int k = 0; k < weights.samples; ++k) {
        const Offset2& o = offsets.base[k];
        const Offset2& dl = offsets.delta(x, y, k);
        if (!bilinear_sample_into(score, x + o.dx + dl.dx, y + o.dy + dl.dy, sq)) continue;
        const std::size_t si = weights.sample_index(x, y, k);
        const double wk = weights.feature[si];
        const float* dk = weights.depth_weight.data() + si * D;
        for (int j = 0; j < D; ++j) {
          const double wt = wk * dk[j];
          num[j] += wt * sq[j];
          den[j] += wt;
        }
      }
      const float* center = score.pixel(x, y).data();
      float* dst = out.pixel(x, y).data();
      for (int j = 0; j < D; ++j) {
        dst[j] = den[j] > 0.0 ? static_cast<float>(num[j] / den[j]) : center[j];
      }
    }
  }
  return out;
}

ProbabilityVolume softmax_scores(const CostVolume& score, double temperature) {
  if (!(temperature > 0.0)) throw std::invalid_argument("softmax temperature must be positive");
  const int D = score.channels();
  ProbabilityVolume prob(score.width(), score.height(), D);
  const double inv_t = 1.0 / temperature;
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(score.pixel_count()); ++i) {
    const float* s = score.data().data() + i * D;
    float* p = prob.data().data() + i * D;
    const float mx = *std::max_element(s, s + D);
    double sum = 0.0;
    for (int j = 0; j < D; ++j) {
      const double e = std::exp((static_cast<double>(s[j]) - mx) * inv_t);
      p[j] = static_cast<float>(e);
      sum += e;
    }
    for (int j = 0; j < D; ++j) p[j] = static_cast<float>(p[j] / sum);
  }
  return prob;
}

Regression regress_depth(const CostVolume& score, const HypothesisVolume& hyp,
                         double temperature) {
  if (!score.same_shape(hyp.depths)) throw ShapeError("regress_depth: score/hypothesis mismatch");
  Regression r;
  r.prob = softmax_scores(score, temperature);
  r.depth = Grid(score.width(), score.height(), 1);
  const int D = score.channels();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(score.pixel_count()); ++i) {
    const float* p = r.prob.data().data() + i * D;
    const float* d = hyp.depths.data().data() + i * D;
    double acc = 0.0;
    for (int j = 0; j < D; ++j) acc += static_cast<double>(p[j]) * d[j];
    const auto [lo, hi] = std::minmax_element(d, d + D);
    r.depth.data()[i] = std::clamp(static_cast<float>(acc), *lo, *hi);
  }
  return r;
}

Grid regress_inverse_depth(const ProbabilityVolume& prob, const HypothesisVolume& hyp) {
  if (!prob.same_shape(hyp.depths)) {
    throw ShapeError("regress_inverse_depth: probability/hypothesis mismatch");
  }
  Grid depth(prob.width(), prob.height(), 1);
  const int D = prob.channels();
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(prob.pixel_count()); ++i) {
    const float* p = prob.data().data() + i * D;
    const float* d = hyp.depths.data().data() + i * D;
    double inv = 0.0;
    for (int j = 0; j < D; ++j) inv += static_cast<double>(p[j]) / d[j];
    const auto [lo, hi] = std::minmax_element(d, d + D);
    depth.data()[i] = std::clamp(static_cast<float>(1.0 / inv), *lo, *hi);
  }
  return depth;
}

Grid confidence(const ProbabilityVolume& prob, const HypothesisVolume& hyp, const Grid& depth) {
  if (!prob.same_shape(hyp.depths) || !prob.same_size(depth)) {
    throw ShapeError("confidence: inputs differ in shape");
  }
  const int D = prob.channels();
  Grid conf(prob.width(), prob.height(), 1);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(prob.pixel_count()); ++i) {
    const float* p = prob.data().data() + i * D;
    const float* d = hyp.depths.data().data() + i * D;
    const double target = 1.0 / depth.data()[i];
    std::vector<int> idx(D);
    std::iota(idx.begin(), idx.end(), 0);
    const int take = std::min(D, 4);
    std::partial_sort(idx.begin(), idx.begin() + take, idx.end(), [&](int a, int b) {
      const double da = std::abs(1.0 / d[a] - target);
      const double db = std::abs(1.0 / d[b] - target);
      return da < db || (da == db && a < b);
    });
    double sum = 0.0;
    for (int k = 0; k < take; ++k) sum += p[idx[k]];
    conf.data()[i] = static_cast<float>(std::clamp(sum, 0.0, 1.0));
  }
  return conf;
}

}  // namespace lpm
