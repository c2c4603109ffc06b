#include "lpm/hypothesis.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

#include "lpm/conv.h"

namespace lpm {

float DepthRange::clamp(double d) const {
  return static_cast<float>(std::clamp(d, min, max));
}

namespace {

// Fills `out` with `count` depths, one per bin of the inverse interval
// [lo, hi], in increasing inverse depth.
void stratified_inverse(double lo, double hi, int count, PixelRng& rng, float* out) {
  const double step = (hi - lo) / count;
  for (int j = 0; j < count; ++j) {
    const double u = kBinMargin + (1.0 - 2.0 * kBinMargin) * rng.uniform();
    const double inv = lo + (j + u) * step;
    out[j] = static_cast<float>(1.0 / inv);
  }
}

void check_range(const DepthRange& r) {
  if (!(r.min > 0.0) || !(r.max > r.min)) throw std::invalid_argument("invalid depth range");
}

}  // namespace

HypothesisVolume init_random(int width, int height, const DepthRange& range, int count,
                             const RngKey& key) {
  check_range(range);
  if (count < 1) throw std::invalid_argument("init_random: need at least one hypothesis");
  HypothesisVolume hyp{Grid(width, height, count)};
  const double lo = range.inverse_far();
  const double hi = range.inverse_near();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      PixelRng rng(key, x, y);
      float* d = hyp.depths.pixel(x, y).data();
      stratified_inverse(lo, hi, count, rng, d);
      for (int j = 0; j < count; ++j) d[j] = range.clamp(d[j]);
    }
  }
  return hyp;
}

HypothesisVolume perturb(const Grid& prev_depth, double range_fraction, int count,
                         const DepthRange& range, const RngKey& key) {
  check_range(range);
  if (count < 1) throw std::invalid_argument("perturb: need at least one hypothesis");
  if (prev_depth.channels() != 1) throw ShapeError("perturb: depth map must be single-channel");
  const int w = prev_depth.width();
  const int h = prev_depth.height();
  HypothesisVolume hyp{Grid(w, h, count)};
  const double inv_lo = range.inverse_far();
  const double inv_hi = range.inverse_near();
  const double half = std::max(0.0, range_fraction) * range.inverse_length() / 2.0;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const float d = prev_depth.at(x, y);
      const double center = (std::isfinite(d) && d > 0.0f)
                                ? std::clamp(1.0 / d, inv_lo, inv_hi)
                                : 0.5 * (inv_lo + inv_hi);
      const double lo = std::max(inv_lo, center - half);
      const double hi = std::min(inv_hi, center + half);
      PixelRng rng(key, x, y);
      float* out = hyp.depths.pixel(x, y).data();
      if (hi - lo <= 0.0) {
        std::fill(out, out + count, range.clamp(1.0 / center));
        continue;
      }
      stratified_inverse(lo, hi, count, rng, out);
      for (int j = 0; j < count; ++j) out[j] = range.clamp(out[j]);
    }
  }
  return hyp;
}

HypothesisVolume propagate(const Grid& prev_depth, const OffsetField& offsets) {
  if (prev_depth.channels() != 1) throw ShapeError("propagate: depth map must be single-channel");
  if (offsets.width != prev_depth.width() || offsets.height != prev_depth.height()) {
    throw ShapeError("propagate: offset field does not match the depth map");
  }
  const int w = prev_depth.width();
  const int h = prev_depth.height();
  const int k = offsets.count();
  HypothesisVolume hyp{Grid(w, h, k)};
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float* out = hyp.depths.pixel(x, y).data();
      const float center = prev_depth.at(x, y);
      for (int i = 0; i < k; ++i) {
        const Offset2& o = offsets.base[i];
        const Offset2& dlt = offsets.delta(x, y, i);
        bool valid = false;
        const float v = bilinear_sample_scalar(prev_depth, x + o.dx + dlt.dx, y + o.dy + dlt.dy, &valid);
        out[i] = valid ? v : center;
      }
    }
  }
  return hyp;
}

HypothesisVolume concat(const HypothesisVolume& a, const HypothesisVolume& b) {
  if (a.count() == 0) return b;
  if (b.count() == 0) return a;
  if (!a.depths.same_size(b.depths)) throw ShapeError("concat: hypothesis volumes differ in size");
  const int ca = a.count();
  const int cb = b.count();
  HypothesisVolume out{Grid(a.width(), a.height(), ca + cb)};
  for (std::size_t i = 0; i < a.depths.pixel_count(); ++i) {
    float* dst = out.depths.data().data() + i * (ca + cb);
    std::copy_n(a.depths.data().data() + i * ca, ca, dst);
    std::copy_n(b.depths.data().data() + i * cb, cb, dst + ca);
  }
  return out;
}

std::vector<Offset2> grid_pattern(int count, int dilation) {
  if (dilation < 1) throw std::invalid_argument("grid_pattern: dilation must be positive");
  std::vector<Offset2> out;
  auto ring = [&out](int d) {
    for (int dy = -1; dy <= 1; ++dy) {
      for (int dx = -1; dx <= 1; ++dx) {
        if (dx || dy) out.push_back({static_cast<float>(dx * d), static_cast<float>(dy * d)});
      }
    }
  };
  switch (count) {
    case 0:
      break;
    case 8:
      ring(dilation);
      break;
    case 16:
      ring(dilation);
      ring(2 * dilation);
      break;
    case 9:
      for (int dy = -1; dy <= 1; ++dy) {
        for (int dx = -1; dx <= 1; ++dx) {
          out.push_back({static_cast<float>(dx * dilation), static_cast<float>(dy * dilation)});
        }
      }
      break;
    default:
      throw std::invalid_argument("no sampling pattern with " + std::to_string(count) + " samples");
  }
  return out;
}

namespace {

// 3x3 displacement candidates, smallest move first so strict comparison
// keeps the smaller displacement on ties.
constexpr int kCandidates[9][2] = {{0, 0},  {1, 0},  {-1, 0}, {0, 1},  {0, -1},
                                   {1, 1},  {-1, 1}, {1, -1}, {-1, -1}};

// Box mean over a (2r+1)^2 window with clamped borders.
Grid box_smooth(const Grid& f, int r) {
  if (r <= 0) return f;
  const int w = f.width();
  const int h = f.height();
  const int c = f.channels();
  Grid out(w, h, c);
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      float* dst = out.pixel(x, y).data();
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) {
          const float* src = f.pixel(std::clamp(x + dx, 0, w - 1), std::clamp(y + dy, 0, h - 1)).data();
          for (int k = 0; k < c; ++k) dst[k] += src[k];
        }
      }
      const float inv = 1.0f / static_cast<float>((2 * r + 1) * (2 * r + 1));
      for (int k = 0; k < c; ++k) dst[k] *= inv;
    }
  }
  return out;
}

void feature_guided_deltas(const Grid& features, const SnapParams& snap, OffsetField& field) {
  const Grid f = box_smooth(features, snap.smoothing_radius);
  const int w = f.width();
  const int h = f.height();
  const int c = f.channels();
  std::vector<float> norms(f.pixel_count());
  for (std::size_t i = 0; i < norms.size(); ++i) {
    double s = 0.0;
    for (int k = 0; k < c; ++k) s += static_cast<double>(f.data()[i * c + k]) * f.data()[i * c + k];
    norms[i] = static_cast<float>(std::sqrt(s));
  }
  auto cosine = [&](int x0, int y0, int x1, int y1) {
    const float* a = f.pixel(x0, y0).data();
    const float* b = f.pixel(x1, y1).data();
    const float na = norms[static_cast<std::size_t>(y0) * w + x0];
    const float nb = norms[static_cast<std::size_t>(y1) * w + x1];
    if (na <= 0.0f || nb <= 0.0f) return (na <= 0.0f && nb <= 0.0f) ? 1.0f : 0.0f;
    float dot = 0.0f;
    for (int k = 0; k < c; ++k) dot += a[k] * b[k];
    return dot / (na * nb);
  };
  const int k = field.count();
#pragma omp parallel for schedule(static)
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int i = 0; i < k; ++i) {
        const int bx = x + static_cast<int>(std::lround(field.base[i].dx));
        const int by = y + static_cast<int>(std::lround(field.base[i].dy));
        float best = -std::numeric_limits<float>::infinity();
        Offset2 chosen{};
        for (const auto& cand : kCandidates) {
          const int qx = bx + cand[0];
          const int qy = by + cand[1];
          if (qx < 0 || qy < 0 || qx >= w || qy >= h) continue;
          // A neighbor sample never collapses onto the center pixel itself.
          if (qx == x && qy == y && (bx != x || by != y)) continue;
          const float s = cosine(x, y, qx, qy);
          if (s > best + snap.tie_tolerance) {
            best = s;
            chosen = {static_cast<float>(cand[0]), static_cast<float>(cand[1])};
          }
        }
        field.delta(x, y, i) = chosen;
      }
    }
  }
}

void coefficient_deltas(const Grid& f, const CoefficientSet& set, const std::string& base,
                        OffsetField& field) {
  const Tensor& wt = set.require(base + ".weight");
  const Tensor* bias = set.find(base + ".bias");
  if (wt.shape.size() != 4 || wt.shape[0] != 2 * field.count() || wt.shape[1] != f.channels()) {
    throw CoefficientError(CoefficientErrc::shape_mismatch, base + ".weight",
                           "tensor '" + base + ".weight' does not match " +
                               std::to_string(field.count()) + " samples");
  }
  const Grid out = conv2d(f, wt, bias, 1, 1);
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x) {
      for (int i = 0; i < field.count(); ++i) {
        field.delta(x, y, i) = {out.at(x, y, 2 * i), out.at(x, y, 2 * i + 1)};
      }
    }
  }
}

}  // namespace

OffsetField compute_offsets(const Grid& ref_features, int count, int dilation, OffsetMode mode,
                            const CoefficientSet* coefficients, const std::string& prefix,
                            int stage, const SnapParams& snap) {
  OffsetField field;
  field.width = ref_features.width();
  field.height = ref_features.height();
  field.base = grid_pattern(count, dilation);
  field.deltas.assign(ref_features.pixel_count() * field.base.size(), Offset2{});
  if (field.base.empty()) return field;
  switch (mode) {
    case OffsetMode::fixed:
      break;
    case OffsetMode::feature_guided:
      feature_guided_deltas(ref_features, snap, field);
      break;
    case OffsetMode::coefficients:
      if (!coefficients) throw std::invalid_argument("coefficient offsets need a coefficient set");
      coefficient_deltas(ref_features, *coefficients, prefix + ".stage" + std::to_string(stage),
                         field);
      break;
  }
  return field;
}

OffsetField propagation_offsets(const Grid& ref_features, int count, OffsetMode mode,
                                const CoefficientSet* coefficients, int stage, int dilation,
                                const SnapParams& snap) {
  if (count != 0 && count != 8 && count != 16) {
    throw std::invalid_argument("propagation supports 0, 8 or 16 samples, not " +
                                std::to_string(count));
  }
  return compute_offsets(ref_features, count, dilation, mode, coefficients, "prop", stage, snap);
}

}  // namespace lpm
