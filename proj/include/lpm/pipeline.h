#pragma once

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lpm/camera.h"
#include "lpm/coefficients.h"
#include "lpm/cost.h"
#include "lpm/features.h"
#include "lpm/grid.h"
#include "lpm/hypothesis.h"

namespace lpm {

struct StageConfig {
  int stage = 3;
  int iterations = 1;
  int init_hypotheses = 48;      // D_f, used by the first stage-3 iteration
  int perturb_hypotheses = 8;    // N_k
  double perturb_range = 0.04;   // R_k, fraction of the inverse-depth length
  int propagation_samples = 0;   // K_p
  int evaluation_samples = 9;    // K_e
  int groups = 4;                // G
  int propagation_dilation = 2;
  int evaluation_dilation = 1;
};

// Joint-bilateral x2 upsampling used when no refinement coefficients are
// loaded. Each output pixel averages the half-resolution depths within
// `radius` half-resolution pixels, weighted by a tent of that radius and by
// the similarity of its guide color to the pooled guide of each sample.
struct RefineParams {
  int radius = 2;
  double sigma_range = 0.1;
};

struct PipelineConfig {
  std::array<StageConfig, 3> stages;  // stages[k - 1] configures stage k
  double temperature = 1.0;
  bool adaptive_propagation = true;
  bool adaptive_evaluation = true;
  bool view_weighting = true;
  bool refine = true;
  std::uint64_t seed = 0;
  // Handcrafted features are rescaled so the group correlation of two
  // feature vectors is match_sharpness * cosine similarity.
  float match_sharpness = 10.0f;
  SpatialWeightParams spatial;
  SnapParams snap;
  RefineParams refinement;
  // Loaded groups replace the matching deterministic component.
  std::shared_ptr<const CoefficientSet> coefficients;

  StageConfig& stage(int k) { return stages.at(k - 1); }
  const StageConfig& stage(int k) const { return stages.at(k - 1); }

  // Iterations (2, 2, 1), D_f = 48, N_k = (16, 8, 8), R_k = (0.38, 0.09, 0.04),
  // K_p = (16, 8, 0), K_e = 9 for stages (3, 2, 1).
  static PipelineConfig defaults();
  void validate() const;
};

struct IterationRecord {
  int stage = 0;
  int iteration = 0;
  int hypotheses = 0;
  std::size_t hypothesis_bytes = 0;
  double seconds = 0.0;
  Grid depth;  // stage resolution
};

struct StageInput {
  int stage = 3;
  const Grid* prev_depth = nullptr;                // already at stage resolution
  std::span<const Grid> features;                  // view 0 is the reference
  std::span<const CameraModel> cameras;            // already scaled to the stage
  std::span<const Grid> view_weights;              // one per source view, or empty
  DepthRange range;
  bool final_stage = false;                        // last iteration regresses inverse depth
};

struct StageOutput {
  Grid depth;
  ProbabilityVolume prob;
  HypothesisVolume hypotheses;
  std::vector<Grid> view_weights;
  Grid confidence;  // only for the final stage
  std::vector<IterationRecord> iterations;
};

StageOutput run_stage(const StageInput& input, const PipelineConfig& cfg);

struct StageTiming {
  int stage = 0;
  double seconds = 0.0;
};

struct DepthResult {
  Grid depth;        // full resolution
  Grid confidence;   // full resolution
  std::array<Grid, 3> stage_depths;  // stage_depths[k - 1] at stage resolution
  Grid unrefined;    // stage-1 output bilinearly upsampled to full resolution
  std::vector<Grid> view_weights;    // stage-3 resolution, one per source view
  std::vector<IterationRecord> iterations;
  std::vector<StageTiming> stages;
  double refine_seconds = 0.0;
  std::vector<std::string> warnings;
};

// images[0] and cameras[0] are the reference view.
DepthResult run_cascade(std::span<const Grid> images, std::span<const CameraModel> cameras,
                        const PipelineConfig& cfg);

// x2 refinement of a half-resolution depth map guided by the reference image.
// The depth is scaled to [0, 1] over the range, a residual is added to its
// bilinear upsampling, and the result is scaled back.
Grid refine(const Grid& depth_half, const Grid& image, const DepthRange& range,
            const RefineParams& params, const CoefficientSet* coefficients = nullptr);

// True when every source camera sits within 1e-6 of the reference pose.
bool degenerate_baseline(std::span<const CameraModel> cameras);

}  // namespace lpm
