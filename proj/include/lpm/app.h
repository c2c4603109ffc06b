#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "lpm/camera.h"
#include "lpm/fusion.h"
#include "lpm/grid.h"
#include "lpm/metrics.h"
#include "lpm/pipeline.h"

namespace lpm {

struct RunConfig {
  std::filesystem::path dataset;
  std::filesystem::path output;       // defaults to the dataset directory
  int views = 5;                      // N, reference included
  std::vector<int> references;        // empty: every view
  int workers = 1;                    // reference views processed concurrently
  PipelineConfig pipeline = PipelineConfig::defaults();
  FilterParams filter;
  std::filesystem::path coefficients;  // optional binary coefficient file

  std::filesystem::path output_dir() const { return output.empty() ? dataset : output; }
  void validate() const;
};

// Keys mirror the struct fields; "stages" is a list ordered stage 1, 2, 3.
// Unknown keys are rejected.
void apply_config(RunConfig& cfg, const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);
RunConfig load_run_config(const std::filesystem::path& path);

// images/00000000.png, cams/00000000_cam.txt, optional gt_depths/00000000.pfm.
struct Dataset {
  std::filesystem::path root;
  std::vector<std::string> names;  // "00000000", ...
  std::vector<CameraModel> cameras;

  std::filesystem::path image_path(int i) const;
  std::filesystem::path camera_path(int i) const;
  std::filesystem::path gt_depth_path(int i) const;
  int size() const { return static_cast<int>(names.size()); }
};

class DatasetError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string view_name(int index);
Dataset open_dataset(const std::filesystem::path& root);
Grid load_view_image(const Dataset& ds, int i);

// Reference first, then the other views in index order, up to n in total.
// A request for more views than exist is clamped and a warning appended.
std::vector<int> select_views(int reference, int available, int n,
                              std::vector<std::string>* warnings = nullptr);

// VmHWM of this process in bytes, 0 when unavailable.
std::size_t peak_memory_bytes();

struct SynthSummary {
  int views = 0;
  std::vector<std::size_t> foreground_pixels;
};
SynthSummary cmd_synth(const std::filesystem::path& scene_path, const std::filesystem::path& out);

// Writes depths/<name>.pfm, confidence/<name>.pfm and depth_report.json.
nlohmann::json cmd_depth(const RunConfig& cfg);

// Writes fused.ply, masks/<name>.png and fuse_report.json. Throws when no
// point survives filtering.
nlohmann::json cmd_fuse(const RunConfig& cfg);

struct EvalRequest {
  std::filesystem::path prediction;   // PLY
  std::filesystem::path ground_truth; // PLY or dataset directory with gt_depths/
  std::optional<double> distance_cap;
  std::filesystem::path depth_dir;    // optional, enables the depth error CDF
  std::filesystem::path report;       // optional JSON output
};

struct EvalResult {
  CloudMetrics metrics;
  double distance_cap = 0.0;
  std::vector<std::pair<double, double>> cdf;  // empty without depth maps
  nlohmann::json to_json() const;
  std::string to_text() const;
};

EvalResult cmd_eval(const EvalRequest& req);

// Ground-truth cloud from every gt depth map of a dataset.
PointCloud ground_truth_cloud(const Dataset& ds);

}  // namespace lpm
