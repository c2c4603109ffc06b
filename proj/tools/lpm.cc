// lpm: synthetic data generation, depth estimation, fusion and evaluation.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lpm/app.h"

namespace {

// Flags left unset keep the value from the config file (or the default).
struct RunFlags {
  std::string dataset;
  std::string config;
  std::optional<std::string> output;
  std::optional<std::string> coefficients;
  std::optional<int> views;
  std::optional<std::vector<int>> refs;
  std::optional<int> workers;
  std::optional<std::uint64_t> seed;
  std::optional<std::vector<int>> stage_iters;
  std::optional<int> init_hypotheses;
  std::optional<std::vector<int>> perturb_hypotheses;
  std::optional<std::vector<double>> perturb_ranges;
  std::optional<std::vector<int>> prop_samples;
  std::optional<int> groups;
  std::optional<double> temperature;
  bool no_ap = false;
  bool no_ae = false;
  bool no_view_weight = false;
  bool no_refine = false;
  std::optional<double> conf_min;
  std::optional<double> reproj_max;
  std::optional<double> rel_depth_max;
  std::optional<int> min_views;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("dataset", f.dataset, "Dataset directory (images/, cams/)")->required();
  cmd->add_option("--config", f.config, "JSON config; flags override it")->check(CLI::ExistingFile);
  cmd->add_option("-o,--out", f.output, "Output directory (default: the dataset)");
  cmd->add_option("--coefficients", f.coefficients, "Learned coefficient file")
      ->check(CLI::ExistingFile);
  cmd->add_option("--views", f.views, "Views per reference, reference included");
  cmd->add_option("--refs", f.refs, "Reference view indices (default: all)")->delimiter(',');
  cmd->add_option("--workers", f.workers, "Reference views processed concurrently");
  cmd->add_option("--seed", f.seed, "Random seed");
  cmd->add_option("--stage-iters", f.stage_iters, "Iterations for stages 3,2,1")
      ->delimiter(',')
      ->expected(3);
  cmd->add_option("--init-hypotheses", f.init_hypotheses, "Initial hypotheses D_f");
  cmd->add_option("--perturb-hypotheses", f.perturb_hypotheses, "N_k for stages 3,2,1")
      ->delimiter(',')
      ->expected(3);
  cmd->add_option("--perturb-ranges", f.perturb_ranges, "R_k for stages 3,2,1")
      ->delimiter(',')
      ->expected(3);
  cmd->add_option("--prop-samples", f.prop_samples, "K_p for stages 3,2,1")
      ->delimiter(',')
      ->expected(3);
  cmd->add_option("--groups", f.groups, "Correlation groups G");
  cmd->add_option("--temperature", f.temperature, "Softmax temperature");
  cmd->add_flag("--no-ap", f.no_ap, "Fixed propagation offsets");
  cmd->add_flag("--no-ae", f.no_ae, "Fixed evaluation offsets");
  cmd->add_flag("--no-view-weight", f.no_view_weight, "Uniform view weights");
  cmd->add_flag("--no-refine", f.no_refine, "Plain bilinear upsampling of the stage-1 depth");
  cmd->add_option("--conf-min", f.conf_min, "Photometric confidence threshold");
  cmd->add_option("--reproj-max", f.reproj_max, "Reprojection error threshold (px)");
  cmd->add_option("--rel-depth-max", f.rel_depth_max, "Relative depth difference threshold");
  cmd->add_option("--min-views", f.min_views, "Consistent views needed to keep a pixel");
}

// Stage lists on the command line run coarse to fine: stage 3, 2, 1.
template <typename T, typename Set>
void per_stage(lpm::PipelineConfig& p, const std::optional<std::vector<T>>& values, Set set) {
  if (!values) return;
  for (int i = 0; i < 3; ++i) set(p.stage(3 - i), (*values)[i]);
}

lpm::RunConfig resolve(const RunFlags& f) {
  lpm::RunConfig cfg;
  if (!f.config.empty()) cfg = lpm::load_run_config(f.config);
  cfg.dataset = f.dataset;
  if (f.output) cfg.output = *f.output;
  if (f.coefficients) cfg.coefficients = *f.coefficients;
  if (f.views) cfg.views = *f.views;
  if (f.refs) cfg.references = *f.refs;
  if (f.workers) cfg.workers = *f.workers;
  lpm::PipelineConfig& p = cfg.pipeline;
  if (f.seed) p.seed = *f.seed;
  per_stage(p, f.stage_iters, [](lpm::StageConfig& s, int v) { s.iterations = v; });
  per_stage(p, f.perturb_hypotheses, [](lpm::StageConfig& s, int v) { s.perturb_hypotheses = v; });
  per_stage(p, f.perturb_ranges, [](lpm::StageConfig& s, double v) { s.perturb_range = v; });
  per_stage(p, f.prop_samples, [](lpm::StageConfig& s, int v) { s.propagation_samples = v; });
  for (auto& s : p.stages) {
    if (f.init_hypotheses) s.init_hypotheses = *f.init_hypotheses;
    if (f.groups) s.groups = *f.groups;
  }
  if (f.temperature) p.temperature = *f.temperature;
  if (f.no_ap) p.adaptive_propagation = false;
  if (f.no_ae) p.adaptive_evaluation = false;
  if (f.no_view_weight) p.view_weighting = false;
  if (f.no_refine) p.refine = false;
  if (f.conf_min) cfg.filter.conf_min = *f.conf_min;
  if (f.reproj_max) cfg.filter.reproj_max = *f.reproj_max;
  if (f.rel_depth_max) cfg.filter.relative_depth_max = *f.rel_depth_max;
  if (f.min_views) cfg.filter.min_consistent_views = *f.min_views;
  cfg.validate();
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Learned-Patchmatch multi-view stereo"};
  app.require_subcommand(1);

  std::string scene, synth_out;
  auto* synth = app.add_subcommand("synth", "Render a scene file into a dataset");
  synth->add_option("scene", scene, "Scene description")->required()->check(CLI::ExistingFile);
  synth->add_option("out", synth_out, "Output dataset directory")->required();

  RunFlags depth_flags, fuse_flags, run_flags;
  auto* depth = app.add_subcommand("depth", "Estimate a depth map per reference view");
  add_run_flags(depth, depth_flags);
  auto* fuse = app.add_subcommand("fuse", "Filter and fuse depth maps into a point cloud");
  add_run_flags(fuse, fuse_flags);
  auto* run = app.add_subcommand("run", "depth, fuse, and eval when ground truth exists");
  add_run_flags(run, run_flags);

  lpm::EvalRequest eval_req;
  std::string pred, gt, depth_dir, report;
  double cap = 0.0;
  auto* eval = app.add_subcommand("eval", "Compare a fused cloud with ground truth");
  eval->add_option("prediction", pred, "Predicted PLY")->required()->check(CLI::ExistingFile);
  eval->add_option("ground_truth", gt, "Ground-truth PLY or dataset directory")
      ->required()
      ->check(CLI::ExistingPath);
  auto* cap_opt = eval->add_option("--cap", cap, "Outlier distance cap (default: 20x median spacing)");
  eval->add_option("--depths", depth_dir, "Depth maps to score against gt_depths/")
      ->check(CLI::ExistingDirectory);
  eval->add_option("--report", report, "JSON report path");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*synth) {
      const auto s = lpm::cmd_synth(scene, synth_out);
      std::cout << "wrote " << s.views << " views to " << synth_out << '\n';
    } else if (*depth) {
      lpm::cmd_depth(resolve(depth_flags));
    } else if (*fuse) {
      lpm::cmd_fuse(resolve(fuse_flags));
    } else if (*run) {
      const lpm::RunConfig cfg = resolve(run_flags);
      lpm::cmd_depth(cfg);
      lpm::cmd_fuse(cfg);
      const lpm::Dataset ds = lpm::open_dataset(cfg.dataset);
      if (std::filesystem::exists(ds.gt_depth_path(0))) {
        lpm::EvalRequest req{cfg.output_dir() / "fused.ply", cfg.dataset, std::nullopt,
                             cfg.output_dir() / "depths", cfg.output_dir() / "eval_report.json"};
        std::cout << lpm::cmd_eval(req).to_text();
      }
    } else if (*eval) {
      eval_req.prediction = pred;
      eval_req.ground_truth = gt;
      if (cap_opt->count()) eval_req.distance_cap = cap;
      eval_req.depth_dir = depth_dir;
      eval_req.report = report;
      std::cout << lpm::cmd_eval(eval_req).to_text();
    }
  } catch (const std::exception& e) {
    std::cerr << "lpm: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
