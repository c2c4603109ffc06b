#include "lpm/app.h"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <mutex>
#include <sstream>
#include <thread>

#include "lpm/coefficients.h"
#include "lpm/image_io.h"
#include "lpm/ply.h"
#include "lpm/scene.h"

namespace lpm {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::mutex log_mutex;

void log_line(const std::string& msg) {
  std::lock_guard lock(log_mutex);
  std::cerr << "[lpm] " << msg << '\n';
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << j.dump(2) << '\n';
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open '" + path.string() + "'");
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path.string() + ": " + e.what());
  }
}

template <typename T>
void take(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw std::invalid_argument(where + ": expected an object");
  for (const auto& [key, value] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      throw std::invalid_argument(where + ": unknown key '" + key + "'");
    }
  }
}

void apply_stage(StageConfig& s, const json& j) {
  check_keys(j,
             {"iterations", "init_hypotheses", "perturb_hypotheses", "perturb_range",
              "propagation_samples", "evaluation_samples", "groups", "propagation_dilation",
              "evaluation_dilation"},
             "stage " + std::to_string(s.stage));
  take(j, "iterations", s.iterations);
  take(j, "init_hypotheses", s.init_hypotheses);
  take(j, "perturb_hypotheses", s.perturb_hypotheses);
  take(j, "perturb_range", s.perturb_range);
  take(j, "propagation_samples", s.propagation_samples);
  take(j, "evaluation_samples", s.evaluation_samples);
  take(j, "groups", s.groups);
  take(j, "propagation_dilation", s.propagation_dilation);
  take(j, "evaluation_dilation", s.evaluation_dilation);
}

void apply_pipeline(PipelineConfig& p, const json& j) {
  check_keys(j,
             {"stages", "temperature", "adaptive_propagation", "adaptive_evaluation",
              "view_weighting", "refine", "seed", "match_sharpness", "spatial", "snap",
              "refinement"},
             "pipeline");
  if (j.contains("stages")) {
    const json& st = j.at("stages");
    if (!st.is_array() || st.size() != 3) {
      throw std::invalid_argument("pipeline.stages: expected three entries (stage 1, 2, 3)");
    }
    for (int k = 1; k <= 3; ++k) apply_stage(p.stage(k), st[k - 1]);
  }
  take(j, "temperature", p.temperature);
  take(j, "adaptive_propagation", p.adaptive_propagation);
  take(j, "adaptive_evaluation", p.adaptive_evaluation);
  take(j, "view_weighting", p.view_weighting);
  take(j, "refine", p.refine);
  take(j, "seed", p.seed);
  take(j, "match_sharpness", p.match_sharpness);
  if (j.contains("spatial")) {
    const json& s = j.at("spatial");
    check_keys(s, {"sigma_d", "beta"}, "pipeline.spatial");
    take(s, "sigma_d", p.spatial.sigma_d);
    take(s, "beta", p.spatial.beta);
  }
  if (j.contains("snap")) {
    const json& s = j.at("snap");
    check_keys(s, {"smoothing_radius", "tie_tolerance"}, "pipeline.snap");
    take(s, "smoothing_radius", p.snap.smoothing_radius);
    take(s, "tie_tolerance", p.snap.tie_tolerance);
  }
  if (j.contains("refinement")) {
    const json& s = j.at("refinement");
    check_keys(s, {"radius", "sigma_range"}, "pipeline.refinement");
    take(s, "radius", p.refinement.radius);
    take(s, "sigma_range", p.refinement.sigma_range);
  }
}

json stage_to_json(const StageConfig& s) {
  return {{"iterations", s.iterations},
          {"init_hypotheses", s.init_hypotheses},
          {"perturb_hypotheses", s.perturb_hypotheses},
          {"perturb_range", s.perturb_range},
          {"propagation_samples", s.propagation_samples},
          {"evaluation_samples", s.evaluation_samples},
          {"groups", s.groups},
          {"propagation_dilation", s.propagation_dilation},
          {"evaluation_dilation", s.evaluation_dilation}};
}

void write_mask_png(const fs::path& path, const ValidityMask& mask) {
  write_png(path, mask.to_grid());
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

void RunConfig::validate() const {
  if (dataset.empty()) throw std::invalid_argument("no dataset directory given");
  if (views < 2) throw std::invalid_argument("need at least two views per reference");
  if (workers < 1) throw std::invalid_argument("workers must be at least 1");
  pipeline.validate();
  filter.validate();
}

void apply_config(RunConfig& cfg, const json& j) {
  check_keys(j, {"dataset", "output", "views", "references", "workers", "pipeline", "filter",
                 "coefficients"},
             "config");
  if (j.contains("dataset")) cfg.dataset = j.at("dataset").get<std::string>();
  if (j.contains("output")) cfg.output = j.at("output").get<std::string>();
  if (j.contains("coefficients")) cfg.coefficients = j.at("coefficients").get<std::string>();
  take(j, "views", cfg.views);
  take(j, "references", cfg.references);
  take(j, "workers", cfg.workers);
  if (j.contains("pipeline")) apply_pipeline(cfg.pipeline, j.at("pipeline"));
  if (j.contains("filter")) {
    const json& f = j.at("filter");
    check_keys(f, {"conf_min", "reproj_max", "relative_depth_max", "min_consistent_views"},
               "filter");
    take(f, "conf_min", cfg.filter.conf_min);
    take(f, "reproj_max", cfg.filter.reproj_max);
    take(f, "relative_depth_max", cfg.filter.relative_depth_max);
    take(f, "min_consistent_views", cfg.filter.min_consistent_views);
  }
}

json config_to_json(const RunConfig& cfg) {
  const PipelineConfig& p = cfg.pipeline;
  json stages = json::array();
  for (int k = 1; k <= 3; ++k) stages.push_back(stage_to_json(p.stage(k)));
  return {
      {"dataset", cfg.dataset.string()},
      {"output", cfg.output.string()},
      {"views", cfg.views},
      {"references", cfg.references},
      {"workers", cfg.workers},
      {"coefficients", cfg.coefficients.string()},
      {"pipeline",
       {{"stages", stages},
        {"temperature", p.temperature},
        {"adaptive_propagation", p.adaptive_propagation},
        {"adaptive_evaluation", p.adaptive_evaluation},
        {"view_weighting", p.view_weighting},
        {"refine", p.refine},
        {"seed", p.seed},
        {"match_sharpness", p.match_sharpness},
        {"spatial", {{"sigma_d", p.spatial.sigma_d}, {"beta", p.spatial.beta}}},
        {"snap",
         {{"smoothing_radius", p.snap.smoothing_radius},
          {"tie_tolerance", p.snap.tie_tolerance}}},
        {"refinement",
         {{"radius", p.refinement.radius},
          {"sigma_range", p.refinement.sigma_range}}}}},
      {"filter",
       {{"conf_min", cfg.filter.conf_min},
        {"reproj_max", cfg.filter.reproj_max},
        {"relative_depth_max", cfg.filter.relative_depth_max},
        {"min_consistent_views", cfg.filter.min_consistent_views}}},
  };
}

RunConfig load_run_config(const fs::path& path) {
  RunConfig cfg;
  apply_config(cfg, read_json(path));
  return cfg;
}

std::string view_name(int index) {
  std::ostringstream s;
  s << std::setw(8) << std::setfill('0') << index;
  return s.str();
}

fs::path Dataset::image_path(int i) const { return root / "images" / (names.at(i) + ".png"); }
fs::path Dataset::camera_path(int i) const { return root / "cams" / (names.at(i) + "_cam.txt"); }
fs::path Dataset::gt_depth_path(int i) const { return root / "gt_depths" / (names.at(i) + ".pfm"); }

Dataset open_dataset(const fs::path& root) {
  Dataset ds;
  ds.root = root;
  const fs::path images = root / "images";
  if (!fs::is_directory(images)) {
    throw DatasetError("dataset '" + root.string() + "' has no images/ directory");
  }
  for (const auto& e : fs::directory_iterator(images)) {
    if (e.is_regular_file() && e.path().extension() == ".png") ds.names.push_back(e.path().stem());
  }
  std::sort(ds.names.begin(), ds.names.end());
  if (ds.names.empty()) throw DatasetError("no images in '" + images.string() + "'");
  for (int i = 0; i < ds.size(); ++i) {
    const fs::path cam = ds.camera_path(i);
    if (!fs::exists(cam)) throw DatasetError("missing camera file '" + cam.string() + "'");
    try {
      ds.cameras.push_back(read_camera_file(cam));
    } catch (const std::exception& e) {
      throw DatasetError(cam.string() + ": " + e.what());
    }
  }
  return ds;
}

Grid load_view_image(const Dataset& ds, int i) {
  const fs::path p = ds.image_path(i);
  try {
    return read_image(p);
  } catch (const std::exception& e) {
    throw DatasetError(p.string() + ": " + e.what());
  }
}

std::vector<int> select_views(int reference, int available, int n, std::vector<std::string>* warnings) {
  if (reference < 0 || reference >= available) {
    throw std::out_of_range("reference view " + std::to_string(reference) + " does not exist");
  }
  if (n < 2) throw std::invalid_argument("need at least two views");
  if (available < 2) throw std::invalid_argument("dataset has fewer than two views");
  if (n > available) {
    if (warnings) {
      warnings->push_back("requested " + std::to_string(n) + " views but only " +
                          std::to_string(available) + " exist; using " + std::to_string(available));
    }
    n = available;
  }
  std::vector<int> out{reference};
  for (int i = 0; i < available && static_cast<int>(out.size()) < n; ++i) {
    if (i != reference) out.push_back(i);
  }
  return out;
}

std::size_t peak_memory_bytes() {
  std::ifstream in("/proc/self/status");
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("VmHWM:", 0) == 0) {
      std::istringstream s(line.substr(6));
      std::size_t kb = 0;
      s >> kb;
      return kb * 1024;
    }
  }
  return 0;
}

SynthSummary cmd_synth(const fs::path& scene_path, const fs::path& out) {
  const SyntheticScene scene = load_scene(scene_path);
  fs::create_directories(out / "images");
  fs::create_directories(out / "cams");
  fs::create_directories(out / "gt_depths");
  SynthSummary summary;
  summary.views = static_cast<int>(scene.cameras.size());
  for (int v = 0; v < summary.views; ++v) {
    const RenderedView r = render(scene, v);
    const std::string name = view_name(v);
    write_png(out / "images" / (name + ".png"), r.image);
    write_camera_file(out / "cams" / (name + "_cam.txt"), scene.cameras[v]);
    write_pfm(out / "gt_depths" / (name + ".pfm"), r.depth);
    summary.foreground_pixels.push_back(r.foreground.count());
  }
  log_line("rendered " + std::to_string(summary.views) + " views of " + scene_path.string());
  return summary;
}

json cmd_depth(const RunConfig& cfg) {
  cfg.validate();
  const Dataset ds = open_dataset(cfg.dataset);
  PipelineConfig pipeline = cfg.pipeline;
  if (!cfg.coefficients.empty()) {
    pipeline.coefficients = std::make_shared<const CoefficientSet>(load_coefficients(cfg.coefficients));
  }
  std::vector<int> refs = cfg.references;
  if (refs.empty()) {
    for (int i = 0; i < ds.size(); ++i) refs.push_back(i);
  }
  for (int r : refs) {
    if (r < 0 || r >= ds.size()) throw DatasetError("reference view " + std::to_string(r) + " does not exist");
  }

  // Every reference reads the images of its source views, so load them once.
  std::vector<Grid> images(ds.size());
  for (int i = 0; i < ds.size(); ++i) images[i] = load_view_image(ds, i);

  const fs::path out = cfg.output_dir();
  fs::create_directories(out / "depths");
  fs::create_directories(out / "confidence");

  std::vector<json> per_view(refs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mutex;
  const auto t0 = std::chrono::steady_clock::now();

  auto worker = [&] {
    for (std::size_t job = next++; job < refs.size(); job = next++) {
      try {
        const int ref = refs[job];
        std::vector<std::string> warnings;
        const std::vector<int> views = select_views(ref, ds.size(), cfg.views, &warnings);
        std::vector<Grid> imgs;
        std::vector<CameraModel> cams;
        for (int v : views) {
          imgs.push_back(images[v]);
          cams.push_back(ds.cameras[v]);
        }
        const auto tv = std::chrono::steady_clock::now();
        DepthResult res = run_cascade(imgs, cams, pipeline);
        const double secs = seconds_since(tv);
        const std::string name = ds.names[ref];
        write_pfm(out / "depths" / (name + ".pfm"), res.depth);
        write_pfm(out / "confidence" / (name + ".pfm"), res.confidence);
        warnings.insert(warnings.end(), res.warnings.begin(), res.warnings.end());
        for (const auto& w : warnings) log_line("warning: view " + name + ": " + w);

        json stages = json::array();
        for (const auto& st : res.stages) {
          std::size_t bytes = 0;
          for (const auto& it : res.iterations) {
            if (it.stage == st.stage) bytes = std::max(bytes, it.hypothesis_bytes);
          }
          stages.push_back({{"stage", st.stage}, {"seconds", st.seconds}, {"hypothesis_bytes", bytes}});
        }
        json iters = json::array();
        for (const auto& it : res.iterations) {
          iters.push_back({{"stage", it.stage},
                           {"iteration", it.iteration},
                           {"hypotheses", it.hypotheses},
                           {"hypothesis_bytes", it.hypothesis_bytes},
                           {"seconds", it.seconds}});
        }
        per_view[job] = {{"view", name},
                         {"sources", std::vector<int>(views.begin() + 1, views.end())},
                         {"seconds", secs},
                         {"stages", stages},
                         {"iterations", iters},
                         {"refine_seconds", res.refine_seconds},
                         {"warnings", warnings}};
        std::ostringstream msg;
        msg << "view " << name << ": " << views.size() << " views, " << std::fixed
            << std::setprecision(2) << secs << " s";
        log_line(msg.str());
      } catch (...) {
        std::lock_guard lock(failure_mutex);
        if (!failure) failure = std::current_exception();
        next = refs.size();
      }
    }
  };
  const int nthreads = std::min<int>(cfg.workers, static_cast<int>(refs.size()));
  {
    std::vector<std::jthread> pool;
    for (int t = 1; t < nthreads; ++t) pool.emplace_back(worker);
    worker();
  }
  if (failure) std::rethrow_exception(failure);

  json report = {{"command", "depth"},
                 {"config", config_to_json(cfg)},
                 {"views", per_view},
                 {"seconds", seconds_since(t0)},
                 {"peak_memory_bytes", peak_memory_bytes()}};
  write_json(out / "depth_report.json", report);
  return report;
}

json cmd_fuse(const RunConfig& cfg) {
  cfg.validate();
  const Dataset ds = open_dataset(cfg.dataset);
  const fs::path out = cfg.output_dir();
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<Grid> depths, images;
  std::vector<ValidityMask> photometric;
  for (int i = 0; i < ds.size(); ++i) {
    const fs::path dp = out / "depths" / (ds.names[i] + ".pfm");
    const fs::path cp = out / "confidence" / (ds.names[i] + ".pfm");
    if (!fs::exists(dp)) throw DatasetError("missing depth map '" + dp.string() + "'");
    if (!fs::exists(cp)) throw DatasetError("missing confidence map '" + cp.string() + "'");
    depths.push_back(read_pfm(dp));
    photometric.push_back(photometric_filter(depths.back(), read_pfm(cp), cfg.filter.conf_min));
    images.push_back(load_view_image(ds, i));
  }
  // Photometrically rejected pixels take no part in the geometric check.
  std::vector<Grid> filtered = depths;
  for (std::size_t i = 0; i < filtered.size(); ++i) {
    for (int y = 0; y < filtered[i].height(); ++y) {
      for (int x = 0; x < filtered[i].width(); ++x) {
        if (!photometric[i].get(x, y)) filtered[i].at(x, y) = 0.0f;
      }
    }
  }
  FilterParams filter = cfg.filter;
  json warnings = json::array();
  if (filter.min_consistent_views > ds.size() - 1) {
    const std::string w = "min_consistent_views " + std::to_string(filter.min_consistent_views) +
                          " exceeds the " + std::to_string(ds.size() - 1) + " other views; using " +
                          std::to_string(ds.size() - 1);
    log_line("warning: " + w);
    warnings.push_back(w);
    filter.min_consistent_views = ds.size() - 1;
  }
  const std::vector<ValidityMask> masks = geometric_filter(filtered, ds.cameras, filter);
  fs::create_directories(out / "masks");
  json views = json::array();
  for (int i = 0; i < ds.size(); ++i) {
    write_mask_png(out / "masks" / (ds.names[i] + "_photo.png"), photometric[i]);
    write_mask_png(out / "masks" / (ds.names[i] + "_geo.png"), masks[i]);
    views.push_back({{"view", ds.names[i]},
                     {"photometric", photometric[i].count()},
                     {"geometric", masks[i].count()}});
  }
  const PointCloud cloud = fuse(filtered, masks, images, ds.cameras, filter);
  if (cloud.empty()) throw std::runtime_error("fusion: no point survived filtering");
  write_ply(out / "fused.ply", cloud);
  log_line("fused " + std::to_string(cloud.size()) + " points");
  json report = {{"command", "fuse"},
                 {"config", config_to_json(cfg)},
                 {"points", cloud.size()},
                 {"views", views},
                 {"warnings", warnings},
                 {"seconds", seconds_since(t0)},
                 {"peak_memory_bytes", peak_memory_bytes()}};
  write_json(out / "fuse_report.json", report);
  return report;
}

PointCloud ground_truth_cloud(const Dataset& ds) {
  PointCloud gt;
  for (int i = 0; i < ds.size(); ++i) {
    const fs::path p = ds.gt_depth_path(i);
    if (!fs::exists(p)) throw DatasetError("missing ground-truth depth '" + p.string() + "'");
    const PointCloud part = depth_to_cloud(read_pfm(p), ds.cameras[i]);
    gt.points.insert(gt.points.end(), part.points.begin(), part.points.end());
    gt.colors.insert(gt.colors.end(), part.colors.begin(), part.colors.end());
  }
  return gt;
}

EvalResult cmd_eval(const EvalRequest& req) {
  const PointCloud pred = read_ply(req.prediction);
  PointCloud gt;
  std::optional<Dataset> ds;
  if (fs::is_directory(req.ground_truth)) {
    ds = open_dataset(req.ground_truth);
    gt = ground_truth_cloud(*ds);
  } else {
    gt = read_ply(req.ground_truth);
  }
  if (pred.empty()) throw std::invalid_argument("prediction cloud '" + req.prediction.string() + "' is empty");
  if (gt.empty()) throw std::invalid_argument("ground-truth cloud is empty");

  EvalResult res;
  res.distance_cap = req.distance_cap ? *req.distance_cap : default_distance_cap(gt);
  res.metrics = eval_clouds(pred, gt, res.distance_cap);

  if (!req.depth_dir.empty()) {
    if (!ds) throw std::invalid_argument("a depth error CDF needs a dataset as ground truth");
    // Pool the per-view CDFs weighted by their pixel counts.
    std::vector<double> hits(error_cdf_abscissae().size(), 0.0);
    double total = 0.0;
    for (int i = 0; i < ds->size(); ++i) {
      const fs::path p = req.depth_dir / (ds->names[i] + ".pfm");
      if (!fs::exists(p)) continue;
      const Grid pred_depth = read_pfm(p);
      const Grid gt_depth = read_pfm(ds->gt_depth_path(i));
      std::size_t n = 0;
      for (std::size_t k = 0; k < gt_depth.data().size(); ++k) {
        if (gt_depth.data()[k] > 0.0f && pred_depth.data()[k] > 0.0f) ++n;
      }
      const auto cdf = error_cdf(pred_depth, gt_depth, {ds->cameras[i].depth_min, ds->cameras[i].depth_max});
      for (std::size_t k = 0; k < cdf.size(); ++k) hits[k] += cdf[k].second * n;
      total += n;
    }
    const auto xs = error_cdf_abscissae();
    for (std::size_t k = 0; k < xs.size(); ++k) res.cdf.emplace_back(xs[k], total > 0 ? hits[k] / total : 0.0);
  }
  if (!req.report.empty()) write_json(req.report, res.to_json());
  return res;
}

json EvalResult::to_json() const {
  json cdf_json = json::array();
  for (const auto& [x, y] : cdf) cdf_json.push_back({x, y});
  return {{"accuracy", metrics.accuracy},
          {"completeness", metrics.completeness},
          {"overall", metrics.overall},
          {"distance_cap", distance_cap},
          {"error_cdf", cdf_json}};
}

std::string EvalResult::to_text() const {
  std::ostringstream s;
  s << std::fixed << std::setprecision(4);
  s << "accuracy      " << metrics.accuracy << '\n';
  s << "completeness  " << metrics.completeness << '\n';
  s << "overall       " << metrics.overall << '\n';
  s << "distance cap  " << distance_cap << '\n';
  if (!cdf.empty()) {
    s << "\nerror   fraction\n";
    for (const auto& [x, y] : cdf) {
      if (std::lround(x * 100) % 5 == 0 || x <= 0.05) s << x << "  " << y << '\n';
    }
  }
  return s.str();
}

}  // namespace lpm
