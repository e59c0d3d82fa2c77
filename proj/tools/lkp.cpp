// lkp: LiDAR-image keypoint toolkit.
//
// Subcommands: gen-scene, project, gridsearch, eval-features, downsample,
// odometry, eval-traj, report. Exit codes: 0 success, 2 usage error,
// 3 data error, 4 degenerate-computation error.

#include <cstdlib>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "lkp/cloud_image.hpp"
#include "lkp/downsample.hpp"
#include "lkp/manifest.hpp"
#include "lkp/odometry.hpp"
#include "lkp/pipeline.hpp"
#include "lkp/report.hpp"
#include "lkp/scene.hpp"
#include "lkp/traj_eval.hpp"

namespace {

int g_log_level = 1;  // 0 quiet, 1 info, 2 debug

void log_info(const std::string& msg) {
  if (g_log_level >= 1) std::cerr << "[lkp] " << msg << '\n';
}

std::string default_data_dir(const std::string& cli_value) {
  if (!cli_value.empty()) return cli_value;
  if (const char* env = std::getenv("LKP_DATA_DIR")) return env;
  return "";
}

lkp::Range parse_range(const std::string& s, lkp::Range fallback) {
  if (s.empty()) return fallback;
  const auto parts = lkp::split(s, ':');
  if (parts.size() != 3) throw CLI::ValidationError("range", "expected MIN:MAX:STEP");
  return {static_cast<int>(lkp::parse_long(parts[0])), static_cast<int>(lkp::parse_long(parts[1])),
          static_cast<int>(lkp::parse_long(parts[2]))};
}

std::vector<lkp::InterpolationKind> parse_interps(const std::string& s) {
  if (s.empty() || s == "all")
    return {lkp::InterpolationKind::Nearest, lkp::InterpolationKind::Linear,
            lkp::InterpolationKind::Cubic, lkp::InterpolationKind::Area,
            lkp::InterpolationKind::Lanczos4};
  std::vector<lkp::InterpolationKind> out;
  for (const auto& tok : lkp::split(s, ',')) out.push_back(lkp::interpolation_from_string(tok));
  return out;
}

std::vector<lkp::DetectorKind> parse_detectors(const std::string& s) {
  std::vector<lkp::DetectorKind> out;
  for (const auto& tok : lkp::split(s, ',')) out.push_back(lkp::detector_from_string(tok));
  return out;
}

std::vector<lkp::DescriptorKind> parse_descriptors(const std::string& s) {
  std::vector<lkp::DescriptorKind> out;
  for (const auto& tok : lkp::split(s, ',')) out.push_back(lkp::descriptor_from_string(tok));
  return out;
}

std::vector<Eigen::Vector3d> circle_waypoints(double radius, int n = 64) {
  std::vector<Eigen::Vector3d> w;
  for (int i = 0; i < n; ++i) {
    const double a = 2.0 * 3.14159265358979323846 * i / n;
    w.emplace_back(radius * std::cos(a), radius * std::sin(a), 0.0);
  }
  return w;
}

struct OdometryOutputs {
  lkp::Trajectory trajectory;
  std::vector<lkp::OdometryFrameLog> log;
};

OdometryOutputs run_odometry_over(const lkp::FrameSource& frames, const lkp::IcpParams& params) {
  lkp::Odometry odom(params);
  OdometryOutputs out;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const lkp::PointCloud cloud = frames.frame(i);
    const lkp::OdometryFrameLog log = odom.process(cloud);
    if (log.degenerate) log_info("frame " + std::to_string(i) + " degenerate, kept prediction");
    out.log.push_back(log);
  }
  out.trajectory.poses = odom.poses();
  return out;
}

void write_timing_log(const lkp::fs::path& path, const std::vector<lkp::OdometryFrameLog>& log) {
  std::ofstream os(path);
  if (!os) lkp::fail(lkp::Err::MissingFile, "cannot open for writing: " + path.string());
  os << "frame,points_in,points_registered,iterations,degenerate,ms\n";
  for (const auto& l : log)
    os << l.frame << ',' << l.points_in << ',' << l.points_registered << ',' << l.iterations
       << ',' << (l.degenerate ? 1 : 0) << ',' << lkp::format_double(l.ms, 6) << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"LiDAR-generated image keypoint toolkit"};
  app.require_subcommand(1);
  app.fallthrough();  // global flags may follow the subcommand

  std::uint64_t seed = 0;
  int threads = 0;
  app.add_option("--seed", seed, "global PRNG seed")->capture_default_str();
  app.add_option("--threads", threads, "worker threads (0 = auto)")->capture_default_str();
  app.add_option("--log-level", g_log_level, "0 quiet, 1 info, 2 debug")->capture_default_str();

  // --- gen-scene -----------------------------------------------------------
  auto* gen = app.add_subcommand("gen-scene", "generate a synthetic dataset");
  std::string gen_kind = "room", gen_out, gen_traj = "static";
  std::vector<double> gen_dims{10.0, 10.0, 3.0};
  int gen_frames = 10;
  double gen_noise = 0.0, gen_speed = 1.0, gen_radius = 3.0, gen_band = 1.0;
  int gen_width = 1024, gen_height = 128;
  gen->add_option("--kind", gen_kind, "room|corridor|forest")->capture_default_str();
  gen->add_option("--out", gen_out, "output dataset directory")->required();
  gen->add_option("--frames", gen_frames, "number of frames")->capture_default_str();
  gen->add_option("--dims", gen_dims, "scene extents X Y Z meters")->expected(3);
  gen->add_option("--noise", gen_noise, "range noise sigma, meters")->capture_default_str();
  gen->add_option("--traj", gen_traj, "static|line|circle")->capture_default_str();
  gen->add_option("--speed", gen_speed, "m/s along the path")->capture_default_str();
  gen->add_option("--radius", gen_radius, "circle radius, meters")->capture_default_str();
  gen->add_option("--band", gen_band, "albedo band pitch, meters")->capture_default_str();
  gen->add_option("--width", gen_width, "native image width")->capture_default_str();
  gen->add_option("--height", gen_height, "native image height")->capture_default_str();

  // --- project -------------------------------------------------------------
  auto* project_cmd = app.add_subcommand("project", "export panoramic PNG images");
  std::string prj_data, prj_out, prj_modality = "both", prj_interp = "linear";
  std::size_t prj_frame = 0;
  int prj_width = 0, prj_height = 0;
  project_cmd->add_option("--data", prj_data, "dataset directory (or $LKP_DATA_DIR)");
  project_cmd->add_option("--out", prj_out, "output directory")->required();
  project_cmd->add_option("--frame", prj_frame, "frame index")->capture_default_str();
  project_cmd->add_option("--modality", prj_modality, "signal|range|both")->capture_default_str();
  project_cmd->add_option("--width", prj_width, "resize width (0 = native)");
  project_cmd->add_option("--height", prj_height, "resize height (0 = native)");
  project_cmd->add_option("--interp", prj_interp, "resize kernel")->capture_default_str();

  // --- gridsearch ----------------------------------------------------------
  auto* grid = app.add_subcommand("gridsearch", "preprocessing configuration sweep");
  std::string gs_data, gs_out, gs_records, gs_widths, gs_heights, gs_interp = "all";
  std::string gs_dets = "harris,fast", gs_descs = "brief,rbrief";
  std::size_t gs_stride = 1;
  bool gs_timing = false;
  grid->add_option("--data", gs_data, "dataset directory (or $LKP_DATA_DIR)");
  grid->add_option("--out", gs_out, "aggregate rows CSV")->required();
  grid->add_option("--records", gs_records, "optional per-frame records CSV");
  grid->add_option("--widths", gs_widths, "MIN:MAX:STEP (default 512:4096:128)");
  grid->add_option("--heights", gs_heights, "MIN:MAX:STEP (default 32:256:32)");
  grid->add_option("--interp", gs_interp, "comma list or 'all'")->capture_default_str();
  grid->add_option("--detectors", gs_dets, "comma list")->capture_default_str();
  grid->add_option("--descriptors", gs_descs, "comma list")->capture_default_str();
  grid->add_option("--stride", gs_stride, "frame stride")->capture_default_str();
  grid->add_flag("--timing", gs_timing, "measure wall-clock runtime (non-deterministic output)");

  // --- eval-features -------------------------------------------------------
  auto* evalf = app.add_subcommand("eval-features", "detector/descriptor sweep at fixed size");
  std::string ef_data, ef_out, ef_records, ef_interp = "linear";
  std::string ef_dets = "harris,shitomasi,fast,ofast", ef_descs = "brief,rbrief";
  int ef_width = 1024, ef_height = 64;
  std::size_t ef_stride = 1;
  bool ef_timing = false;
  evalf->add_option("--data", ef_data, "dataset directory (or $LKP_DATA_DIR)");
  evalf->add_option("--out", ef_out, "aggregate rows CSV")->required();
  evalf->add_option("--records", ef_records, "optional per-frame records CSV");
  evalf->add_option("--width", ef_width, "detection width")->capture_default_str();
  evalf->add_option("--height", ef_height, "detection height")->capture_default_str();
  evalf->add_option("--interp", ef_interp, "resize kernel")->capture_default_str();
  evalf->add_option("--detectors", ef_dets, "comma list")->capture_default_str();
  evalf->add_option("--descriptors", ef_descs, "comma list")->capture_default_str();
  evalf->add_option("--stride", ef_stride, "frame stride")->capture_default_str();
  evalf->add_flag("--timing", ef_timing, "measure wall-clock runtime");

  // --- downsample ----------------------------------------------------------
  auto* down = app.add_subcommand("downsample", "keypoint-guided point cloud downsampling");
  std::string ds_data, ds_out, ds_mode = "grid", ds_detector = "ofast", ds_interp = "linear";
  int ds_sig = 5, ds_rng = 5, ds_width = 1024, ds_height = 64;
  down->add_option("--data", ds_data, "dataset directory (or $LKP_DATA_DIR)");
  down->add_option("--out", ds_out, "output dataset directory")->required();
  down->add_option("--mode", ds_mode, "grid|knn")->capture_default_str();
  down->add_option("--sig", ds_sig, "signal-image neighbour size")->capture_default_str();
  down->add_option("--rng", ds_rng, "range-image neighbour size")->capture_default_str();
  down->add_option("--detector", ds_detector, "detector kind")->capture_default_str();
  down->add_option("--width", ds_width, "detection width")->capture_default_str();
  down->add_option("--height", ds_height, "detection height")->capture_default_str();
  down->add_option("--interp", ds_interp, "resize kernel")->capture_default_str();

  // --- odometry ------------------------------------------------------------
  auto* odo = app.add_subcommand("odometry", "point-to-point ICP odometry");
  std::string od_data, od_out, od_downsampled, od_timing_log;
  double od_voxel = 0.2;
  odo->add_option("--data", od_data, "dataset directory (or $LKP_DATA_DIR)");
  odo->add_option("--out", od_out, "output trajectory (TUM)")->required();
  odo->add_option("--downsampled", od_downsampled, "read clouds from this dataset instead");
  odo->add_option("--voxel", od_voxel, "voxel size, meters")->capture_default_str();
  odo->add_option("--timing-log", od_timing_log, "per-frame timing CSV");

  // --- eval-traj -----------------------------------------------------------
  auto* evt = app.add_subcommand("eval-traj", "trajectory error report");
  std::string et_est, et_gt, et_out, et_timing_log;
  double et_max_dt = 0.05;
  bool et_no_align = false;
  evt->add_option("--est", et_est, "estimated trajectory (TUM)")->required();
  evt->add_option("--gt", et_gt, "ground-truth trajectory (TUM)")->required();
  evt->add_option("--out", et_out, "report CSV")->required();
  evt->add_option("--max-dt", et_max_dt, "association window, seconds")->capture_default_str();
  evt->add_flag("--no-align", et_no_align, "skip Umeyama alignment");
  evt->add_option("--timing-log", et_timing_log, "odometry timing CSV for Avg Pts");

  // --- report --------------------------------------------------------------
  auto* report_cmd = app.add_subcommand("report", "CSV/SVG emitters");
  std::string rp_in, rp_out, rp_kind = "boxplot", rp_metric = "distinctiveness";
  report_cmd->add_option("--in", rp_in, "input CSV")->required();
  report_cmd->add_option("--out", rp_out, "output file")->required();
  report_cmd->add_option("--kind", rp_kind, "boxplot|table")->capture_default_str();
  report_cmd->add_option("--metric", rp_metric, "metric column for box plots")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      lkp::SceneSpec spec;
      spec.kind = lkp::scene_kind_from_string(gen_kind);
      spec.dims = {gen_dims[0], gen_dims[1], gen_dims[2]};
      spec.band_size = gen_band;
      spec.n_frames = gen_frames;
      spec.noise_sigma = gen_noise;
      spec.seed = seed;
      spec.speed = gen_speed;
      spec.geometry.width = gen_width;
      spec.geometry.height = gen_height;
      if (gen_traj == "circle") {
        spec.waypoints = circle_waypoints(gen_radius);
        spec.closed_path = true;
      } else if (gen_traj == "line") {
        spec.waypoints = {{-gen_dims[0] / 2 + 1.0, 0, 0}, {gen_dims[0] / 2 - 1.0, 0, 0}};
      } else if (gen_traj == "static") {
        spec.waypoints = {{0, 0, 0}};
      } else {
        throw CLI::ValidationError("--traj", "expected static|line|circle");
      }
      lkp::generate_scene(spec, gen_out);
      log_info("wrote " + std::to_string(gen_frames) + " frames to " + gen_out);
    } else if (project_cmd->parsed()) {
      const auto source = lkp::load_dataset(default_data_dir(prj_data));
      const lkp::PointCloud cloud = source->frame(prj_frame);
      const auto& geom = source->manifest().geometry;
      lkp::fs::create_directories(prj_out);
      auto emit = [&](lkp::Modality m) {
        lkp::LidarImage native = lkp::project(cloud, m, geom);
        lkp::ImageU8 img =
            prj_width > 0 && prj_height > 0
                ? lkp::preprocess_for_detection(native, prj_width, prj_height,
                                                lkp::interpolation_from_string(prj_interp))
                : lkp::to_u8(lkp::normalize_u8(native).img);
        const std::string name =
            std::string("frame_") + std::to_string(prj_frame) + "_" + lkp::to_string(m) + ".png";
        lkp::write_png(lkp::fs::path(prj_out) / name, img);
        log_info("wrote " + name);
      };
      if (prj_modality == "signal" || prj_modality == "both") emit(lkp::Modality::Signal);
      if (prj_modality == "range" || prj_modality == "both") emit(lkp::Modality::Range);
    } else if (grid->parsed() || evalf->parsed()) {
      const bool is_grid = grid->parsed();
      const auto source = lkp::load_dataset(default_data_dir(is_grid ? gs_data : ef_data));
      lkp::SweepConfig cfg;
      cfg.seed = seed;
      cfg.threads = threads;
      if (is_grid) {
        cfg.widths = parse_range(gs_widths, {512, 4096, 128});
        cfg.heights = parse_range(gs_heights, {32, 256, 32});
        cfg.interpolations = parse_interps(gs_interp);
        cfg.detectors = parse_detectors(gs_dets);
        cfg.descriptors = parse_descriptors(gs_descs);
        cfg.frame_stride = gs_stride;
        cfg.timing = gs_timing;
      } else {
        cfg.explicit_widths = {ef_width};
        cfg.explicit_heights = {ef_height};
        cfg.interpolations = parse_interps(ef_interp);
        cfg.detectors = parse_detectors(ef_dets);
        cfg.descriptors = parse_descriptors(ef_descs);
        cfg.frame_stride = ef_stride;
        cfg.timing = ef_timing;
      }
      const lkp::SweepResult result = lkp::run_grid_search(*source, cfg);
      const std::string& out = is_grid ? gs_out : ef_out;
      lkp::write_rows_csv(out, result.rows);
      const std::string& records = is_grid ? gs_records : ef_records;
      if (!records.empty()) lkp::write_records_csv(records, result.records);
      const lkp::AggregateRow& best = lkp::select_best(result.rows);
      log_info("wrote " + std::to_string(result.rows.size()) + " rows; best " + best.id.str() +
               " (distinctiveness " + lkp::format_double(best.means.distinctiveness, 3) +
               ", match score " + lkp::format_double(best.means.match_score, 3) + ")");
    } else if (down->parsed()) {
      const auto source = lkp::load_dataset(default_data_dir(ds_data));
      const auto& manifest = source->manifest();
      const lkp::ExpandMode mode = lkp::expand_mode_from_string(ds_mode);
      const lkp::DetectorKind det = lkp::detector_from_string(ds_detector);
      const lkp::InterpolationKind interp = lkp::interpolation_from_string(ds_interp);
      const lkp::NeighborSpec spec{ds_sig, ds_rng};
      if (!spec.within_paper_range())
        log_info("neighbour sizes outside the published 3..7 sweep");

      lkp::fs::create_directories(ds_out);
      lkp::DatasetManifest out_manifest;
      out_manifest.root = ds_out;
      out_manifest.geometry = manifest.geometry;
      std::ofstream stats(lkp::fs::path(ds_out) / "downsample_stats.csv");
      stats << "frame,n_keypoints_signal,n_keypoints_range,n_points_out\n";

      for (std::size_t i = 0; i < source->size(); ++i) {
        const lkp::PointCloud cloud = source->frame(i);
        const lkp::ImageU8 sig = lkp::preprocess_for_detection(
            lkp::project(cloud, lkp::Modality::Signal, manifest.geometry), ds_width, ds_height,
            interp);
        const lkp::ImageU8 rng = lkp::preprocess_for_detection(
            lkp::project(cloud, lkp::Modality::Range, manifest.geometry), ds_width, ds_height,
            interp);
        lkp::PointCloud out_cloud;
        int ks = 0, kr = 0;
        try {
          lkp::DownsampleResult res =
              lkp::downsample_frame(cloud, sig, rng, det, spec, mode, {}, manifest.geometry);
          ks = res.n_keypoints_signal;
          kr = res.n_keypoints_range;
          out_cloud = std::move(res.cloud);
        } catch (const lkp::Error& e) {
          if (e.code() != lkp::Err::EmptyResult) throw;
          log_info("frame " + std::to_string(i) + ": no keypoints, keeping raw cloud");
          out_cloud = cloud;
        }
        char name[32];
        std::snprintf(name, sizeof(name), "frame_%05zu.lkpc", i);
        lkp::write_cloud(lkp::fs::path(ds_out) / name, out_cloud);
        out_manifest.frames.push_back({i, cloud.timestamp, name});
        stats << i << ',' << ks << ',' << kr << ',' << out_cloud.size() << '\n';
      }
      if (manifest.ground_truth) {
        lkp::fs::copy_file(*manifest.ground_truth, lkp::fs::path(ds_out) / "gt.tum",
                           lkp::fs::copy_options::overwrite_existing);
        out_manifest.ground_truth = lkp::fs::path(ds_out) / "gt.tum";
      }
      lkp::write_manifest(out_manifest);
      log_info("downsampled " + std::to_string(source->size()) + " frames into " + ds_out);
    } else if (odo->parsed()) {
      const std::string data = default_data_dir(od_data);
      const auto source = lkp::load_dataset(od_downsampled.empty() ? data : od_downsampled);
      lkp::IcpParams params;
      params.voxel_size = od_voxel;
      const OdometryOutputs out = run_odometry_over(*source, params);
      lkp::write_tum(od_out, out.trajectory);
      if (!od_timing_log.empty()) write_timing_log(od_timing_log, out.log);
      log_info("wrote " + std::to_string(out.trajectory.size()) + " poses to " + od_out);
    } else if (evt->parsed()) {
      const lkp::Trajectory est = lkp::read_tum(et_est);
      const lkp::Trajectory gt = lkp::read_tum(et_gt);
      lkp::EvalOptions opts;
      opts.max_dt = et_max_dt;
      opts.align = !et_no_align;
      if (!et_timing_log.empty()) {
        const lkp::CsvTable t = lkp::read_csv(et_timing_log);
        const int col = t.column("points_registered");
        if (col < 0) lkp::fail(lkp::Err::SchemaMismatch, "timing log lacks points_registered");
        lkp::KahanSum sum;
        for (const auto& row : t.rows)
          sum.add(lkp::parse_double(row[static_cast<std::size_t>(col)]));
        opts.avg_points = t.rows.empty() ? 0.0 : sum.value() / static_cast<double>(t.rows.size());
      }
      const lkp::ErrorReport rep = lkp::compute_errors(est, gt, opts);
      std::ofstream os(et_out);
      if (!os) lkp::fail(lkp::Err::MissingFile, "cannot open for writing: " + et_out);
      os << "metric,value\n";
      os << "Translation Error mean (m)," << lkp::format_double(rep.trans_mean) << '\n';
      os << "Translation Error rmse (m)," << lkp::format_double(rep.trans_rmse) << '\n';
      os << "Rotation error (deg)," << lkp::format_double(rep.rot_mean_deg) << '\n';
      os << "Pairs," << rep.n_pairs << '\n';
      os << "Odom Rate (Hz)," << lkp::format_double(rep.odom_rate_hz) << '\n';
      os << "Avg Pts," << lkp::format_double(rep.avg_points) << '\n';
      log_info("trans mean/rmse " + lkp::format_double(rep.trans_mean, 4) + "/" +
               lkp::format_double(rep.trans_rmse, 4) + " m, rot " +
               lkp::format_double(rep.rot_mean_deg, 4) + " deg over " +
               std::to_string(rep.n_pairs) + " pairs");
    } else if (report_cmd->parsed()) {
      const lkp::CsvTable table = lkp::read_csv(rp_in);
      if (rp_kind == "boxplot")
        lkp::emit_boxplot_svg(rp_out, table, rp_metric);
      else if (rp_kind == "table")
        lkp::emit_table_csv(rp_out, table);
      else
        throw CLI::ValidationError("--kind", "expected boxplot|table");
      log_info("wrote " + rp_out);
    }
  } catch (const CLI::Error& e) {
    std::cerr << "usage error: " << e.what() << '\n';
    return 2;
  } catch (const lkp::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.is_data_error() ? 3 : 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
