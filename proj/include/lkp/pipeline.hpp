#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <functional>
#include <limits>
#include <mutex>
#include <thread>
#include <vector>

#include "lkp/io.hpp"
#include "lkp/metrics.hpp"

namespace lkp {

struct Range {
  int min = 0;
  int max = 0;
  int step = 1;

  std::vector<int> values() const {
    if (step <= 0 || max < min) fail(Err::InvariantViolation, "bad range");
    std::vector<int> out;
    for (int v = min; v <= max; v += step) out.push_back(v);
    return out;
  }
};

// The published sweep: widths 512..4096 step 128, heights 32..256 step 32,
// all five interpolation kinds.
struct SweepConfig {
  std::vector<InterpolationKind> interpolations{
      InterpolationKind::Nearest, InterpolationKind::Linear, InterpolationKind::Cubic,
      InterpolationKind::Area, InterpolationKind::Lanczos4};
  Range widths{512, 4096, 128};
  Range heights{32, 256, 32};
  std::vector<int> explicit_widths;   // override the range when non-empty
  std::vector<int> explicit_heights;
  std::vector<DetectorKind> detectors{DetectorKind::Harris, DetectorKind::Fast};
  std::vector<DescriptorKind> descriptors{DescriptorKind::Brief, DescriptorKind::RotatedBrief};
  std::size_t frame_stride = 1;
  std::uint64_t seed = 0;
  int threads = 0;  // 0 = hardware concurrency
  bool timing = false;
  Modality modality = Modality::Signal;
  double lo_pct = 0.01, hi_pct = 0.99;
  DetectorParams detector_params;

  std::vector<int> width_values() const {
    return explicit_widths.empty() ? widths.values() : explicit_widths;
  }
  std::vector<int> height_values() const {
    return explicit_heights.empty() ? heights.values() : explicit_heights;
  }
};

struct ConfigId {
  InterpolationKind interpolation = InterpolationKind::Linear;
  int width = 0;
  int height = 0;
  DetectorKind detector = DetectorKind::Harris;
  DescriptorKind descriptor = DescriptorKind::Brief;

  std::string str() const {
    return std::string(to_string(interpolation)) + "_" + std::to_string(width) + "x" +
           std::to_string(height) + "_" + to_string(detector) + "_" + to_string(descriptor);
  }
};

// Per-config aggregate over frames: means of the per-frame metrics.
// frame_count counts consecutive pairs. Configs whose detection image is
// too small are kept with skip = true and NaN metrics so the sweep
// cardinality stays auditable.
struct AggregateRow {
  ConfigId id;
  std::size_t frame_count = 0;
  bool skip = false;
  MetricsRecord means;
};

// A per-frame record with its config, for the records CSV / box plots.
struct FrameRecord {
  ConfigId id;
  std::size_t frame = 0;
  MetricsRecord metrics;
};

namespace detail {

struct MetricsAccumulator {
  KahanSum n_keypoints, runtime_ms, rob_rot, rob_scale, rob_noise;
  KahanSum match_ratio, match_score, distinct;
  std::size_t n_frames = 0;  // frames contributing detector metrics
  std::size_t n_pairs = 0;   // consecutive pairs contributing match metrics

  void add_frame(const MetricsRecord& r) {
    n_keypoints.add(r.n_keypoints);
    rob_rot.add(r.robustness_rotation);
    rob_scale.add(r.robustness_scale);
    rob_noise.add(r.robustness_noise);
    ++n_frames;
  }
  void add_pair(const MetricsRecord& r) {
    runtime_ms.add(r.runtime_ms);
    match_ratio.add(r.match_ratio);
    match_score.add(r.match_score);
    distinct.add(r.distinctiveness);
    ++n_pairs;
  }

  MetricsRecord means() const {
    MetricsRecord m;
    const double nf = n_frames > 0 ? static_cast<double>(n_frames) : 1.0;
    const double np = n_pairs > 0 ? static_cast<double>(n_pairs) : 1.0;
    m.n_keypoints = static_cast<int>(std::lround(n_keypoints.value() / nf));
    m.robustness_rotation = rob_rot.value() / nf;
    m.robustness_scale = rob_scale.value() / nf;
    m.robustness_noise = rob_noise.value() / nf;
    m.runtime_ms = runtime_ms.value() / np;
    m.match_ratio = match_ratio.value() / np;
    m.match_score = match_score.value() / np;
    m.distinctiveness = distinct.value() / np;
    return m;
  }
};

inline MetricsRecord nan_metrics() {
  MetricsRecord m;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  m.n_keypoints = 0;
  m.runtime_ms = nan;
  m.robustness_rotation = nan;
  m.robustness_scale = nan;
  m.robustness_noise = nan;
  m.match_ratio = nan;
  m.match_score = nan;
  m.distinctiveness = nan;
  return m;
}

// Bounded worker pool over an index range; tasks are independent and write
// to preallocated slots, so the result does not depend on thread count.
inline void parallel_for(std::size_t n, int threads, const std::function<void(std::size_t)>& fn) {
  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::max(1, std::min<int>(n_threads, static_cast<int>(n)));
  if (n_threads == 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::thread> pool;
  std::exception_ptr first_error;
  std::mutex error_mutex;
  for (int t = 0; t < n_threads; ++t) {
    pool.emplace_back([&] {
      for (;;) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          fn(i);
        } catch (...) {
          std::lock_guard<std::mutex> lock(error_mutex);
          if (!first_error) first_error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace detail

struct SweepResult {
  std::vector<AggregateRow> rows;
  std::vector<FrameRecord> records;
};

// ---------------------------------------------------------------------------
// run_grid_search: the preprocessing sweep. Work is scheduled per
// (interpolation, width, height) so the resize and the per-detector
// detection/robustness work are shared across descriptor kinds; values are
// identical to the literal nested-loop order because every step is a pure
// function. Per-(config, frame) RANSAC seeds derive from the global seed and
// the config id, making results independent of scheduling.
inline SweepResult run_grid_search(const FrameSource& frames, const SweepConfig& cfg) {
  if (frames.size() < 2) fail(Err::InvariantViolation, "sweep needs at least 2 frames");
  const auto stride = std::max<std::size_t>(1, cfg.frame_stride);

  std::vector<std::size_t> frame_ids;
  for (std::size_t i = 0; i < frames.size(); i += stride) frame_ids.push_back(i);
  if (frame_ids.size() < 2) fail(Err::InvariantViolation, "stride leaves fewer than 2 frames");

  // Native projections are shared by every geometry task.
  std::vector<LidarImage> natives(frame_ids.size());
  detail::parallel_for(frame_ids.size(), cfg.threads, [&](std::size_t k) {
    const PointCloud cloud = frames.frame(frame_ids[k]);
    natives[k] = normalize_u8(project(cloud, cfg.modality), cfg.lo_pct, cfg.hi_pct);
  });

  const auto widths = cfg.width_values();
  const auto heights = cfg.height_values();

  struct GeomTask {
    InterpolationKind interp;
    int width, height;
  };
  std::vector<GeomTask> tasks;
  for (InterpolationKind interp : cfg.interpolations)
    for (int w : widths)
      for (int h : heights) tasks.push_back({interp, w, h});

  const std::size_t combos = cfg.detectors.size() * cfg.descriptors.size();
  std::vector<std::vector<AggregateRow>> task_rows(tasks.size());
  std::vector<std::vector<FrameRecord>> task_records(tasks.size());

  detail::parallel_for(tasks.size(), cfg.threads, [&](std::size_t ti) {
    const GeomTask& task = tasks[ti];
    std::vector<AggregateRow>& rows = task_rows[ti];
    rows.reserve(combos);

    const bool too_small = std::min(task.width, task.height) < kMinDetectSize;
    if (too_small) {
      for (DetectorKind det : cfg.detectors) {
        for (DescriptorKind desc : cfg.descriptors) {
          AggregateRow row;
          row.id = {task.interp, task.width, task.height, det, desc};
          row.skip = true;
          row.frame_count = 0;
          row.means = detail::nan_metrics();
          rows.push_back(row);
        }
      }
      return;
    }

    // Resize once per frame, detect once per (frame, detector).
    std::vector<ImageU8> imgs(frame_ids.size());
    for (std::size_t k = 0; k < frame_ids.size(); ++k)
      imgs[k] = to_u8(resize(natives[k].img, task.width, task.height, task.interp));

    PairMetricsOptions opt;
    opt.timing = cfg.timing;
    opt.detector = cfg.detector_params;

    for (DetectorKind det : cfg.detectors) {
      // Robustness is descriptor-independent.
      std::vector<double> rob_rot(frame_ids.size()), rob_scale(frame_ids.size()),
          rob_noise(frame_ids.size());
      std::vector<std::vector<Keypoint>> kps(frame_ids.size());
      for (std::size_t k = 0; k < frame_ids.size(); ++k) {
        kps[k] = detect(imgs[k], det, opt.detector);
        RobustnessParams rp;
        rp.noise_seed = derive_seed(cfg.seed, std::string("noise_") + to_string(task.interp) +
                                                  "_" + std::to_string(task.width) + "x" +
                                                  std::to_string(task.height) + "_" +
                                                  to_string(det) + "_f" + std::to_string(k));
        rob_rot[k] = robustness(imgs[k], det, RobustnessTransform::Rotation, opt.detector, rp);
        rob_scale[k] = robustness(imgs[k], det, RobustnessTransform::Scale, opt.detector, rp);
        rob_noise[k] = robustness(imgs[k], det, RobustnessTransform::Noise, opt.detector, rp);
      }

      for (DescriptorKind desc : cfg.descriptors) {
        const ConfigId id{task.interp, task.width, task.height, det, desc};
        detail::MetricsAccumulator acc;
        FrameFeatures prev;
        bool have_prev = false;
        for (std::size_t k = 0; k < frame_ids.size(); ++k) {
          const auto t0 = std::chrono::steady_clock::now();
          FrameFeatures cur;
          cur.keypoints = kps[k];
          cur.descriptors = describe(imgs[k], cur.keypoints, desc);
          cur.described_keypoints.reserve(cur.descriptors.size());
          for (const Descriptor& d : cur.descriptors)
            cur.described_keypoints.push_back(
                cur.keypoints[static_cast<std::size_t>(d.keypoint_index)]);

          MetricsRecord rec;
          rec.n_keypoints = static_cast<int>(cur.keypoints.size());
          rec.robustness_rotation = rob_rot[k];
          rec.robustness_scale = rob_scale[k];
          rec.robustness_noise = rob_noise[k];
          acc.add_frame(rec);

          // The first frame has no predecessor; its pair metrics stay NaN
          // in the records (and out of the aggregates).
          const double nan = std::numeric_limits<double>::quiet_NaN();
          rec.runtime_ms = nan;
          rec.match_ratio = nan;
          rec.match_score = nan;
          rec.distinctiveness = nan;

          if (have_prev) {
            opt.ransac.seed = derive_seed(cfg.seed, id.str() + "_pair" + std::to_string(k));
            MetricsRecord pm = pair_metrics(cur, prev, opt);
            if (cfg.timing)
              pm.runtime_ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - t0)
                                  .count();
            rec.runtime_ms = pm.runtime_ms;
            rec.match_ratio = pm.match_ratio;
            rec.match_score = pm.match_score;
            rec.distinctiveness = pm.distinctiveness;
            acc.add_pair(rec);
          }
          task_records[ti].push_back({id, k, rec});
          prev = std::move(cur);
          have_prev = true;
        }
        AggregateRow row;
        row.id = id;
        row.frame_count = acc.n_pairs;
        row.means = acc.means();
        rows.push_back(row);
      }
    }
  });

  // Canonical order: interpolation, width, height, detector, descriptor —
  // independent of scheduling.
  SweepResult result;
  for (auto& rows : task_rows)
    result.rows.insert(result.rows.end(), rows.begin(), rows.end());
  for (auto& recs : task_records)
    result.records.insert(result.records.end(), recs.begin(), recs.end());
  return result;
}

// ---------------------------------------------------------------------------
// run_eval_sweep: Algorithm 2's loop structure (detector outer, descriptor
// inner, frames innermost) at one fixed preprocessing configuration.
inline SweepResult run_eval_sweep(const FrameSource& frames,
                                  const std::vector<DetectorKind>& dets,
                                  const std::vector<DescriptorKind>& descs,
                                  InterpolationKind interp, int width, int height,
                                  const SweepConfig& cfg) {
  SweepConfig sub = cfg;
  sub.interpolations = {interp};
  sub.explicit_widths = {width};
  sub.explicit_heights = {height};
  sub.detectors = dets;
  sub.descriptors = descs;
  return run_grid_search(frames, sub);
}

// ---------------------------------------------------------------------------
// select_best: lexicographic argmax over (distinctiveness, match_score);
// ties prefer the smaller pixel area, then declaration order of the enums.
inline const AggregateRow& select_best(const std::vector<AggregateRow>& rows) {
  const AggregateRow* best = nullptr;
  for (const AggregateRow& row : rows) {
    if (row.skip) continue;
    if (!best) {
      best = &row;
      continue;
    }
    const auto key = [](const AggregateRow& r) {
      return std::make_tuple(r.means.distinctiveness, r.means.match_score);
    };
    const auto tie = [](const AggregateRow& r) {
      return std::make_tuple(static_cast<long>(r.id.width) * r.id.height,
                             static_cast<int>(r.id.interpolation), r.id.width, r.id.height,
                             static_cast<int>(r.id.detector), static_cast<int>(r.id.descriptor));
    };
    if (key(row) > key(*best) || (key(row) == key(*best) && tie(row) < tie(*best))) best = &row;
  }
  if (!best) fail(Err::EmptyInput, "no non-skipped rows to select from");
  return *best;
}

// ---------------------------------------------------------------------------
// CSV emitters. Schemas are stable; NaN renders as "nan".

inline std::string metrics_csv_header() {
  return "interpolation,width,height,detector,descriptor,frame_count,skip,n_keypoints,"
         "runtime_ms,robustness_rotation,robustness_scale,robustness_noise,match_ratio,"
         "match_score,distinctiveness";
}

inline std::string to_csv(const AggregateRow& r) {
  auto fmt = [](double v) { return std::isnan(v) ? std::string("nan") : format_double(v); };
  std::string s;
  s += to_string(r.id.interpolation);
  s += ',' + std::to_string(r.id.width) + ',' + std::to_string(r.id.height);
  s += ',' + std::string(to_string(r.id.detector)) + ',' + to_string(r.id.descriptor);
  s += ',' + std::to_string(r.frame_count) + ',' + (r.skip ? "1" : "0");
  s += ',' + std::to_string(r.means.n_keypoints);
  s += ',' + fmt(r.means.runtime_ms) + ',' + fmt(r.means.robustness_rotation);
  s += ',' + fmt(r.means.robustness_scale) + ',' + fmt(r.means.robustness_noise);
  s += ',' + fmt(r.means.match_ratio) + ',' + fmt(r.means.match_score);
  s += ',' + fmt(r.means.distinctiveness);
  return s;
}

inline std::string records_csv_header() {
  return "interpolation,width,height,detector,descriptor,frame,n_keypoints,runtime_ms,"
         "robustness_rotation,robustness_scale,robustness_noise,match_ratio,match_score,"
         "distinctiveness";
}

inline std::string to_csv(const FrameRecord& r) {
  auto fmt = [](double v) { return std::isnan(v) ? std::string("nan") : format_double(v); };
  std::string s;
  s += to_string(r.id.interpolation);
  s += ',' + std::to_string(r.id.width) + ',' + std::to_string(r.id.height);
  s += ',' + std::string(to_string(r.id.detector)) + ',' + to_string(r.id.descriptor);
  s += ',' + std::to_string(r.frame);
  s += ',' + std::to_string(r.metrics.n_keypoints);
  s += ',' + fmt(r.metrics.runtime_ms) + ',' + fmt(r.metrics.robustness_rotation);
  s += ',' + fmt(r.metrics.robustness_scale) + ',' + fmt(r.metrics.robustness_noise);
  s += ',' + fmt(r.metrics.match_ratio) + ',' + fmt(r.metrics.match_score);
  s += ',' + fmt(r.metrics.distinctiveness);
  return s;
}

inline void write_rows_csv(const fs::path& path, const std::vector<AggregateRow>& rows) {
  std::ofstream os(path);
  if (!os) fail(Err::MissingFile, "cannot open for writing: " + path.string());
  os << metrics_csv_header() << '\n';
  for (const AggregateRow& r : rows) os << to_csv(r) << '\n';
}

inline void write_records_csv(const fs::path& path, const std::vector<FrameRecord>& records) {
  std::ofstream os(path);
  if (!os) fail(Err::MissingFile, "cannot open for writing: " + path.string());
  os << records_csv_header() << '\n';
  for (const FrameRecord& r : records) os << to_csv(r) << '\n';
}

}  // namespace lkp
