#pragma once

#include <json.hpp>

#include "lkp/io.hpp"

namespace lkp {

// Parses manifest.json + frames.txt and verifies every referenced file
// exists. Frame clouds themselves are validated lazily on read.
inline DatasetManifest load_manifest(const fs::path& root) {
  const fs::path manifest_path = root / "manifest.json";
  std::ifstream is(manifest_path);
  if (!is) fail(Err::MissingFile, "missing manifest: " + manifest_path.string());

  nlohmann::json j;
  try {
    is >> j;
  } catch (const nlohmann::json::exception& e) {
    fail(Err::ParseError, manifest_path.string() + ": " + e.what());
  }

  DatasetManifest m;
  m.root = root;
  try {
    const auto& sensor = j.at("sensor");
    m.geometry.width = sensor.at("width").get<int>();
    m.geometry.height = sensor.at("height").get<int>();
    m.geometry.vfov_deg = sensor.value("vfov_deg", 90.0);
    m.geometry.max_range_m = sensor.value("max_range_m", 50.0);
  } catch (const nlohmann::json::exception& e) {
    fail(Err::ParseError, manifest_path.string() + ": " + e.what());
  }
  if (m.geometry.width <= 0 || m.geometry.height <= 0 || m.geometry.vfov_deg <= 0.0)
    fail(Err::InvariantViolation, "sensor geometry must be positive");

  const std::string frames_file = j.value("frames", std::string("frames.txt"));
  m.frames = read_frames_txt(root / frames_file);
  for (const FrameEntry& e : m.frames)
    if (!fs::exists(root / e.filename))
      fail(Err::MissingFile, "frame file listed but absent: " + (root / e.filename).string());

  if (j.contains("ground_truth") && !j.at("ground_truth").is_null()) {
    const fs::path gt = root / j.at("ground_truth").get<std::string>();
    if (!fs::exists(gt)) fail(Err::MissingFile, "ground truth listed but absent: " + gt.string());
    m.ground_truth = gt;
  }
  return m;
}

inline void write_manifest(const DatasetManifest& manifest) {
  nlohmann::json j;
  j["sensor"] = {{"width", manifest.geometry.width},
                 {"height", manifest.geometry.height},
                 {"vfov_deg", manifest.geometry.vfov_deg},
                 {"max_range_m", manifest.geometry.max_range_m}};
  j["frames"] = "frames.txt";
  if (manifest.ground_truth)
    j["ground_truth"] = manifest.ground_truth->filename().string();

  fs::create_directories(manifest.root);
  write_frames_txt(manifest.root / "frames.txt", manifest.frames);
  std::ofstream os(manifest.root / "manifest.json");
  if (!os)
    fail(Err::MissingFile, "cannot open for writing: " + (manifest.root / "manifest.json").string());
  os << j.dump(2) << '\n';
}

inline std::unique_ptr<DatasetFrameSource> load_dataset(const fs::path& root) {
  return std::make_unique<DatasetFrameSource>(load_manifest(root));
}

}  // namespace lkp
