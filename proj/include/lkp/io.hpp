#pragma once

#include <array>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "lkp/image.hpp"
#include "lkp/point_cloud.hpp"
#include "lkp/se3.hpp"
#include "lkp/traj_eval.hpp"

namespace lkp {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// LKPC1 point cloud frame: "LKPC1\n", u32 count, then per point
// f32 x,y,z,signal,range + u16 ring,col. Little-endian throughout.

namespace detail {

template <typename T>
void write_le(std::ostream& os, T v) {
  static_assert(std::is_trivially_copyable_v<T>);
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <typename T>
T read_le(std::istream& is) {
  char buf[sizeof(T)];
  is.read(buf, sizeof(T));
  if (!is) fail(Err::ParseError, "unexpected end of file");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace detail

inline void write_cloud(const fs::path& path, const PointCloud& cloud) {
  std::ofstream os(path, std::ios::binary);
  if (!os) fail(Err::MissingFile, "cannot open for writing: " + path.string());
  os.write("LKPC1\n", 6);
  detail::write_le<std::uint32_t>(os, static_cast<std::uint32_t>(cloud.size()));
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    detail::write_le<float>(os, cloud.points[i].x());
    detail::write_le<float>(os, cloud.points[i].y());
    detail::write_le<float>(os, cloud.points[i].z());
    detail::write_le<float>(os, cloud.signal[i]);
    detail::write_le<float>(os, cloud.range[i]);
    detail::write_le<std::uint16_t>(os, cloud.ring[i]);
    detail::write_le<std::uint16_t>(os, cloud.col[i]);
  }
  if (!os) fail(Err::ParseError, "short write: " + path.string());
}

inline PointCloud read_cloud(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) fail(Err::MissingFile, "missing frame file: " + path.string());
  char magic[6];
  is.read(magic, 6);
  if (!is || std::memcmp(magic, "LKPC1\n", 6) != 0)
    fail(Err::ParseError, "bad magic in " + path.string());
  const auto n = detail::read_le<std::uint32_t>(is);
  PointCloud cloud;
  cloud.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    const float x = detail::read_le<float>(is);
    const float y = detail::read_le<float>(is);
    const float z = detail::read_le<float>(is);
    const float sig = detail::read_le<float>(is);
    const float rng = detail::read_le<float>(is);
    const auto ring = detail::read_le<std::uint16_t>(is);
    const auto col = detail::read_le<std::uint16_t>(is);
    cloud.push_back({x, y, z}, sig, rng, ring, col);
  }
  return cloud;
}

// ---------------------------------------------------------------------------
// TUM trajectory: "timestamp tx ty tz qx qy qz qw" per line, 9 significant
// digits. qw is kept non-negative so output is unique per pose.

inline void write_tum(const fs::path& path, const Trajectory& traj) {
  std::ofstream os(path);
  if (!os) fail(Err::MissingFile, "cannot open for writing: " + path.string());
  for (const Pose& p : traj.poses) {
    Eigen::Quaterniond q(p.rotation);
    q.normalize();
    if (q.w() < 0) q.coeffs() = -q.coeffs();
    os << format_double(p.timestamp) << ' ' << format_double(p.translation.x()) << ' '
       << format_double(p.translation.y()) << ' ' << format_double(p.translation.z()) << ' '
       << format_double(q.x()) << ' ' << format_double(q.y()) << ' ' << format_double(q.z())
       << ' ' << format_double(q.w()) << '\n';
  }
}

inline Trajectory read_tum(const fs::path& path) {
  std::ifstream is(path);
  if (!is) fail(Err::MissingFile, "missing trajectory file: " + path.string());
  Trajectory traj;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> f;
    for (const auto& tok : split(t, ' '))
      if (!tok.empty()) f.push_back(tok);
    if (f.size() != 8)
      fail(Err::ParseError,
           path.string() + ":" + std::to_string(lineno) + ": expected 8 fields");
    Pose p;
    p.timestamp = parse_double(f[0]);
    p.translation = {parse_double(f[1]), parse_double(f[2]), parse_double(f[3])};
    Eigen::Quaterniond q(parse_double(f[7]), parse_double(f[4]), parse_double(f[5]),
                         parse_double(f[6]));
    q.normalize();
    p.rotation = q.toRotationMatrix();
    traj.poses.push_back(p);
  }
  traj.validate();
  return traj;
}

// ---------------------------------------------------------------------------
// 8-bit grayscale PNG writer. Deflate "stored" blocks only, so the output is
// a pure function of the pixels with no codec dependency.

namespace detail {

inline std::uint32_t crc32(const std::uint8_t* data, std::size_t len, std::uint32_t crc = 0) {
  static const auto table = [] {
    std::array<std::uint32_t, 256> t{};
    for (std::uint32_t i = 0; i < 256; ++i) {
      std::uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xedb88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  crc = ~crc;
  for (std::size_t i = 0; i < len; ++i) crc = table[(crc ^ data[i]) & 0xffu] ^ (crc >> 8);
  return ~crc;
}

inline std::uint32_t adler32(const std::uint8_t* data, std::size_t len) {
  std::uint32_t a = 1, b = 0;
  for (std::size_t i = 0; i < len; ++i) {
    a = (a + data[i]) % 65521u;
    b = (b + a) % 65521u;
  }
  return (b << 16) | a;
}

inline void push_u32_be(std::vector<std::uint8_t>& v, std::uint32_t x) {
  v.push_back(static_cast<std::uint8_t>(x >> 24));
  v.push_back(static_cast<std::uint8_t>(x >> 16));
  v.push_back(static_cast<std::uint8_t>(x >> 8));
  v.push_back(static_cast<std::uint8_t>(x));
}

inline void push_chunk(std::vector<std::uint8_t>& out, const char type[4],
                       const std::vector<std::uint8_t>& payload) {
  push_u32_be(out, static_cast<std::uint32_t>(payload.size()));
  std::vector<std::uint8_t> body(type, type + 4);
  body.insert(body.end(), payload.begin(), payload.end());
  out.insert(out.end(), body.begin(), body.end());
  push_u32_be(out, crc32(body.data(), body.size()));
}

}  // namespace detail

inline void write_png(const fs::path& path, const ImageU8& img) {
  // Raw scanlines with filter byte 0.
  std::vector<std::uint8_t> raw;
  raw.reserve(static_cast<std::size_t>(img.height) * (img.width + 1));
  for (int y = 0; y < img.height; ++y) {
    raw.push_back(0);
    const std::uint8_t* row = &img.data[static_cast<std::size_t>(y) * img.width];
    raw.insert(raw.end(), row, row + img.width);
  }

  // zlib stream of stored deflate blocks (max 65535 bytes each).
  std::vector<std::uint8_t> z;
  z.push_back(0x78);
  z.push_back(0x01);
  std::size_t off = 0;
  while (off < raw.size()) {
    const std::size_t n = std::min<std::size_t>(65535, raw.size() - off);
    const bool last = off + n == raw.size();
    z.push_back(last ? 1 : 0);
    z.push_back(static_cast<std::uint8_t>(n & 0xff));
    z.push_back(static_cast<std::uint8_t>(n >> 8));
    z.push_back(static_cast<std::uint8_t>(~n & 0xff));
    z.push_back(static_cast<std::uint8_t>((~n >> 8) & 0xff));
    z.insert(z.end(), raw.begin() + static_cast<std::ptrdiff_t>(off),
             raw.begin() + static_cast<std::ptrdiff_t>(off + n));
    off += n;
  }
  detail::push_u32_be(z, detail::adler32(raw.data(), raw.size()));

  std::vector<std::uint8_t> out = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  std::vector<std::uint8_t> ihdr;
  detail::push_u32_be(ihdr, static_cast<std::uint32_t>(img.width));
  detail::push_u32_be(ihdr, static_cast<std::uint32_t>(img.height));
  ihdr.push_back(8);  // bit depth
  ihdr.push_back(0);  // grayscale
  ihdr.push_back(0);
  ihdr.push_back(0);
  ihdr.push_back(0);
  detail::push_chunk(out, "IHDR", ihdr);
  detail::push_chunk(out, "IDAT", z);
  detail::push_chunk(out, "IEND", {});

  std::ofstream os(path, std::ios::binary);
  if (!os) fail(Err::MissingFile, "cannot open for writing: " + path.string());
  os.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
}

// ---------------------------------------------------------------------------
// Dataset layout: a directory with manifest.json (sensor geometry, file
// names), frames.txt ("index timestamp filename" per line), the LKPC1
// frames, and optionally a TUM ground truth.

struct FrameEntry {
  std::size_t index = 0;
  double timestamp = 0.0;
  std::string filename;
};

struct DatasetManifest {
  fs::path root;
  SensorGeometry geometry;
  std::vector<FrameEntry> frames;
  std::optional<fs::path> ground_truth;
};

// Lazy random-access source of frames; implementations must be safe for
// concurrent frame() calls.
class FrameSource {
 public:
  virtual ~FrameSource() = default;
  virtual std::size_t size() const = 0;
  virtual PointCloud frame(std::size_t i) const = 0;
};

class VectorFrameSource final : public FrameSource {
 public:
  explicit VectorFrameSource(std::vector<PointCloud> frames) : frames_(std::move(frames)) {}
  std::size_t size() const override { return frames_.size(); }
  PointCloud frame(std::size_t i) const override { return frames_.at(i); }

 private:
  std::vector<PointCloud> frames_;
};

class DatasetFrameSource final : public FrameSource {
 public:
  DatasetFrameSource(DatasetManifest manifest) : manifest_(std::move(manifest)) {}
  std::size_t size() const override { return manifest_.frames.size(); }

  PointCloud frame(std::size_t i) const override {
    const FrameEntry& e = manifest_.frames.at(i);
    PointCloud cloud = read_cloud(manifest_.root / e.filename);
    cloud.timestamp = e.timestamp;
    validate_cloud(cloud, manifest_.geometry, static_cast<long>(e.index));
    return cloud;
  }

  const DatasetManifest& manifest() const { return manifest_; }

 private:
  DatasetManifest manifest_;
};

inline void write_frames_txt(const fs::path& path, const std::vector<FrameEntry>& frames) {
  std::ofstream os(path);
  if (!os) fail(Err::MissingFile, "cannot open for writing: " + path.string());
  for (const FrameEntry& e : frames)
    os << e.index << ' ' << format_double(e.timestamp) << ' ' << e.filename << '\n';
}

inline std::vector<FrameEntry> read_frames_txt(const fs::path& path) {
  std::ifstream is(path);
  if (!is) fail(Err::MissingFile, "missing frame list: " + path.string());
  std::vector<FrameEntry> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    std::vector<std::string> f;
    for (const auto& tok : split(t, ' '))
      if (!tok.empty()) f.push_back(tok);
    if (f.size() != 3)
      fail(Err::ParseError, path.string() + ":" + std::to_string(lineno) +
                                ": expected 'index timestamp filename'");
    FrameEntry e;
    e.index = static_cast<std::size_t>(parse_long(f[0]));
    e.timestamp = parse_double(f[1]);
    e.filename = f[2];
    out.push_back(e);
  }
  return out;
}

}  // namespace lkp
