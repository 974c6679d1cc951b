#pragma once

// Binary particle files (little-endian, float64 unless noted).
//
// Checkpoint "SPCK" v1:
//   magic[4] u32 version u64 step f64 time u64 count, then per particle
//   i64 gaussian_index i32 material_id f64 mass f64 volume x[3] v[3] F[9] C[9]
// Frame "SPFR" v1 (per-frame (x, F) export):
//   magic[4] u32 version u64 step f64 time u64 count, then per particle
//   i64 gaussian_index x[3] F[9]
// Pose "SPPS" v1 (per-frame (μ, A) export of posed Gaussians):
//   magic[4] u32 version u64 step f64 time u64 count, then per Gaussian
//   i64 gaussian_index mu[3] A[9]
// Matrices are stored row-major.

#include "splatsim/mpm/solver.hpp"

#include <array>
#include <bit>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

namespace splatsim::mpm {

static_assert(std::endian::native == std::endian::little, "particle files assume a little-endian host");

namespace io_detail {

inline constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : path_(path), out_(path, std::ios::binary) {
    if (!out_) throw IoError("cannot write '" + path.string() + "'");
  }
  template <typename T>
  void put(const T& v) {
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void put(const Vec3& v) {
    for (int i = 0; i < 3; ++i) put(v[i]);
  }
  void put(const Mat3& m) {
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) put(m(r, c));
  }
  void header(const std::array<char, 4>& magic, std::int64_t step, double time, std::uint64_t count) {
    out_.write(magic.data(), 4);
    put(kVersion);
    put(std::uint64_t(step));
    put(time);
    put(count);
  }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("write failed for '" + path_.string() + "'");
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : path_(path), in_(path, std::ios::binary) {
    if (!in_) throw IoError("cannot open '" + path.string() + "'");
  }
  template <typename T>
  T get() {
    T v{};
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (!in_) throw FormatError("'" + path_.string() + "': truncated");
    return v;
  }
  Vec3 vec3() {
    Vec3 v;
    for (int i = 0; i < 3; ++i) v[i] = get<double>();
    return v;
  }
  Mat3 mat3() {
    Mat3 m;
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) m(r, c) = get<double>();
    return m;
  }
  struct Header {
    std::int64_t step;
    double time;
    std::uint64_t count;
  };
  Header header(const std::array<char, 4>& magic) {
    std::array<char, 4> m{};
    in_.read(m.data(), 4);
    if (!in_ || m != magic)
      throw FormatError("'" + path_.string() + "': expected " + std::string(magic.data(), 4) + " file");
    if (get<std::uint32_t>() != kVersion) throw FormatError("'" + path_.string() + "': unsupported version");
    Header h;
    h.step = std::int64_t(get<std::uint64_t>());
    h.time = get<double>();
    h.count = get<std::uint64_t>();
    return h;
  }

 private:
  std::filesystem::path path_;
  std::ifstream in_;
};

inline constexpr std::array<char, 4> kCheckpointMagic = {'S', 'P', 'C', 'K'};
inline constexpr std::array<char, 4> kFrameMagic = {'S', 'P', 'F', 'R'};
inline constexpr std::array<char, 4> kPoseMagic = {'S', 'P', 'P', 'S'};

}  // namespace io_detail

inline void save_checkpoint(const SimState& st, const std::filesystem::path& path) {
  io_detail::Writer w(path);
  w.header(io_detail::kCheckpointMagic, st.step, st.time, st.particles.size());
  for (const auto& p : st.particles) {
    w.put(p.gaussian_index);
    w.put(p.material_id);
    w.put(p.mass);
    w.put(p.volume);
    w.put(p.x);
    w.put(p.v);
    w.put(p.F);
    w.put(p.C);
  }
  w.finish();
}

/// Restores particles, step and time into `st`, whose materials and grid come from configuration.
inline void load_checkpoint(SimState& st, const std::filesystem::path& path) {
  io_detail::Reader r(path);
  const auto h = r.header(io_detail::kCheckpointMagic);
  std::vector<Particle> particles(h.count);
  for (auto& p : particles) {
    p.gaussian_index = r.get<std::int64_t>();
    p.material_id = r.get<std::int32_t>();
    p.mass = r.get<double>();
    p.volume = r.get<double>();
    p.x = r.vec3();
    p.v = r.vec3();
    p.F = r.mat3();
    p.C = r.mat3();
    if (p.material_id < 0 || std::size_t(p.material_id) >= st.materials.size())
      throw FormatError("'" + path.string() + "': material id out of range");
  }
  st.particles = std::move(particles);
  st.step = h.step;
  st.time = h.time;
}

/// Per-particle (x, F) of one frame.
struct FrameRecord {
  std::int64_t gaussian_index = -1;
  Vec3 x = Vec3::Zero();
  Mat3 F = Mat3::Identity();
};

struct Frame {
  std::int64_t step = 0;
  double time = 0;
  std::vector<FrameRecord> records;
};

inline Frame capture_frame(const SimState& st) {
  Frame f;
  f.step = st.step;
  f.time = st.time;
  f.records.reserve(st.particles.size());
  for (const auto& p : st.particles) f.records.push_back({p.gaussian_index, p.x, p.F});
  return f;
}

inline void save_frame(const Frame& f, const std::filesystem::path& path) {
  io_detail::Writer w(path);
  w.header(io_detail::kFrameMagic, f.step, f.time, f.records.size());
  for (const auto& r : f.records) {
    w.put(r.gaussian_index);
    w.put(r.x);
    w.put(r.F);
  }
  w.finish();
}

inline Frame load_frame(const std::filesystem::path& path) {
  io_detail::Reader r(path);
  const auto h = r.header(io_detail::kFrameMagic);
  Frame f;
  f.step = h.step;
  f.time = h.time;
  f.records.resize(h.count);
  for (auto& rec : f.records) {
    rec.gaussian_index = r.get<std::int64_t>();
    rec.x = r.vec3();
    rec.F = r.mat3();
  }
  return f;
}

struct PoseRecord {
  std::int64_t gaussian_index = -1;
  Vec3 mu = Vec3::Zero();
  Mat3 A = Mat3::Identity();
};

inline void save_poses(std::int64_t step, double time, const std::vector<PoseRecord>& poses,
                       const std::filesystem::path& path) {
  io_detail::Writer w(path);
  w.header(io_detail::kPoseMagic, step, time, poses.size());
  for (const auto& p : poses) {
    w.put(p.gaussian_index);
    w.put(p.mu);
    w.put(p.A);
  }
  w.finish();
}

inline std::vector<PoseRecord> load_poses(const std::filesystem::path& path) {
  io_detail::Reader r(path);
  const auto h = r.header(io_detail::kPoseMagic);
  std::vector<PoseRecord> poses(h.count);
  for (auto& p : poses) {
    p.gaussian_index = r.get<std::int64_t>();
    p.mu = r.vec3();
    p.A = r.mat3();
  }
  return poses;
}

}  // namespace splatsim::mpm
