#include "resplat/splat.hpp"

#include <cstring>
#include <fstream>

namespace resplat {

namespace {

constexpr char kMagic[4] = {'R', 'S', 'P', 'L'};
constexpr uint32_t kVersion = 1;
constexpr size_t kFloatsPerSplat = 15;

void put_f32(std::vector<uint8_t>& out, double v) {
  float f = static_cast<float>(v);
  uint8_t b[4];
  std::memcpy(b, &f, 4);
  out.insert(out.end(), b, b + 4);
}

double get_f32(const uint8_t*& p) {
  float f;
  std::memcpy(&f, p, 4);
  p += 4;
  return f;
}

}  // namespace

std::vector<uint8_t> splats_to_bytes(const SplatList& splats) {
  std::vector<uint8_t> out;
  out.reserve(16 + splats.size() * kFloatsPerSplat * 4);
  out.insert(out.end(), kMagic, kMagic + 4);
  uint32_t ver = kVersion;
  uint64_t count = splats.size();
  out.resize(out.size() + 12);
  std::memcpy(out.data() + 4, &ver, 4);
  std::memcpy(out.data() + 8, &count, 8);
  for (const Splat2D& s : splats) {
    put_f32(out, s.mu.x());
    put_f32(out, s.mu.y());
    put_f32(out, s.mu.z());
    put_f32(out, s.rot.w());
    put_f32(out, s.rot.x());
    put_f32(out, s.rot.y());
    put_f32(out, s.rot.z());
    put_f32(out, s.sx);
    put_f32(out, s.sy);
    put_f32(out, s.opacity_logit);
    put_f32(out, s.material.albedo.x());
    put_f32(out, s.material.albedo.y());
    put_f32(out, s.material.albedo.z());
    put_f32(out, s.material.roughness);
    put_f32(out, s.material.metallic);
  }
  return out;
}

SplatList splats_from_bytes(const uint8_t* data, size_t size) {
  if (size < 16 || std::memcmp(data, kMagic, 4) != 0)
    throw std::runtime_error("splat data: bad magic or truncated header");
  uint32_t ver;
  uint64_t count;
  std::memcpy(&ver, data + 4, 4);
  std::memcpy(&count, data + 8, 8);
  if (ver != kVersion) throw std::runtime_error("splat data: unsupported version");
  if (size < 16 + count * kFloatsPerSplat * 4)
    throw std::runtime_error("splat data: truncated payload");
  SplatList splats(count);
  const uint8_t* p = data + 16;
  for (Splat2D& s : splats) {
    // sequence the reads explicitly; argument evaluation order is unspecified
    double mx = get_f32(p), my = get_f32(p), mz = get_f32(p);
    s.mu = Vec3(mx, my, mz);
    double w = get_f32(p), x = get_f32(p), y = get_f32(p), z = get_f32(p);
    s.rot = Quat(w, x, y, z);
    s.sx = get_f32(p);
    s.sy = get_f32(p);
    s.opacity_logit = get_f32(p);
    double ar = get_f32(p), ag = get_f32(p), ab = get_f32(p);
    s.material.albedo = Vec3(ar, ag, ab);
    s.material.roughness = get_f32(p);
    s.material.metallic = get_f32(p);
  }
  return splats;
}

void write_splats(const std::string& path, const SplatList& splats) {
  std::vector<uint8_t> bytes = splats_to_bytes(splats);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write splat file: " + path);
  f.write(reinterpret_cast<const char*>(bytes.data()), bytes.size());
}

SplatList read_splats(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open splat file: " + path);
  std::vector<uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                             std::istreambuf_iterator<char>());
  return splats_from_bytes(bytes.data(), bytes.size());
}

void round_trip_f32(SplatList& splats) {
  std::vector<uint8_t> bytes = splats_to_bytes(splats);
  splats = splats_from_bytes(bytes.data(), bytes.size());
}

}  // namespace resplat
