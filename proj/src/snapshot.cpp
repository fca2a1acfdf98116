#include "irsce/snapshot.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace irsce {

namespace {

constexpr char kMagic[4] = {'I', 'R', 'S', 'W'};
constexpr std::uint16_t kVersion = 1;

void put_u16(std::ostream& os, std::uint16_t v) {
  unsigned char b[2] = {static_cast<unsigned char>(v & 0xff),
                        static_cast<unsigned char>(v >> 8)};
  os.write(reinterpret_cast<char*>(b), 2);
}

void put_u32(std::ostream& os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<char*>(b), 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<char*>(b), 8);
}

void put_f64(std::ostream& os, double d) {
  std::uint64_t v;
  std::memcpy(&v, &d, 8);
  put_u64(os, v);
}

std::uint16_t get_u16(std::istream& is) {
  unsigned char b[2];
  is.read(reinterpret_cast<char*>(b), 2);
  return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
}

std::uint32_t get_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is) {
  unsigned char b[8];
  is.read(reinterpret_cast<char*>(b), 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is) {
  const std::uint64_t v = get_u64(is);
  double d;
  std::memcpy(&d, &v, 8);
  return d;
}

}  // namespace

const tl::Tensor& Snapshot::require(const std::string& name) const {
  const tl::Tensor* t = find(name);
  if (!t) throw std::runtime_error("snapshot record missing: " + name);
  return *t;
}

void save_snapshot(const Snapshot& snap, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open snapshot for writing: " + path);
  os.write(kMagic, 4);
  put_u16(os, kVersion);
  put_u32(os, static_cast<std::uint32_t>(snap.records.size()));
  for (const auto& [name, t] : snap.records) {
    put_u16(os, static_cast<std::uint16_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    os.put(static_cast<char>(t.shape().rank));
    for (int i = 0; i < t.shape().rank; ++i)
      put_u64(os, static_cast<std::uint64_t>(t.shape()[i]));
    for (std::int64_t i = 0; i < t.numel(); ++i) put_f64(os, t[i]);
  }
  if (!os) throw std::runtime_error("snapshot write failed: " + path);
}

Snapshot load_snapshot(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open snapshot: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a parameter snapshot: " + path);
  const std::uint16_t version = get_u16(is);
  if (version != kVersion)
    throw std::runtime_error("unsupported snapshot version " + std::to_string(version));
  const std::uint32_t count = get_u32(is);
  Snapshot snap;
  for (std::uint32_t r = 0; r < count; ++r) {
    const std::uint16_t name_len = get_u16(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    const int rank = is.get();
    if (rank < 0 || rank > 4) throw std::runtime_error("corrupt snapshot record rank");
    tl::Shape shape;
    shape.rank = rank;
    for (int i = 0; i < rank; ++i)
      shape.d[static_cast<size_t>(i)] = static_cast<std::int64_t>(get_u64(is));
    tl::Tensor t(shape);
    for (std::int64_t i = 0; i < t.numel(); ++i) t[i] = get_f64(is);
    if (!is) throw std::runtime_error("truncated snapshot: " + path);
    snap.add(std::move(name), std::move(t));
  }
  return snap;
}

}  // namespace irsce
