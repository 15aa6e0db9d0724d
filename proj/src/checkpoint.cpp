#include "scrawl/checkpoint.hpp"

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>

#include "scrawl/errors.hpp"

namespace scrawl {

namespace {

constexpr char kMagic[4] = {'S', 'C', 'K', 'P'};
constexpr uint32_t kVersion = 1;

template <class T>
void put(std::ostream& out, T v) {
  // little-endian host assumed (x86/arm64); format is defined little-endian
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& in, const std::string& path) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  if (!in) throw DataError("truncated checkpoint: " + path);
  return v;
}

}  // namespace

void save_archive(const std::string& path, const Archive& ar) {
  namespace fs = std::filesystem;
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write checkpoint: " + tmp);
    out.write(kMagic, 4);
    put<uint32_t>(out, kVersion);
    const std::string header = ar.header.dump();
    put<uint64_t>(out, header.size());
    out.write(header.data(), std::streamsize(header.size()));
    put<uint32_t>(out, uint32_t(ar.arrays.size()));
    for (const auto& [name, t] : ar.arrays) {
      put<uint32_t>(out, uint32_t(name.size()));
      out.write(name.data(), std::streamsize(name.size()));
      put<uint32_t>(out, uint32_t(t.rank()));
      for (int i = 0; i < t.rank(); ++i) put<int32_t>(out, t.dim(i));
      out.write(reinterpret_cast<const char*>(t.data()),
                std::streamsize(t.size() * sizeof(float)));
    }
    if (!out) throw DataError("write failure on checkpoint: " + tmp);
  }
  fs::rename(tmp, path);
}

Archive load_archive(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint: " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::string(magic, 4) != std::string(kMagic, 4))
    throw DataError("not a checkpoint file: " + path);
  const auto version = get<uint32_t>(in, path);
  if (version != kVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version));
  const auto header_len = get<uint64_t>(in, path);
  std::string header(header_len, '\0');
  in.read(header.data(), std::streamsize(header_len));
  if (!in) throw DataError("truncated checkpoint header: " + path);

  Archive ar;
  try {
    ar.header = nlohmann::json::parse(header);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("corrupt checkpoint header: ") + e.what());
  }
  const auto count = get<uint32_t>(in, path);
  for (uint32_t i = 0; i < count; ++i) {
    const auto name_len = get<uint32_t>(in, path);
    std::string name(name_len, '\0');
    in.read(name.data(), std::streamsize(name_len));
    const auto rank = get<uint32_t>(in, path);
    if (rank == 0 || rank > 8) throw DataError("bad array rank in checkpoint");
    std::vector<int> shape;
    for (uint32_t d = 0; d < rank; ++d) shape.push_back(get<int32_t>(in, path));
    Tensor<float> t(shape);
    in.read(reinterpret_cast<char*>(t.data()),
            std::streamsize(t.size() * sizeof(float)));
    if (!in) throw DataError("truncated checkpoint array: " + path);
    ar.arrays.emplace_back(std::move(name), std::move(t));
  }
  return ar;
}

std::string string_hash_hex(const std::string& content) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : content) {
    h ^= uint64_t(c);
    h *= 1099511628211ULL;
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", (unsigned long long)h);
  return hex;
}

std::string file_hash_hex(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot hash file: " + path);
  uint64_t h = 1469598103934665603ULL;
  char buf[65536];
  while (in) {
    in.read(buf, sizeof buf);
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= uint64_t(uint8_t(buf[i]));
      h *= 1099511628211ULL;
    }
  }
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", (unsigned long long)h);
  return hex;
}

}  // namespace scrawl
