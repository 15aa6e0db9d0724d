// Flat checkpoint archive: JSON header (config, step, charset, writer tags,
// rng state) followed by named, shape-tagged little-endian float32 arrays.
// Writes are atomic (temp file + rename).
#pragma once

#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "scrawl/tensor.hpp"

namespace scrawl {

struct Archive {
  nlohmann::json header;
  std::vector<std::pair<std::string, Tensor<float>>> arrays;

  const Tensor<float>* find(const std::string& name) const {
    for (const auto& [n, t] : arrays)
      if (n == name) return &t;
    return nullptr;
  }
};

void save_archive(const std::string& path, const Archive& ar);
Archive load_archive(const std::string& path);

// FNV-1a content hashes, hex strings; used to stamp reports
std::string file_hash_hex(const std::string& path);
std::string string_hash_hex(const std::string& content);

}  // namespace scrawl
