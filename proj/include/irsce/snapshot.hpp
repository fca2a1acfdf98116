#pragma once

#include <string>
#include <utility>
#include <vector>

#include "irsce/tensor.hpp"

namespace irsce {

// Parameter snapshot: magic "IRSW", version u16, then a length-prefixed list
// of (name, shape, 64-bit little-endian values) records.
struct Snapshot {
  std::vector<std::pair<std::string, tl::Tensor>> records;

  void add(std::string name, tl::Tensor t) {
    records.emplace_back(std::move(name), std::move(t));
  }
  const tl::Tensor* find(const std::string& name) const {
    for (const auto& [n, t] : records)
      if (n == name) return &t;
    return nullptr;
  }
  const tl::Tensor& require(const std::string& name) const;
};

void save_snapshot(const Snapshot& snap, const std::string& path);
Snapshot load_snapshot(const std::string& path);

}  // namespace irsce
