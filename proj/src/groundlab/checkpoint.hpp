#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "groundlab/common.hpp"
#include "groundlab/config.hpp"

namespace groundlab {

// Single-file container: magic, a little-endian u64 header length, a JSON
// index header, then the named arrays as row-major little-endian 64-bit
// floats in directory order. Round-trips are bit-exact.
struct Checkpoint {
  int version = 1;
  Config config;
  int stage = 1;
  std::int64_t step = 0;
  std::string variant;
  std::vector<std::pair<std::string, Matrix>> arrays;

  const Matrix* find(const std::string& name) const;
  void add(const std::string& name, Matrix value);
};

void save_checkpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

}  // namespace groundlab
