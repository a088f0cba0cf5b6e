#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "motionseg/tensor.hpp"

namespace motionseg {

struct Checkpoint {
  std::map<std::string, Tensor> tensors;
  std::uint64_t iteration = 0;
  std::uint64_t seed = 0;
  std::string config_echo;  // canonical config dump of the run that wrote it
};

// Binary container, explicitly little endian so files are portable:
//   "MSEG", u32 version, u64 tensor count,
//   per tensor: u32 name length, name, u32 rank, u64 extents, f64 values,
//   then u64 iteration, u64 seed, u32 config length, config text.
void save_checkpoint(const std::string& path, const Checkpoint& checkpoint);

// Rejects bad magic, unknown versions and truncated files.
Checkpoint load_checkpoint(const std::string& path);

}  // namespace motionseg
