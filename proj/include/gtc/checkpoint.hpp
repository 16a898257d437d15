#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "gtc/tensor.hpp"

namespace gtc {

// Binary parameter file:
//   "GTCK" | u32 version | entries until EOF
//   entry = u32 name length | name bytes | u32 rank | u64 dims[rank] | f64 values
// All integers and values are little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct NamedTensor {
  std::string name;
  Tensor value;
};

void write_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> entries);
std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path);

}  // namespace gtc
