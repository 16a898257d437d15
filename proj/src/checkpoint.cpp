#include "gtc/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "gtc/error.hpp"

namespace gtc {
namespace {

template <typename T>
void put(std::ostream& os, T v) {
  unsigned char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  os.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
bool get(std::istream& is, T& v) {
  unsigned char buf[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(buf), sizeof(T))) return false;
  if constexpr (std::endian::native == std::endian::big) std::reverse(buf, buf + sizeof(T));
  std::memcpy(&v, buf, sizeof(T));
  return true;
}

}  // namespace

void write_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> entries) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) throw IoError("cannot open '" + path.string() + "' for writing");
  os.write("GTCK", 4);
  put<std::uint32_t>(os, kCheckpointVersion);
  for (const auto& e : entries) {
    put<std::uint32_t>(os, static_cast<std::uint32_t>(e.name.size()));
    os.write(e.name.data(), static_cast<std::streamsize>(e.name.size()));
    put<std::uint32_t>(os, static_cast<std::uint32_t>(e.value.rank()));
    for (auto d : e.value.shape()) put<std::uint64_t>(os, d);
    for (double v : e.value.values()) put<double>(os, v);
  }
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<NamedTensor> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open '" + path.string() + "'");
  char magic[4];
  if (!is.read(magic, 4) || std::memcmp(magic, "GTCK", 4) != 0) throw IoError("'" + path.string() + "' is not a GTCK file");
  std::uint32_t version = 0;
  if (!get(is, version) || version != kCheckpointVersion) {
    throw IoError("'" + path.string() + "': unsupported checkpoint version " + std::to_string(version));
  }
  std::vector<NamedTensor> out;
  std::uint32_t name_len = 0;
  while (get(is, name_len)) {
    NamedTensor e;
    e.name.resize(name_len);
    std::uint32_t rank = 0;
    if (!is.read(e.name.data(), name_len) || !get(is, rank)) throw IoError("'" + path.string() + "': truncated entry header");
    Shape shape(rank);
    for (auto& d : shape) {
      std::uint64_t v = 0;
      if (!get(is, v)) throw IoError("'" + path.string() + "': truncated shape of '" + e.name + "'");
      d = static_cast<std::size_t>(v);
    }
    std::vector<double> values(shape_size(shape));
    for (auto& v : values) {
      if (!get(is, v)) throw IoError("'" + path.string() + "': truncated values of '" + e.name + "'");
    }
    e.value = Tensor(std::move(shape), std::move(values));
    out.push_back(std::move(e));
  }
  return out;
}

}  // namespace gtc
