#include "motionseg/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <fstream>
#include <stdexcept>

namespace motionseg {

namespace {

constexpr char kMagic[4] = {'M', 'S', 'E', 'G'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& os, std::uint32_t v) {
  char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 4);
}

void put_u64(std::ostream& os, std::uint64_t v) {
  char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xff);
  os.write(b, 8);
}

void put_f64(std::ostream& os, double v) { put_u64(os, std::bit_cast<std::uint64_t>(v)); }

[[noreturn]] void truncated(const std::string& path) {
  throw std::runtime_error("checkpoint " + path + " is truncated");
}

std::uint32_t get_u32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) truncated(path);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t get_u64(std::istream& is, const std::string& path) {
  unsigned char b[8];
  if (!is.read(reinterpret_cast<char*>(b), 8)) truncated(path);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double get_f64(std::istream& is, const std::string& path) {
  return std::bit_cast<double>(get_u64(is, path));
}

std::string get_string(std::istream& is, std::uint32_t len, const std::string& path) {
  std::string s(len, '\0');
  if (len > 0 && !is.read(s.data(), len)) truncated(path);
  return s;
}

}  // namespace

void save_checkpoint(const std::string& path, const Checkpoint& checkpoint) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot open " + path + " for writing");
  os.write(kMagic, 4);
  put_u32(os, kVersion);
  put_u64(os, checkpoint.tensors.size());
  for (const auto& [name, tensor] : checkpoint.tensors) {
    put_u32(os, static_cast<std::uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    put_u32(os, static_cast<std::uint32_t>(tensor.rank()));
    for (int d = 0; d < tensor.rank(); ++d) put_u64(os, static_cast<std::uint64_t>(tensor.dim(d)));
    for (int i = 0; i < tensor.size(); ++i) put_f64(os, tensor.data()[i]);
  }
  put_u64(os, checkpoint.iteration);
  put_u64(os, checkpoint.seed);
  put_u32(os, static_cast<std::uint32_t>(checkpoint.config_echo.size()));
  os.write(checkpoint.config_echo.data(),
           static_cast<std::streamsize>(checkpoint.config_echo.size()));
  if (!os) throw std::runtime_error("failed writing checkpoint " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[4];
  if (!is.read(magic, 4)) truncated(path);
  if (!std::equal(magic, magic + 4, kMagic)) {
    throw std::runtime_error("checkpoint " + path + " has the wrong magic bytes");
  }
  const std::uint32_t version = get_u32(is, path);
  if (version != kVersion) {
    throw std::runtime_error("checkpoint " + path + " has unsupported version " +
                             std::to_string(version));
  }
  Checkpoint cp;
  const std::uint64_t count = get_u64(is, path);
  for (std::uint64_t t = 0; t < count; ++t) {
    const std::uint32_t name_len = get_u32(is, path);
    std::string name = get_string(is, name_len, path);
    const std::uint32_t rank = get_u32(is, path);
    if (rank > 8) throw std::runtime_error("checkpoint " + path + " has implausible rank");
    std::vector<int> shape;
    for (std::uint32_t d = 0; d < rank; ++d) {
      shape.push_back(static_cast<int>(get_u64(is, path)));
    }
    Tensor tensor(shape);
    for (int i = 0; i < tensor.size(); ++i) tensor.data()[i] = get_f64(is, path);
    if (!cp.tensors.emplace(std::move(name), std::move(tensor)).second) {
      throw std::runtime_error("checkpoint " + path + " repeats a tensor name");
    }
  }
  cp.iteration = get_u64(is, path);
  cp.seed = get_u64(is, path);
  const std::uint32_t config_len = get_u32(is, path);
  cp.config_echo = get_string(is, config_len, path);
  return cp;
}

}  // namespace motionseg
