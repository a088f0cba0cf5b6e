#include "motionseg/imageio.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <vector>

namespace motionseg {

namespace {

unsigned char quantize(double v) {
  const double c = std::min(std::max(v, 0.0), 1.0);
  return static_cast<unsigned char>(std::lround(c * 255.0));
}

// Skips whitespace and # comments between header tokens.
int read_header_int(std::istream& in, const std::string& path) {
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (!std::isspace(ch)) {
      break;
    }
    ch = in.get();
  }
  if (ch == EOF) throw std::runtime_error("truncated netpbm header in " + path);
  int value = 0;
  bool any = false;
  while (ch != EOF && std::isdigit(ch)) {
    value = value * 10 + (ch - '0');
    any = true;
    ch = in.get();
  }
  if (!any) throw std::runtime_error("malformed netpbm header in " + path);
  return value;
}

std::vector<unsigned char> read_payload(std::istream& in, long long count, const std::string& path) {
  std::vector<unsigned char> bytes(static_cast<size_t>(count));
  in.read(reinterpret_cast<char*>(bytes.data()), count);
  if (in.gcount() != count) throw std::runtime_error("truncated pixel data in " + path);
  return bytes;
}

void open_and_check_magic(std::ifstream& in, const std::string& path, const char* magic) {
  in.open(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  char m[2];
  in.read(m, 2);
  if (in.gcount() != 2 || m[0] != magic[0] || m[1] != magic[1]) {
    throw std::runtime_error(path + " is not a " + magic + " file");
  }
}

}  // namespace

void write_pgm(const std::string& path, const Tensor& plane) {
  if (plane.rank() != 2) {
    throw std::invalid_argument("write_pgm expects [H,W], got " + shape_str(plane.shape()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const int H = plane.dim(0), W = plane.dim(1);
  out << "P5\n" << W << ' ' << H << "\n255\n";
  const double* d = plane.data();
  std::vector<unsigned char> bytes(static_cast<size_t>(plane.size()));
  for (long long i = 0; i < plane.size(); ++i) bytes[static_cast<size_t>(i)] = quantize(d[i]);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

Tensor read_pgm(const std::string& path) {
  std::ifstream in;
  open_and_check_magic(in, path, "P5");
  const int W = read_header_int(in, path);
  const int H = read_header_int(in, path);
  const int maxval = read_header_int(in, path);
  if (maxval != 255) throw std::runtime_error(path + ": only maxval 255 supported");
  const auto bytes = read_payload(in, static_cast<long long>(W) * H, path);
  Tensor t({H, W});
  double* d = t.data();
  for (long long i = 0; i < t.size(); ++i) d[i] = bytes[static_cast<size_t>(i)] / 255.0;
  return t;
}

void write_ppm(const std::string& path, const Tensor& rgb) {
  if (rgb.rank() != 3 || rgb.dim(0) != 3) {
    throw std::invalid_argument("write_ppm expects [3,H,W], got " + shape_str(rgb.shape()));
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  const int H = rgb.dim(1), W = rgb.dim(2);
  out << "P6\n" << W << ' ' << H << "\n255\n";
  const double* d = rgb.data();
  const long long plane = static_cast<long long>(H) * W;
  std::vector<unsigned char> bytes(static_cast<size_t>(plane) * 3);
  for (long long p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) bytes[static_cast<size_t>(p * 3 + c)] = quantize(d[c * plane + p]);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("short write to " + path);
}

Tensor read_ppm(const std::string& path) {
  std::ifstream in;
  open_and_check_magic(in, path, "P6");
  const int W = read_header_int(in, path);
  const int H = read_header_int(in, path);
  const int maxval = read_header_int(in, path);
  if (maxval != 255) throw std::runtime_error(path + ": only maxval 255 supported");
  const long long plane = static_cast<long long>(H) * W;
  const auto bytes = read_payload(in, plane * 3, path);
  Tensor t({3, H, W});
  double* d = t.data();
  for (long long p = 0; p < plane; ++p)
    for (int c = 0; c < 3; ++c) d[c * plane + p] = bytes[static_cast<size_t>(p * 3 + c)] / 255.0;
  return t;
}

}  // namespace motionseg
