#include "motionseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

#include "motionseg/imageio.hpp"
#include "motionseg/loss.hpp"
#include "motionseg/mask.hpp"

namespace fs = std::filesystem;

namespace motionseg {

namespace {

std::string frame_tag(int t) {
  std::ostringstream os;
  os << std::setw(3) << std::setfill('0') << t;
  return os.str();
}

struct FlowRange {
  double dx_lo, dx_hi, dy_lo, dy_hi, mag_lo, mag_hi;
};

FlowRange flow_range_of(const Sample& s) {
  FlowRange r{};
  const double* dx = s.flow_dx.data();
  const double* dy = s.flow_dy.data();
  const long long n = s.flow_dx.size();
  r.dx_lo = r.dx_hi = dx[0];
  r.dy_lo = r.dy_hi = dy[0];
  r.mag_lo = r.mag_hi = std::hypot(dx[0], dy[0]);
  for (long long i = 1; i < n; ++i) {
    r.dx_lo = std::min(r.dx_lo, dx[i]);
    r.dx_hi = std::max(r.dx_hi, dx[i]);
    r.dy_lo = std::min(r.dy_lo, dy[i]);
    r.dy_hi = std::max(r.dy_hi, dy[i]);
    const double m = std::hypot(dx[i], dy[i]);
    r.mag_lo = std::min(r.mag_lo, m);
    r.mag_hi = std::max(r.mag_hi, m);
  }
  return r;
}

// Undo the affine [0,1] normalization using the stored range.
Tensor denormalize_plane(const Tensor& plane, double lo, double hi) {
  Tensor out(plane.shape());
  const double* p = plane.data();
  double* o = out.data();
  for (long long i = 0; i < plane.size(); ++i) o[i] = lo == hi ? lo : lo + p[i] * (hi - lo);
  return out;
}

}  // namespace

void export_clip(const std::string& dir, const SceneSpec& spec, const std::vector<Sample>& clip,
                 int hem_dilation_radius) {
  if (clip.empty()) throw std::invalid_argument("cannot export an empty clip");
  fs::create_directories(dir);
  std::ofstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw std::runtime_error("cannot write manifest in " + dir);
  manifest << std::setprecision(17);
  manifest << "clip " << fs::path(dir).filename().string() << "\n";
  manifest << "seed " << spec.seed << "\n";
  manifest << "resolution " << spec.width << " " << spec.height << "\n";
  manifest << "frames " << clip.size() << "\n";
  manifest << "object " << to_string(spec.object) << "\n";
  manifest << "object_size " << spec.object_size << "\n";
  manifest << "texture_amplitude " << spec.texture_amplitude << "\n";
  manifest << "motion " << spec.dx << " " << spec.dy << "\n";
  manifest << "scale_drift " << spec.scale_drift << "\n";
  manifest << "background " << to_string(spec.background) << "\n";
  manifest << "background_amplitude " << spec.background_amplitude << "\n";
  manifest << "background_drift " << spec.background_dx << " " << spec.background_dy << "\n";
  manifest << "object_gray " << spec.object_gray << "\n";
  manifest << "background_gray " << spec.background_gray << "\n";
  manifest << "hem_dilation_radius " << hem_dilation_radius << "\n";

  for (size_t t = 0; t < clip.size(); ++t) {
    const Sample& s = clip[t];
    const std::string tag = frame_tag(static_cast<int>(t));
    const std::string frame_file = "frame_" + tag + ".ppm";
    const std::string dx_file = "flow_" + tag + "_dx.pgm";
    const std::string dy_file = "flow_" + tag + "_dy.pgm";
    const std::string mag_file = "flow_" + tag + "_mag.pgm";
    const std::string mask_file = "mask_" + tag + ".pgm";
    const std::string boundary_file = "boundary_" + tag + ".pgm";
    const std::string edge_file = "edge_" + tag + ".pgm";

    write_ppm((fs::path(dir) / frame_file).string(), s.frame);
    const int H = s.flow_img.dim(1), W = s.flow_img.dim(2);
    const long long plane = static_cast<long long>(H) * W;
    for (int c = 0; c < 3; ++c) {
      Tensor pl({H, W}, std::vector<double>(s.flow_img.data() + c * plane,
                                            s.flow_img.data() + (c + 1) * plane));
      const std::string& f = c == 0 ? dx_file : (c == 1 ? dy_file : mag_file);
      write_pgm((fs::path(dir) / f).string(), pl);
    }
    write_pgm((fs::path(dir) / mask_file).string(), s.mask);
    write_pgm((fs::path(dir) / boundary_file).string(), s.boundary);
    write_pgm((fs::path(dir) / edge_file).string(), s.edge);

    manifest << "frame " << t << " " << frame_file << " " << dx_file << " " << dy_file << " "
             << mag_file << " " << mask_file << " " << boundary_file << " " << edge_file << "\n";
    const FlowRange r = flow_range_of(s);
    manifest << "flow_range " << t << " " << r.dx_lo << " " << r.dx_hi << " " << r.dy_lo << " "
             << r.dy_hi << " " << r.mag_lo << " " << r.mag_hi << "\n";
  }
  if (!manifest) throw std::runtime_error("short write to manifest in " + dir);
}

Clip import_clip(const std::string& dir) {
  std::ifstream manifest(fs::path(dir) / "manifest.txt");
  if (!manifest) throw std::runtime_error("missing manifest.txt in " + dir);
  Clip clip;
  clip.name = fs::path(dir).filename().string();
  int hem_radius = 5;
  int frames = 0;
  struct FrameFiles {
    std::string frame, dx, dy, mag, mask, boundary, edge;
    FlowRange range{};
    bool have_range = false;
  };
  std::vector<FrameFiles> entries;
  std::string line;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream is(line);
    std::string key;
    is >> key;
    if (key == "frames") {
      is >> frames;
      entries.resize(static_cast<size_t>(std::max(frames, 0)));
    } else if (key == "hem_dilation_radius") {
      is >> hem_radius;
    } else if (key == "frame") {
      int t = -1;
      is >> t;
      if (t < 0 || t >= static_cast<int>(entries.size())) {
        throw std::runtime_error(dir + "/manifest.txt:" + std::to_string(line_no) +
                                 ": frame index out of range");
      }
      FrameFiles& f = entries[static_cast<size_t>(t)];
      is >> f.frame >> f.dx >> f.dy >> f.mag >> f.mask >> f.boundary >> f.edge;
      if (!is) {
        throw std::runtime_error(dir + "/manifest.txt:" + std::to_string(line_no) +
                                 ": malformed frame entry");
      }
    } else if (key == "flow_range") {
      int t = -1;
      is >> t;
      if (t < 0 || t >= static_cast<int>(entries.size())) {
        throw std::runtime_error(dir + "/manifest.txt:" + std::to_string(line_no) +
                                 ": flow_range index out of range");
      }
      FrameFiles& f = entries[static_cast<size_t>(t)];
      is >> f.range.dx_lo >> f.range.dx_hi >> f.range.dy_lo >> f.range.dy_hi >> f.range.mag_lo >>
          f.range.mag_hi;
      if (!is) {
        throw std::runtime_error(dir + "/manifest.txt:" + std::to_string(line_no) +
                                 ": malformed flow_range entry");
      }
      f.have_range = true;
    }
    // Spec echo keys (object, motion, ...) are informational on import.
  }
  if (frames <= 0) throw std::runtime_error(dir + "/manifest.txt: missing frames count");

  for (int t = 0; t < frames; ++t) {
    const FrameFiles& f = entries[static_cast<size_t>(t)];
    if (f.frame.empty() || !f.have_range) {
      throw std::runtime_error(dir + "/manifest.txt: incomplete entry for frame " +
                               std::to_string(t));
    }
    Sample s;
    s.frame = read_ppm((fs::path(dir) / f.frame).string());
    Tensor dx_n = read_pgm((fs::path(dir) / f.dx).string());
    Tensor dy_n = read_pgm((fs::path(dir) / f.dy).string());
    Tensor mag_n = read_pgm((fs::path(dir) / f.mag).string());
    s.flow_dx = denormalize_plane(dx_n, f.range.dx_lo, f.range.dx_hi);
    s.flow_dy = denormalize_plane(dy_n, f.range.dy_lo, f.range.dy_hi);
    const int H = dx_n.dim(0), W = dx_n.dim(1);
    Tensor flow({3, H, W});
    std::copy(dx_n.data(), dx_n.data() + dx_n.size(), flow.data());
    std::copy(dy_n.data(), dy_n.data() + dy_n.size(), flow.data() + dx_n.size());
    std::copy(mag_n.data(), mag_n.data() + mag_n.size(), flow.data() + 2 * dx_n.size());
    s.flow_img = flow;
    s.mask = binarize(read_pgm((fs::path(dir) / f.mask).string()), 0.5);
    s.boundary = binarize(read_pgm((fs::path(dir) / f.boundary).string()), 0.5);
    s.edge = read_pgm((fs::path(dir) / f.edge).string());
    s.weights = hem_weights(s.edge, s.mask, hem_radius);
    clip.samples.push_back(std::move(s));
  }
  return clip;
}

std::vector<Clip> import_dataset(const std::string& root) {
  if (!fs::is_directory(root)) throw std::runtime_error("dataset directory not found: " + root);
  std::vector<std::string> dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && fs::exists(entry.path() / "manifest.txt")) {
      dirs.push_back(entry.path().string());
    }
  }
  std::sort(dirs.begin(), dirs.end());
  if (dirs.empty()) throw std::runtime_error("no clips (subdirectories with manifest.txt) in " + root);
  std::vector<Clip> clips;
  clips.reserve(dirs.size());
  for (const auto& d : dirs) clips.push_back(import_clip(d));
  return clips;
}

}  // namespace motionseg
