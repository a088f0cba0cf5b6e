#include "motionseg/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "motionseg/loss.hpp"
#include "motionseg/mask.hpp"
#include "motionseg/rng.hpp"

namespace motionseg {

namespace {

constexpr double kRectAspect = 0.7;       // half-height relative to half-width
constexpr double kSafetyMargin = 1.0;     // px kept between object and frame edge
constexpr int kBlobHarmonics = 3;         // radial harmonics k = 2,3,4
constexpr double kBlobWobble = 0.45;      // per-harmonic amplitude scale (divided by k)

// Texture tags keep the channels and the two texture domains decorrelated.
constexpr std::uint64_t kTagObject = 0x0b;
constexpr std::uint64_t kTagBackground = 0xb6;

std::uint64_t mix64(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Uniform [0,1) value attached to an integer lattice point.
double lattice_value(std::uint64_t seed, std::uint64_t tag, long long ix, long long iy) {
  std::uint64_t h = mix64(seed + 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ (tag * 0xda942042e4dd58b5ULL));
  h = mix64(h ^ static_cast<std::uint64_t>(ix) * 0x9e3779b97f4a7c15ULL);
  h = mix64(h ^ static_cast<std::uint64_t>(iy) * 0xc2b2ae3d27d4eb4fULL);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Smoothly interpolated lattice noise in [0,1].
double value_noise(std::uint64_t seed, std::uint64_t tag, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto ix = static_cast<long long>(fx);
  const auto iy = static_cast<long long>(fy);
  const double tx = smoothstep(x - fx), ty = smoothstep(y - fy);
  const double v00 = lattice_value(seed, tag, ix, iy);
  const double v10 = lattice_value(seed, tag, ix + 1, iy);
  const double v01 = lattice_value(seed, tag, ix, iy + 1);
  const double v11 = lattice_value(seed, tag, ix + 1, iy + 1);
  const double top = v00 + (v10 - v00) * tx;
  const double bot = v01 + (v11 - v01) * tx;
  return top + (bot - top) * ty;
}

// Two octaves, centered on 0, peak magnitude about 1.
double texture(std::uint64_t seed, std::uint64_t tag, double x, double y) {
  const double coarse = value_noise(seed, tag, x / 8.0, y / 8.0);
  const double fine = value_noise(seed, tag + 1, x / 4.0, y / 4.0);
  return 2.0 * (0.7 * coarse + 0.3 * fine) - 1.0;
}

double clamp01(double v) { return std::min(std::max(v, 0.0), 1.0); }

struct BlobShape {
  double amp[kBlobHarmonics];
  double phase[kBlobHarmonics];
  double radius_factor(double theta) const {
    double f = 1.0;
    for (int i = 0; i < kBlobHarmonics; ++i) {
      const int k = i + 2;
      f += (kBlobWobble / k) * amp[i] * std::cos(k * theta + phase[i]);
    }
    return f;
  }
  double max_factor() const {
    double f = 1.0;
    for (int i = 0; i < kBlobHarmonics; ++i) f += (kBlobWobble / (i + 2)) * std::fabs(amp[i]);
    return f;
  }
};

struct SceneGeometry {
  double vx, vy;        // applied per-frame translation after clamping
  double cx0, cy0;      // frame-0 center
  BlobShape blob;
  double max_extent;    // largest center-to-edge distance over all frames
};

bool inside_shape(const SceneSpec& spec, const BlobShape& blob, double lx, double ly, double size) {
  switch (spec.object) {
    case ObjectKind::Disc:
      return lx * lx + ly * ly <= size * size;
    case ObjectKind::Rectangle:
      return std::fabs(lx) <= size && std::fabs(ly) <= kRectAspect * size;
    case ObjectKind::Blob: {
      const double rho = std::hypot(lx, ly);
      if (rho == 0.0) return true;
      return rho <= size * blob.radius_factor(std::atan2(ly, lx));
    }
  }
  return false;
}

void validate(const SceneSpec& spec) {
  if (spec.height < 8 || spec.width < 8) {
    throw std::invalid_argument("scene resolution must be at least 8x8, got " +
                                std::to_string(spec.width) + "x" + std::to_string(spec.height));
  }
  if (spec.num_frames < 1) throw std::invalid_argument("scene needs at least one frame");
  if (spec.object_size <= 0) throw std::invalid_argument("object size must be positive");
  if (spec.texture_amplitude < 0 || spec.background_amplitude < 0) {
    throw std::invalid_argument("texture amplitudes must be non-negative");
  }
  if (spec.scale_drift <= -1.0) throw std::invalid_argument("scale drift must stay above -1");
  if (spec.object_gray < 0 || spec.object_gray > 1 || spec.background_gray < 0 ||
      spec.background_gray > 1) {
    throw std::invalid_argument("base gray levels must lie in [0,1]");
  }
}

SceneGeometry plan_scene(const SceneSpec& spec) {
  SceneGeometry geo{};
  Rng rng(spec.seed, rng_stream::kSceneGen);
  for (int i = 0; i < kBlobHarmonics; ++i) {
    geo.blob.amp[i] = rng.uniform(-1.0, 1.0);
    geo.blob.phase[i] = rng.uniform(0.0, 2.0 * std::numbers::pi);
  }
  double shape_factor = 1.0;
  if (spec.object == ObjectKind::Rectangle) shape_factor = std::hypot(1.0, kRectAspect);
  if (spec.object == ObjectKind::Blob) shape_factor = geo.blob.max_factor();
  const double max_rel = std::pow(1.0 + spec.scale_drift, spec.num_frames - 1);
  geo.max_extent = spec.object_size * shape_factor * std::max(1.0, max_rel);

  const double reach = geo.max_extent + kSafetyMargin;
  const double span_x = (spec.width - 1) - 2.0 * reach;
  const double span_y = (spec.height - 1) - 2.0 * reach;
  if (span_x < 0 || span_y < 0) {
    throw std::invalid_argument("object with extent " + std::to_string(geo.max_extent) +
                                " px cannot fit a " + std::to_string(spec.width) + "x" +
                                std::to_string(spec.height) + " frame");
  }
  const double steps = spec.num_frames - 1;
  double k = 1.0;
  if (steps > 0) {
    if (std::fabs(spec.dx) * steps > span_x) k = std::min(k, span_x / (std::fabs(spec.dx) * steps));
    if (std::fabs(spec.dy) * steps > span_y) k = std::min(k, span_y / (std::fabs(spec.dy) * steps));
  }
  geo.vx = k * spec.dx;
  geo.vy = k * spec.dy;
  geo.cx0 = (spec.width - 1) / 2.0 - geo.vx * steps / 2.0;
  geo.cy0 = (spec.height - 1) / 2.0 - geo.vy * steps / 2.0;
  return geo;
}

}  // namespace

ObjectKind object_kind_from_string(const std::string& s) {
  if (s == "disc") return ObjectKind::Disc;
  if (s == "rectangle") return ObjectKind::Rectangle;
  if (s == "blob") return ObjectKind::Blob;
  throw std::invalid_argument("unknown object kind '" + s + "' (disc|rectangle|blob)");
}

std::string to_string(ObjectKind k) {
  switch (k) {
    case ObjectKind::Disc: return "disc";
    case ObjectKind::Rectangle: return "rectangle";
    case ObjectKind::Blob: return "blob";
  }
  return "disc";
}

BackgroundKind background_kind_from_string(const std::string& s) {
  if (s == "flat") return BackgroundKind::Flat;
  if (s == "noise") return BackgroundKind::Noise;
  throw std::invalid_argument("unknown background kind '" + s + "' (flat|noise)");
}

std::string to_string(BackgroundKind k) {
  return k == BackgroundKind::Flat ? "flat" : "noise";
}

Tensor encode_flow(const Tensor& flow_dx, const Tensor& flow_dy) {
  if (flow_dx.shape() != flow_dy.shape() || flow_dx.rank() != 2) {
    throw std::invalid_argument("encode_flow expects matching [H,W] planes");
  }
  const int H = flow_dx.dim(0), W = flow_dx.dim(1);
  const long long n = flow_dx.size();
  Tensor out({3, H, W});
  const double* dx = flow_dx.data();
  const double* dy = flow_dy.data();
  double* o = out.data();
  std::vector<double> mag(static_cast<size_t>(n));
  for (long long i = 0; i < n; ++i) mag[static_cast<size_t>(i)] = std::hypot(dx[i], dy[i]);
  const auto normalize = [n](const double* src, double* dst) {
    double lo = src[0], hi = src[0];
    for (long long i = 1; i < n; ++i) {
      lo = std::min(lo, src[i]);
      hi = std::max(hi, src[i]);
    }
    if (hi == lo) {
      for (long long i = 0; i < n; ++i) dst[i] = 0.5;
    } else {
      for (long long i = 0; i < n; ++i) dst[i] = (src[i] - lo) / (hi - lo);
    }
  };
  normalize(dx, o);
  normalize(dy, o + n);
  normalize(mag.data(), o + 2 * n);
  return out;
}

Tensor edge_oracle(const Tensor& frame) {
  if (frame.rank() != 3) {
    throw std::invalid_argument("edge_oracle expects [C,H,W], got " + shape_str(frame.shape()));
  }
  const int C = frame.dim(0), H = frame.dim(1), W = frame.dim(2);
  const double* f = frame.data();
  Tensor edge({H, W});
  double* e = edge.data();
  const auto px = [&](int c, int y, int x) {
    y = std::min(std::max(y, 0), H - 1);  // replicate the border
    x = std::min(std::max(x, 0), W - 1);
    return f[(static_cast<long long>(c) * H + y) * W + x];
  };
  double peak = 0.0;
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double best = 0.0;
      for (int c = 0; c < C; ++c) {
        const double gx = (px(c, y - 1, x + 1) + 2 * px(c, y, x + 1) + px(c, y + 1, x + 1)) -
                          (px(c, y - 1, x - 1) + 2 * px(c, y, x - 1) + px(c, y + 1, x - 1));
        const double gy = (px(c, y + 1, x - 1) + 2 * px(c, y + 1, x) + px(c, y + 1, x + 1)) -
                          (px(c, y - 1, x - 1) + 2 * px(c, y - 1, x) + px(c, y - 1, x + 1));
        best = std::max(best, std::hypot(gx, gy));
      }
      e[static_cast<long long>(y) * W + x] = best;
      peak = std::max(peak, best);
    }
  }
  if (peak > 0.0) {
    for (long long i = 0; i < edge.size(); ++i) e[i] /= peak;
  }
  return edge;
}

Tensor boundary_gt(const Tensor& mask) { return boundary_of(mask); }

std::vector<Sample> gen_sequence(const SceneSpec& spec, int hem_dilation_radius) {
  validate(spec);
  const SceneGeometry geo = plan_scene(spec);
  const int H = spec.height, W = spec.width;
  std::vector<Sample> clip;
  clip.reserve(static_cast<size_t>(spec.num_frames));
  for (int t = 0; t < spec.num_frames; ++t) {
    const double rel = std::pow(1.0 + spec.scale_drift, t);
    const double size = spec.object_size * rel;
    const double cx = geo.cx0 + geo.vx * t;
    const double cy = geo.cy0 + geo.vy * t;
    const double sigma = spec.scale_drift;  // radial flow term from scaling

    Sample s;
    s.frame = Tensor({3, H, W});
    s.flow_dx = Tensor({H, W});
    s.flow_dy = Tensor({H, W});
    s.mask = Tensor({H, W});
    double* frame = s.frame.data();
    double* fdx = s.flow_dx.data();
    double* fdy = s.flow_dy.data();
    double* mask = s.mask.data();
    const long long plane = static_cast<long long>(H) * W;

    for (int y = 0; y < H; ++y) {
      for (int x = 0; x < W; ++x) {
        const long long p = static_cast<long long>(y) * W + x;
        const double lx = x - cx, ly = y - cy;
        const bool obj = inside_shape(spec, geo.blob, lx, ly, size);
        mask[p] = obj ? 1.0 : 0.0;
        if (obj) {
          fdx[p] = geo.vx + sigma * lx;
          fdy[p] = geo.vy + sigma * ly;
        } else {
          fdx[p] = spec.background_dx;
          fdy[p] = spec.background_dy;
        }
        for (int c = 0; c < 3; ++c) {
          double v;
          if (obj) {
            // Texture rides in object-local coordinates so it moves and
            // scales with the object.
            v = spec.object_gray + 0.5 * spec.texture_amplitude *
                                       texture(spec.seed, kTagObject + 2 * c, lx / rel, ly / rel);
          } else if (spec.background == BackgroundKind::Noise) {
            v = spec.background_gray +
                0.5 * spec.background_amplitude *
                    texture(spec.seed, kTagBackground + 2 * c, x - spec.background_dx * t,
                            y - spec.background_dy * t);
          } else {
            v = spec.background_gray;
          }
          frame[c * plane + p] = clamp01(v);
        }
      }
    }
    s.flow_img = encode_flow(s.flow_dx, s.flow_dy);
    s.boundary = boundary_gt(s.mask);
    s.edge = edge_oracle(s.frame);
    s.weights = hem_weights(s.edge, s.mask, hem_dilation_radius);
    clip.push_back(std::move(s));
  }
  return clip;
}

}  // namespace motionseg
