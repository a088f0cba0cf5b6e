#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "motionseg/tensor.hpp"

namespace motionseg {

enum class ObjectKind { Disc, Rectangle, Blob };
enum class BackgroundKind { Flat, Noise };

ObjectKind object_kind_from_string(const std::string& s);
std::string to_string(ObjectKind k);
BackgroundKind background_kind_from_string(const std::string& s);
std::string to_string(BackgroundKind k);

// Everything the generator needs to produce one clip, bit-reproducibly.
// Velocities are clamped (uniformly scaled down) when the trajectory would
// push the object outside the frame; the ground-truth flow always reflects
// the clamped, actually-applied motion.
struct SceneSpec {
  std::uint64_t seed = 0;
  int height = 64;
  int width = 64;
  int num_frames = 8;
  ObjectKind object = ObjectKind::Disc;
  double object_size = 10.0;        // radius / half-width in px
  double texture_amplitude = 0.25;  // object texture contrast
  double dx = 2.0;                  // object translation per frame, px
  double dy = 1.0;
  double scale_drift = 0.0;         // relative size change per frame
  BackgroundKind background = BackgroundKind::Noise;
  double background_amplitude = 0.25;
  double background_dx = 0.0;  // background drift per frame, px
  double background_dy = 0.0;
  double object_gray = 0.6;  // base intensities before texture
  double background_gray = 0.4;
};

struct Sample {
  Tensor frame;     // [3,H,W] in [0,1]
  Tensor flow_dx;   // [H,W], raw px/frame
  Tensor flow_dy;   // [H,W]
  Tensor flow_img;  // [3,H,W]: dx, dy, magnitude, each normalized to [0,1]
  Tensor mask;      // [H,W] binary
  Tensor boundary;  // [H,W] binary, inner rim of mask
  Tensor edge;      // [H,W] in [0,1]
  Tensor weights;   // [H,W] HEM weights
};

// Normalizes a raw flow pair into the 3-channel network encoding. Constant
// planes map to 0.5.
Tensor encode_flow(const Tensor& flow_dx, const Tensor& flow_dy);

std::vector<Sample> gen_sequence(const SceneSpec& spec, int hem_dilation_radius = 5);

// Gradient-magnitude edge response: 3x3 Sobel per channel with replicated
// borders, max over channels, normalized by the global peak. Constant frames
// give an all-zero map.
Tensor edge_oracle(const Tensor& frame);

// Inner-rim boundary of a binary mask (mask minus its 3x3 erosion).
Tensor boundary_gt(const Tensor& mask);

}  // namespace motionseg
