#pragma once

#include <string>
#include <vector>

#include "motionseg/synth.hpp"

namespace motionseg {

// On-disk layout: one directory per clip holding a manifest.txt plus netpbm
// files per frame (PPM frame, three PGM flow planes, PGM mask / boundary /
// edge). The manifest records the generating spec, every emitted file, and
// the per-frame raw flow ranges needed to undo the [0,1] normalization.
// HEM weights are not stored; they are recomputed from the loaded edge map
// and mask so their invariants survive quantization.

struct Clip {
  std::string name;
  std::vector<Sample> samples;
};

void export_clip(const std::string& dir, const SceneSpec& spec, const std::vector<Sample>& clip,
                 int hem_dilation_radius);

Clip import_clip(const std::string& dir);

// All clip subdirectories of root (those containing manifest.txt), sorted by
// name for deterministic ordering.
std::vector<Clip> import_dataset(const std::string& root);

}  // namespace motionseg
