#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "motionseg/tensor.hpp"

namespace motionseg {

// Intersection over union of two binary masks. Both empty counts as a
// perfect match (1.0).
double region_similarity_j(const Tensor& pred, const Tensor& gt);

// Tolerance used when no explicit pixel tolerance is given: boundary pixels
// may be off by up to 0.8% of the image diagonal, rounded up.
int default_boundary_tolerance(int height, int width);

// Boundary F-measure. Boundaries are extracted from both masks, then a pred
// boundary pixel counts as matched when a gt boundary pixel lies within
// `tolerance_px` in Chebyshev distance (and vice versa for recall).
// Both boundaries empty -> 1.0, precision+recall zero -> 0.0.
double boundary_f(const Tensor& pred, const Tensor& gt, int tolerance_px);
double boundary_f(const Tensor& pred, const Tensor& gt);

struct FrameScore {
  std::string clip;
  int frame = 0;
  double j = 0.0;
  double f = 0.0;
};

struct ClipScore {
  std::string clip;
  double mean_j = 0.0;
  double mean_f = 0.0;
  int frames = 0;
};

struct EvalReport {
  std::vector<FrameScore> frames;
  std::vector<ClipScore> clips;
  double mean_j = 0.0;  // mean over frames
  double mean_f = 0.0;
};

// Folds per-frame scores into per-clip and dataset means. Frames of one clip
// are expected to be contiguous in the input.
EvalReport summarize_scores(std::vector<FrameScore> frames);

// One line per frame (clip name, frame index, J, F), then a summary block.
void write_report(std::ostream& os, const EvalReport& report);

}  // namespace motionseg
