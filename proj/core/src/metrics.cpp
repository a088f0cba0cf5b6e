#include "motionseg/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

#include "motionseg/mask.hpp"

namespace motionseg {

namespace {

void require_same_plane(const Tensor& a, const Tensor& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.shape() != b.shape()) {
    throw std::invalid_argument("masks must be [H,W] with matching extents, got " +
                                shape_str(a.shape()) + " and " + shape_str(b.shape()));
  }
}

// Matched pixels of `boundary` that land within the tolerance band around
// `other` (its Chebyshev dilation).
long long matched_count(const Tensor& boundary, const Tensor& other, int tolerance_px) {
  Tensor band = dilate_chebyshev(other, tolerance_px);
  const double* b = boundary.data();
  const double* d = band.data();
  long long matched = 0;
  for (int i = 0; i < boundary.size(); ++i) {
    if (b[i] != 0.0 && d[i] != 0.0) ++matched;
  }
  return matched;
}

}  // namespace

double region_similarity_j(const Tensor& pred, const Tensor& gt) {
  require_same_plane(pred, gt);
  require_binary(pred, "pred mask");
  require_binary(gt, "gt mask");
  long long inter = 0;
  long long uni = 0;
  const double* p = pred.data();
  const double* g = gt.data();
  for (int i = 0; i < pred.size(); ++i) {
    const bool pp = p[i] != 0.0;
    const bool gg = g[i] != 0.0;
    if (pp && gg) ++inter;
    if (pp || gg) ++uni;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

int default_boundary_tolerance(int height, int width) {
  const double diagonal = std::hypot(static_cast<double>(height), static_cast<double>(width));
  return static_cast<int>(std::ceil(0.008 * diagonal));
}

double boundary_f(const Tensor& pred, const Tensor& gt, int tolerance_px) {
  require_same_plane(pred, gt);
  require_binary(pred, "pred mask");
  require_binary(gt, "gt mask");
  if (tolerance_px < 0) throw std::invalid_argument("boundary tolerance must be >= 0");
  Tensor pb = boundary_of(pred);
  Tensor gb = boundary_of(gt);
  const long long np = count_nonzero(pb);
  const long long ng = count_nonzero(gb);
  if (np == 0 && ng == 0) return 1.0;
  const double precision = np == 0 ? 0.0
                                   : static_cast<double>(matched_count(pb, gb, tolerance_px)) /
                                         static_cast<double>(np);
  const double recall = ng == 0 ? 0.0
                                : static_cast<double>(matched_count(gb, pb, tolerance_px)) /
                                      static_cast<double>(ng);
  if (precision + recall == 0.0) return 0.0;
  return 2.0 * precision * recall / (precision + recall);
}

double boundary_f(const Tensor& pred, const Tensor& gt) {
  return boundary_f(pred, gt, default_boundary_tolerance(pred.dim(0), pred.dim(1)));
}

EvalReport summarize_scores(std::vector<FrameScore> frames) {
  EvalReport report;
  report.frames = std::move(frames);
  double total_j = 0.0;
  double total_f = 0.0;
  for (const FrameScore& fs : report.frames) {
    total_j += fs.j;
    total_f += fs.f;
    if (report.clips.empty() || report.clips.back().clip != fs.clip) {
      report.clips.push_back(ClipScore{fs.clip, 0.0, 0.0, 0});
    }
    ClipScore& cs = report.clips.back();
    cs.mean_j += fs.j;
    cs.mean_f += fs.f;
    ++cs.frames;
  }
  for (ClipScore& cs : report.clips) {
    cs.mean_j /= cs.frames;
    cs.mean_f /= cs.frames;
  }
  if (!report.frames.empty()) {
    report.mean_j = total_j / static_cast<double>(report.frames.size());
    report.mean_f = total_f / static_cast<double>(report.frames.size());
  }
  return report;
}

void write_report(std::ostream& os, const EvalReport& report) {
  os << std::fixed << std::setprecision(6);
  for (const FrameScore& fs : report.frames) {
    os << fs.clip << " " << fs.frame << " " << fs.j << " " << fs.f << "\n";
  }
  os << "summary\n";
  for (const ClipScore& cs : report.clips) {
    os << "clip " << cs.clip << " J " << cs.mean_j << " F " << cs.mean_f << " frames "
       << cs.frames << "\n";
  }
  os << "mean J " << report.mean_j << "\n";
  os << "mean F " << report.mean_f << "\n";
}

}  // namespace motionseg
