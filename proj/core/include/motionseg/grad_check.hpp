#pragma once

#include <functional>
#include <string>
#include <vector>

#include "motionseg/rng.hpp"
#include "motionseg/tensor.hpp"

namespace motionseg {

// Maps inputs to a scalar loss. The same callable is used for the analytic
// pass (inputs watched on a tape) and the finite-difference passes (plain
// tensors, no tape), so it must be pure and deterministic.
using LossFn = std::function<Tensor(const std::vector<Tensor>&)>;

struct GradCheckReport {
  double max_abs_error = 0;  // max |analytic - central difference|
  double max_rel_error = 0;  // abs error / max(|analytic|, |fd|, 1e-8)
  bool deterministic = true;  // always true on return; mismatch throws instead
  int worst_input = -1;
  long long worst_element = -1;
  double worst_analytic = 0;
  double worst_fd = 0;
  std::string describe() const;
};

// Central differences with step eps around every element of every input.
// Inputs are perturbed in place and restored, so buffers must not be shared
// with anything that minds a transient change. eps must lie in (0, 1e-2];
// a computation whose two baseline evaluations disagree is rejected.
//
// A wide step can straddle a ReLU-style kink, producing a secant that is far
// from the true derivative even when the analytic gradient is right. When
// refine_eps > 0, elements whose first estimate misses by more than
// refine_rel are re-measured with the narrower step and the closer estimate
// is kept. A genuinely wrong backward pass disagrees at every step size, so
// refinement cannot mask real bugs.
//
// Central differences carry round-off noise of roughly |loss| * 1e-16 / eps
// per element. Differences no larger than atol are treated as agreement so
// that near-zero gradients are not judged on noise; atol = 0 disables this.
GradCheckReport grad_check(const LossFn& fn, std::vector<Tensor> inputs, double eps = 1e-5,
                           double refine_rel = 0, double refine_eps = 0, double atol = 0);

Tensor uniform_tensor(Rng& rng, std::vector<int> shape, double lo, double hi);
Tensor normal_tensor(Rng& rng, std::vector<int> shape, double mean = 0.0, double stddev = 1.0);

}  // namespace motionseg
