#include "motionseg/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>
#include <sstream>

#include "motionseg/encoder.hpp"
#include "motionseg/grad_check.hpp"
#include "motionseg/loss.hpp"
#include "motionseg/model.hpp"
#include "motionseg/ops.hpp"
#include "motionseg/synth.hpp"

namespace motionseg {

namespace {

constexpr double kOpTol = 1e-6;
constexpr double kModelTol = 1e-4;

// Dots the op output with fixed O(1)-positive weights so every output element
// contributes to the scalar at a healthy scale.
LossFn weighted(std::function<Tensor(const std::vector<Tensor>&)> op, Tensor weights) {
  return [op = std::move(op), weights = std::move(weights)](const std::vector<Tensor>& in) {
    return sum_all(mul(op(in), weights));
  };
}

Tensor away_from(Rng& rng, std::vector<int> shape, double lo, double hi,
                 const std::vector<double>& avoid, double margin) {
  Tensor t(std::move(shape));
  for (int i = 0; i < t.size(); ++i) {
    double v;
    bool ok;
    do {
      v = rng.uniform(lo, hi);
      ok = true;
      for (double a : avoid) {
        if (std::fabs(v - a) < margin) ok = false;
      }
    } while (!ok);
    t.data()[i] = v;
  }
  return t;
}

// Identity with a backward pass that is wrong by 2 percent. Exists only so
// the fault-injection mode can prove the checker notices bad gradients.
Tensor corrupted_identity(const Tensor& x) {
  Tensor out(x.shape());
  std::copy(x.data(), x.data() + x.size(), out.data());
  if (!x.tracked()) return out;
  Tape* tape = x.tape();
  const int nx = x.node();
  const long long n = x.size();
  return tape->adopt(std::move(out), {nx}, [=](const double* g, Tape& t) {
    double* dx = t.grad_buffer(nx);
    for (long long i = 0; i < n; ++i) dx[i] += 1.02 * g[i];
  });
}

struct Suite {
  std::vector<CheckResult> results;

  void grad(const std::string& name, const LossFn& fn, std::vector<Tensor> inputs, double tol,
            double eps = 1e-5, double refine_eps = 0, double atol = 0) {
    GradCheckReport r = grad_check(fn, std::move(inputs), eps, tol, refine_eps, atol);
    const bool ok = r.deterministic && r.max_rel_error <= tol;
    std::ostringstream d;
    d << r.describe() << " tol=" << tol;
    results.push_back(CheckResult{name, ok, d.str()});
  }

  void claim(const std::string& name, bool ok, const std::string& detail) {
    results.push_back(CheckResult{name, ok, detail});
  }
};

void add_op_checks(Suite& s) {
  Rng rng(20240901, 11);

  {
    Tensor x = uniform_tensor(rng, {1, 2, 5, 5}, -1, 1);
    Tensor k = uniform_tensor(rng, {3, 2, 3, 3}, -1, 1);
    Tensor w = uniform_tensor(rng, {1, 3, 5, 5}, 0.5, 1.5);
    s.grad("grad conv2d 3x3 pad1",
           weighted([](const std::vector<Tensor>& in) {
             return conv2d(in[0], in[1], Conv2dSpec{1, 1, 1});
           }, w),
           {x, k}, kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {1, 2, 7, 7}, -1, 1);
    Tensor k = uniform_tensor(rng, {2, 2, 3, 3}, -1, 1);
    Tensor w = uniform_tensor(rng, {1, 2, 4, 4}, 0.5, 1.5);
    s.grad("grad conv2d stride2 dil2",
           weighted([](const std::vector<Tensor>& in) {
             return conv2d(in[0], in[1], Conv2dSpec{2, 2, 2});
           }, w),
           {x, k}, kOpTol);
  }
  {
    Tensor a = uniform_tensor(rng, {3, 4}, -1, 1);
    Tensor b = uniform_tensor(rng, {4, 5}, -1, 1);
    Tensor w = uniform_tensor(rng, {3, 5}, 0.5, 1.5);
    s.grad("grad matmul",
           weighted([](const std::vector<Tensor>& in) { return matmul(in[0], in[1]); }, w),
           {a, b}, kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {3, 5}, -1, 1);
    Tensor w = uniform_tensor(rng, {5, 3}, 0.5, 1.5);
    s.grad("grad transpose",
           weighted([](const std::vector<Tensor>& in) { return transpose2d(in[0]); }, w), {x},
           kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {2, 6}, -1, 1);
    Tensor w = uniform_tensor(rng, {3, 4}, 0.5, 1.5);
    s.grad("grad reshape",
           weighted([](const std::vector<Tensor>& in) { return reshape(in[0], {3, 4}); }, w), {x},
           kOpTol);
  }
  {
    Tensor a = uniform_tensor(rng, {2, 3}, -1, 1);
    Tensor b = uniform_tensor(rng, {2, 2}, -1, 1);
    Tensor w = uniform_tensor(rng, {2, 5}, 0.5, 1.5);
    s.grad("grad concat",
           weighted([](const std::vector<Tensor>& in) {
             return concat({in[0], in[1]}, 1);
           }, w),
           {a, b}, kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {2, 3, 4}, -2, 2);
    Tensor w = uniform_tensor(rng, {2, 3, 4}, 0.5, 1.5);
    s.grad("grad softmax",
           weighted([](const std::vector<Tensor>& in) {
             return softmax_over(in[0], {1, 2});
           }, w),
           {x}, kOpTol);
  }
  {
    Tensor a = uniform_tensor(rng, {2, 3, 4}, -1, 1);
    Tensor b = uniform_tensor(rng, {3, 1}, -1, 1);
    Tensor w = uniform_tensor(rng, {2, 3, 4}, 0.5, 1.5);
    s.grad("grad add broadcast",
           weighted([](const std::vector<Tensor>& in) { return add(in[0], in[1]); }, w), {a, b},
           kOpTol);
  }
  {
    Tensor a = uniform_tensor(rng, {2, 3}, -1, 1);
    Tensor b = uniform_tensor(rng, {2, 1}, -1, 1);
    Tensor w = uniform_tensor(rng, {2, 3}, 0.5, 1.5);
    s.grad("grad sub broadcast",
           weighted([](const std::vector<Tensor>& in) { return sub(in[0], in[1]); }, w), {a, b},
           kOpTol);
  }
  {
    Tensor a = uniform_tensor(rng, {2, 3, 4}, -1, 1);
    Tensor b = uniform_tensor(rng, {1, 4}, -1, 1);
    Tensor w = uniform_tensor(rng, {2, 3, 4}, 0.5, 1.5);
    s.grad("grad mul broadcast",
           weighted([](const std::vector<Tensor>& in) { return mul(in[0], in[1]); }, w), {a, b},
           kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {3, 4}, -3, 3);
    Tensor w = uniform_tensor(rng, {3, 4}, 0.5, 1.5);
    s.grad("grad sigmoid",
           weighted([](const std::vector<Tensor>& in) { return sigmoid(in[0]); }, w), {x}, kOpTol);
  }
  {
    Tensor x = away_from(rng, {3, 4}, -1, 1, {0.0}, 1e-2);
    Tensor w = uniform_tensor(rng, {3, 4}, 0.5, 1.5);
    s.grad("grad relu",
           weighted([](const std::vector<Tensor>& in) { return relu(in[0]); }, w), {x}, kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {3, 4}, -1, 1);
    Tensor w = uniform_tensor(rng, {3, 4}, 0.5, 1.5);
    s.grad("grad affine",
           weighted([](const std::vector<Tensor>& in) { return affine(in[0], 1.7, -0.3); }, w),
           {x}, kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {3, 4}, 0.2, 3.0);
    Tensor w = uniform_tensor(rng, {3, 4}, 0.5, 1.5);
    s.grad("grad log", weighted([](const std::vector<Tensor>& in) { return log(in[0]); }, w), {x},
           kOpTol);
  }
  {
    Tensor x = away_from(rng, {4, 4}, -2, 2, {-0.5, 0.5}, 1e-2);
    Tensor w = uniform_tensor(rng, {4, 4}, 0.5, 1.5);
    s.grad("grad clamp",
           weighted([](const std::vector<Tensor>& in) { return clamp(in[0], -0.5, 0.5); }, w),
           {x}, kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {3, 4}, -1, 1);
    s.grad("grad sum",
           [](const std::vector<Tensor>& in) { return sum_all(in[0]); }, {x}, kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {3, 4}, -1, 1);
    s.grad("grad mean",
           [](const std::vector<Tensor>& in) { return mean_all(in[0]); }, {x}, kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {3, 4, 2}, -1, 1);
    Tensor w = uniform_tensor(rng, {3, 1, 2}, 0.5, 1.5);
    s.grad("grad reduce mean",
           weighted([](const std::vector<Tensor>& in) { return reduce_mean(in[0], 1); }, w), {x},
           kOpTol);
  }
  {
    // Distinct values so no tie flips within the FD step.
    Tensor x({3, 4});
    for (int i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-1, 1) + 0.01 * i;
    Tensor w = uniform_tensor(rng, {3, 1}, 0.5, 1.5);
    s.grad("grad reduce max",
           weighted([](const std::vector<Tensor>& in) { return reduce_max(in[0], 1); }, w), {x},
           kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {2, 3, 4, 4}, -1, 1);
    Tensor w = uniform_tensor(rng, {2, 3}, 0.5, 1.5);
    s.grad("grad global avg pool",
           weighted([](const std::vector<Tensor>& in) { return global_avg_pool(in[0]); }, w), {x},
           kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {1, 2, 3, 3}, -1, 1);
    Tensor w = uniform_tensor(rng, {1, 2, 6, 6}, 0.5, 1.5);
    s.grad("grad upsample bilinear",
           weighted([](const std::vector<Tensor>& in) { return upsample_bilinear(in[0], 2); }, w),
           {x}, kOpTol);
  }
  {
    Tensor x = uniform_tensor(rng, {2, 3}, -1, 1);
    Tensor wt = uniform_tensor(rng, {3, 4}, -1, 1);
    Tensor b = uniform_tensor(rng, {4}, -0.5, 0.5);
    Tensor w = uniform_tensor(rng, {2, 4}, 0.5, 1.5);
    s.grad("grad linear",
           weighted([](const std::vector<Tensor>& in) { return linear(in[0], in[1], in[2]); }, w),
           {x, wt, b}, kOpTol);
  }
  {
    // Loss path itself: gradient of weighted BCE wrt predictions.
    Tensor p = uniform_tensor(rng, {5, 5}, 0.05, 0.95);
    Tensor g({5, 5});
    for (int i = 0; i < g.size(); ++i) g.data()[i] = rng.uniform() < 0.5 ? 0.0 : 1.0;
    Tensor lw = uniform_tensor(rng, {5, 5}, 1.0, 2.0);
    s.grad("grad weighted bce",
           [g, lw](const std::vector<Tensor>& in) { return boundary_loss(in[0], g, lw); }, {p},
           kOpTol);
  }
}

void add_invariant_checks(Suite& s) {
  Rng rng(20240901, 12);
  {
    const int C = 4, H = 3, W = 3;
    Tensor ua = normal_tensor(rng, {C, H, W});
    Tensor um = normal_tensor(rng, {C, H, W});
    Tensor P = normal_tensor(rng, {C, 2});
    Tensor Q = normal_tensor(rng, {C, 2});
    TransitionResult tr = attention_transition_full(ua, um, P, Q);
    double worst = 0;
    const int hw = H * W;
    for (int r = 0; r < hw; ++r) {
      double sum = 0;
      for (int c = 0; c < hw; ++c) sum += tr.row_softmax.data()[r * hw + c];
      worst = std::max(worst, std::fabs(sum - 1.0));
    }
    std::ostringstream d;
    d << "max |row sum - 1| = " << worst;
    s.claim("transition rows sum to one", worst <= 1e-12, d.str());
  }
  {
    const int C = 3, L = 4;
    Tensor va = normal_tensor(rng, {C, 1, 1});
    Tensor vm = normal_tensor(rng, {C, 1, 1});
    std::vector<MatParams> layers;
    for (int l = 0; l < L; ++l) {
      layers.push_back(MatParams{normal_tensor(rng, {1, C, 1, 1}), normal_tensor(rng, {1, C, 1, 1}),
                                 normal_tensor(rng, {C, 1}), normal_tensor(rng, {C, 1})});
    }
    auto [ua, um] = deep_mat(va, vm, layers);
    const double scale = std::pow(2.0, L);
    double worst = 0;
    for (int i = 0; i < C; ++i) {
      const double ea = std::fabs(ua.data()[i] - scale * va.data()[i]) /
                        std::max(std::fabs(scale * va.data()[i]), 1e-12);
      const double em = std::fabs(um.data()[i] - scale * vm.data()[i]) /
                        std::max(std::fabs(scale * vm.data()[i]), 1e-12);
      worst = std::max({worst, ea, em});
    }
    std::ostringstream d;
    d << "max rel deviation from 2^L = " << worst;
    s.claim("pointwise deep mat doubles per layer", worst <= 1e-9, d.str());
  }
}

void add_model_check(Suite& s) {
  ModelConfig mc;
  mc.backbone.stage_channels = {2, 2, 2, 2};
  mc.backbone.stage_strides = {2, 2, 2, 1};
  mc.backbone.convs_per_stage = 1;
  mc.mat_layers = 1;
  mc.reduction = 2;
  mc.decoder_channels = 2;
  Model model(mc, 99);

  SceneSpec scene;
  scene.seed = 5;
  scene.height = 16;
  scene.width = 16;
  scene.num_frames = 2;
  scene.object_size = 5;
  scene.dx = 1.0;
  scene.dy = 0.5;
  scene.background_dx = 0.3;  // keeps the flow image away from exact zeros
  scene.background_dy = -0.2;
  const Sample sample = gen_sequence(scene)[0];

  // Jitter every parameter off its init value. Freshly initialized biases are
  // exactly zero, which parks ReLU preactivations exactly on their kink over
  // uniform input regions; finite differences are undefined there even though
  // the subgradient is fine, so the check must run at a generic point.
  Rng jitter(20240901, 14);
  std::vector<Tensor> inputs;
  for (const NamedParam& p : model.params()) {
    Tensor t = p.value.clone();
    for (int i = 0; i < t.size(); ++i) t.data()[i] += jitter.uniform(-0.05, 0.05);
    inputs.push_back(std::move(t));
  }

  const LossFn fn = [&model, &sample](const std::vector<Tensor>& in) {
    Model::Forward f = model.forward_with(in, sample.frame, sample.flow_img);
    return total_loss(f.mask, sample.mask, f.boundaries, sample.boundary, sample.weights).total;
  };
  // atol sits above the ~1e-11 round-off of central differences on this loss
  // and far below any gradient the model actually produces.
  s.grad("grad micro model all parameters", fn, std::move(inputs), kModelTol, 1e-4, 1e-6, 1e-9);
}

}  // namespace

std::vector<CheckResult> run_self_checks(bool inject_fault) {
  Suite s;
  add_op_checks(s);
  add_invariant_checks(s);
  add_model_check(s);
  if (inject_fault) {
    Rng rng(20240901, 13);
    Tensor x = uniform_tensor(rng, {3, 4}, -1, 1);
    Tensor w = uniform_tensor(rng, {3, 4}, 0.5, 1.5);
    s.grad("fault injection (corrupted backward)",
           weighted([](const std::vector<Tensor>& in) { return corrupted_identity(in[0]); }, w),
           {x}, kOpTol);
  }
  return s.results;
}

int report_self_checks(const std::vector<CheckResult>& results, std::ostream& os) {
  int failures = 0;
  for (const CheckResult& r : results) {
    if (r.passed) {
      os << "ok   " << r.name << " (" << r.detail << ")\n";
    } else {
      os << "FAIL " << r.name << ": " << r.detail << "\n";
      ++failures;
    }
  }
  os << results.size() << " checks, " << failures << " failed\n";
  return failures;
}

}  // namespace motionseg
