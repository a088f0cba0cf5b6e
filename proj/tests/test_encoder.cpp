#include <cmath>
#include <utility>
#include <vector>

#include "doctest.h"
#include "motionseg/encoder.hpp"
#include "motionseg/grad_check.hpp"
#include "motionseg/model.hpp"
#include "motionseg/ops.hpp"
#include "motionseg/rng.hpp"
#include "motionseg/tensor.hpp"

using namespace motionseg;

namespace {

MatParams random_mat(Rng& rng, int c, int d) {
  MatParams p;
  p.w_a = normal_tensor(rng, {1, c, 1, 1}, 0.0, 0.5);
  p.w_m = normal_tensor(rng, {1, c, 1, 1}, 0.0, 0.5);
  p.P = normal_tensor(rng, {c, c / d}, 0.0, 0.5);
  p.Q = normal_tensor(rng, {c, c / d}, 0.0, 0.5);
  return p;
}

LossFn weighted(std::function<Tensor(const std::vector<Tensor>&)> op, std::uint64_t seed = 99) {
  return [op = std::move(op), seed](const std::vector<Tensor>& inputs) {
    Tensor out = op(inputs);
    Rng rng(seed, 1);
    Tensor w = uniform_tensor(rng, out.shape(), 0.5, 1.5);
    return sum_all(mul(out, w));
  };
}

}  // namespace

TEST_CASE("soft attention over a constant map is uniform") {
  Tensor v = Tensor::full({3, 4, 4}, 2.0);
  Rng rng(1, 1);
  Tensor w = normal_tensor(rng, {1, 3, 1, 1}, 0.0, 1.0);
  auto [a, u] = soft_attention(v, w);
  CHECK(a.shape() == std::vector<int>{4, 4});
  for (int i = 0; i < 16; ++i) CHECK(a.data()[i] == doctest::Approx(1.0 / 16).epsilon(1e-12));
  for (int i = 0; i < u.size(); ++i) CHECK(u.data()[i] == doctest::Approx(2.0 / 16).epsilon(1e-12));
}

TEST_CASE("soft attention saturates on a dominant logit") {
  Tensor v = Tensor::full({1, 3, 3}, 0.0);
  v.data()[4] = 30.0;  // margin >= 20 over every other position
  Tensor w(std::vector<int>{1, 1, 1, 1}, {1.0});
  auto [a, u] = soft_attention(v, w);
  CHECK(a.data()[4] == doctest::Approx(1.0).epsilon(1e-8));
  CHECK(u.data()[4] == doctest::Approx(30.0).epsilon(1e-7));
  for (int i = 0; i < 9; ++i)
    if (i != 4) CHECK(std::fabs(u.data()[i]) <= 1e-8);
}

TEST_CASE("soft attention normalizes and differentiates through its kernel") {
  Rng rng(2, 1);
  Tensor v = uniform_tensor(rng, {3, 4, 4}, -1.0, 1.0);
  Tensor w = normal_tensor(rng, {1, 3, 1, 1}, 0.0, 1.0);
  auto [a, u] = soft_attention(v, w);
  double sum = 0;
  for (int i = 0; i < a.size(); ++i) sum += a.data()[i];
  CHECK(std::fabs(sum - 1.0) <= 1e-12);

  Tensor v_fixed = v;
  auto r = grad_check(weighted([v_fixed](const std::vector<Tensor>& inp) {
                        return soft_attention(v_fixed, inp[0]).second;
                      }),
                      {w});
  CHECK(r.max_rel_error <= 1e-6);
  CHECK_THROWS(soft_attention(v, Tensor::full({1, 2, 1, 1}, 1.0)));
}

TEST_CASE("transition at a single position is the identity") {
  Rng rng(3, 1);
  Tensor ua = uniform_tensor(rng, {4, 1, 1}, -1.0, 1.0);
  Tensor um = uniform_tensor(rng, {4, 1, 1}, -1.0, 1.0);
  MatParams p = random_mat(rng, 4, 2);
  TransitionResult t = attention_transition_full(ua, um, p.P, p.Q);
  CHECK(t.row_softmax.shape() == std::vector<int>{1, 1});
  CHECK(t.row_softmax.data()[0] == 1.0);
  for (int i = 0; i < ua.size(); ++i) CHECK(t.output.data()[i] == ua.data()[i]);
}

TEST_CASE("transition rows are stochastic") {
  Rng rng(4, 1);
  Tensor ua = uniform_tensor(rng, {8, 3, 3}, -1.0, 1.0);
  Tensor um = uniform_tensor(rng, {8, 3, 3}, -1.0, 1.0);
  MatParams p = random_mat(rng, 8, 2);
  TransitionResult t = attention_transition_full(ua, um, p.P, p.Q);
  CHECK(t.row_softmax.shape() == std::vector<int>{9, 9});
  for (int r = 0; r < 9; ++r) {
    double sum = 0;
    for (int c = 0; c < 9; ++c) sum += t.row_softmax.data()[r * 9 + c];
    CHECK(std::fabs(sum - 1.0) <= 1e-12);
  }
}

TEST_CASE("low-rank factors hold 2/d of the dense parameter count") {
  ModelConfig mc;
  mc.backbone.stage_channels = {8, 16, 32, 64};
  mc.backbone.convs_per_stage = 1;
  mc.mat_layers = 1;
  mc.reduction = 8;
  Model model(mc, 1);
  long long low_rank = 0;
  for (const NamedParam& p : model.params()) {
    if (p.name == "encoder.mat.s5.l0.P" || p.name == "encoder.mat.s5.l0.Q") {
      CHECK(p.value.shape() == std::vector<int>{64, 8});
      low_rank += p.value.size();
    }
  }
  CHECK(low_rank == 1024);
  CHECK(low_rank * 8 == 2 * 64 * 64);  // exactly 2/d of the dense form
}

TEST_CASE("mat layer doubles both streams at a single position") {
  Rng rng(5, 1);
  Tensor ua = uniform_tensor(rng, {4, 1, 1}, -1.0, 1.0);
  Tensor um = uniform_tensor(rng, {4, 1, 1}, -1.0, 1.0);
  MatParams p = random_mat(rng, 4, 2);
  auto [out_a, out_m] = mat_layer(ua, um, p);
  for (int i = 0; i < 4; ++i) {
    CHECK(out_a.data()[i] == 2.0 * ua.data()[i]);
    CHECK(out_m.data()[i] == 2.0 * um.data()[i]);
  }
}

TEST_CASE("mat layer output minus input equals the attended term") {
  Rng rng(6, 1);
  Tensor ua = uniform_tensor(rng, {4, 3, 3}, -1.0, 1.0);
  Tensor um = uniform_tensor(rng, {4, 3, 3}, -1.0, 1.0);
  MatParams p = random_mat(rng, 4, 2);
  auto [out_a, out_m] = mat_layer(ua, um, p);

  auto [a_a, ut_a] = soft_attention(ua, p.w_a);
  auto [a_m, ut_m] = soft_attention(um, p.w_m);
  Tensor attended = attention_transition(ut_a, ut_m, p.P, p.Q);
  for (int i = 0; i < ua.size(); ++i) {
    CHECK(std::fabs(out_a.data()[i] - ua.data()[i] - attended.data()[i]) <= 1e-12);
    CHECK(std::fabs(out_m.data()[i] - um.data()[i] - ut_m.data()[i]) <= 1e-12);
  }
}

TEST_CASE("mat layer gradients match finite differences") {
  Rng rng(7, 1);
  Tensor ua = uniform_tensor(rng, {4, 3, 3}, -1.0, 1.0);
  Tensor um = uniform_tensor(rng, {4, 3, 3}, -1.0, 1.0);
  MatParams p = random_mat(rng, 4, 2);
  auto r = grad_check(weighted([ua, um](const std::vector<Tensor>& inp) {
                        MatParams q;
                        q.w_a = inp[0];
                        q.w_m = inp[1];
                        q.P = inp[2];
                        q.Q = inp[3];
                        auto [oa, om] = mat_layer(ua, um, q);
                        return concat({oa, om}, 0);
                      }),
                      {p.w_a, p.w_m, p.P, p.Q});
  CHECK(r.max_rel_error <= 1e-4);
}

TEST_CASE("zero layers pass both streams through untouched") {
  Rng rng(8, 1);
  Tensor va = uniform_tensor(rng, {4, 3, 3}, -1.0, 1.0);
  Tensor vm = uniform_tensor(rng, {4, 3, 3}, -1.0, 1.0);
  auto [ua, um] = deep_mat(va, vm, {});
  for (int i = 0; i < va.size(); ++i) {
    CHECK(ua.data()[i] == va.data()[i]);
    CHECK(um.data()[i] == vm.data()[i]);
  }
}

TEST_CASE("stacked layers at a single position multiply by two per layer") {
  Rng rng(9, 1);
  Tensor va = uniform_tensor(rng, {3, 1, 1}, -1.0, 1.0);
  Tensor vm = uniform_tensor(rng, {3, 1, 1}, -1.0, 1.0);
  std::vector<MatParams> layers;
  for (int l = 0; l < 3; ++l) layers.push_back(random_mat(rng, 3, 3));
  auto [ua, um] = deep_mat(va, vm, layers);
  for (int i = 0; i < va.size(); ++i) {
    CHECK(ua.data()[i] == doctest::Approx(8.0 * va.data()[i]).epsilon(1e-12));
    CHECK(um.data()[i] == doctest::Approx(8.0 * vm.data()[i]).epsilon(1e-12));
  }
}

TEST_CASE("motion features never depend on appearance input") {
  Rng rng(10, 1);
  Tensor va = uniform_tensor(rng, {4, 3, 3}, -1.0, 1.0);
  Tensor vm = uniform_tensor(rng, {4, 3, 3}, -1.0, 1.0);
  std::vector<MatParams> layers = {random_mat(rng, 4, 2)};
  Tensor out_weights = uniform_tensor(rng, {4, 3, 3}, 0.5, 1.5);

  Tape tape_m;
  Tensor wa = tape_m.watch(va);
  Tensor wm = tape_m.watch(vm);
  auto um = deep_mat(wa, wm, layers).second;
  tape_m.backward(sum_all(mul(um, out_weights)));
  Tensor g_va = tape_m.grad(wa);
  for (int i = 0; i < g_va.size(); ++i) CHECK(g_va.data()[i] == 0.0);

  Tape tape_a;
  Tensor wa2 = tape_a.watch(va);
  Tensor wm2 = tape_a.watch(vm);
  auto ua = deep_mat(wa2, wm2, layers).first;
  tape_a.backward(sum_all(mul(ua, out_weights)));
  Tensor g_vm = tape_a.grad(wm2);
  double max_abs = 0;
  for (int i = 0; i < g_vm.size(); ++i) max_abs = std::max(max_abs, std::fabs(g_vm.data()[i]));
  CHECK(max_abs > 0.0);
}

TEST_CASE("encode produces the stride-implied pyramid") {
  ModelConfig mc;
  mc.backbone.stage_channels = {2, 2, 2, 2};
  mc.backbone.convs_per_stage = 1;
  mc.mat_layers = 1;
  mc.reduction = 2;
  Model model(mc, 11);
  Rng rng(12, 1);
  Tensor frame = uniform_tensor(rng, {3, 64, 64}, 0.0, 1.0);
  Tensor flow = uniform_tensor(rng, {3, 64, 64}, 0.0, 1.0);
  Model::Forward out = model.forward(frame, flow);
  REQUIRE(out.stages.size() == 4);
  const int expect[4] = {32, 16, 8, 8};
  for (int i = 0; i < 4; ++i) {
    CHECK(out.stages[i].V_a.dim(1) == expect[i]);
    CHECK(out.stages[i].V_a.dim(2) == expect[i]);
    CHECK(out.stages[i].U.dim(0) == 2 * mc.backbone.stage_channels[i]);
    // fused feature is the channel concat of the two enhanced streams
    const Tensor& u = out.stages[i].U;
    const int c = mc.backbone.stage_channels[i];
    const int hw = expect[i] * expect[i];
    for (int j = 0; j < c * hw; ++j) {
      CHECK(u.data()[j] == out.stages[i].U_a.data()[j]);
      CHECK(u.data()[c * hw + j] == out.stages[i].U_m.data()[j]);
    }
  }
  CHECK_THROWS(model.forward(uniform_tensor(rng, {3, 60, 60}, 0.0, 1.0),
                             uniform_tensor(rng, {3, 60, 60}, 0.0, 1.0)));
}

TEST_CASE("without mat layers the streams never interact before the concat") {
  ModelConfig mc;
  mc.backbone.stage_channels = {2, 2, 2, 2};
  mc.backbone.convs_per_stage = 1;
  mc.mat_layers = 0;
  mc.reduction = 2;
  Model model(mc, 13);
  Rng rng(14, 1);
  Tensor flow = uniform_tensor(rng, {3, 16, 16}, 0.0, 1.0);
  Tensor frame1 = uniform_tensor(rng, {3, 16, 16}, 0.0, 1.0);
  Tensor frame2 = uniform_tensor(rng, {3, 16, 16}, 0.0, 1.0);
  Model::Forward o1 = model.forward(frame1, flow);
  Model::Forward o2 = model.forward(frame2, flow);
  for (size_t s = 0; s < o1.stages.size(); ++s) {
    // motion features identical although the frames differ
    for (int i = 0; i < o1.stages[s].U_m.size(); ++i)
      CHECK(o1.stages[s].U_m.data()[i] == o2.stages[s].U_m.data()[i]);
    // and the enhanced features degenerate to the raw stage features
    for (int i = 0; i < o1.stages[s].U_a.size(); ++i)
      CHECK(o1.stages[s].U_a.data()[i] == o1.stages[s].V_a.data()[i]);
  }
}

TEST_CASE("backbone validation rejects malformed configs") {
  BackboneConfig bad;
  bad.stage_channels = {8, 16, 32};
  CHECK_THROWS(validate_backbone(bad));
  BackboneConfig stride;
  stride.stage_strides = {2, 2, 2, 3};
  CHECK_THROWS(validate_backbone(stride));
  BackboneConfig good;
  CHECK(stride_product(good) == 8);
  CHECK(stage_resolution(good, 64, 0) == 32);
  CHECK(stage_resolution(good, 64, 3) == 8);
}
