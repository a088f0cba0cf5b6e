#include <cmath>
#include <string>
#include <vector>

#include "doctest.h"
#include "motionseg/decoder.hpp"
#include "motionseg/grad_check.hpp"
#include "motionseg/loss.hpp"
#include "motionseg/model.hpp"
#include "motionseg/ops.hpp"
#include "motionseg/rng.hpp"
#include "motionseg/tensor.hpp"

using namespace motionseg;

namespace {

BarParams zero_bar(int d, int zc) {
  BarParams p;
  for (int dil : {1, 2, 4}) {
    (void)dil;
    p.aspp_kernels.push_back(Tensor::full({d, zc, 3, 3}, 0.0));
    p.aspp_biases.push_back(Tensor::full({d}, 0.0));
  }
  p.aspp_kernels.push_back(Tensor::full({d, zc, 1, 1}, 0.0));
  p.aspp_biases.push_back(Tensor::full({d}, 0.0));
  p.aspp_fuse_kernel = Tensor::full({d, 4 * d, 1, 1}, 0.0);
  p.aspp_fuse_bias = Tensor::full({d}, 0.0);
  p.bdry_k1 = Tensor::full({d, d, 3, 3}, 0.0);
  p.bdry_b1 = Tensor::full({d}, 0.0);
  p.bdry_k2 = Tensor::full({d, d, 3, 3}, 0.0);
  p.bdry_b2 = Tensor::full({d}, 0.0);
  p.bdry_k3 = Tensor::full({1, d, 1, 1}, 0.0);
  p.bdry_b3 = Tensor::full({1}, 0.0);
  p.fuse_kernel = Tensor::full({d, 2 * d + 1, 3, 3}, 0.0);
  p.fuse_bias = Tensor::full({d}, 0.0);
  return p;
}

BarParams random_bar(Rng& rng, int d, int zc) {
  BarParams p = zero_bar(d, zc);
  auto fill = [&rng](Tensor& t, double s) {
    for (int i = 0; i < t.size(); ++i) t.data()[i] = rng.normal(0.0, s);
  };
  for (Tensor& k : p.aspp_kernels) fill(k, 0.3);
  for (Tensor& b : p.aspp_biases) fill(b, 0.1);
  fill(p.aspp_fuse_kernel, 0.3);
  fill(p.aspp_fuse_bias, 0.1);
  fill(p.bdry_k1, 0.3);
  fill(p.bdry_b1, 0.1);
  fill(p.bdry_k2, 0.3);
  fill(p.bdry_b2, 0.1);
  fill(p.bdry_k3, 0.3);
  fill(p.bdry_b3, 0.1);
  fill(p.fuse_kernel, 0.3);
  fill(p.fuse_bias, 0.1);
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

TEST_CASE("boundary head with zero parameters answers one half everywhere") {
  Rng rng(1, 1);
  Tensor f = uniform_tensor(rng, {2, 6, 6}, -1.0, 1.0);
  Tensor mb = boundary_head(f, zero_bar(2, 4));
  CHECK(mb.shape() == std::vector<int>{6, 6});
  for (int i = 0; i < mb.size(); ++i) CHECK(mb.data()[i] == 0.5);
}

TEST_CASE("boundary head differentiates through its kernels") {
  Rng rng(2, 1);
  Tensor f = uniform_tensor(rng, {2, 5, 5}, -1.0, 1.0);
  BarParams p = random_bar(rng, 2, 4);
  auto r = grad_check(weighted([f, p](const std::vector<Tensor>& inp) {
                        BarParams q = p;
                        q.bdry_k1 = inp[0];
                        q.bdry_b1 = inp[1];
                        q.bdry_k2 = inp[2];
                        q.bdry_b2 = inp[3];
                        q.bdry_k3 = inp[4];
                        q.bdry_b3 = inp[5];
                        return boundary_head(f, q);
                      }),
                      {p.bdry_k1, p.bdry_b1, p.bdry_k2, p.bdry_b2, p.bdry_k3, p.bdry_b3});
  CHECK(r.max_rel_error <= 1e-6);
}

TEST_CASE("dilated branches agree on constant input in the interior") {
  Tensor z = Tensor::full({2, 9, 9}, 0.5);
  Tensor k = Tensor::full({1, 2, 3, 3}, 1.0);
  const double expect = 9.0 * 2.0 * 0.5;  // 9 taps x 2 channels x value
  for (int dil : {1, 2, 4}) {
    Tensor out = conv_chw(z, k, {1, dil, dil});
    CHECK(out.dim(1) == 9);
    const int c = 4 * 9 + 4;  // center position, all taps inside
    CHECK(out.data()[c] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("aspp preserves spatial extent and differentiates") {
  Rng rng(3, 1);
  Tensor z = uniform_tensor(rng, {4, 6, 6}, -1.0, 1.0);
  BarParams p = random_bar(rng, 2, 4);
  Tensor out = aspp(z, p);
  CHECK(out.shape() == std::vector<int>{2, 6, 6});

  auto r = grad_check(weighted([z, p](const std::vector<Tensor>& inp) {
                        BarParams q = p;
                        q.aspp_kernels = {inp[0], inp[1], inp[2], inp[3]};
                        q.aspp_fuse_kernel = inp[4];
                        return aspp(z, q);
                      }),
                      {p.aspp_kernels[0], p.aspp_kernels[1], p.aspp_kernels[2], p.aspp_kernels[3],
                       p.aspp_fuse_kernel});
  CHECK(r.max_rel_error <= 1e-6);
}

TEST_CASE("refinement keeps or doubles resolution as asked") {
  Rng rng(4, 1);
  Tensor z = uniform_tensor(rng, {4, 6, 6}, -1.0, 1.0);
  Tensor f = uniform_tensor(rng, {2, 6, 6}, -1.0, 1.0);
  BarParams p = random_bar(rng, 2, 4);
  BarResult stay = bar_forward(z, f, p, 1);
  CHECK(stay.F_next.shape() == std::vector<int>{2, 6, 6});
  CHECK(stay.M_b.shape() == std::vector<int>{6, 6});
  BarResult up = bar_forward(z, f, p, 2);
  CHECK(up.F_next.shape() == std::vector<int>{2, 12, 12});
  CHECK_THROWS(bar_forward(z, uniform_tensor(rng, {2, 5, 5}, 0.0, 1.0), p, 1));
}

TEST_CASE("the predicted boundary feeds back into the refinement") {
  Rng rng(5, 1);
  Tensor z = uniform_tensor(rng, {4, 6, 6}, -1.0, 1.0);
  Tensor f = uniform_tensor(rng, {2, 6, 6}, -1.0, 1.0);
  BarParams p = random_bar(rng, 2, 4);
  BarParams q = p;
  q.bdry_b3 = Tensor::full({1}, 2.0);  // shift the boundary logits only
  BarResult a = bar_forward(z, f, p, 1);
  BarResult b = bar_forward(z, f, q, 1);
  double diff = 0;
  for (int i = 0; i < a.F_next.size(); ++i)
    diff = std::max(diff, std::fabs(a.F_next.data()[i] - b.F_next.data()[i]));
  CHECK(diff > 0.0);
}

TEST_CASE("decode emits four bounded boundary maps and a full-resolution mask") {
  ModelConfig mc;
  mc.backbone.stage_channels = {2, 2, 2, 2};
  mc.backbone.convs_per_stage = 1;
  mc.mat_layers = 1;
  mc.reduction = 2;
  mc.decoder_channels = 2;
  Model model(mc, 17);
  Rng rng(6, 1);
  Tensor frame = uniform_tensor(rng, {3, 64, 64}, 0.0, 1.0);
  Tensor flow = uniform_tensor(rng, {3, 64, 64}, 0.0, 1.0);
  Model::Forward out = model.forward(frame, flow);

  CHECK(out.mask.shape() == std::vector<int>{64, 64});
  REQUIRE(out.boundaries.size() == 4);
  const int expect[4] = {8, 8, 16, 32};  // head runs before each upsample
  for (int i = 0; i < 4; ++i) {
    CHECK(out.boundaries[i].shape() == std::vector<int>{expect[i], expect[i]});
    for (int j = 0; j < out.boundaries[i].size(); ++j) {
      CHECK(out.boundaries[i].data()[j] >= 0.0);
      CHECK(out.boundaries[i].data()[j] <= 1.0);
    }
  }
  for (int j = 0; j < out.mask.size(); ++j) {
    CHECK(out.mask.data()[j] >= 0.0);
    CHECK(out.mask.data()[j] <= 1.0);
  }

  Model::Forward again = model.forward(frame, flow);
  for (int j = 0; j < out.mask.size(); ++j) CHECK(again.mask.data()[j] == out.mask.data()[j]);
}

TEST_CASE("every parameter group receives gradient from the total loss") {
  ModelConfig mc;
  mc.backbone.stage_channels = {2, 2, 2, 2};
  mc.backbone.convs_per_stage = 1;
  mc.mat_layers = 1;
  mc.reduction = 2;
  mc.decoder_channels = 2;
  Model model(mc, 19);
  Rng rng(7, 1);
  Tensor frame = uniform_tensor(rng, {3, 16, 16}, 0.0, 1.0);
  Tensor flow = uniform_tensor(rng, {3, 16, 16}, 0.0, 1.0);
  Tensor gt = Tensor::full({16, 16}, 0.0);
  for (int y = 5; y < 11; ++y)
    for (int x = 5; x < 11; ++x) gt.data()[y * 16 + x] = 1.0;
  Tensor gtb = Tensor::full({16, 16}, 0.0);
  for (int x = 5; x < 11; ++x) {
    gtb.data()[5 * 16 + x] = 1.0;
    gtb.data()[10 * 16 + x] = 1.0;
  }
  Tensor w = Tensor::full({16, 16}, 1.0);

  Tape tape;
  Model::Forward out = model.forward(frame, flow, &tape);
  LossParts parts = total_loss(out.mask, gt, out.boundaries, gtb, w);
  tape.backward(parts.total);

  double enc = 0, bridge = 0, dec = 0;
  for (const NamedParam& p : model.params()) {
    Tensor g = tape.grad_for(p.value);
    double mx = 0;
    for (int i = 0; i < g.size(); ++i) mx = std::max(mx, std::fabs(g.data()[i]));
    if (p.name.rfind("encoder.", 0) == 0) enc = std::max(enc, mx);
    if (p.name.rfind("bridge.", 0) == 0) bridge = std::max(bridge, mx);
    if (p.name.rfind("decoder.", 0) == 0) dec = std::max(dec, mx);
    for (int i = 0; i < g.size(); ++i) CHECK(std::isfinite(g.data()[i]));
  }
  CHECK(enc > 0.0);
  CHECK(bridge > 0.0);
  CHECK(dec > 0.0);
}
