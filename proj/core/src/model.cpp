#include "motionseg/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "motionseg/grad_check.hpp"
#include "motionseg/ops.hpp"
#include "motionseg/rng.hpp"

namespace motionseg {

namespace {

long long fan_in_of(const std::vector<int>& shape) {
  // Conv kernels [K,C,kh,kw]: C*kh*kw. Fc weights [I,O]: I. Factors [C,C/d]: C.
  if (shape.size() == 4) return static_cast<long long>(shape[1]) * shape[2] * shape[3];
  if (shape.size() == 2) return shape[0];
  if (shape.size() == 1) return shape[0];
  throw std::invalid_argument("unexpected parameter rank " + std::to_string(shape.size()));
}

Tensor init_weight(Rng& rng, std::vector<int> shape) {
  const double stddev = 1.0 / std::sqrt(static_cast<double>(fan_in_of(shape)));
  return normal_tensor(rng, std::move(shape), 0.0, stddev);
}

Tensor zeros(std::vector<int> shape) { return Tensor(std::move(shape)); }

}  // namespace

void validate_model_config(const ModelConfig& config) {
  validate_backbone(config.backbone);
  if (config.mat_layers < 0) throw std::invalid_argument("mat_layers must be >= 0");
  if (config.reduction < 2) throw std::invalid_argument("reduction d must be > 1");
  if (config.decoder_channels < 1) throw std::invalid_argument("decoder_channels must be >= 1");
  if (config.mat_layers > 0) {
    for (int c : config.backbone.stage_channels) {
      if (c % config.reduction != 0) {
        throw std::invalid_argument("stage channel count " + std::to_string(c) +
                                    " is not divisible by reduction d=" +
                                    std::to_string(config.reduction));
      }
    }
  }
}

Model::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  validate_model_config(config_);
  Rng rng(seed, rng_stream::kWeightInit);
  const auto& bb = config_.backbone;

  // Initialization draws follow this construction sequence; the named flat
  // order below follows it too, so forward_with can rebuild the structure.
  const auto make_stream = [&](int in_channels) {
    std::vector<StageParams> stages;
    int cin = in_channels;
    for (int i = 0; i < 4; ++i) {
      StageParams sp;
      const int cout = bb.stage_channels[static_cast<size_t>(i)];
      int c = cin;
      for (int j = 0; j < bb.convs_per_stage; ++j) {
        sp.kernels.push_back(init_weight(rng, {cout, c, 3, 3}));
        sp.biases.push_back(zeros({cout}));
        c = cout;
      }
      stages.push_back(std::move(sp));
      cin = cout;
    }
    return stages;
  };
  encoder_.appearance = make_stream(3);
  encoder_.motion = make_stream(3);
  for (int i = 0; i < 4; ++i) {
    const int C = bb.stage_channels[static_cast<size_t>(i)];
    std::vector<MatParams> layers;
    for (int l = 0; l < config_.mat_layers; ++l) {
      MatParams mp;
      mp.w_a = init_weight(rng, {1, C, 1, 1});
      mp.w_m = init_weight(rng, {1, C, 1, 1});
      mp.P = init_weight(rng, {C, C / config_.reduction});
      mp.Q = init_weight(rng, {C, C / config_.reduction});
      layers.push_back(std::move(mp));
    }
    encoder_.mat.push_back(std::move(layers));
  }

  if (config_.use_ssa) {
    for (int i = 0; i < 4; ++i) {
      const int C2 = 2 * bb.stage_channels[static_cast<size_t>(i)];
      const int hidden = ssa_hidden_width(C2);
      SsaParams sp;
      sp.ch_w1 = init_weight(rng, {C2, hidden});
      sp.ch_b1 = zeros({hidden});
      sp.ch_w2 = init_weight(rng, {hidden, C2});
      sp.ch_b2 = zeros({C2});
      sp.spatial_kernel = init_weight(rng, {1, 2, 7, 7});
      sp.g_w1 = init_weight(rng, {C2, hidden});
      sp.g_b1 = zeros({hidden});
      sp.g_w2 = init_weight(rng, {hidden, 1});
      sp.g_b2 = zeros({1});
      bridges_.push_back(std::move(sp));
    }
  }

  const int D = config_.decoder_channels;
  const int c5 = 2 * bb.stage_channels[3];
  decoder_.f5_kernel = init_weight(rng, {D, c5, 3, 3});
  decoder_.f5_bias = zeros({D});
  for (int bar = 0; bar < 4; ++bar) {
    const int stage = 3 - bar;  // BAR_5 first
    const int zc = 2 * bb.stage_channels[static_cast<size_t>(stage)];
    BarParams bp;
    for (int b = 0; b < 3; ++b) {
      bp.aspp_kernels.push_back(init_weight(rng, {D, zc, 3, 3}));
      bp.aspp_biases.push_back(zeros({D}));
    }
    bp.aspp_kernels.push_back(init_weight(rng, {D, zc, 1, 1}));
    bp.aspp_biases.push_back(zeros({D}));
    bp.aspp_fuse_kernel = init_weight(rng, {D, 4 * D, 1, 1});
    bp.aspp_fuse_bias = zeros({D});
    bp.bdry_k1 = init_weight(rng, {D, D, 3, 3});
    bp.bdry_b1 = zeros({D});
    bp.bdry_k2 = init_weight(rng, {D, D, 3, 3});
    bp.bdry_b2 = zeros({D});
    bp.bdry_k3 = init_weight(rng, {1, D, 1, 1});
    bp.bdry_b3 = zeros({1});
    bp.fuse_kernel = init_weight(rng, {D, 2 * D + 1, 3, 3});
    bp.fuse_bias = zeros({D});
    decoder_.bars.push_back(std::move(bp));
  }
  decoder_.mask_kernel = init_weight(rng, {1, D, 3, 3});
  decoder_.mask_bias = zeros({1});

  register_params();
}

void Model::register_params() {
  named_.clear();
  const auto reg = [&](std::string name, const Tensor& t, bool decoder_group) {
    named_.push_back(NamedParam{std::move(name), t.detached(), decoder_group});
  };
  const auto reg_stream = [&](const char* stream, const std::vector<StageParams>& stages) {
    for (size_t i = 0; i < stages.size(); ++i) {
      for (size_t j = 0; j < stages[i].kernels.size(); ++j) {
        const std::string base = std::string("encoder.") + stream + ".s" + std::to_string(i + 2) +
                                 ".conv" + std::to_string(j);
        reg(base + ".kernel", stages[i].kernels[j], false);
        reg(base + ".bias", stages[i].biases[j], false);
      }
    }
  };
  reg_stream("appearance", encoder_.appearance);
  reg_stream("motion", encoder_.motion);
  for (size_t i = 0; i < encoder_.mat.size(); ++i) {
    for (size_t l = 0; l < encoder_.mat[i].size(); ++l) {
      const std::string base =
          "encoder.mat.s" + std::to_string(i + 2) + ".l" + std::to_string(l);
      reg(base + ".w_a", encoder_.mat[i][l].w_a, false);
      reg(base + ".w_m", encoder_.mat[i][l].w_m, false);
      reg(base + ".P", encoder_.mat[i][l].P, false);
      reg(base + ".Q", encoder_.mat[i][l].Q, false);
    }
  }
  for (size_t i = 0; i < bridges_.size(); ++i) {
    const std::string base = "bridge.s" + std::to_string(i + 2);
    reg(base + ".ch_w1", bridges_[i].ch_w1, false);
    reg(base + ".ch_b1", bridges_[i].ch_b1, false);
    reg(base + ".ch_w2", bridges_[i].ch_w2, false);
    reg(base + ".ch_b2", bridges_[i].ch_b2, false);
    reg(base + ".spatial", bridges_[i].spatial_kernel, false);
    reg(base + ".g_w1", bridges_[i].g_w1, false);
    reg(base + ".g_b1", bridges_[i].g_b1, false);
    reg(base + ".g_w2", bridges_[i].g_w2, false);
    reg(base + ".g_b2", bridges_[i].g_b2, false);
  }
  reg("decoder.f5.kernel", decoder_.f5_kernel, true);
  reg("decoder.f5.bias", decoder_.f5_bias, true);
  for (size_t b = 0; b < decoder_.bars.size(); ++b) {
    const std::string base = "decoder.bar" + std::to_string(5 - b);
    const BarParams& bp = decoder_.bars[b];
    for (size_t k = 0; k < bp.aspp_kernels.size(); ++k) {
      reg(base + ".aspp" + std::to_string(k) + ".kernel", bp.aspp_kernels[k], true);
      reg(base + ".aspp" + std::to_string(k) + ".bias", bp.aspp_biases[k], true);
    }
    reg(base + ".aspp_fuse.kernel", bp.aspp_fuse_kernel, true);
    reg(base + ".aspp_fuse.bias", bp.aspp_fuse_bias, true);
    reg(base + ".bdry0.kernel", bp.bdry_k1, true);
    reg(base + ".bdry0.bias", bp.bdry_b1, true);
    reg(base + ".bdry1.kernel", bp.bdry_k2, true);
    reg(base + ".bdry1.bias", bp.bdry_b2, true);
    reg(base + ".bdry2.kernel", bp.bdry_k3, true);
    reg(base + ".bdry2.bias", bp.bdry_b3, true);
    reg(base + ".fuse.kernel", bp.fuse_kernel, true);
    reg(base + ".fuse.bias", bp.fuse_bias, true);
  }
  reg("decoder.mask.kernel", decoder_.mask_kernel, true);
  reg("decoder.mask.bias", decoder_.mask_bias, true);
}

void Model::load_tensors(const std::map<std::string, Tensor>& tensors) {
  if (tensors.size() != named_.size()) {
    throw std::runtime_error("checkpoint holds " + std::to_string(tensors.size()) +
                             " tensors but the model has " + std::to_string(named_.size()));
  }
  for (NamedParam& p : named_) {
    auto it = tensors.find(p.name);
    if (it == tensors.end()) throw std::runtime_error("checkpoint is missing tensor " + p.name);
    if (it->second.shape() != p.value.shape()) {
      throw std::runtime_error("checkpoint tensor " + p.name + " has shape " +
                               shape_str(it->second.shape()) + ", expected " +
                               shape_str(p.value.shape()));
    }
    std::copy(it->second.data(), it->second.data() + it->second.size(), p.value.data());
  }
}

Model::Forward Model::forward(const Tensor& frame, const Tensor& flow, Tape* tape) const {
  std::vector<Tensor> flat;
  flat.reserve(named_.size());
  for (const NamedParam& p : named_) flat.push_back(tape ? tape->watch(p.value) : p.value);
  return forward_with(flat, frame, flow);
}

Model::Forward Model::forward_with(const std::vector<Tensor>& flat, const Tensor& frame,
                                   const Tensor& flow) const {
  if (flat.size() != named_.size()) {
    throw std::invalid_argument("expected " + std::to_string(named_.size()) +
                                " parameter tensors, got " + std::to_string(flat.size()));
  }
  size_t cursor = 0;
  const auto next = [&]() -> const Tensor& {
    const Tensor& t = flat[cursor];
    if (t.shape() != named_[cursor].value.shape()) {
      throw std::invalid_argument("parameter " + named_[cursor].name + " expects shape " +
                                  shape_str(named_[cursor].value.shape()) + ", got " +
                                  shape_str(t.shape()));
    }
    ++cursor;
    return t;
  };

  // Consumption below mirrors register_params exactly; next() verifies each
  // slot's shape against the named view, so any drift throws immediately.
  EncoderParams enc;
  const auto take_stream = [&]() {
    std::vector<StageParams> stages;
    for (int i = 0; i < 4; ++i) {
      StageParams sp;
      for (int j = 0; j < config_.backbone.convs_per_stage; ++j) {
        sp.kernels.push_back(next());
        sp.biases.push_back(next());
      }
      stages.push_back(std::move(sp));
    }
    return stages;
  };
  enc.appearance = take_stream();
  enc.motion = take_stream();
  for (int i = 0; i < 4; ++i) {
    std::vector<MatParams> layers;
    for (int l = 0; l < config_.mat_layers; ++l) {
      MatParams mp;
      mp.w_a = next();
      mp.w_m = next();
      mp.P = next();
      mp.Q = next();
      layers.push_back(std::move(mp));
    }
    enc.mat.push_back(std::move(layers));
  }
  std::vector<SsaParams> bridges;
  if (config_.use_ssa) {
    for (int i = 0; i < 4; ++i) {
      SsaParams sp;
      sp.ch_w1 = next();
      sp.ch_b1 = next();
      sp.ch_w2 = next();
      sp.ch_b2 = next();
      sp.spatial_kernel = next();
      sp.g_w1 = next();
      sp.g_b1 = next();
      sp.g_w2 = next();
      sp.g_b2 = next();
      bridges.push_back(std::move(sp));
    }
  }
  DecoderParams dec;
  dec.f5_kernel = next();
  dec.f5_bias = next();
  for (int bar = 0; bar < 4; ++bar) {
    BarParams bp;
    for (int k = 0; k < 4; ++k) {
      bp.aspp_kernels.push_back(next());
      bp.aspp_biases.push_back(next());
    }
    bp.aspp_fuse_kernel = next();
    bp.aspp_fuse_bias = next();
    bp.bdry_k1 = next();
    bp.bdry_b1 = next();
    bp.bdry_k2 = next();
    bp.bdry_b2 = next();
    bp.bdry_k3 = next();
    bp.bdry_b3 = next();
    bp.fuse_kernel = next();
    bp.fuse_bias = next();
    dec.bars.push_back(std::move(bp));
  }
  dec.mask_kernel = next();
  dec.mask_bias = next();

  Forward out;
  out.stages = encode(frame, flow, enc, config_.backbone, config_.transition_transposed);
  std::vector<Tensor> Z;
  Z.reserve(4);
  for (int i = 0; i < 4; ++i) {
    const Tensor& U = out.stages[static_cast<size_t>(i)].U;
    Z.push_back(config_.use_ssa ? ssa_forward(U, bridges[static_cast<size_t>(i)]).Z : U);
  }
  DecoderOutput d = decode(Z, dec, frame.dim(1), frame.dim(2));
  out.mask = d.mask;
  out.boundaries = std::move(d.boundaries);
  return out;
}

}  // namespace motionseg
