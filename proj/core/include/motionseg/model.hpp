#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "motionseg/bridge.hpp"
#include "motionseg/decoder.hpp"
#include "motionseg/encoder.hpp"
#include "motionseg/tensor.hpp"

namespace motionseg {

struct ModelConfig {
  BackboneConfig backbone;
  int mat_layers = 5;             // L, MAT layers per stage
  int reduction = 8;              // d, low-rank divisor (C % d == 0 required)
  int decoder_channels = 16;      // D
  bool use_ssa = true;
  bool transition_transposed = false;
};

void validate_model_config(const ModelConfig& config);

struct NamedParam {
  std::string name;
  Tensor value;  // shares its buffer with the structured parameter
  bool decoder_group;  // true -> trained with the decoder learning rate
};

// Owns every learnable tensor. The named view and the structured views share
// buffers, so optimizer updates through the named view are seen by forward.
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const { return config_; }
  const std::vector<NamedParam>& params() const { return named_; }

  // Overwrites parameter values from a checkpoint map. Requires exactly the
  // same names and shapes as this model's structure.
  void load_tensors(const std::map<std::string, Tensor>& tensors);

  struct Forward {
    Tensor mask;                      // [H,W]
    std::vector<Tensor> boundaries;   // four maps, BAR_5 first
    std::vector<StageFeatures> stages;
  };

  // With a tape, every parameter is watched so backward() fills gradients
  // retrievable via tape.grad_for(param.value). Without one, pure inference.
  Forward forward(const Tensor& frame, const Tensor& flow, Tape* tape = nullptr) const;

  // Runs the same graph on caller-supplied parameter tensors given in
  // params() order (shapes are checked). This is what gradient checking uses
  // to differentiate with respect to every weight.
  Forward forward_with(const std::vector<Tensor>& flat, const Tensor& frame,
                       const Tensor& flow) const;

 private:
  ModelConfig config_;
  EncoderParams encoder_;
  std::vector<SsaParams> bridges_;  // one per stage when use_ssa
  DecoderParams decoder_;
  std::vector<NamedParam> named_;

  void register_params();
};

}  // namespace motionseg
