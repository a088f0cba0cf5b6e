#pragma once

#include <cstdint>
#include <string>

#include "motionseg/model.hpp"

namespace motionseg {

// Every knob a run can turn, parsed from "key = value" lines. '#' starts a
// comment, blank lines are fine, unknown keys are errors. Defaults below are
// what an empty file gives you.
struct RunConfig {
  // dataset generation
  int data_train_clips = 8;        // data.train_clips
  int data_eval_clips = 2;         // data.eval_clips
  int data_frames = 8;             // data.frames
  int data_resolution = 64;        // data.resolution

  // architecture
  std::vector<int> stage_channels = {8, 16, 32, 32};  // model.stage_channels
  std::vector<int> stage_strides = {2, 2, 2, 1};      // model.stage_strides
  int convs_per_stage = 2;         // model.convs_per_stage
  int mat_layers = 5;              // model.mat_layers
  int reduction = 8;               // model.reduction
  int decoder_channels = 16;       // model.decoder_channels
  bool use_ssa = true;             // model.use_ssa
  bool transition_transposed = false;  // model.transition_transposed
  bool supervise_full_res = false;     // model.supervise_full_res

  // optimization
  double lr = 1e-4;                // train.lr (encoder and bridge)
  double lr_decoder = 1e-3;        // train.lr_decoder
  double momentum = 0.9;           // train.momentum
  double weight_decay = 1e-5;      // train.weight_decay
  int batch_size = 2;              // train.batch_size
  int iterations = 500;            // train.iterations
  std::uint64_t seed = 1;          // train.seed
  bool augment = true;             // train.augment
  double flip_prob = 0.5;          // train.flip_prob
  double rotation_degrees = 10.0;  // train.rotation_degrees
  int checkpoint_every = 100;      // train.checkpoint_every
  int hem_dilation_radius = 5;     // train.hem_dilation_radius

  // evaluation
  double eval_threshold = 0.5;     // eval.threshold
  int eval_tolerance_px = -1;      // eval.tolerance_px, -1 derives from diagonal

  ModelConfig model_config() const;
};

// Parses config text. Errors name the offending line.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::string& path);

// Canonical "key = value" form; parse_config(dump_config(c)) reproduces c.
std::string dump_config(const RunConfig& config);

}  // namespace motionseg
