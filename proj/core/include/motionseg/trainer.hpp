#pragma once

#include <string>
#include <vector>

#include "motionseg/config.hpp"
#include "motionseg/dataset.hpp"
#include "motionseg/model.hpp"

namespace motionseg {

// Deterministic augmentation core: optional horizontal flip, then rotation
// about the image center by angle_deg. Frames sample bilinearly with edge
// replication, masks nearest with zero fill, flow samples bilinearly and the
// vectors themselves rotate. Boundary, flow image, edge map and loss weights
// are rebuilt from the transformed data.
Sample augment_with(const Sample& sample, bool flip, double angle_deg, int hem_dilation_radius);

struct LossTrace {
  int iteration = 0;
  double total = 0.0;
  double ce = 0.0;
  double boundary = 0.0;
};

// Momentum buffers, one per model parameter, in params() order.
struct SgdState {
  std::vector<Tensor> velocity;
};

SgdState make_sgd_state(const Model& model);

// v <- momentum*v + grad + weight_decay*param; param <- param - lr_group*v.
// Decoder parameters use lr_decoder, everything else lr.
void sgd_step(std::vector<NamedParam>& params, const std::vector<Tensor>& grads, SgdState& state,
              const RunConfig& config);

struct TrainResult {
  std::vector<LossTrace> trace;
  std::string final_checkpoint;
};

// Runs the full loop: shuffled sample order, optional augmentation, batched
// forward/backward, SGD updates, a trace CSV and periodic checkpoints under
// out_dir. Throws runtime_error when a loss goes non-finite, naming the
// iteration.
TrainResult train_model(Model& model, const std::vector<Clip>& clips, const RunConfig& config,
                        const std::string& out_dir);

}  // namespace motionseg
