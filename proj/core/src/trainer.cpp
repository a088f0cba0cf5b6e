#include "motionseg/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <stdexcept>

#include "motionseg/checkpoint.hpp"
#include "motionseg/loss.hpp"
#include "motionseg/mask.hpp"
#include "motionseg/ops.hpp"
#include "motionseg/rng.hpp"
#include "motionseg/synth.hpp"

namespace motionseg {

namespace {

Tensor flip_plane(const Tensor& p, bool negate) {
  const int h = p.dim(0), w = p.dim(1);
  Tensor out({h, w});
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double v = p.data()[y * w + (w - 1 - x)];
      out.data()[y * w + x] = negate ? -v : v;
    }
  }
  return out;
}

double bilinear_replicate(const double* p, int h, int w, double ys, double xs) {
  const double yc = std::min(std::max(ys, 0.0), static_cast<double>(h - 1));
  const double xc = std::min(std::max(xs, 0.0), static_cast<double>(w - 1));
  const int y0 = static_cast<int>(std::floor(yc));
  const int x0 = static_cast<int>(std::floor(xc));
  const int y1 = std::min(y0 + 1, h - 1);
  const int x1 = std::min(x0 + 1, w - 1);
  const double fy = yc - y0;
  const double fx = xc - x0;
  return (1 - fy) * ((1 - fx) * p[y0 * w + x0] + fx * p[y0 * w + x1]) +
         fy * ((1 - fx) * p[y1 * w + x0] + fx * p[y1 * w + x1]);
}

double nearest_zero(const double* p, int h, int w, double ys, double xs) {
  const int y = static_cast<int>(std::lround(ys));
  const int x = static_cast<int>(std::lround(xs));
  if (y < 0 || y >= h || x < 0 || x >= w) return 0.0;
  return p[y * w + x];
}

// Source coordinates for a content rotation by angle: dst = c + R(a)(src-c),
// inverted per output pixel.
struct RotMap {
  double cos_a, sin_a, cy, cx;
  void source(int yd, int xd, double& ys, double& xs) const {
    const double rx = xd - cx;
    const double ry = yd - cy;
    xs = cx + cos_a * rx + sin_a * ry;
    ys = cy - sin_a * rx + cos_a * ry;
  }
};

}  // namespace

Sample augment_with(const Sample& sample, bool flip, double angle_deg, int hem_dilation_radius) {
  const int h = sample.mask.dim(0);
  const int w = sample.mask.dim(1);

  std::vector<Tensor> frame_planes;
  for (int c = 0; c < 3; ++c) {
    Tensor plane({h, w});
    std::copy(sample.frame.data() + c * h * w, sample.frame.data() + (c + 1) * h * w,
              plane.data());
    frame_planes.push_back(std::move(plane));
  }
  Tensor dx = sample.flow_dx.clone();
  Tensor dy = sample.flow_dy.clone();
  Tensor mask = sample.mask.clone();

  if (flip) {
    for (Tensor& plane : frame_planes) plane = flip_plane(plane, false);
    dx = flip_plane(dx, true);
    dy = flip_plane(dy, false);
    mask = flip_plane(mask, false);
  }

  if (angle_deg != 0.0) {
    const double a = angle_deg * std::numbers::pi / 180.0;
    const RotMap map{std::cos(a), std::sin(a), (h - 1) / 2.0, (w - 1) / 2.0};
    std::vector<Tensor> rot_frame;
    for (const Tensor& plane : frame_planes) {
      Tensor out({h, w});
      for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
          double ys, xs;
          map.source(y, x, ys, xs);
          out.data()[y * w + x] = bilinear_replicate(plane.data(), h, w, ys, xs);
        }
      }
      rot_frame.push_back(std::move(out));
    }
    frame_planes = std::move(rot_frame);

    Tensor rdx({h, w}), rdy({h, w}), rmask({h, w});
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double ys, xs;
        map.source(y, x, ys, xs);
        const double sx = bilinear_replicate(dx.data(), h, w, ys, xs);
        const double sy = bilinear_replicate(dy.data(), h, w, ys, xs);
        // Motion vectors rotate with the content.
        rdx.data()[y * w + x] = map.cos_a * sx - map.sin_a * sy;
        rdy.data()[y * w + x] = map.sin_a * sx + map.cos_a * sy;
        rmask.data()[y * w + x] = nearest_zero(mask.data(), h, w, ys, xs);
      }
    }
    dx = std::move(rdx);
    dy = std::move(rdy);
    mask = std::move(rmask);
  }

  Sample out;
  out.frame = Tensor({3, h, w});
  for (int c = 0; c < 3; ++c) {
    std::copy(frame_planes[static_cast<size_t>(c)].data(),
              frame_planes[static_cast<size_t>(c)].data() + h * w, out.frame.data() + c * h * w);
  }
  out.flow_dx = dx;
  out.flow_dy = dy;
  out.flow_img = encode_flow(dx, dy);
  out.mask = mask;
  out.boundary = boundary_of(mask);
  out.edge = edge_oracle(out.frame);
  out.weights = hem_weights(out.edge, mask, hem_dilation_radius);
  return out;
}

SgdState make_sgd_state(const Model& model) {
  SgdState state;
  for (const NamedParam& p : model.params()) {
    state.velocity.push_back(Tensor(p.value.shape()));
  }
  return state;
}

void sgd_step(std::vector<NamedParam>& params, const std::vector<Tensor>& grads, SgdState& state,
              const RunConfig& config) {
  if (grads.size() != params.size() || state.velocity.size() != params.size()) {
    throw std::invalid_argument("sgd_step requires one gradient and one velocity per parameter");
  }
  for (size_t i = 0; i < params.size(); ++i) {
    double* p = params[i].value.data();
    const double* g = grads[i].data();
    double* v = state.velocity[i].data();
    const double lr = params[i].decoder_group ? config.lr_decoder : config.lr;
    for (int j = 0; j < params[i].value.size(); ++j) {
      v[j] = config.momentum * v[j] + g[j] + config.weight_decay * p[j];
      p[j] -= lr * v[j];
    }
  }
}

namespace {

std::string checkpoint_path(const std::string& out_dir, int iteration) {
  std::ostringstream os;
  os << out_dir << "/checkpoint_" << std::setw(6) << std::setfill('0') << iteration << ".bin";
  return os.str();
}

void save_model_checkpoint(const std::string& path, const Model& model, int iteration,
                           const RunConfig& config) {
  Checkpoint cp;
  for (const NamedParam& p : model.params()) cp.tensors.emplace(p.name, p.value);
  cp.iteration = static_cast<std::uint64_t>(iteration);
  cp.seed = config.seed;
  cp.config_echo = dump_config(config);
  save_checkpoint(path, cp);
}

}  // namespace

TrainResult train_model(Model& model, const std::vector<Clip>& clips, const RunConfig& config,
                        const std::string& out_dir) {
  std::vector<const Sample*> pool;
  for (const Clip& c : clips) {
    for (const Sample& s : c.samples) pool.push_back(&s);
  }
  if (pool.empty()) throw std::invalid_argument("training needs at least one sample");
  if (config.batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
  if (config.iterations < 1) throw std::invalid_argument("iterations must be >= 1");

  std::filesystem::create_directories(out_dir);
  std::ofstream trace_file(out_dir + "/trace.csv");
  if (!trace_file) throw std::runtime_error("cannot write " + out_dir + "/trace.csv");
  trace_file << "iteration,total,ce,boundary\n";
  trace_file << std::setprecision(17);

  Rng order_rng(config.seed, rng_stream::kDataOrder);
  Rng aug_rng(config.seed, rng_stream::kAugment);

  std::vector<size_t> order(pool.size());
  size_t cursor = order.size();  // forces a shuffle on first use
  const auto next_sample = [&]() -> const Sample& {
    if (cursor >= order.size()) {
      for (size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (size_t i = order.size(); i > 1; --i) {
        const size_t j = static_cast<size_t>(order_rng.uniform_int(static_cast<int>(i)));
        std::swap(order[i - 1], order[j]);
      }
      cursor = 0;
    }
    return *pool[order[cursor++]];
  };

  auto params = model.params();  // copy of the named view; tensors share buffers
  SgdState state = make_sgd_state(model);
  TrainResult result;

  for (int it = 1; it <= config.iterations; ++it) {
    Tape tape;
    Tensor total_sum, ce_sum, bdry_sum;
    for (int b = 0; b < config.batch_size; ++b) {
      const Sample& picked = next_sample();
      Sample staged;
      const Sample* s = &picked;
      if (config.augment) {
        const bool flip = aug_rng.uniform() < config.flip_prob;
        const double angle = aug_rng.uniform(-config.rotation_degrees, config.rotation_degrees);
        staged = augment_with(picked, flip, angle, config.hem_dilation_radius);
        s = &staged;
      }
      Model::Forward f = model.forward(s->frame, s->flow_img, &tape);
      LossParts parts =
          total_loss(f.mask, s->mask, f.boundaries, s->boundary, s->weights,
                     config.supervise_full_res);
      total_sum = total_sum.defined() ? add(total_sum, parts.total) : parts.total;
      ce_sum = ce_sum.defined() ? add(ce_sum, parts.ce) : parts.ce;
      bdry_sum = bdry_sum.defined() ? add(bdry_sum, parts.boundary) : parts.boundary;
    }
    const double inv_b = 1.0 / config.batch_size;
    Tensor batch_loss = affine(total_sum, inv_b);
    const double total_v = batch_loss.value();
    if (!std::isfinite(total_v)) {
      throw std::runtime_error("iteration " + std::to_string(it) + " produced a non-finite loss");
    }
    tape.backward(batch_loss);

    std::vector<Tensor> grads;
    grads.reserve(params.size());
    for (const NamedParam& p : params) grads.push_back(tape.grad_for(p.value));
    sgd_step(params, grads, state, config);

    LossTrace row{it, total_v, ce_sum.value() * inv_b, bdry_sum.value() * inv_b};
    result.trace.push_back(row);
    trace_file << row.iteration << "," << row.total << "," << row.ce << "," << row.boundary
               << "\n";

    if (config.checkpoint_every > 0 && it % config.checkpoint_every == 0) {
      save_model_checkpoint(checkpoint_path(out_dir, it), model, it, config);
    }
  }

  result.final_checkpoint = out_dir + "/checkpoint_final.bin";
  save_model_checkpoint(result.final_checkpoint, model, config.iterations, config);
  return result;
}

}  // namespace motionseg
