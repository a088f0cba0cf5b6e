#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "motionseg/checkpoint.hpp"
#include "motionseg/config.hpp"
#include "motionseg/dataset.hpp"
#include "motionseg/imageio.hpp"
#include "motionseg/mask.hpp"
#include "motionseg/metrics.hpp"
#include "motionseg/model.hpp"
#include "motionseg/rng.hpp"
#include "motionseg/selfcheck.hpp"
#include "motionseg/synth.hpp"
#include "motionseg/trainer.hpp"

namespace {

using namespace motionseg;

std::string frame_tag(int t) {
  std::ostringstream os;
  os << std::setw(3) << std::setfill('0') << t;
  return os.str();
}

RunConfig config_or_default(const std::string& path) {
  if (path.empty()) return RunConfig{};
  return load_config(path);
}

SceneSpec draw_scene(Rng& rng, int index, const RunConfig& cfg) {
  SceneSpec s;
  s.seed = rng.next_u64();
  s.height = cfg.data_resolution;
  s.width = cfg.data_resolution;
  s.num_frames = cfg.data_frames;
  switch (index % 3) {
    case 0: s.object = ObjectKind::Disc; break;
    case 1: s.object = ObjectKind::Rectangle; break;
    default: s.object = ObjectKind::Blob; break;
  }
  s.object_size = 10 + rng.uniform_int(7);
  s.texture_amplitude = rng.uniform(0.15, 0.3);
  s.dx = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(1.0, 2.2);
  s.dy = (rng.uniform() < 0.5 ? -1 : 1) * rng.uniform(0.3, 1.5);
  s.scale_drift = index % 3 == 2 ? rng.uniform(-0.02, 0.02) : 0.0;
  s.background = BackgroundKind::Noise;
  s.background_amplitude = rng.uniform(0.15, 0.3);
  if (index % 2 == 1) {
    s.background_dx = rng.uniform(-0.6, 0.6);
    s.background_dy = rng.uniform(-0.6, 0.6);
  }
  s.object_gray = rng.uniform(0.5, 0.8);
  s.background_gray = rng.uniform(0.2, 0.45);
  return s;
}

int cmd_gen(const std::string& out, const RunConfig& cfg) {
  Rng rng(cfg.seed, rng_stream::kSceneGen);
  const auto emit = [&](const std::string& split, int count, int index_base) {
    for (int i = 0; i < count; ++i) {
      SceneSpec scene = draw_scene(rng, index_base + i, cfg);
      std::vector<Sample> samples = gen_sequence(scene, cfg.hem_dilation_radius);
      std::ostringstream dir;
      dir << out << "/" << split << "/clip_" << std::setw(3) << std::setfill('0') << i;
      export_clip(dir.str(), scene, samples, cfg.hem_dilation_radius);
    }
  };
  emit("train", cfg.data_train_clips, 0);
  emit("eval", cfg.data_eval_clips, cfg.data_train_clips);
  std::cout << "wrote " << cfg.data_train_clips << " train and " << cfg.data_eval_clips
            << " eval clips under " << out << "\n";
  return 0;
}

int cmd_train(const std::string& data, const std::string& out, const RunConfig& cfg) {
  std::vector<Clip> clips = import_dataset(data);
  Model model(cfg.model_config(), cfg.seed);
  TrainResult result = train_model(model, clips, cfg, out);
  std::cout << "trained " << cfg.iterations << " iterations on " << clips.size() << " clips\n";
  std::cout << "loss " << result.trace.front().total << " -> " << result.trace.back().total
            << "\n";
  std::cout << "checkpoint " << result.final_checkpoint << "\n";
  return 0;
}

int cmd_infer(const std::string& checkpoint, const std::string& data, const std::string& out,
              double threshold_override) {
  Checkpoint cp = load_checkpoint(checkpoint);
  RunConfig cfg = parse_config(cp.config_echo);
  const double threshold = threshold_override >= 0 ? threshold_override : cfg.eval_threshold;
  Model model(cfg.model_config(), cp.seed);
  model.load_tensors(cp.tensors);
  std::vector<Clip> clips = import_dataset(data);
  int frames = 0;
  for (const Clip& clip : clips) {
    const std::string dir = out + "/" + clip.name;
    std::filesystem::create_directories(dir);
    for (size_t t = 0; t < clip.samples.size(); ++t) {
      const Sample& s = clip.samples[t];
      Model::Forward f = model.forward(s.frame, s.flow_img);
      write_pgm(dir + "/soft_" + frame_tag(static_cast<int>(t)) + ".pgm", f.mask);
      write_pgm(dir + "/mask_" + frame_tag(static_cast<int>(t)) + ".pgm",
                binarize(f.mask, threshold));
      ++frames;
    }
  }
  std::cout << "wrote masks for " << frames << " frames under " << out << "\n";
  return 0;
}

int cmd_eval(const std::string& data, const std::string& pred, const std::string& out,
             int tolerance) {
  std::vector<Clip> clips = import_dataset(data);
  std::vector<FrameScore> scores;
  for (const Clip& clip : clips) {
    for (size_t t = 0; t < clip.samples.size(); ++t) {
      const Sample& s = clip.samples[t];
      const std::string path = pred + "/" + clip.name + "/mask_" + frame_tag(static_cast<int>(t)) + ".pgm";
      Tensor pm = binarize(read_pgm(path), 0.5);
      const int tol = tolerance >= 0 ? tolerance
                                     : default_boundary_tolerance(s.mask.dim(0), s.mask.dim(1));
      FrameScore fs;
      fs.clip = clip.name;
      fs.frame = static_cast<int>(t);
      fs.j = region_similarity_j(pm, s.mask);
      fs.f = boundary_f(pm, s.mask, tol);
      scores.push_back(std::move(fs));
    }
  }
  EvalReport report = summarize_scores(std::move(scores));
  if (out.empty()) {
    write_report(std::cout, report);
  } else {
    std::ofstream f(out);
    if (!f) throw std::runtime_error("cannot write report to " + out);
    write_report(f, report);
    std::cout << "mean J " << report.mean_j << "\n";
    std::cout << "mean F " << report.mean_f << "\n";
    std::cout << "report " << out << "\n";
  }
  return 0;
}

int cmd_check(bool inject_fault) {
  const int failures = report_self_checks(run_self_checks(inject_fault), std::cout);
  return failures > 0 ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"two-stream video object segmentation on synthetic clips"};
  app.require_subcommand(1);

  std::string config_path, data_dir, out_path, checkpoint_path, pred_dir;
  double threshold = -1;
  int tolerance = -1;
  int iterations = -1;
  std::int64_t seed = -1;
  bool inject_fault = false;

  CLI::App* gen = app.add_subcommand("gen", "generate a synthetic dataset");
  gen->add_option("--out", out_path, "dataset root to create")->required();
  gen->add_option("--config", config_path, "run configuration file");
  gen->add_option("--seed", seed, "override the configured seed");

  CLI::App* train = app.add_subcommand("train", "train a model");
  train->add_option("--data", data_dir, "directory of training clips")->required();
  train->add_option("--out", out_path, "output directory for checkpoints and the loss trace")
      ->required();
  train->add_option("--config", config_path, "run configuration file");
  train->add_option("--seed", seed, "override the configured seed");
  train->add_option("--iterations", iterations, "override the configured iteration count");

  CLI::App* infer = app.add_subcommand("infer", "write predicted masks for a dataset");
  infer->add_option("--checkpoint", checkpoint_path, "checkpoint to load")->required();
  infer->add_option("--data", data_dir, "directory of clips")->required();
  infer->add_option("--out", out_path, "output directory for masks")->required();
  infer->add_option("--threshold", threshold, "mask binarization threshold");

  CLI::App* eval = app.add_subcommand("eval", "score predicted masks against ground truth");
  eval->add_option("--data", data_dir, "directory of ground-truth clips")->required();
  eval->add_option("--pred", pred_dir, "directory of predicted masks")->required();
  eval->add_option("--out", out_path, "report file (stdout when omitted)");
  eval->add_option("--tolerance", tolerance, "boundary match tolerance in pixels");

  CLI::App* check = app.add_subcommand("check", "run the gradient and invariant self-checks");
  check->add_flag("--inject-fault", inject_fault,
                  "corrupt one backward pass; the run must then fail");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen || *train) {
      RunConfig cfg = config_or_default(config_path);
      if (seed >= 0) cfg.seed = static_cast<std::uint64_t>(seed);
      if (iterations > 0) cfg.iterations = iterations;
      if (*gen) return cmd_gen(out_path, cfg);
      return cmd_train(data_dir, out_path, cfg);
    }
    if (*infer) return cmd_infer(checkpoint_path, data_dir, out_path, threshold);
    if (*eval) return cmd_eval(data_dir, pred_dir, out_path, tolerance);
    if (*check) return cmd_check(inject_fault);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
