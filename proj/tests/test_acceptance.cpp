// Acceptance gate: prints one PASS/FAIL line per criterion and exits nonzero
// if any criterion fails. Needs --cli <path to the motionseg binary> since
// several criteria drive the full command-line pipeline.
#include <sys/wait.h>

#include <chrono>
#include <cmath>
#include <cstdarg>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <sstream>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "motionseg/bridge.hpp"
#include "motionseg/config.hpp"
#include "motionseg/dataset.hpp"
#include "motionseg/encoder.hpp"
#include "motionseg/grad_check.hpp"
#include "motionseg/loss.hpp"
#include "motionseg/metrics.hpp"
#include "motionseg/model.hpp"
#include "motionseg/ops.hpp"
#include "motionseg/rng.hpp"
#include "motionseg/synth.hpp"
#include "motionseg/tensor.hpp"
#include "motionseg/trainer.hpp"

using namespace motionseg;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

int run_cli(const std::string& cli, const std::string& args, const fs::path& log) {
  const std::string cmd = cli + " " + args + " >> " + log.string() + " 2>&1";
  const int status = std::system(cmd.c_str());
  if (status == -1) return -1;
  if (WIFEXITED(status)) return WEXITSTATUS(status);
  return -2;
}

struct Gate {
  int failures = 0;
  void run(int n, const std::function<std::pair<bool, std::string>()>& body) {
    bool ok = false;
    std::string detail;
    try {
      std::tie(ok, detail) = body();
    } catch (const std::exception& e) {
      ok = false;
      detail = std::string("exception: ") + e.what();
    }
    std::printf("%s criterion %d: %s\n", ok ? "PASS" : "FAIL", n, detail.c_str());
    std::fflush(stdout);
    if (!ok) ++failures;
  }
};

std::string fmt(const char* spec, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, spec);
  std::vsnprintf(buf, sizeof(buf), spec, ap);
  va_end(ap);
  return buf;
}

double max_abs(const Tensor& t) {
  double m = 0.0;
  for (int i = 0; i < t.size(); ++i) m = std::max(m, std::fabs(t.data()[i]));
  return m;
}

// Dotting with uniform positive weights keeps softmax jacobians from
// swallowing a constant upstream gradient.
Tensor weighted_mean(const Tensor& t, std::uint64_t seed) {
  Rng rng(seed, 7);
  Tensor w(t.shape());
  for (int i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(0.5, 1.5);
  return mean_all(mul(t, w));
}

std::vector<MatParams> random_mat_stack(Rng& rng, int channels, int d, int layers) {
  std::vector<MatParams> stack;
  for (int l = 0; l < layers; ++l) {
    MatParams mp;
    mp.w_a = uniform_tensor(rng, {1, channels, 1, 1}, -0.5, 0.5);
    mp.w_m = uniform_tensor(rng, {1, channels, 1, 1}, -0.5, 0.5);
    mp.P = uniform_tensor(rng, {channels, channels / d}, -0.5, 0.5);
    mp.Q = uniform_tensor(rng, {channels, channels / d}, -0.5, 0.5);
    stack.push_back(std::move(mp));
  }
  return stack;
}

struct TraceEnds {
  double first = 0.0;
  double last = 0.0;
  int rows = 0;
};

TraceEnds read_trace(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing trace " + path.string());
  std::string line;
  std::getline(in, line);
  if (line != "iteration,total,ce,boundary") {
    throw std::runtime_error("unexpected trace header '" + line + "'");
  }
  TraceEnds ends;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const size_t c1 = line.find(',');
    const size_t c2 = line.find(',', c1 + 1);
    const double total = std::stod(line.substr(c1 + 1, c2 - c1 - 1));
    if (ends.rows == 0) ends.first = total;
    ends.last = total;
    ++ends.rows;
  }
  if (ends.rows == 0) throw std::runtime_error("empty trace " + path.string());
  return ends;
}

struct ReportMeans {
  double j = -1.0;
  double f = -1.0;
};

ReportMeans read_report_means(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing report " + path.string());
  ReportMeans m;
  std::string line;
  while (std::getline(in, line)) {
    if (line.rfind("mean J ", 0) == 0) m.j = std::stod(line.substr(7));
    if (line.rfind("mean F ", 0) == 0) m.f = std::stod(line.substr(7));
  }
  if (m.j < 0 || m.f < 0) throw std::runtime_error("report lacks mean lines: " + path.string());
  return m;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

Tensor rect_mask(int h, int w, int top, int left, int bottom, int right) {
  Tensor m = Tensor::full({h, w}, 0.0);
  for (int y = top; y < bottom; ++y)
    for (int x = left; x < right; ++x) m.data()[y * w + x] = 1.0;
  return m;
}

// Scene family for the ablation runs. Object and background speeds overlap,
// so flow magnitude alone cannot separate them; the motion direction carries
// the signal the transition has to pick up.
SceneSpec ambiguous_scene(std::uint64_t seed, int idx) {
  Rng rng(seed * 977 + static_cast<std::uint64_t>(idx), 4);
  SceneSpec s;
  s.seed = seed * 1000 + static_cast<std::uint64_t>(idx);
  s.height = 32;
  s.width = 32;
  s.num_frames = 6;
  s.object = (idx % 2 == 0) ? ObjectKind::Disc : ObjectKind::Rectangle;
  s.object_size = rng.uniform(5.0, 7.0);
  s.texture_amplitude = 0.25;
  s.background_amplitude = 0.25;
  s.object_gray = 0.45;
  s.background_gray = 0.45;
  const double sp = rng.uniform(1.2, 1.8);
  const double ang = rng.uniform(0.0, 6.283185307179586);
  s.dx = sp * std::cos(ang);
  s.dy = sp * std::sin(ang);
  const double bsp = rng.uniform(0.9, 1.3);
  const double bang = ang + rng.uniform(2.0, 4.3);
  s.background_dx = bsp * std::cos(bang);
  s.background_dy = bsp * std::sin(bang);
  return s;
}

double mean_eval_j(const Model& model, const std::vector<Clip>& clips, double threshold) {
  double sum = 0.0;
  int n = 0;
  for (const Clip& c : clips) {
    for (const Sample& s : c.samples) {
      Model::Forward out = model.forward(s.frame, s.flow_img);
      Tensor bin(std::vector<int>{out.mask.dim(0), out.mask.dim(1)});
      for (int i = 0; i < bin.size(); ++i) {
        bin.data()[i] = out.mask.data()[i] > threshold ? 1.0 : 0.0;
      }
      sum += region_similarity_j(bin, s.mask);
      ++n;
    }
  }
  return sum / n;
}

}  // namespace

int main(int argc, char** argv) {
  std::string cli;
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--cli") cli = argv[i + 1];
  }
  if (cli.empty()) {
    std::fprintf(stderr, "usage: %s --cli <path-to-motionseg-binary>\n", argv[0]);
    return 2;
  }
  if (!fs::exists(cli)) {
    std::fprintf(stderr, "cli binary not found: %s\n", cli.c_str());
    return 2;
  }

  const fs::path scratch = fs::temp_directory_path() / "motionseg_acceptance";
  fs::remove_all(scratch);
  fs::create_directories(scratch);
  const fs::path log = scratch / "cli.log";

  Gate gate;

  gate.run(1, [&]() -> std::pair<bool, std::string> {
    const auto t0 = Clock::now();
    const int rc = run_cli(cli, "check", log);
    const double secs = seconds_since(t0);
    const int rc_fault = run_cli(cli, "check --inject-fault", log);
    const bool ok = rc == 0 && secs <= 120.0 && rc_fault != 0;
    return {ok, fmt("self-check exit %d in %.1f s (limit 120); fault injection exit %d (must be nonzero)",
                    rc, secs, rc_fault)};
  });

  gate.run(2, [&]() -> std::pair<bool, std::string> {
    const int C = 8, L = 5;
    Rng rng(2202, 1);
    auto stack = random_mat_stack(rng, C, 2, L);
    Tensor va({C, 1, 1}), vm({C, 1, 1});
    for (int i = 0; i < C; ++i) {
      const double sign = i % 2 == 0 ? 1.0 : -1.0;
      va.data()[i] = sign * rng.uniform(0.5, 1.5);
      vm.data()[i] = -sign * rng.uniform(0.5, 1.5);
    }
    auto [ua, um] = deep_mat(va, vm, stack);
    const double scale = std::pow(2.0, L);
    double worst = 0.0;
    for (int i = 0; i < C; ++i) {
      worst = std::max(worst, std::fabs(ua.data()[i] - scale * va.data()[i]) /
                                  (scale * std::fabs(va.data()[i])));
      worst = std::max(worst, std::fabs(um.data()[i] - scale * vm.data()[i]) /
                                  (scale * std::fabs(vm.data()[i])));
    }
    return {worst <= 1e-9,
            fmt("deep MAT at 1x1 with L=%d scales both streams by 2^L=32, worst rel err %.2e (limit 1e-9)",
                L, worst)};
  });

  gate.run(3, [&]() -> std::pair<bool, std::string> {
    Rng rng(2203, 1);
    double worst = 0.0;
    for (const auto& [C, hw, d] : std::vector<std::tuple<int, int, int>>{{8, 5, 2}, {16, 3, 4}}) {
      for (bool transposed : {false, true}) {
        Tensor ua = uniform_tensor(rng, {C, hw, hw}, -1.0, 1.0);
        Tensor um = uniform_tensor(rng, {C, hw, hw}, -1.0, 1.0);
        Tensor P = uniform_tensor(rng, {C, C / d}, -0.5, 0.5);
        Tensor Q = uniform_tensor(rng, {C, C / d}, -0.5, 0.5);
        TransitionResult r = attention_transition_full(ua, um, P, Q, transposed);
        const int n = hw * hw;
        for (int row = 0; row < n; ++row) {
          double sum = 0.0;
          for (int col = 0; col < n; ++col) sum += r.row_softmax.data()[row * n + col];
          worst = std::max(worst, std::fabs(sum - 1.0));
        }
      }
    }
    return {worst <= 1e-12,
            fmt("row sums of S^r deviate from 1 by at most %.2e (limit 1e-12)", worst)};
  });

  gate.run(4, [&]() -> std::pair<bool, std::string> {
    ModelConfig mc;
    mc.backbone.stage_channels = {8, 16, 32, 64};
    mc.backbone.convs_per_stage = 1;
    mc.mat_layers = 1;
    mc.reduction = 8;
    mc.decoder_channels = 4;
    Model model(mc, 7);
    long long pq = 0;
    for (const NamedParam& p : model.params()) {
      if (p.name == "encoder.mat.s5.l0.P" || p.name == "encoder.mat.s5.l0.Q") pq += p.value.size();
    }
    const long long dense = 64LL * 64LL;
    const bool ok = pq == 1024 && pq == 2 * dense / 8;
    return {ok, fmt("C=64, d=8 transition holds %lld bilinear parameters; dense C^2=%lld, 2/d ratio gives %lld",
                    pq, dense, 2 * dense / 8)};
  });

  gate.run(5, [&]() -> std::pair<bool, std::string> {
    const int C = 8, hw = 4;
    Rng rng(2205, 1);
    auto stack = random_mat_stack(rng, C, 2, 2);
    Tensor va = uniform_tensor(rng, {C, hw, hw}, -1.0, 1.0);
    Tensor vm = uniform_tensor(rng, {C, hw, hw}, -1.0, 1.0);

    Tape tm;
    Tensor va_m = tm.watch(va);
    Tensor vm_m = tm.watch(vm);
    auto [ua_m, um_m] = deep_mat(va_m, vm_m, stack);
    tm.backward(weighted_mean(um_m, 91));
    const double g_motion_wrt_va = max_abs(tm.grad_for(va));
    const double g_motion_wrt_vm = max_abs(tm.grad_for(vm));

    Tape ta;
    Tensor va_a = ta.watch(va);
    Tensor vm_a = ta.watch(vm);
    auto [ua_a, um_a] = deep_mat(va_a, vm_a, stack);
    (void)um_a;
    ta.backward(weighted_mean(ua_a, 92));
    const double g_app_wrt_vm = max_abs(ta.grad_for(vm));

    const bool ok = g_motion_wrt_va == 0.0 && g_app_wrt_vm > 0.0 && g_motion_wrt_vm > 0.0;
    return {ok, fmt("dU_m/dV_a max %.1e (must be exactly 0), dU_a/dV_m max %.2e (must be nonzero)",
                    g_motion_wrt_va, g_app_wrt_vm)};
  });

  gate.run(6, [&]() -> std::pair<bool, std::string> {
    const int C2 = 8, hw = 6;
    Rng rng(2206, 1);
    const int hidden = ssa_hidden_width(C2);
    SsaParams p;
    p.ch_w1 = uniform_tensor(rng, {C2, hidden}, -0.7, 0.7);
    p.ch_b1 = uniform_tensor(rng, {hidden}, -0.3, 0.3);
    p.ch_w2 = uniform_tensor(rng, {hidden, C2}, -0.7, 0.7);
    p.ch_b2 = uniform_tensor(rng, {C2}, -0.3, 0.3);
    p.spatial_kernel = uniform_tensor(rng, {1, 2, 7, 7}, -0.4, 0.4);
    p.g_w1 = uniform_tensor(rng, {C2, hidden}, -0.7, 0.7);
    p.g_b1 = uniform_tensor(rng, {hidden}, -0.3, 0.3);
    p.g_w2 = uniform_tensor(rng, {hidden, 1}, -0.7, 0.7);
    p.g_b2 = uniform_tensor(rng, {1}, -0.3, 0.3);
    Tensor U = uniform_tensor(rng, {C2, hw, hw}, -1.0, 1.0);
    SsaResult r = ssa_forward(U, p);
    const double g = r.g.value();
    double worst = 0.0;
    for (int i = 0; i < U.size(); ++i) {
      worst = std::max(worst,
                       std::fabs(r.Z.data()[i] - g * r.Z_cbam.data()[i] - U.data()[i]));
    }
    return {worst <= 1e-12,
            fmt("identity path: max |Z - g*Z_cbam - U| = %.2e with g=%.3f (limit 1e-12)", worst, g)};
  });

  gate.run(7, [&]() -> std::pair<bool, std::string> {
    Tensor mask = Tensor::full({9, 9}, 0.0);
    for (int y = 3; y < 6; ++y)
      for (int x = 3; x < 6; ++x) mask.data()[y * 9 + x] = 1.0;
    Tensor edge = Tensor::full({9, 9}, 0.0);
    edge.data()[0] = 0.5;          // strong edge far outside -> 1 + E
    edge.data()[1] = 0.1;          // weak edge -> 1
    edge.data()[4 * 9 + 4] = 0.9;  // strong edge inside the dilated region -> 1
    Tensor w = hem_weights(edge, mask, 2);
    const bool cases_ok = w.data()[0] == 1.5 && w.data()[1] == 1.0 && w.data()[4 * 9 + 4] == 1.0;

    Rng rng(2207, 1);
    Tensor pred = uniform_tensor(rng, {4, 4}, 0.1, 0.9);
    Tensor gt = Tensor::full({4, 4}, 0.0);
    gt.data()[5] = 1.0;
    Tensor bw = Tensor::full({4, 4}, 1.0);
    const double before = boundary_loss(pred, gt, bw).value();
    bw.data()[5] = 1.6;   // misclassified positive pixel
    const double raised_pos = boundary_loss(pred, gt, bw).value();
    bw.data()[5] = 1.0;
    bw.data()[2] = 1.6;   // misclassified negative pixel
    const double raised_neg = boundary_loss(pred, gt, bw).value();
    const bool mono_ok = raised_pos > before && raised_neg > before;
    return {cases_ok && mono_ok,
            fmt("weights (1.5, 1, 1) = (%.2f, %.2f, %.2f); loss %.4f rises to %.4f and %.4f under heavier misclassified pixels",
                w.data()[0], w.data()[1], w.data()[4 * 9 + 4], before, raised_pos, raised_neg)};
  });

  gate.run(8, [&]() -> std::pair<bool, std::string> {
    const auto t0 = Clock::now();
    const fs::path dir = scratch / "c8";
    fs::create_directories(dir);
    const fs::path cfg = dir / "overfit.cfg";
    {
      std::ofstream out(cfg);
      out << "data.train_clips = 1\n"
             "data.eval_clips = 0\n"
             "model.stage_channels = 4,4,8,8\n"
             "model.mat_layers = 1\n"
             "model.reduction = 4\n"
             "model.decoder_channels = 16\n"
             "train.lr = 0.002\n"
             "train.lr_decoder = 0.03\n"
             "train.iterations = 500\n"
             "train.seed = 11\n"
             "train.augment = false\n"
             "train.checkpoint_every = 1000\n";
    }
    const std::string q = " --config " + cfg.string();
    int rc = run_cli(cli, "gen --out " + (dir / "data").string() + q, log);
    if (rc != 0) return {false, fmt("gen exited %d", rc)};
    rc = run_cli(cli, "train --data " + (dir / "data/train").string() + " --out " +
                          (dir / "run").string() + q, log);
    if (rc != 0) return {false, fmt("train exited %d", rc)};
    rc = run_cli(cli, "infer --checkpoint " + (dir / "run/checkpoint_final.bin").string() +
                          " --data " + (dir / "data/train").string() + " --out " +
                          (dir / "pred").string(), log);
    if (rc != 0) return {false, fmt("infer exited %d", rc)};
    const fs::path report = dir / "report.txt";
    rc = run_cli(cli, "eval --data " + (dir / "data/train").string() + " --pred " +
                          (dir / "pred").string() + " --tolerance 2 --out " + report.string(), log);
    if (rc != 0) return {false, fmt("eval exited %d", rc)};

    const TraceEnds trace = read_trace(dir / "run/trace.csv");
    const ReportMeans means = read_report_means(report);
    const double secs = seconds_since(t0);
    const double ratio = trace.last / trace.first;
    const bool ok = trace.rows == 500 && ratio < 0.10 && means.j >= 0.90 && means.f >= 0.80 &&
                    secs <= 600.0;
    return {ok, fmt("500-iteration overfit: loss %.3f -> %.3f (%.1f%% of start, limit 10%%), J %.3f (>= 0.90), F %.3f (>= 0.80), %.0f s (limit 600)",
                    trace.first, trace.last, 100.0 * ratio, means.j, means.f, secs)};
  });

  gate.run(9, [&]() -> std::pair<bool, std::string> {
    RunConfig base;
    base.stage_channels = {4, 4, 8, 8};
    base.reduction = 4;
    base.decoder_channels = 16;
    base.lr = 0.002;
    base.lr_decoder = 0.03;
    base.iterations = 300;
    base.augment = false;
    base.checkpoint_every = 1000000;

    const std::vector<std::uint64_t> seeds = {101, 202, 303};
    double mean_full = 0.0, mean_nomat = 0.0, mean_nossa = 0.0;
    for (std::uint64_t seed : seeds) {
      std::vector<Clip> train_clips, eval_clips;
      for (int i = 0; i < 4; ++i) {
        train_clips.push_back(
            Clip{"t" + std::to_string(i), gen_sequence(ambiguous_scene(seed, i))});
      }
      for (int i = 100; i < 104; ++i) {
        eval_clips.push_back(
            Clip{"e" + std::to_string(i), gen_sequence(ambiguous_scene(seed, i))});
      }
      const auto arm = [&](int mat_layers, bool use_ssa, const char* tag) {
        RunConfig cfg = base;
        cfg.mat_layers = mat_layers;
        cfg.use_ssa = use_ssa;
        cfg.seed = seed;
        Model model(cfg.model_config(), seed);
        train_model(model, train_clips, cfg, (scratch / "c9" / tag).string());
        return mean_eval_j(model, eval_clips, cfg.eval_threshold);
      };
      mean_full += arm(5, true, "full");
      mean_nomat += arm(0, true, "nomat");
      mean_nossa += arm(5, false, "nossa");
    }
    const double n = static_cast<double>(seeds.size());
    mean_full /= n;
    mean_nomat /= n;
    mean_nossa /= n;
    const double margin_mat = mean_full - mean_nomat;
    const double margin_ssa = mean_full - mean_nossa;
    const bool ok = margin_mat >= 0.0 && margin_ssa >= 0.0;
    return {ok, fmt("held-out mean J over 3 seeds: full(L=5,SSA) %.4f, L=0 %.4f (MAT margin %+.4f), no-SSA %.4f (SSA margin %+.4f); both margins must be >= 0",
                    mean_full, mean_nomat, margin_mat, mean_nossa, margin_ssa)};
  });

  gate.run(10, [&]() -> std::pair<bool, std::string> {
    const fs::path dir = scratch / "c10";
    fs::create_directories(dir);
    const fs::path cfg = dir / "repro.cfg";
    {
      std::ofstream out(cfg);
      out << "data.train_clips = 1\n"
             "data.eval_clips = 0\n"
             "data.frames = 4\n"
             "model.stage_channels = 4,4,8,8\n"
             "model.mat_layers = 1\n"
             "model.reduction = 4\n"
             "model.decoder_channels = 8\n"
             "train.iterations = 10\n"
             "train.seed = 3\n"
             "train.augment = true\n";
    }
    const std::string q = " --config " + cfg.string();
    int rc = run_cli(cli, "gen --out " + (dir / "data").string() + q, log);
    if (rc != 0) return {false, fmt("gen exited %d", rc)};
    rc = run_cli(cli, "train --data " + (dir / "data/train").string() + " --out " +
                          (dir / "a").string() + q, log);
    if (rc != 0) return {false, fmt("first train exited %d", rc)};
    rc = run_cli(cli, "train --data " + (dir / "data/train").string() + " --out " +
                          (dir / "b").string() + q, log);
    if (rc != 0) return {false, fmt("second train exited %d", rc)};
    const std::string a = slurp(dir / "a/checkpoint_final.bin");
    const std::string b = slurp(dir / "b/checkpoint_final.bin");
    const bool ok = !a.empty() && a == b;
    return {ok, fmt("two identically seeded runs wrote %zu-byte checkpoints that %s", a.size(),
                    a == b ? "match byte for byte" : "DIFFER")};
  });

  gate.run(11, [&]() -> std::pair<bool, std::string> {
    Tensor a = rect_mask(16, 16, 4, 2, 12, 10);
    Tensor b = rect_mask(16, 16, 4, 6, 12, 14);
    const double j = region_similarity_j(a, b);
    const bool j_ok = j == 1.0 / 3.0;

    Tensor sa = rect_mask(16, 16, 4, 4, 10, 10);
    Tensor sb = rect_mask(16, 16, 6, 6, 12, 12);
    const double f2 = boundary_f(sa, sb, 2);
    const double f_self = boundary_f(sa, sa, 0);
    const bool f_ok = f2 == 1.0 && f_self == 1.0;
    return {j_ok && f_ok,
            fmt("half-overlap rectangles J = %.17g (want exactly 1/3), 2px-shifted square F@tol2 = %.1f (want 1), identical masks F@tol0 = %.1f",
                j, f2, f_self)};
  });

  gate.run(12, [&]() -> std::pair<bool, std::string> {
    const fs::path dir = scratch / "c12";
    fs::create_directories(dir);
    const fs::path cfg = dir / "smoke.cfg";
    {
      std::ofstream out(cfg);
      out << "data.train_clips = 2\n"
             "data.eval_clips = 1\n"
             "data.frames = 4\n"
             "model.stage_channels = 4,4,8,8\n"
             "model.mat_layers = 1\n"
             "model.reduction = 4\n"
             "model.decoder_channels = 8\n"
             "train.iterations = 50\n"
             "train.seed = 4\n";
    }
    const std::string q = " --config " + cfg.string();
    int rc = run_cli(cli, "gen --out " + (dir / "data").string() + q, log);
    if (rc != 0) return {false, fmt("gen exited %d", rc)};
    rc = run_cli(cli, "train --data " + (dir / "data/train").string() + " --out " +
                          (dir / "run").string() + q, log);
    if (rc != 0) return {false, fmt("train exited %d", rc)};
    rc = run_cli(cli, "infer --checkpoint " + (dir / "run/checkpoint_final.bin").string() +
                          " --data " + (dir / "data/eval").string() + " --out " +
                          (dir / "pred").string(), log);
    if (rc != 0) return {false, fmt("infer exited %d", rc)};
    const fs::path report = dir / "report.txt";
    rc = run_cli(cli, "eval --data " + (dir / "data/eval").string() + " --pred " +
                          (dir / "pred").string() + " --out " + report.string(), log);
    if (rc != 0) return {false, fmt("eval exited %d", rc)};

    // the report must be well formed: frame lines, a summary marker, clip
    // lines, then the two dataset means
    std::ifstream in(report);
    std::string line;
    int frame_lines = 0, clip_lines = 0, mean_lines = 0;
    bool saw_summary = false, shape_ok = true;
    while (std::getline(in, line)) {
      if (line == "summary") {
        saw_summary = true;
        continue;
      }
      std::istringstream is(line);
      if (!saw_summary) {
        std::string clip;
        int frame = -1;
        double j = -1.0, f = -1.0;
        is >> clip >> frame >> j >> f;
        shape_ok = shape_ok && !clip.empty() && frame >= 0 && j >= 0.0 && j <= 1.0 && f >= 0.0 &&
                   f <= 1.0;
        ++frame_lines;
      } else if (line.rfind("clip ", 0) == 0) {
        std::string kw, name, kj, kf, kframes;
        double j = -1.0, f = -1.0;
        int frames = 0;
        is >> kw >> name >> kj >> j >> kf >> f >> kframes >> frames;
        shape_ok = shape_ok && kj == "J" && kf == "F" && kframes == "frames" && frames > 0 &&
                   j >= 0.0 && j <= 1.0;
        ++clip_lines;
      } else if (line.rfind("mean ", 0) == 0) {
        ++mean_lines;
      } else {
        shape_ok = false;
      }
    }
    const bool ok = saw_summary && shape_ok && frame_lines == 4 && clip_lines == 1 &&
                    mean_lines == 2;
    return {ok, fmt("gen/train/infer/eval all exited 0; report has %d frame lines, %d clip lines, %d mean lines%s",
                    frame_lines, clip_lines, mean_lines, shape_ok ? "" : " (malformed lines)")};
  });

  std::printf("%d of 12 criteria passed\n", 12 - gate.failures);
  return gate.failures > 0 ? 1 : 0;
}
