#include "motionseg/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <stdexcept>

namespace motionseg {

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

[[noreturn]] void bad_line(int line, const std::string& what) {
  throw std::invalid_argument("config line " + std::to_string(line) + ": " + what);
}

int parse_int(const std::string& v, int line) {
  size_t pos = 0;
  int out;
  try {
    out = std::stoi(v, &pos);
  } catch (const std::exception&) {
    bad_line(line, "expected an integer, got '" + v + "'");
  }
  if (pos != v.size()) bad_line(line, "trailing characters after integer '" + v + "'");
  return out;
}

double parse_double(const std::string& v, int line) {
  size_t pos = 0;
  double out;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    bad_line(line, "expected a number, got '" + v + "'");
  }
  if (pos != v.size()) bad_line(line, "trailing characters after number '" + v + "'");
  return out;
}

std::uint64_t parse_u64(const std::string& v, int line) {
  size_t pos = 0;
  unsigned long long out;
  try {
    out = std::stoull(v, &pos);
  } catch (const std::exception&) {
    bad_line(line, "expected an unsigned integer, got '" + v + "'");
  }
  if (pos != v.size()) bad_line(line, "trailing characters after integer '" + v + "'");
  return out;
}

bool parse_bool(const std::string& v, int line) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  bad_line(line, "expected true or false, got '" + v + "'");
}

std::vector<int> parse_int_list(const std::string& v, int line) {
  std::vector<int> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (item.empty()) bad_line(line, "empty element in list '" + v + "'");
    out.push_back(parse_int(item, line));
  }
  if (out.empty()) bad_line(line, "expected a comma separated list, got '" + v + "'");
  return out;
}

std::string join_ints(const std::vector<int>& v) {
  std::string out;
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

ModelConfig RunConfig::model_config() const {
  ModelConfig mc;
  mc.backbone.stage_channels = stage_channels;
  mc.backbone.stage_strides = stage_strides;
  mc.backbone.convs_per_stage = convs_per_stage;
  mc.mat_layers = mat_layers;
  mc.reduction = reduction;
  mc.decoder_channels = decoder_channels;
  mc.use_ssa = use_ssa;
  mc.transition_transposed = transition_transposed;
  return mc;
}

RunConfig parse_config(const std::string& text) {
  RunConfig c;
  using Setter = std::function<void(RunConfig&, const std::string&, int)>;
  static const std::map<std::string, Setter> setters = {
      {"data.train_clips", [](RunConfig& c, const std::string& v, int l) { c.data_train_clips = parse_int(v, l); }},
      {"data.eval_clips", [](RunConfig& c, const std::string& v, int l) { c.data_eval_clips = parse_int(v, l); }},
      {"data.frames", [](RunConfig& c, const std::string& v, int l) { c.data_frames = parse_int(v, l); }},
      {"data.resolution", [](RunConfig& c, const std::string& v, int l) { c.data_resolution = parse_int(v, l); }},
      {"model.stage_channels", [](RunConfig& c, const std::string& v, int l) { c.stage_channels = parse_int_list(v, l); }},
      {"model.stage_strides", [](RunConfig& c, const std::string& v, int l) { c.stage_strides = parse_int_list(v, l); }},
      {"model.convs_per_stage", [](RunConfig& c, const std::string& v, int l) { c.convs_per_stage = parse_int(v, l); }},
      {"model.mat_layers", [](RunConfig& c, const std::string& v, int l) { c.mat_layers = parse_int(v, l); }},
      {"model.reduction", [](RunConfig& c, const std::string& v, int l) { c.reduction = parse_int(v, l); }},
      {"model.decoder_channels", [](RunConfig& c, const std::string& v, int l) { c.decoder_channels = parse_int(v, l); }},
      {"model.use_ssa", [](RunConfig& c, const std::string& v, int l) { c.use_ssa = parse_bool(v, l); }},
      {"model.transition_transposed", [](RunConfig& c, const std::string& v, int l) { c.transition_transposed = parse_bool(v, l); }},
      {"model.supervise_full_res", [](RunConfig& c, const std::string& v, int l) { c.supervise_full_res = parse_bool(v, l); }},
      {"train.lr", [](RunConfig& c, const std::string& v, int l) { c.lr = parse_double(v, l); }},
      {"train.lr_decoder", [](RunConfig& c, const std::string& v, int l) { c.lr_decoder = parse_double(v, l); }},
      {"train.momentum", [](RunConfig& c, const std::string& v, int l) { c.momentum = parse_double(v, l); }},
      {"train.weight_decay", [](RunConfig& c, const std::string& v, int l) { c.weight_decay = parse_double(v, l); }},
      {"train.batch_size", [](RunConfig& c, const std::string& v, int l) { c.batch_size = parse_int(v, l); }},
      {"train.iterations", [](RunConfig& c, const std::string& v, int l) { c.iterations = parse_int(v, l); }},
      {"train.seed", [](RunConfig& c, const std::string& v, int l) { c.seed = parse_u64(v, l); }},
      {"train.augment", [](RunConfig& c, const std::string& v, int l) { c.augment = parse_bool(v, l); }},
      {"train.flip_prob", [](RunConfig& c, const std::string& v, int l) { c.flip_prob = parse_double(v, l); }},
      {"train.rotation_degrees", [](RunConfig& c, const std::string& v, int l) { c.rotation_degrees = parse_double(v, l); }},
      {"train.checkpoint_every", [](RunConfig& c, const std::string& v, int l) { c.checkpoint_every = parse_int(v, l); }},
      {"train.hem_dilation_radius", [](RunConfig& c, const std::string& v, int l) { c.hem_dilation_radius = parse_int(v, l); }},
      {"eval.threshold", [](RunConfig& c, const std::string& v, int l) { c.eval_threshold = parse_double(v, l); }},
      {"eval.tolerance_px", [](RunConfig& c, const std::string& v, int l) { c.eval_tolerance_px = parse_int(v, l); }},
  };

  std::istringstream is(text);
  std::string raw;
  int line = 0;
  while (std::getline(is, raw)) {
    ++line;
    std::string s = raw;
    size_t hash = s.find('#');
    if (hash != std::string::npos) s = s.substr(0, hash);
    s = trim(s);
    if (s.empty()) continue;
    size_t eq = s.find('=');
    if (eq == std::string::npos) bad_line(line, "expected key = value, got '" + trim(raw) + "'");
    std::string key = trim(s.substr(0, eq));
    std::string value = trim(s.substr(eq + 1));
    auto it = setters.find(key);
    if (it == setters.end()) bad_line(line, "unknown key '" + key + "'");
    if (value.empty()) bad_line(line, "empty value for key '" + key + "'");
    it->second(c, value, line);
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

std::string dump_config(const RunConfig& c) {
  std::ostringstream os;
  os << "data.train_clips = " << c.data_train_clips << "\n";
  os << "data.eval_clips = " << c.data_eval_clips << "\n";
  os << "data.frames = " << c.data_frames << "\n";
  os << "data.resolution = " << c.data_resolution << "\n";
  os << "model.stage_channels = " << join_ints(c.stage_channels) << "\n";
  os << "model.stage_strides = " << join_ints(c.stage_strides) << "\n";
  os << "model.convs_per_stage = " << c.convs_per_stage << "\n";
  os << "model.mat_layers = " << c.mat_layers << "\n";
  os << "model.reduction = " << c.reduction << "\n";
  os << "model.decoder_channels = " << c.decoder_channels << "\n";
  os << "model.use_ssa = " << (c.use_ssa ? "true" : "false") << "\n";
  os << "model.transition_transposed = " << (c.transition_transposed ? "true" : "false") << "\n";
  os << "model.supervise_full_res = " << (c.supervise_full_res ? "true" : "false") << "\n";
  os << "train.lr = " << fmt_double(c.lr) << "\n";
  os << "train.lr_decoder = " << fmt_double(c.lr_decoder) << "\n";
  os << "train.momentum = " << fmt_double(c.momentum) << "\n";
  os << "train.weight_decay = " << fmt_double(c.weight_decay) << "\n";
  os << "train.batch_size = " << c.batch_size << "\n";
  os << "train.iterations = " << c.iterations << "\n";
  os << "train.seed = " << c.seed << "\n";
  os << "train.augment = " << (c.augment ? "true" : "false") << "\n";
  os << "train.flip_prob = " << fmt_double(c.flip_prob) << "\n";
  os << "train.rotation_degrees = " << fmt_double(c.rotation_degrees) << "\n";
  os << "train.checkpoint_every = " << c.checkpoint_every << "\n";
  os << "train.hem_dilation_radius = " << c.hem_dilation_radius << "\n";
  os << "eval.threshold = " << fmt_double(c.eval_threshold) << "\n";
  os << "eval.tolerance_px = " << c.eval_tolerance_px << "\n";
  return os.str();
}

}  // namespace motionseg
