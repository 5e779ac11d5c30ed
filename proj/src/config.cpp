#include "ddist/config.hpp"

#include <functional>
#include <sstream>

#include "ddist/io.hpp"

namespace ddist {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string t; std::getline(in, t, ',');)
    if (auto v = trim(t); !v.empty()) out.push_back(v);
  return out;
}

std::uint64_t parse_u64(const std::string& s) {
  std::size_t used = 0;
  const auto v = std::stoull(s, &used);
  if (used != s.size()) throw Error("invalid integer '" + s + "'");
  return v;
}

Connectivity parse_connectivity(const std::string& s) {
  if (s == "4" || s == "four") return Connectivity::Four;
  if (s == "8" || s == "eight") return Connectivity::Eight;
  throw Error("connectivity must be 4 or 8");
}

std::vector<HeadSpec> parse_heads(const std::string& s) {
  for (const char* preset : {"extended", "deepdistance", "single-inner", "single-outer", "single-classification"})
    if (s == preset) return NetworkConfig::head_preset(s);
  std::vector<HeadSpec> heads;
  for (const auto& name : split_list(s)) heads.push_back(HeadSpec::defaults(head_from_string(name)));
  return heads;
}

}  // namespace

void PipelineConfig::set(const std::string& key, const std::string& value) {
  using Setter = std::function<void(PipelineConfig&, const std::string&)>;
  static const std::map<std::string, Setter> setters = {
      {"targets.alpha", [](auto& c, auto& v) { c.targets.alpha = parse_double(v); }},
      {"targets.boundary_dilation_radius", [](auto& c, auto& v) { c.targets.boundary_dilation_radius = parse_int(v); }},
      {"targets.distance_power", [](auto& c, auto& v) { c.targets.distance_power = parse_int(v); }},
      {"net.depth", [](auto& c, auto& v) { c.net.depth = parse_int(v); }},
      {"net.base_channels", [](auto& c, auto& v) { c.net.base_channels = parse_int(v); }},
      {"net.heads", [](auto& c, auto& v) { c.net.heads = parse_heads(v); }},
      {"net.tile_size", [](auto& c, auto& v) { c.net.tile_size = parse_int(v); }},
      {"net.dropout_rate", [](auto& c, auto& v) { c.net.dropout_rate = parse_double(v); }},
      {"net.seed", [](auto& c, auto& v) { c.net.seed = parse_u64(v); }},
      {"net.inner_weight", [](auto& c, auto& v) {
         if (auto i = c.net.head_index(HeadName::Inner)) c.net.heads[*i].loss_weight = parse_double(v);
       }},
      {"net.outer_weight", [](auto& c, auto& v) {
         if (auto i = c.net.head_index(HeadName::Outer)) c.net.heads[*i].loss_weight = parse_double(v);
       }},
      {"net.classification_weight", [](auto& c, auto& v) {
         if (auto i = c.net.head_index(HeadName::Classification)) c.net.heads[*i].loss_weight = parse_double(v);
       }},
      {"train.max_epochs", [](auto& c, auto& v) { c.train.max_epochs = parse_int(v); }},
      {"train.patience", [](auto& c, auto& v) { c.train.patience = parse_int(v); }},
      {"train.batch_size", [](auto& c, auto& v) { c.train.batch_size = parse_int(v); }},
      {"train.train_tile_stride", [](auto& c, auto& v) { c.train.train_tile_stride = parse_int(v); }},
      {"train.adadelta_rho", [](auto& c, auto& v) { c.train.adadelta_rho = parse_double(v); }},
      {"train.adadelta_epsilon", [](auto& c, auto& v) { c.train.adadelta_epsilon = parse_double(v); }},
      {"train.adadelta_learning_rate", [](auto& c, auto& v) { c.train.adadelta_learning_rate = parse_double(v); }},
      {"train.seed", [](auto& c, auto& v) { c.train.seed = parse_u64(v); }},
      {"detect.h", [](auto& c, auto& v) { c.detect.h = parse_double(v); }},
      {"detect.inference_stride", [](auto& c, auto& v) { c.detect.inference_stride = parse_int(v); }},
      {"detect.connectivity", [](auto& c, auto& v) { c.detect.connectivity = parse_connectivity(v); }},
      {"segment.outer_threshold", [](auto& c, auto& v) { c.segment.outer_threshold = parse_double(v); }},
      {"segment.min_marker_area", [](auto& c, auto& v) { c.segment.min_marker_area = parse_int(v); }},
      {"segment.foreground_threshold", [](auto& c, auto& v) { c.segment.foreground_threshold = parse_double(v); }},
      {"segment.majority_window", [](auto& c, auto& v) { c.segment.majority_window = parse_int(v); }},
      {"eval.match_threshold", [](auto& c, auto& v) { c.eval.match_threshold = parse_double(v); }},
      {"eval.h_candidates", [](auto& c, auto& v) {
         c.eval.h_candidates.clear();
         for (const auto& x : split_list(v)) c.eval.h_candidates.push_back(parse_double(x));
       }},
      {"synth.seed", [](auto& c, auto& v) { c.synth.seed = parse_u64(v); }},
      {"synth.n_images", [](auto& c, auto& v) { c.synth.n_images = parse_int(v); }},
      {"synth.n_val", [](auto& c, auto& v) { c.synth.n_val = parse_int(v); }},
      {"synth.n_test", [](auto& c, auto& v) { c.synth.n_test = parse_int(v); }},
      {"synth.width", [](auto& c, auto& v) { c.synth.width = parse_int(v); }},
      {"synth.height", [](auto& c, auto& v) { c.synth.height = parse_int(v); }},
      {"synth.min_cells", [](auto& c, auto& v) { c.synth.min_cells = parse_int(v); }},
      {"synth.max_cells", [](auto& c, auto& v) { c.synth.max_cells = parse_int(v); }},
      {"synth.min_radius", [](auto& c, auto& v) { c.synth.min_radius = parse_double(v); }},
      {"synth.max_radius", [](auto& c, auto& v) { c.synth.max_radius = parse_double(v); }},
      {"synth.shape", [](auto& c, auto& v) { c.synth.shape = shape_from_string(v); }},
      {"synth.min_gap", [](auto& c, auto& v) { c.synth.min_gap = parse_int(v); }},
      {"synth.dark_core_fraction", [](auto& c, auto& v) { c.synth.dark_core_fraction = parse_double(v); }},
      {"synth.background", [](auto& c, auto& v) { c.synth.background = parse_double(v); }},
      {"synth.contrast", [](auto& c, auto& v) { c.synth.contrast = parse_double(v); }},
      {"synth.noise_sigma", [](auto& c, auto& v) { c.synth.noise_sigma = parse_double(v); }},
      {"synth.max_retries", [](auto& c, auto& v) { c.synth.max_retries = parse_int(v); }},
  };
  auto it = setters.find(key);
  if (it == setters.end()) throw Error("unknown config key '" + key + "'");
  try {
    it->second(*this, value);
  } catch (const std::logic_error&) {
    throw Error("invalid value '" + value + "' for " + key);
  }
}

void PipelineConfig::set_seed(std::uint64_t seed) {
  net.seed = seed;
  train.seed = seed;
  synth.seed = seed;
}

std::map<std::string, std::string> parse_key_values(const std::string& text) {
  std::map<std::string, std::string> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw Error("config line " + std::to_string(line_no) + ": expected key = value");
    const auto key = trim(line.substr(0, eq));
    if (key.empty()) throw Error("config line " + std::to_string(line_no) + ": empty key");
    out[key] = trim(line.substr(eq + 1));
  }
  return out;
}

PipelineConfig config_from_text(const std::string& text) {
  PipelineConfig cfg;
  const auto kv = parse_key_values(text);
  // heads first so per-head weights apply to the final head list
  if (auto it = kv.find("net.heads"); it != kv.end()) cfg.set(it->first, it->second);
  for (const auto& [k, v] : kv)
    if (k != "net.heads") cfg.set(k, v);
  return cfg;
}

PipelineConfig load_config(const std::filesystem::path& path) { return config_from_text(read_file(path)); }

}  // namespace ddist
