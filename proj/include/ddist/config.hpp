#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "ddist/detect.hpp"
#include "ddist/net.hpp"
#include "ddist/segment.hpp"
#include "ddist/synth.hpp"
#include "ddist/targets.hpp"

namespace ddist {

struct EvalConfig {
  double match_threshold = 8.0;
  std::vector<double> h_candidates{0.1, 0.2, 0.3, 0.4, 0.5};
};

/// Marker area threshold scaled down to the synthetic cell radii.
inline SegmentConfig desk_segment_config() {
  SegmentConfig s;
  s.min_marker_area = 8;
  return s;
}

/// Every tunable of the pipeline, as read from a `key = value` file.
struct PipelineConfig {
  TargetConfig targets;
  NetworkConfig net;
  TrainConfig train;
  DetectConfig detect;
  SegmentConfig segment = desk_segment_config();
  EvalConfig eval;
  SynthConfig synth;

  /// Applies one `section.key` assignment; throws on unknown keys or bad values.
  void set(const std::string& key, const std::string& value);
  /// Re-seeds every seeded component.
  void set_seed(std::uint64_t seed);
};

/// Parses `key = value` lines (`#` comments) into an ordered map.
std::map<std::string, std::string> parse_key_values(const std::string& text);
PipelineConfig load_config(const std::filesystem::path& path);
PipelineConfig config_from_text(const std::string& text);

}  // namespace ddist
