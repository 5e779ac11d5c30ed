#pragma once

#include <vector>

#include "ddist/core.hpp"
#include "ddist/detect.hpp"

namespace ddist {

struct SegmentConfig {
  double outer_threshold = 0.5;
  int min_marker_area = 50;
  double foreground_threshold = 0.5;
  int majority_window = 5;

  void validate() const;
};

/// Widens each detection over the connected {outer > threshold} pixels by geodesic
/// nearest-seed assignment, drops small markers and compacts labels.
LabelMap identify_markers(const DetectionResult& detections, const ScalarMap& outer_map,
                          const SegmentConfig& config = {});

struct GrowResult {
  LabelMap labels;
  int iterations = 0;  // number of growth steps performed
};

/// Greedy marker growing: each step grows the eligible marker with the highest mean
/// outer distance over its 4-adjacent unassigned foreground pixels.
GrowResult grow_markers(const LabelMap& markers, const ScalarMap& class_map, const ScalarMap& outer_map,
                        const SegmentConfig& config = {});

/// Replaces each label by the most frequent label in its window (clipped at borders).
LabelMap majority_smooth(const LabelMap& labels, int window);

struct SegmentationResult {
  DetectionResult detections;
  LabelMap markers;
  GrowResult grown;
  LabelMap labels;  // after smoothing
};

/// detect_cells -> identify_markers -> grow_markers -> majority_smooth.
SegmentationResult segment(const ScalarMap& inner_map, const ScalarMap& outer_map, const ScalarMap& class_map,
                           const DetectConfig& detect_config = {}, const SegmentConfig& segment_config = {});

}  // namespace ddist
