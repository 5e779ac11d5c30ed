#pragma once

#include <vector>

#include "ddist/core.hpp"
#include "ddist/net.hpp"

namespace ddist {

struct DetectConfig {
  double h = 0.2;
  int inference_stride = 8;
  Connectivity connectivity = Connectivity::Eight;

  void validate() const;
};

struct Plateau {
  std::vector<Point> pixels;  // raster order
  double value = 0.0;
};

struct Detection {
  Point center;
  std::vector<Point> plateau;
  double peak_value = 0.0;  // maximum of the input map over the plateau
};

struct DetectionResult {
  std::vector<Detection> detections;

  std::vector<Point> centers() const;
};

/// Runs the network over overlapping tiles and averages every pixel's predictions.
/// Returns one map per head (config order), clamped to [0, 1].
std::vector<ScalarMap> predict_stitched(const NetworkParams& params, const NetworkConfig& net_config,
                                        const RgbImage& image, const DetectConfig& detect_config);

/// Morphological reconstruction by dilation of (map - h) under map.
ScalarMap h_maxima(const ScalarMap& map, double h, Connectivity connectivity = Connectivity::Eight);

/// Maximal equal-valued connected sets whose outside neighbours are all strictly lower.
std::vector<Plateau> regional_maxima(const ScalarMap& map, Connectivity connectivity = Connectivity::Eight);

/// h-maxima suppression followed by regional maxima; plateaus at or below zero are dropped.
DetectionResult detect_cells(const ScalarMap& inner_map, const DetectConfig& config = {});

}  // namespace ddist
