#pragma once

#include "ddist/core.hpp"

namespace ddist {

/// Which evaluation path to use for distance-map generation. Both are exact.
enum class DistanceMethod { Auto, BruteForce, Transform };

struct TargetConfig {
  double alpha = 0.1;               // decay ratio of the inner distance
  int boundary_dilation_radius = 1; // square radius used to widen boundaries in the class map
  int distance_power = 2;           // 2: squared Euclidean distance, 1: plain distance
  DistanceMethod method = DistanceMethod::Auto;

  void validate() const;
};

struct TargetBundle {
  ScalarMap inner;
  ScalarMap outer;
  ScalarMap classification;
};

/// Exact squared Euclidean distance from every pixel to the nearest non-zero seed
/// (two-pass lower-envelope transform). Pixels are +inf when there is no seed.
Grid<double> squared_distance_transform(const Mask& seeds);

/// 1 / (1 + alpha * d) on cell pixels, d = distance to the nearest centroid of any cell.
ScalarMap inner_distance_map(const AnnotationSet& annotations, const TargetConfig& config = {});

/// Per-cell distance to the cell's own boundary, normalized so each cell peaks at 1.
ScalarMap outer_distance_map(const AnnotationSet& annotations, const TargetConfig& config = {});

/// Union of cell pixels minus the widened union of cell boundaries.
ScalarMap classification_map(const AnnotationSet& annotations, const TargetConfig& config = {});

TargetBundle make_targets(const AnnotationSet& annotations, const TargetConfig& config = {});

}  // namespace ddist
