#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ddist/core.hpp"
#include "ddist/detect.hpp"
#include "ddist/net.hpp"

namespace ddist {

struct MatchResult {
  std::vector<std::pair<int, int>> true_positives;  // (marker index, detection index)
  int n_markers = 0;
  int n_detections = 0;
  double distance_threshold = 0.0;

  int tp() const { return static_cast<int>(true_positives.size()); }
};

struct Prf {
  double precision = 0.0;
  double recall = 0.0;
  double f_score = 0.0;
};

/// A pair counts only when each endpoint lies within `threshold` of the other and of nothing else.
MatchResult match_one_to_one(const std::vector<Point>& markers, const std::vector<Point>& detections,
                             double threshold);

Prf prf(int tp, int n_detections, int n_markers);
Prf prf(const MatchResult& match);

/// Image with its marker annotations, as consumed by the h sweep.
struct AnnotatedImage {
  RgbImage image;
  std::vector<Point> markers;
};

/// Inner map already produced for an image, plus its markers.
struct AnnotatedMap {
  ScalarMap inner;
  std::vector<Point> markers;
};

struct SweepRow {
  double h = 0.0;
  int tp = 0;
  int n_detections = 0;
  int n_markers = 0;
  Prf scores;
};

struct SweepResult {
  double best_h = 0.0;
  std::vector<SweepRow> table;  // candidate order
};

/// Pools TP / detections / markers over all maps for each candidate h; picks the
/// highest pooled f-score, smallest h on ties.
SweepResult sweep_h(const std::vector<AnnotatedMap>& maps, const std::vector<double>& candidates,
                    const DetectConfig& base, double match_threshold);

/// Stitches the inner map of every image with the network, then sweeps.
SweepResult sweep_h(const NetworkParams& params, const NetworkConfig& net_config,
                    const std::vector<AnnotatedImage>& images, const std::vector<double>& candidates,
                    const DetectConfig& base, double match_threshold);

/// CSV with header h,tp,n_detections,n_markers,precision,recall,f_score.
std::string sweep_csv(const SweepResult& sweep);

}  // namespace ddist
