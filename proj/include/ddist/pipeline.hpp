#pragma once

#include <map>
#include <ostream>
#include <vector>

#include "ddist/config.hpp"
#include "ddist/evalkit.hpp"

namespace ddist {

/// Target maps for exactly the configured heads.
std::map<HeadName, ScalarMap> head_targets(const AnnotationSet& annotations, const TargetConfig& config,
                                           const std::vector<HeadSpec>& heads);

/// Training tiles cut from every sample of the given split.
std::vector<TrainingTile> split_tiles(const std::vector<LoadedSample>& samples, Split split,
                                      const PipelineConfig& config);

std::vector<LoadedSample> load_dataset(const DatasetManifest& manifest);
std::vector<LoadedSample> to_samples(const std::vector<SynthSample>& synth);

struct ImageReport {
  std::size_t sample_index = 0;
  std::vector<ScalarMap> maps;  // stitched outputs, head order
  SegmentationResult segmentation;
  MatchResult match;
};

struct PipelineReport {
  TrainResult training;
  SweepResult sweep;  // on train + val
  std::vector<ImageReport> test;
  int tp = 0;
  int n_detections = 0;
  int n_markers = 0;
  Prf scores;  // pooled over the test split
};

/// Train, pick h on train+val, then detect, segment and score every test sample.
/// Segmentation needs outer and classification heads; without them it is skipped.
PipelineReport run_pipeline(const std::vector<LoadedSample>& samples, const PipelineConfig& config,
                            std::ostream* log = nullptr);

}  // namespace ddist
