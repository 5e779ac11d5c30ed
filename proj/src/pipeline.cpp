#include "ddist/pipeline.hpp"

namespace ddist {

std::map<HeadName, ScalarMap> head_targets(const AnnotationSet& annotations, const TargetConfig& config,
                                           const std::vector<HeadSpec>& heads) {
  std::map<HeadName, ScalarMap> out;
  for (const auto& h : heads) {
    switch (h.name) {
      case HeadName::Inner: out[h.name] = inner_distance_map(annotations, config); break;
      case HeadName::Outer: out[h.name] = outer_distance_map(annotations, config); break;
      case HeadName::Classification: out[h.name] = classification_map(annotations, config); break;
    }
  }
  return out;
}

std::vector<TrainingTile> split_tiles(const std::vector<LoadedSample>& samples, Split split,
                                      const PipelineConfig& config) {
  const int stride = config.train.train_tile_stride > 0 ? config.train.train_tile_stride : config.net.tile_size / 2;
  std::vector<TrainingTile> out;
  for (const auto& s : samples) {
    if (s.split != split) continue;
    auto tiles = crop_training_tiles(normalize_image(s.image), head_targets(s.annotations, config.targets, config.net.heads),
                                     config.net.tile_size, stride);
    std::move(tiles.begin(), tiles.end(), std::back_inserter(out));
  }
  return out;
}

std::vector<LoadedSample> load_dataset(const DatasetManifest& manifest) {
  std::vector<LoadedSample> out;
  for (const auto& e : manifest.entries) out.push_back(load_sample(e));
  return out;
}

std::vector<LoadedSample> to_samples(const std::vector<SynthSample>& synth) {
  std::vector<LoadedSample> out;
  for (const auto& s : synth) {
    LoadedSample l{s.image, s.annotations, s.split};
    if (s.split == Split::Test)
      for (auto& c : l.annotations.cells) c.pixels.clear(), c.boundary.clear();
    out.push_back(std::move(l));
  }
  return out;
}

PipelineReport run_pipeline(const std::vector<LoadedSample>& samples, const PipelineConfig& config,
                            std::ostream* log) {
  const auto train_tiles = split_tiles(samples, Split::Train, config);
  const auto val_tiles = split_tiles(samples, Split::Val, config);
  if (train_tiles.empty()) throw Error("no training images");
  if (val_tiles.empty()) throw Error("no validation images");

  PipelineReport report;
  report.training = train(train_tiles, val_tiles, config.net, config.train, log);
  const auto& params = report.training.params;

  const auto inner = config.net.head_index(HeadName::Inner);
  if (!inner) throw Error("pipeline needs an inner distance head");
  const auto outer = config.net.head_index(HeadName::Outer);
  const auto cls = config.net.head_index(HeadName::Classification);

  std::vector<AnnotatedMap> selection;
  for (const auto& s : samples) {
    if (s.split == Split::Test) continue;
    auto maps = predict_stitched(params, config.net, s.image, config.detect);
    selection.push_back({std::move(maps[*inner]), s.annotations.markers()});
  }
  report.sweep = sweep_h(selection, config.eval.h_candidates, config.detect, config.eval.match_threshold);
  if (log) *log << "selected h " << format_double(report.sweep.best_h) << "\n";

  DetectConfig detect = config.detect;
  detect.h = report.sweep.best_h;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].split != Split::Test) continue;
    ImageReport r;
    r.sample_index = i;
    r.maps = predict_stitched(params, config.net, samples[i].image, detect);
    if (outer && cls) {
      r.segmentation = segment(r.maps[*inner], r.maps[*outer], r.maps[*cls], detect, config.segment);
    } else {
      r.segmentation.detections = detect_cells(r.maps[*inner], detect);
    }
    r.match = match_one_to_one(samples[i].annotations.markers(), r.segmentation.detections.centers(),
                               config.eval.match_threshold);
    report.tp += r.match.tp();
    report.n_detections += r.match.n_detections;
    report.n_markers += r.match.n_markers;
    report.test.push_back(std::move(r));
  }
  report.scores = prf(report.tp, report.n_detections, report.n_markers);
  return report;
}

}  // namespace ddist
