#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "ddist/core.hpp"
#include "ddist/io.hpp"

namespace ddist {

enum class CellShape { Disk, Ellipse, Blob };

std::string to_string(CellShape s);
CellShape shape_from_string(const std::string& s);

struct SynthConfig {
  std::uint64_t seed = 7;
  int n_images = 14;  // split as train / val / test in that order
  int n_val = 2;
  int n_test = 4;
  int width = 128;
  int height = 128;
  int min_cells = 5;
  int max_cells = 9;
  double min_radius = 7.0;
  double max_radius = 11.0;
  CellShape shape = CellShape::Blob;
  int min_gap = 2;              // minimum Chebyshev gap between cells, pixels (0 lets cells touch)
  double dark_core_fraction = 0.35;  // share of cells rendered with a dark core and bright rim
  double background = 60.0;
  double contrast = 90.0;
  double noise_sigma = 6.0;
  int max_retries = 500;

  void validate() const;
  int n_train() const { return n_images - n_val - n_test; }
};

struct SynthSample {
  RgbImage image;
  AnnotationSet annotations;  // full regions for every split
  std::vector<AnnotationRecord> records;
  Split split = Split::Train;
};

/// Renders one image per index; deterministic in (config, index).
SynthSample synth_sample(const SynthConfig& config, int index);
std::vector<SynthSample> synth_dataset(const SynthConfig& config);

/// Writes images, annotations (dot-only for the test split) and manifest.txt into `out_dir`.
DatasetManifest synth_generate(const SynthConfig& config, const std::filesystem::path& out_dir);

}  // namespace ddist
