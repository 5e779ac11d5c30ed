#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "ddist/core.hpp"
#include "ddist/detect.hpp"

namespace ddist {

std::string read_file(const std::filesystem::path& path);
/// Writes to a sibling temporary file and renames it over `path`.
void write_file_atomic(const std::filesystem::path& path, const std::string& bytes);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(const std::string& s);
int parse_int(const std::string& s);

// NetPBM ---------------------------------------------------------------------

/// Decodes binary P6 or P5 (grey replicated to three channels), 8- or 16-bit.
RgbImage decode_image(const std::string& bytes);
std::string encode_image(const RgbImage& image);  // P6
RgbImage load_image(const std::filesystem::path& path);
void save_image(const std::filesystem::path& path, const RgbImage& image);

/// 16-bit P5, sample = round(65535 * clamp(v, 0, 1)).
std::string encode_map(const ScalarMap& map);
ScalarMap decode_map(const std::string& bytes, MapRole role);
void save_map(const std::filesystem::path& path, const ScalarMap& map);
ScalarMap load_map(const std::filesystem::path& path, MapRole role = MapRole::Raw);

/// 16-bit P5 holding raw label values.
void save_labels(const std::filesystem::path& path, const LabelMap& labels);
LabelMap load_labels(const std::filesystem::path& path);

// annotations ----------------------------------------------------------------

struct PolygonVertex {
  double row = 0.0;
  double col = 0.0;
};

/// Pixels whose centres lie inside (even-odd) or on the polygon. Throws on
/// non-simple polygons or fewer than three vertices.
std::vector<Point> rasterize_polygon(const std::vector<PolygonVertex>& polygon, int width, int height);

/// Parsed annotation file before rasterization.
struct AnnotationRecord {
  int id = 0;
  std::optional<Point> marker;
  std::vector<PolygonVertex> polygon;
};

/// Line-oriented format: `size <w> <h>`, then per cell `cell <id>`, `marker <row> <col>`,
/// `polygon <row> <col> <row> <col> ...`. `#` starts a comment.
AnnotationSet parse_annotations(const std::string& text, std::optional<std::pair<int, int>> size = std::nullopt);
AnnotationSet load_annotations(const std::filesystem::path& path,
                               std::optional<std::pair<int, int>> size = std::nullopt);
std::string format_annotations(int width, int height, const std::vector<AnnotationRecord>& records);

// detections -----------------------------------------------------------------

struct DetectionRecord {
  Point center;
  double peak_value = 0.0;
  int plateau_area = 0;
};

/// CSV `row,col,peak_value,plateau_area`, sorted by (row, col).
std::string detections_csv(const DetectionResult& result);
void save_detections(const std::filesystem::path& path, const DetectionResult& result);
std::vector<DetectionRecord> parse_detections(const std::string& csv);
std::vector<DetectionRecord> load_detections(const std::filesystem::path& path);

// overlays -------------------------------------------------------------------

/// Red crosses (arm length 3) at every detection centre.
RgbImage render_detections(const RgbImage& image, const DetectionResult& result);
/// Half-transparent tint of every positive label.
RgbImage render_labels(const RgbImage& image, const LabelMap& labels);
void render_overlay(const RgbImage& image, const DetectionResult& result, const std::filesystem::path& path);
void render_overlay(const RgbImage& image, const LabelMap& labels, const std::filesystem::path& path);

// dataset manifest -----------------------------------------------------------

enum class Split { Train, Val, Test };
std::string to_string(Split s);
Split split_from_string(const std::string& s);

struct ManifestEntry {
  std::filesystem::path image;
  std::filesystem::path annotation;
  Split split = Split::Train;
};

struct DatasetManifest {
  std::vector<ManifestEntry> entries;

  std::vector<ManifestEntry> with_split(Split s) const;
};

/// Lines `<split> <image> <annotation>`; relative paths resolve against the manifest's directory.
DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const DatasetManifest& manifest);

/// Loaded entry; train/val entries must carry cell regions.
struct LoadedSample {
  RgbImage image;
  AnnotationSet annotations;
  Split split = Split::Train;
};
LoadedSample load_sample(const ManifestEntry& entry);

}  // namespace ddist
