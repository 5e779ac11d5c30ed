#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ddist {

/// Every recoverable failure in the library is reported with this type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Point {
  int row = 0;
  int col = 0;

  friend auto operator<=>(const Point&, const Point&) = default;
};

/// Dense row-major 2-D grid.
template <typename T>
class Grid {
 public:
  Grid() = default;
  Grid(int width, int height, T fill = T{})
      : width_(width), height_(height),
        data_(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill) {
    if (width < 0 || height < 0) throw Error("negative grid dimensions");
  }

  int width() const { return width_; }
  int height() const { return height_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  bool contains(int row, int col) const {
    return row >= 0 && col >= 0 && row < height_ && col < width_;
  }
  bool contains(Point p) const { return contains(p.row, p.col); }

  std::size_t index(int row, int col) const {
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(width_) +
           static_cast<std::size_t>(col);
  }

  T& operator()(int row, int col) { return data_[index(row, col)]; }
  const T& operator()(int row, int col) const { return data_[index(row, col)]; }
  T& operator[](Point p) { return data_[index(p.row, p.col)]; }
  const T& operator[](Point p) const { return data_[index(p.row, p.col)]; }

  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }

  bool same_shape(int width, int height) const { return width_ == width && height_ == height; }
  template <typename U>
  bool same_shape(const Grid<U>& other) const {
    return width_ == other.width() && height_ == other.height();
  }

  friend bool operator==(const Grid&, const Grid&) = default;

 private:
  int width_ = 0;
  int height_ = 0;
  std::vector<T> data_;
};

using Mask = Grid<std::uint8_t>;

enum class MapRole { Raw, InnerDistance, OuterDistance, Classification };

std::string to_string(MapRole role);

/// Real-valued map. Non-Raw roles promise values in [0, 1].
struct ScalarMap {
  Grid<double> grid;
  MapRole role = MapRole::Raw;

  ScalarMap() = default;
  ScalarMap(int width, int height, MapRole r = MapRole::Raw, double fill = 0.0)
      : grid(width, height, fill), role(r) {}
  ScalarMap(Grid<double> g, MapRole r) : grid(std::move(g)), role(r) {}

  int width() const { return grid.width(); }
  int height() const { return grid.height(); }
  double& operator()(int row, int col) { return grid(row, col); }
  double operator()(int row, int col) const { return grid(row, col); }
  double& operator[](Point p) { return grid[p]; }
  double operator[](Point p) const { return grid[p]; }

  /// Throws if a role-tagged map holds values outside [0, 1] or non-finite values.
  void validate() const;
};

/// Raw three-channel image; intensities in [0, max_value].
struct RgbImage {
  int width = 0;
  int height = 0;
  int max_value = 255;
  std::vector<std::uint16_t> red, green, blue;

  RgbImage() = default;
  RgbImage(int w, int h, int maxval = 255);

  std::uint16_t& channel(int c, int row, int col);
  std::uint16_t channel(int c, int row, int col) const;
  std::span<const std::uint16_t> channel(int c) const;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

struct CellAnnotation {
  int id = 0;
  std::vector<Point> pixels;    // sorted raster order; empty for dot-only cells
  std::vector<Point> boundary;  // subset of pixels
  Point centroid;               // meaningful only when pixels is non-empty
  Point marker;

  bool has_region() const { return !pixels.empty(); }
};

struct AnnotationSet {
  int width = 0;
  int height = 0;
  std::vector<CellAnnotation> cells;

  bool fully_annotated() const;
  std::vector<Point> markers() const;
  /// Throws on duplicate ids, out-of-image points or boundary not within pixels.
  void validate() const;
};

/// Builds a cell from its pixel set: sorts, deduplicates, derives boundary and centroid.
/// The marker defaults to the centroid.
CellAnnotation make_cell(int id, std::vector<Point> pixels);

using LabelMap = Grid<std::int32_t>;

enum class Connectivity { Four, Eight };

/// Neighbour offsets (drow, dcol) for the given connectivity, raster order.
std::span<const Point> neighbor_offsets(Connectivity c);

/// Labels the non-zero pixels of `mask`; labels follow raster first-encounter order.
LabelMap connected_components(const Mask& mask, Connectivity connectivity);
LabelMap connected_components(const ScalarMap& mask, Connectivity connectivity);

/// Largest label in use (== number of components for compacted maps).
std::int32_t max_label(const LabelMap& labels);

/// Renumbers positive labels to 1..K preserving their relative order.
LabelMap compact_labels(const LabelMap& labels);

/// Member of `pixels` closest to their arithmetic mean; ties go to the smallest (row, col).
Point centroid_pixel(std::span<const Point> pixels);

/// Members of `pixels` with at least one 4-neighbour outside the set.
std::vector<Point> boundary_pixels(std::span<const Point> pixels);

}  // namespace ddist
