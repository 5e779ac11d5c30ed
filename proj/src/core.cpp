#include "ddist/core.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <set>

namespace ddist {

std::string to_string(MapRole role) {
  switch (role) {
    case MapRole::Raw: return "raw";
    case MapRole::InnerDistance: return "inner";
    case MapRole::OuterDistance: return "outer";
    case MapRole::Classification: return "classification";
  }
  return "unknown";
}

void ScalarMap::validate() const {
  if (width() <= 0 || height() <= 0) throw Error("map dimensions must be positive");
  for (double v : grid.values()) {
    if (!std::isfinite(v)) throw Error("map holds a non-finite value");
    if (role != MapRole::Raw && (v < 0.0 || v > 1.0))
      throw Error(to_string(role) + " map value outside [0,1]");
  }
}

RgbImage::RgbImage(int w, int h, int maxval)
    : width(w), height(h), max_value(maxval),
      red(static_cast<std::size_t>(w) * h), green(red.size()), blue(red.size()) {
  if (w <= 0 || h <= 0) throw Error("image dimensions must be positive");
  if (maxval < 1 || maxval > 65535) throw Error("image max value out of range");
}

std::uint16_t& RgbImage::channel(int c, int row, int col) {
  auto i = static_cast<std::size_t>(row) * width + col;
  return c == 0 ? red[i] : c == 1 ? green[i] : blue[i];
}

std::uint16_t RgbImage::channel(int c, int row, int col) const {
  auto i = static_cast<std::size_t>(row) * width + col;
  return c == 0 ? red[i] : c == 1 ? green[i] : blue[i];
}

std::span<const std::uint16_t> RgbImage::channel(int c) const {
  return c == 0 ? std::span<const std::uint16_t>(red)
                : c == 1 ? std::span<const std::uint16_t>(green) : std::span<const std::uint16_t>(blue);
}

bool AnnotationSet::fully_annotated() const {
  return std::all_of(cells.begin(), cells.end(), [](const CellAnnotation& c) { return c.has_region(); });
}

std::vector<Point> AnnotationSet::markers() const {
  std::vector<Point> out;
  out.reserve(cells.size());
  for (const auto& c : cells) out.push_back(c.marker);
  return out;
}

void AnnotationSet::validate() const {
  if (width <= 0 || height <= 0) throw Error("annotation image dimensions must be positive");
  std::set<int> ids;
  auto inside = [&](Point p) { return p.row >= 0 && p.col >= 0 && p.row < height && p.col < width; };
  for (const auto& c : cells) {
    if (!ids.insert(c.id).second) throw Error("duplicate cell id " + std::to_string(c.id));
    if (!inside(c.marker)) throw Error("marker outside image for cell " + std::to_string(c.id));
    for (Point p : c.pixels)
      if (!inside(p)) throw Error("pixel outside image for cell " + std::to_string(c.id));
    for (Point b : c.boundary)
      if (!std::binary_search(c.pixels.begin(), c.pixels.end(), b))
        throw Error("boundary pixel not in cell " + std::to_string(c.id));
  }
}

CellAnnotation make_cell(int id, std::vector<Point> pixels) {
  std::sort(pixels.begin(), pixels.end());
  pixels.erase(std::unique(pixels.begin(), pixels.end()), pixels.end());
  CellAnnotation cell;
  cell.id = id;
  cell.centroid = centroid_pixel(pixels);
  cell.marker = cell.centroid;
  cell.boundary = boundary_pixels(pixels);
  cell.pixels = std::move(pixels);
  return cell;
}

namespace {

constexpr std::array<Point, 4> kFour{{{-1, 0}, {0, -1}, {0, 1}, {1, 0}}};
constexpr std::array<Point, 8> kEight{{{-1, -1}, {-1, 0}, {-1, 1}, {0, -1}, {0, 1}, {1, -1}, {1, 0}, {1, 1}}};

}  // namespace

std::span<const Point> neighbor_offsets(Connectivity c) {
  if (c == Connectivity::Four) return kFour;
  return kEight;
}

LabelMap connected_components(const Mask& mask, Connectivity connectivity) {
  LabelMap labels(mask.width(), mask.height(), 0);
  const auto offsets = neighbor_offsets(connectivity);
  std::vector<Point> stack;
  std::int32_t next = 0;
  for (int r = 0; r < mask.height(); ++r) {
    for (int c = 0; c < mask.width(); ++c) {
      if (!mask(r, c) || labels(r, c)) continue;
      ++next;
      labels(r, c) = next;
      stack.push_back({r, c});
      while (!stack.empty()) {
        Point p = stack.back();
        stack.pop_back();
        for (Point d : offsets) {
          Point q{p.row + d.row, p.col + d.col};
          if (!mask.contains(q) || !mask[q] || labels[q]) continue;
          labels[q] = next;
          stack.push_back(q);
        }
      }
    }
  }
  return labels;
}

LabelMap connected_components(const ScalarMap& mask, Connectivity connectivity) {
  Mask m(mask.width(), mask.height(), 0);
  auto src = mask.grid.values();
  auto dst = m.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] != 0.0 ? 1 : 0;
  return connected_components(m, connectivity);
}

std::int32_t max_label(const LabelMap& labels) {
  std::int32_t m = 0;
  for (auto v : labels.values()) m = std::max(m, v);
  return m;
}

LabelMap compact_labels(const LabelMap& labels) {
  std::int32_t top = max_label(labels);
  std::vector<std::int32_t> remap(static_cast<std::size_t>(top) + 1, 0);
  for (auto v : labels.values())
    if (v > 0) remap[v] = 1;
  std::int32_t next = 0;
  for (std::int32_t l = 1; l <= top; ++l)
    if (remap[l]) remap[l] = ++next;
  LabelMap out(labels.width(), labels.height(), 0);
  auto src = labels.values();
  auto dst = out.values();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = src[i] > 0 ? remap[src[i]] : 0;
  return out;
}

Point centroid_pixel(std::span<const Point> pixels) {
  if (pixels.empty()) throw Error("empty cell");
  double mr = 0.0, mc = 0.0;
  for (Point p : pixels) {
    mr += p.row;
    mc += p.col;
  }
  mr /= static_cast<double>(pixels.size());
  mc /= static_cast<double>(pixels.size());
  Point best = pixels.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (Point p : pixels) {
    double dr = p.row - mr, dc = p.col - mc;
    double d = dr * dr + dc * dc;
    if (d < best_d || (d == best_d && p < best)) {
      best = p;
      best_d = d;
    }
  }
  return best;
}

std::vector<Point> boundary_pixels(std::span<const Point> pixels) {
  if (pixels.empty()) return {};
  int r0 = pixels.front().row, r1 = r0, c0 = pixels.front().col, c1 = c0;
  for (Point p : pixels) {
    r0 = std::min(r0, p.row);
    r1 = std::max(r1, p.row);
    c0 = std::min(c0, p.col);
    c1 = std::max(c1, p.col);
  }
  // one pixel of padding on each side so the bounding box border reads as outside
  Mask local(c1 - c0 + 3, r1 - r0 + 3, 0);
  for (Point p : pixels) local(p.row - r0 + 1, p.col - c0 + 1) = 1;
  std::vector<Point> out;
  for (Point p : pixels) {
    int lr = p.row - r0 + 1, lc = p.col - c0 + 1;
    for (Point d : kFour) {
      if (!local(lr + d.row, lc + d.col)) {
        out.push_back(p);
        break;
      }
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

}  // namespace ddist
