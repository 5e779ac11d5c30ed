#include "ddist/detect.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

namespace ddist {

void DetectConfig::validate() const {
  if (!(h >= 0.0 && h <= 1.0)) throw Error("h must lie in [0,1]");
  if (inference_stride < 1) throw Error("inference stride must be positive");
}

std::vector<Point> DetectionResult::centers() const {
  std::vector<Point> out;
  out.reserve(detections.size());
  for (const auto& d : detections) out.push_back(d.center);
  return out;
}

std::vector<ScalarMap> predict_stitched(const NetworkParams& params, const NetworkConfig& net_config,
                                        const RgbImage& image, const DetectConfig& detect_config) {
  detect_config.validate();
  net_config.validate();
  if (detect_config.inference_stride > net_config.tile_size)
    throw Error("inference stride exceeds tile size");
  const int tile = net_config.tile_size;
  const auto origins = tile_origins(image.width, image.height, tile, detect_config.inference_stride);
  const Tensor input = normalize_image(image);

  const std::size_t n_heads = net_config.heads.size();
  std::vector<Grid<double>> sums(n_heads, Grid<double>(image.width, image.height, 0.0));
  Grid<double> count(image.width, image.height, 0.0);
  for (TileOrigin o : origins) {
    const auto result = forward(params, net_config, crop(input, o, tile));
    for (std::size_t h = 0; h < n_heads; ++h)
      for (int r = 0; r < tile; ++r)
        for (int c = 0; c < tile; ++c) sums[h](o.row + r, o.col + c) += result.outputs[h](r, c);
    for (int r = 0; r < tile; ++r)
      for (int c = 0; c < tile; ++c) count(o.row + r, o.col + c) += 1.0;
  }

  std::vector<ScalarMap> out;
  for (std::size_t h = 0; h < n_heads; ++h) {
    ScalarMap m(image.width, image.height, role_of(net_config.heads[h].name));
    auto s = sums[h].values();
    auto n = count.values();
    auto dst = m.grid.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] = std::clamp(s[i] / n[i], 0.0, 1.0);
    out.push_back(std::move(m));
  }
  return out;
}

ScalarMap h_maxima(const ScalarMap& map, double h, Connectivity connectivity) {
  if (h < 0.0) throw Error("h must be non-negative");
  const auto& f = map.grid;
  const int H = f.height(), W = f.width();
  ScalarMap out(W, H, map.role);
  auto& J = out.grid;
  for (std::size_t i = 0; i < f.size(); ++i) J.values()[i] = f.values()[i] - h;
  if (h == 0.0) {
    out.grid = f;
    return out;
  }

  const auto offsets = neighbor_offsets(connectivity);
  // offsets are in raster order; the first half precede the centre pixel
  const std::size_t half = offsets.size() / 2;
  const auto before = offsets.first(half);
  const auto after = offsets.last(half);

  for (int r = 0; r < H; ++r) {
    for (int c = 0; c < W; ++c) {
      double m = J(r, c);
      for (Point d : before)
        if (J.contains(r + d.row, c + d.col)) m = std::max(m, J(r + d.row, c + d.col));
      J(r, c) = std::min(m, f(r, c));
    }
  }
  std::deque<Point> queue;
  for (int r = H - 1; r >= 0; --r) {
    for (int c = W - 1; c >= 0; --c) {
      double m = J(r, c);
      for (Point d : after)
        if (J.contains(r + d.row, c + d.col)) m = std::max(m, J(r + d.row, c + d.col));
      J(r, c) = std::min(m, f(r, c));
      for (Point d : after) {
        const int rr = r + d.row, cc = c + d.col;
        if (J.contains(rr, cc) && J(rr, cc) < J(r, c) && J(rr, cc) < f(rr, cc)) {
          queue.push_back({r, c});
          break;
        }
      }
    }
  }
  while (!queue.empty()) {
    const Point p = queue.front();
    queue.pop_front();
    for (Point d : offsets) {
      const Point q{p.row + d.row, p.col + d.col};
      if (!J.contains(q)) continue;
      if (J[q] < J[p] && J[q] != f[q]) {
        J[q] = std::min(J[p], f[q]);
        queue.push_back(q);
      }
    }
  }
  return out;
}

std::vector<Plateau> regional_maxima(const ScalarMap& map, Connectivity connectivity) {
  const auto& f = map.grid;
  const auto offsets = neighbor_offsets(connectivity);
  Grid<std::uint8_t> seen(f.width(), f.height(), 0);
  std::vector<Plateau> out;
  std::vector<Point> stack;
  for (int r = 0; r < f.height(); ++r) {
    for (int c = 0; c < f.width(); ++c) {
      if (seen(r, c)) continue;
      const double v = f(r, c);
      Plateau p;
      p.value = v;
      bool is_max = true;
      seen(r, c) = 1;
      stack.push_back({r, c});
      while (!stack.empty()) {
        const Point q = stack.back();
        stack.pop_back();
        p.pixels.push_back(q);
        for (Point d : offsets) {
          const Point n{q.row + d.row, q.col + d.col};
          if (!f.contains(n)) continue;
          if (f[n] > v) is_max = false;
          if (f[n] == v && !seen[n]) {
            seen[n] = 1;
            stack.push_back(n);
          }
        }
      }
      if (is_max) {
        std::sort(p.pixels.begin(), p.pixels.end());
        out.push_back(std::move(p));
      }
    }
  }
  return out;
}

DetectionResult detect_cells(const ScalarMap& inner_map, const DetectConfig& config) {
  config.validate();
  const ScalarMap suppressed = h_maxima(inner_map, config.h, config.connectivity);
  DetectionResult result;
  for (auto& plateau : regional_maxima(suppressed, config.connectivity)) {
    if (!(plateau.value > 0.0)) continue;
    Detection d;
    d.center = centroid_pixel(plateau.pixels);
    d.peak_value = 0.0;
    for (Point p : plateau.pixels) d.peak_value = std::max(d.peak_value, inner_map[p]);
    d.plateau = std::move(plateau.pixels);
    result.detections.push_back(std::move(d));
  }
  return result;
}

}  // namespace ddist
