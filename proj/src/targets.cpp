#include "ddist/targets.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace ddist {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (q - v)^2 + f(v) over the finite samples of f.
// Inputs are integer-valued so every comparison below is exact.
void envelope_1d(std::span<const double> f, std::span<double> out, std::vector<int>& v,
                 std::vector<double>& z) {
  const int n = static_cast<int>(f.size());
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    // z[0] is -inf, so k never drops below zero
    double s = 0.0;
    while (true) {
      const int p = v[k];
      s = ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * q - 2.0 * p);
      if (s > z[k]) break;
      --k;
    }
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    std::fill(out.begin(), out.end(), kInf);
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double d = double(q) - v[j];
    out[q] = d * d + f[v[j]];
  }
}

struct Ownership {
  Grid<std::int32_t> owner;  // index into cells, -1 for background
};

Ownership build_ownership(const AnnotationSet& annotations) {
  Ownership own{Grid<std::int32_t>(annotations.width, annotations.height, -1)};
  for (std::size_t i = 0; i < annotations.cells.size(); ++i) {
    const auto& cell = annotations.cells[i];
    if (!cell.has_region()) throw Error("cell " + std::to_string(cell.id) + " has no pixel annotation");
    for (Point p : cell.pixels) {
      if (!own.owner.contains(p)) throw Error("cell pixel outside image");
      auto& slot = own.owner[p];
      if (slot != -1 && slot != static_cast<std::int32_t>(i)) throw Error("ambiguous annotation");
      slot = static_cast<std::int32_t>(i);
    }
  }
  return own;
}

bool use_brute_force(const AnnotationSet& a, const TargetConfig& config) {
  switch (config.method) {
    case DistanceMethod::BruteForce: return true;
    case DistanceMethod::Transform: return false;
    case DistanceMethod::Auto: break;
  }
  return static_cast<long>(a.width) * a.height < 256L * 256L;
}

double apply_power(double squared, int power) { return power == 2 ? squared : std::sqrt(squared); }

double sq_dist(Point a, Point b) {
  const double dr = a.row - b.row, dc = a.col - b.col;
  return dr * dr + dc * dc;
}

}  // namespace

void TargetConfig::validate() const {
  if (!(alpha > 0.0)) throw Error("alpha must be positive");
  if (boundary_dilation_radius < 0) throw Error("boundary dilation radius must be non-negative");
  if (distance_power != 1 && distance_power != 2) throw Error("distance power must be 1 or 2");
}

Grid<double> squared_distance_transform(const Mask& seeds) {
  const int w = seeds.width(), h = seeds.height();
  Grid<double> out(w, h, kInf);
  std::vector<int> v;
  std::vector<double> z;
  std::vector<double> f(std::max(w, h)), col_out(std::max(w, h));
  // columns first
  for (int c = 0; c < w; ++c) {
    for (int r = 0; r < h; ++r) f[r] = seeds(r, c) ? 0.0 : kInf;
    envelope_1d(std::span(f.data(), h), std::span(col_out.data(), h), v, z);
    for (int r = 0; r < h; ++r) out(r, c) = col_out[r];
  }
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) f[c] = out(r, c);
    envelope_1d(std::span(f.data(), w), std::span(col_out.data(), w), v, z);
    for (int c = 0; c < w; ++c) out(r, c) = col_out[c];
  }
  return out;
}

ScalarMap inner_distance_map(const AnnotationSet& annotations, const TargetConfig& config) {
  config.validate();
  const auto own = build_ownership(annotations);
  ScalarMap out(annotations.width, annotations.height, MapRole::InnerDistance, 0.0);
  if (annotations.cells.empty()) return out;

  if (use_brute_force(annotations, config)) {
    for (const auto& cell : annotations.cells) {
      for (Point q : cell.pixels) {
        double best = kInf;
        for (const auto& other : annotations.cells) best = std::min(best, sq_dist(q, other.centroid));
        out[q] = 1.0 / (1.0 + config.alpha * apply_power(best, config.distance_power));
      }
    }
    return out;
  }

  Mask seeds(annotations.width, annotations.height, 0);
  for (const auto& cell : annotations.cells) seeds[cell.centroid] = 1;
  const auto dist = squared_distance_transform(seeds);
  for (const auto& cell : annotations.cells)
    for (Point q : cell.pixels)
      out[q] = 1.0 / (1.0 + config.alpha * apply_power(dist[q], config.distance_power));
  return out;
}

ScalarMap outer_distance_map(const AnnotationSet& annotations, const TargetConfig& config) {
  config.validate();
  build_ownership(annotations);
  ScalarMap out(annotations.width, annotations.height, MapRole::OuterDistance, 0.0);
  const bool brute = use_brute_force(annotations, config);

  std::vector<double> dist;
  for (const auto& cell : annotations.cells) {
    const auto& boundary = cell.boundary.empty() ? boundary_pixels(cell.pixels) : cell.boundary;
    dist.assign(cell.pixels.size(), 0.0);
    if (brute) {
      for (std::size_t i = 0; i < cell.pixels.size(); ++i) {
        double best = kInf;
        for (Point b : boundary) best = std::min(best, sq_dist(cell.pixels[i], b));
        dist[i] = best;
      }
    } else {
      int r0 = cell.pixels.front().row, r1 = r0, c0 = cell.pixels.front().col, c1 = c0;
      for (Point p : cell.pixels) {
        r0 = std::min(r0, p.row);
        r1 = std::max(r1, p.row);
        c0 = std::min(c0, p.col);
        c1 = std::max(c1, p.col);
      }
      Mask seeds(c1 - c0 + 1, r1 - r0 + 1, 0);
      for (Point b : boundary) seeds(b.row - r0, b.col - c0) = 1;
      const auto local = squared_distance_transform(seeds);
      for (std::size_t i = 0; i < cell.pixels.size(); ++i)
        dist[i] = local(cell.pixels[i].row - r0, cell.pixels[i].col - c0);
    }
    double denom = 0.0;
    for (double& d : dist) {
      d = apply_power(d, config.distance_power);
      denom = std::max(denom, d);
    }
    for (std::size_t i = 0; i < cell.pixels.size(); ++i)
      out[cell.pixels[i]] = denom > 0.0 ? dist[i] / denom : 1.0;
  }
  return out;
}

ScalarMap classification_map(const AnnotationSet& annotations, const TargetConfig& config) {
  config.validate();
  ScalarMap out(annotations.width, annotations.height, MapRole::Classification, 0.0);
  for (const auto& cell : annotations.cells)
    for (Point p : cell.pixels) out[p] = 1.0;
  const int rad = config.boundary_dilation_radius;
  for (const auto& cell : annotations.cells) {
    const auto& boundary = cell.boundary.empty() ? boundary_pixels(cell.pixels) : cell.boundary;
    for (Point b : boundary) {
      for (int dr = -rad; dr <= rad; ++dr)
        for (int dc = -rad; dc <= rad; ++dc)
          if (out.grid.contains(b.row + dr, b.col + dc)) out(b.row + dr, b.col + dc) = 0.0;
    }
  }
  return out;
}

TargetBundle make_targets(const AnnotationSet& annotations, const TargetConfig& config) {
  return {inner_distance_map(annotations, config), outer_distance_map(annotations, config),
          classification_map(annotations, config)};
}

}  // namespace ddist
