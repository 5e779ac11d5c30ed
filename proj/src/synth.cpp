#include "ddist/synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "ddist/targets.hpp"

namespace ddist {

namespace fs = std::filesystem;

std::string to_string(CellShape s) {
  switch (s) {
    case CellShape::Disk: return "disk";
    case CellShape::Ellipse: return "ellipse";
    case CellShape::Blob: return "blob";
  }
  return "unknown";
}

CellShape shape_from_string(const std::string& s) {
  if (s == "disk") return CellShape::Disk;
  if (s == "ellipse") return CellShape::Ellipse;
  if (s == "blob") return CellShape::Blob;
  throw Error("unknown cell shape '" + s + "'");
}

void SynthConfig::validate() const {
  if (n_images < 1) throw Error("n_images must be at least 1");
  if (n_val < 0 || n_test < 0 || n_val + n_test > n_images) throw Error("split counts exceed n_images");
  if (width < 8 || height < 8) throw Error("synthetic images must be at least 8x8");
  if (min_cells < 0 || max_cells < min_cells) throw Error("invalid cells-per-image range");
  if (!(min_radius > 0.0) || max_radius < min_radius) throw Error("radius range must be positive");
  if (min_gap < 0) throw Error("min_gap must be non-negative");
  if (!(dark_core_fraction >= 0.0 && dark_core_fraction <= 1.0)) throw Error("dark_core_fraction must lie in [0,1]");
  if (noise_sigma < 0.0) throw Error("noise sigma must be non-negative");
  if (max_retries < 1) throw Error("max_retries must be positive");
}

namespace {

constexpr int kVertices = 32;

double round2(double v) { return std::round(v * 100.0) / 100.0; }

std::vector<PolygonVertex> make_outline(const SynthConfig& cfg, std::mt19937_64& rng, double cr, double cc,
                                        double radius) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double two_pi = 2.0 * std::numbers::pi;
  double a = radius, b = radius, phi = 0.0, a2 = 0.0, a3 = 0.0, p2 = 0.0, p3 = 0.0;
  if (cfg.shape == CellShape::Ellipse) {
    const double e = 1.0 + 0.4 * u(rng);
    a = radius * std::sqrt(e);
    b = radius / std::sqrt(e);
    phi = two_pi * u(rng);
  } else if (cfg.shape == CellShape::Blob) {
    a2 = 0.18 * u(rng);
    a3 = 0.12 * u(rng);
    p2 = two_pi * u(rng);
    p3 = two_pi * u(rng);
  }
  std::vector<PolygonVertex> poly;
  for (int k = 0; k < kVertices; ++k) {
    const double t = two_pi * k / kVertices;
    double r = radius;
    if (cfg.shape == CellShape::Ellipse) {
      const double ct = std::cos(t - phi), st = std::sin(t - phi);
      r = a * b / std::sqrt(b * b * ct * ct + a * a * st * st);
    } else if (cfg.shape == CellShape::Blob) {
      r = radius * (1.0 + a2 * std::cos(2.0 * t + p2) + a3 * std::cos(3.0 * t + p3));
    }
    poly.push_back({round2(cr + r * std::sin(t)), round2(cc + r * std::cos(t))});
  }
  return poly;
}

}  // namespace

SynthSample synth_sample(const SynthConfig& cfg, int index) {
  cfg.validate();
  std::mt19937_64 rng(cfg.seed * 0x9e3779b97f4a7c15ULL + static_cast<std::uint64_t>(index) * 0xbf58476d1ce4e5b9ULL);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::uniform_int_distribution<int> n_cells_dist(cfg.min_cells, cfg.max_cells);

  SynthSample s;
  s.split = index < cfg.n_train() ? Split::Train : index < cfg.n_train() + cfg.n_val ? Split::Val : Split::Test;
  s.annotations.width = cfg.width;
  s.annotations.height = cfg.height;

  const int n_cells = n_cells_dist(rng);
  Mask blocked(cfg.width, cfg.height, 0);
  const double extent = cfg.max_radius * 1.35 + 1.0;
  for (int k = 0; k < n_cells; ++k) {
    bool placed = false;
    for (int attempt = 0; attempt < cfg.max_retries && !placed; ++attempt) {
      const double radius = cfg.min_radius + (cfg.max_radius - cfg.min_radius) * u(rng);
      const double cr = extent + (cfg.height - 1 - 2 * extent) * u(rng);
      const double cc = extent + (cfg.width - 1 - 2 * extent) * u(rng);
      auto poly = make_outline(cfg, rng, cr, cc, radius);
      std::vector<Point> pixels;
      try {
        pixels = rasterize_polygon(poly, cfg.width, cfg.height);
      } catch (const Error&) {
        continue;
      }
      if (pixels.size() < 9) continue;
      bool clash = false;
      for (Point p : pixels) {
        if (blocked[p] || p.row == 0 || p.col == 0 || p.row == cfg.height - 1 || p.col == cfg.width - 1) {
          clash = true;
          break;
        }
      }
      if (clash) continue;
      for (Point p : pixels)
        for (int dr = -cfg.min_gap; dr <= cfg.min_gap; ++dr)
          for (int dc = -cfg.min_gap; dc <= cfg.min_gap; ++dc)
            if (blocked.contains(p.row + dr, p.col + dc)) blocked(p.row + dr, p.col + dc) = 1;
      // a cell's own pixels are blocked even with min_gap == 0
      for (Point p : pixels) blocked[p] = 1;
      auto cell = make_cell(k + 1, std::move(pixels));
      s.records.push_back({k + 1, cell.marker, std::move(poly)});
      s.annotations.cells.push_back(std::move(cell));
      placed = true;
    }
    if (!placed) throw Error("unsatisfiable non-overlap constraints");
  }

  // rendering
  const double bg = cfg.background + 20.0 * (u(rng) - 0.5);
  const double tint[3] = {1.0, 0.96, 0.9};
  Grid<double> intensity(cfg.width, cfg.height, bg);
  const auto outer = outer_distance_map(s.annotations);
  for (const auto& cell : s.annotations.cells) {
    const bool dark_core = u(rng) < cfg.dark_core_fraction;
    const double contrast = cfg.contrast * (0.7 + 0.4 * u(rng));
    double max_d = 0.0;
    for (Point p : cell.pixels)
      max_d = std::max(max_d, std::hypot(p.row - cell.centroid.row, p.col - cell.centroid.col));
    if (max_d == 0.0) max_d = 1.0;
    for (Point p : cell.pixels) {
      const double rho = std::hypot(p.row - cell.centroid.row, p.col - cell.centroid.col) / max_d;
      double level;
      if (dark_core) {
        level = 0.2 + 0.75 * std::exp(-(rho / 0.18) * (rho / 0.18)) + 0.55 * (1.0 - std::sqrt(outer[p]));
      } else {
        level = 0.45 + 0.55 * (1.0 - rho * rho);
      }
      intensity[p] = bg + contrast * level;
    }
  }
  s.image = RgbImage(cfg.width, cfg.height, 255);
  std::normal_distribution<double> noise(0.0, 1.0);
  for (int r = 0; r < cfg.height; ++r) {
    for (int c = 0; c < cfg.width; ++c) {
      for (int ch = 0; ch < 3; ++ch) {
        double v = intensity(r, c) * tint[ch];
        if (cfg.noise_sigma > 0.0) v += cfg.noise_sigma * noise(rng);
        s.image.channel(ch, r, c) = static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 255L));
      }
    }
  }
  return s;
}

std::vector<SynthSample> synth_dataset(const SynthConfig& config) {
  std::vector<SynthSample> out;
  for (int i = 0; i < config.n_images; ++i) out.push_back(synth_sample(config, i));
  return out;
}

DatasetManifest synth_generate(const SynthConfig& config, const fs::path& out_dir) {
  const auto samples = synth_dataset(config);
  fs::create_directories(out_dir);
  DatasetManifest manifest;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    char stem[32];
    std::snprintf(stem, sizeof stem, "%03zu", i);
    const fs::path image = out_dir / ("img_" + std::string(stem) + ".ppm");
    const fs::path ann = out_dir / ("ann_" + std::string(stem) + ".txt");
    save_image(image, s.image);
    auto records = s.records;
    if (s.split == Split::Test)
      for (auto& r : records) r.polygon.clear();
    write_file_atomic(ann, format_annotations(config.width, config.height, records));
    manifest.entries.push_back({image, ann, s.split});
  }
  save_manifest(out_dir / "manifest.txt", manifest);
  return manifest;
}

}  // namespace ddist
