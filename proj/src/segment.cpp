#include "ddist/segment.hpp"

#include <algorithm>
#include <array>

namespace ddist {

void SegmentConfig::validate() const {
  if (!(outer_threshold > 0.0 && outer_threshold < 1.0)) throw Error("outer threshold must lie in (0,1)");
  if (!(foreground_threshold > 0.0 && foreground_threshold < 1.0))
    throw Error("foreground threshold must lie in (0,1)");
  if (min_marker_area < 0) throw Error("minimum marker area must be non-negative");
  if (majority_window < 1 || majority_window % 2 == 0) throw Error("majority window must be odd and positive");
}

LabelMap identify_markers(const DetectionResult& detections, const ScalarMap& outer_map,
                          const SegmentConfig& config) {
  config.validate();
  const int W = outer_map.width(), H = outer_map.height();
  LabelMap labels(W, H, 0);
  Grid<int> dist(W, H, -1);
  std::vector<Point> frontier;
  for (std::size_t i = 0; i < detections.detections.size(); ++i) {
    for (Point p : detections.detections[i].plateau) {
      if (!labels.contains(p)) throw Error("detection outside the outer map");
      if (labels[p] != 0) continue;
      labels[p] = static_cast<std::int32_t>(i + 1);
      dist[p] = 0;
      frontier.push_back(p);
    }
  }

  // Layered multi-source BFS; a pixel first reached at distance d + 1 takes the
  // smallest label among its distance-d neighbours.
  const auto offsets = neighbor_offsets(Connectivity::Eight);
  std::vector<Point> next;
  for (int d = 0; !frontier.empty(); ++d) {
    next.clear();
    for (Point p : frontier) {
      for (Point o : offsets) {
        const Point q{p.row + o.row, p.col + o.col};
        if (!labels.contains(q) || !(outer_map[q] > config.outer_threshold)) continue;
        if (dist[q] == -1) {
          dist[q] = d + 1;
          labels[q] = labels[p];
          next.push_back(q);
        } else if (dist[q] == d + 1 && labels[p] < labels[q]) {
          labels[q] = labels[p];
        }
      }
    }
    frontier.swap(next);
  }

  std::vector<int> area(detections.detections.size() + 1, 0);
  for (auto v : labels.values()) ++area[v];
  for (auto& v : labels.values())
    if (v > 0 && area[v] < config.min_marker_area) v = 0;
  return compact_labels(labels);
}

GrowResult grow_markers(const LabelMap& markers, const ScalarMap& class_map, const ScalarMap& outer_map,
                        const SegmentConfig& config) {
  config.validate();
  if (!markers.same_shape(class_map.grid) || !markers.same_shape(outer_map.grid))
    throw Error("marker and map dimensions differ");
  GrowResult result{markers, 0};
  auto& labels = result.labels;
  const int n = max_label(labels);
  if (n == 0) return result;

  constexpr std::array<Point, 4> four{{{-1, 0}, {0, -1}, {0, 1}, {1, 0}}};
  auto foreground = [&](Point p) { return class_map[p] > config.foreground_threshold; };

  // Pixels of each marker that may still touch an unassigned pixel.
  std::vector<std::vector<Point>> edge(n + 1);
  for (int r = 0; r < labels.height(); ++r)
    for (int c = 0; c < labels.width(); ++c)
      if (labels(r, c) > 0) edge[labels(r, c)].push_back({r, c});

  Grid<int> stamp(labels.width(), labels.height(), 0);
  int stamp_id = 0;
  std::vector<Point> frontier_fg, best_fg;

  while (true) {
    int best = 0;
    double best_avg = 0.0;
    for (int m = 1; m <= n; ++m) {
      ++stamp_id;
      frontier_fg.clear();
      std::size_t total = 0;
      double sum = 0.0;
      auto& e = edge[m];
      std::size_t keep = 0;
      for (std::size_t i = 0; i < e.size(); ++i) {
        const Point p = e[i];
        bool open = false;
        for (Point o : four) {
          const Point q{p.row + o.row, p.col + o.col};
          if (!labels.contains(q) || labels[q] != 0) continue;
          open = true;
          if (stamp[q] == stamp_id) continue;
          stamp[q] = stamp_id;
          ++total;
          if (foreground(q)) {
            frontier_fg.push_back(q);
            sum += outer_map[q];
          }
        }
        if (open) e[keep++] = p;
      }
      e.resize(keep);
      if (frontier_fg.empty() || 2 * frontier_fg.size() < total) continue;
      const double avg = sum / static_cast<double>(frontier_fg.size());
      if (best == 0 || avg > best_avg) {
        best = m;
        best_avg = avg;
        best_fg = frontier_fg;
      }
    }
    if (best == 0) break;
    for (Point q : best_fg) {
      labels[q] = best;
      edge[best].push_back(q);
    }
    ++result.iterations;
  }
  return result;
}

LabelMap majority_smooth(const LabelMap& labels, int window) {
  if (window < 1 || window % 2 == 0) throw Error("majority window must be odd and positive");
  const int rad = window / 2;
  LabelMap out(labels.width(), labels.height(), 0);
  std::vector<std::int32_t> votes;
  for (int r = 0; r < labels.height(); ++r) {
    for (int c = 0; c < labels.width(); ++c) {
      votes.clear();
      for (int rr = std::max(0, r - rad); rr <= std::min(labels.height() - 1, r + rad); ++rr)
        for (int cc = std::max(0, c - rad); cc <= std::min(labels.width() - 1, c + rad); ++cc)
          votes.push_back(labels(rr, cc));
      std::sort(votes.begin(), votes.end());
      const std::int32_t own = labels(r, c);
      std::int32_t winner = own;
      std::size_t best = 0, own_count = 0;
      for (std::size_t i = 0; i < votes.size();) {
        std::size_t j = i;
        while (j < votes.size() && votes[j] == votes[i]) ++j;
        const std::size_t count = j - i;
        if (votes[i] == own) own_count = count;
        if (count > best) {
          best = count;
          winner = votes[i];
        }
        i = j;
      }
      out(r, c) = own_count == best ? own : winner;
    }
  }
  return out;
}

SegmentationResult segment(const ScalarMap& inner_map, const ScalarMap& outer_map, const ScalarMap& class_map,
                           const DetectConfig& detect_config, const SegmentConfig& segment_config) {
  if (!inner_map.grid.same_shape(outer_map.grid) || !inner_map.grid.same_shape(class_map.grid))
    throw Error("segmentation maps must share dimensions");
  SegmentationResult r;
  r.detections = detect_cells(inner_map, detect_config);
  r.markers = identify_markers(r.detections, outer_map, segment_config);
  r.grown = grow_markers(r.markers, class_map, outer_map, segment_config);
  r.labels = majority_smooth(r.grown.labels, segment_config.majority_window);
  return r;
}

}  // namespace ddist
