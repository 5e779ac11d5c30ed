#include "ddist/evalkit.hpp"

#include <sstream>

#include "ddist/io.hpp"

namespace ddist {

MatchResult match_one_to_one(const std::vector<Point>& markers, const std::vector<Point>& detections,
                             double threshold) {
  if (!(threshold > 0.0)) throw Error("match threshold must be positive");
  MatchResult r;
  r.n_markers = static_cast<int>(markers.size());
  r.n_detections = static_cast<int>(detections.size());
  r.distance_threshold = threshold;
  const double t2 = threshold * threshold;

  std::vector<int> marker_hits(markers.size(), 0), marker_partner(markers.size(), -1);
  std::vector<int> det_hits(detections.size(), 0);
  for (std::size_t m = 0; m < markers.size(); ++m) {
    for (std::size_t d = 0; d < detections.size(); ++d) {
      const double dr = markers[m].row - detections[d].row, dc = markers[m].col - detections[d].col;
      if (dr * dr + dc * dc < t2) {
        ++marker_hits[m];
        ++det_hits[d];
        marker_partner[m] = static_cast<int>(d);
      }
    }
  }
  for (std::size_t m = 0; m < markers.size(); ++m)
    if (marker_hits[m] == 1 && det_hits[marker_partner[m]] == 1)
      r.true_positives.emplace_back(static_cast<int>(m), marker_partner[m]);
  return r;
}

Prf prf(int tp, int n_detections, int n_markers) {
  Prf p;
  p.precision = n_detections > 0 ? static_cast<double>(tp) / n_detections : 1.0;
  p.recall = n_markers > 0 ? static_cast<double>(tp) / n_markers : 1.0;
  const double s = p.precision + p.recall;
  p.f_score = s > 0.0 ? 2.0 * p.precision * p.recall / s : 0.0;
  return p;
}

Prf prf(const MatchResult& match) { return prf(match.tp(), match.n_detections, match.n_markers); }

SweepResult sweep_h(const std::vector<AnnotatedMap>& maps, const std::vector<double>& candidates,
                    const DetectConfig& base, double match_threshold) {
  if (candidates.empty()) throw Error("no h candidates");
  SweepResult result;
  double best_f = -1.0;
  for (double h : candidates) {
    DetectConfig cfg = base;
    cfg.h = h;
    SweepRow row;
    row.h = h;
    for (const auto& m : maps) {
      const auto det = detect_cells(m.inner, cfg);
      const auto match = match_one_to_one(m.markers, det.centers(), match_threshold);
      row.tp += match.tp();
      row.n_detections += match.n_detections;
      row.n_markers += match.n_markers;
    }
    row.scores = prf(row.tp, row.n_detections, row.n_markers);
    if (row.scores.f_score > best_f || (row.scores.f_score == best_f && h < result.best_h)) {
      best_f = row.scores.f_score;
      result.best_h = h;
    }
    result.table.push_back(row);
  }
  return result;
}

SweepResult sweep_h(const NetworkParams& params, const NetworkConfig& net_config,
                    const std::vector<AnnotatedImage>& images, const std::vector<double>& candidates,
                    const DetectConfig& base, double match_threshold) {
  const auto inner = net_config.head_index(HeadName::Inner);
  if (!inner) throw Error("network has no inner-distance head");
  std::vector<AnnotatedMap> maps;
  for (const auto& img : images)
    maps.push_back({predict_stitched(params, net_config, img.image, base)[*inner], img.markers});
  return sweep_h(maps, candidates, base, match_threshold);
}

std::string sweep_csv(const SweepResult& sweep) {
  std::ostringstream os;
  os << "h,tp,n_detections,n_markers,precision,recall,f_score\n";
  for (const auto& r : sweep.table)
    os << format_double(r.h) << ',' << r.tp << ',' << r.n_detections << ',' << r.n_markers << ','
       << format_double(r.scores.precision) << ',' << format_double(r.scores.recall) << ','
       << format_double(r.scores.f_score) << '\n';
  return os.str();
}

}  // namespace ddist
