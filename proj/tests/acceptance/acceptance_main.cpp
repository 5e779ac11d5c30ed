#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>

#include "../gradcheck.hpp"
#include "../oracles.hpp"
#include "ddist/pipeline.hpp"

using namespace ddist;

namespace {

constexpr int kEndToEndEpochs = 30;
constexpr double kMatchThreshold = 8.0;

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

int failures = 0;

void report(int id, bool ok, const std::string& what, const std::string& detail) {
  std::printf("%s criterion %d: %s (%s)\n", ok ? "PASS" : "FAIL", id, what.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!ok) ++failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

void distance_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(101);
  double worst = 0.0;
  int cells = 0;
  for (int k = 0; k < 10; ++k) {
    const auto a = oracle::random_annotations(rng, 64, 64, 3, 8);
    cells += static_cast<int>(a.cells.size());
    const auto inner = inner_distance_map(a), outer = outer_distance_map(a);
    const auto ri = oracle::inner_map(a, TargetConfig{}.alpha), ro = oracle::outer_map(a);
    for (std::size_t i = 0; i < ri.size(); ++i) {
      worst = std::max(worst, std::abs(inner.grid.values()[i] - ri.values()[i]));
      worst = std::max(worst, std::abs(outer.grid.values()[i] - ro.values()[i]));
    }
  }
  const double s = seconds_since(t0);
  report(1, worst <= 1e-9 && s < 10.0, "inner/outer maps equal brute force on 10 random sets",
         std::to_string(cells) + " cells, max error " + fmt("%.3g", worst) + ", " + fmt("%.2f", s) + " s");
}

void outer_normalization() {
  bool ok = true;
  std::string detail;
  for (int radius : {5, 10}) {
    AnnotationSet a;
    a.width = a.height = 32;
    std::vector<Point> px;
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c)
        if ((r - 16) * (r - 16) + (c - 16) * (c - 16) <= radius * radius) px.push_back({r, c});
    a.cells.push_back(make_cell(1, px));
    const auto m = outer_distance_map(a);
    std::set<Point> in(px.begin(), px.end());
    double mx = 0.0;
    bool background_zero = true;
    for (int r = 0; r < 32; ++r)
      for (int c = 0; c < 32; ++c) {
        if (in.count({r, c})) mx = std::max(mx, m(r, c));
        else if (m(r, c) != 0.0) background_zero = false;
      }
    ok = ok && mx == 1.0 && background_zero;
    detail += (detail.empty() ? "" : ", ") + std::string("r=") + std::to_string(radius) + " max " + fmt("%.17g", mx) +
              (background_zero ? " bg 0" : " bg nonzero");
  }
  report(2, ok, "outer distance peaks at exactly 1 per disk, background 0", detail);
}

void h_maxima_oracle() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(303);
  const std::vector<double> hs{0.0, 0.1, 0.2, 0.5};
  int mismatches = 0, identity = 0, monotone = 0;
  for (int k = 0; k < 50; ++k) {
    const auto f = oracle::random_map(rng, 16, 16, 11);
    std::vector<ScalarMap> outs;
    for (double h : hs) {
      outs.push_back(h_maxima(f, h));
      mismatches += outs.back().grid != oracle::h_maxima(f, h, Connectivity::Eight).grid;
    }
    identity += outs[0].grid != f.grid;
    for (std::size_t j = 1; j < outs.size(); ++j)
      for (std::size_t i = 0; i < f.grid.size(); ++i)
        if (outs[j].grid.values()[i] > outs[j - 1].grid.values()[i]) {
          ++monotone;
          break;
        }
  }
  const double s = seconds_since(t0);
  report(3, mismatches == 0 && identity == 0 && monotone == 0 && s < 5.0,
         "h-maxima equals naive reconstruction on 50 maps x 4 h",
         std::to_string(mismatches) + " mismatches, " + std::to_string(identity) + " h=0 changes, " +
             std::to_string(monotone) + " monotonicity breaks, " + fmt("%.2f", s) + " s");
}

void regional_maxima_oracle() {
  std::mt19937_64 rng(404);
  int mismatches = 0, plateaus = 0;
  for (int k = 0; k < 100; ++k) {
    const auto f = oracle::random_map(rng, 12, 12, 6);
    std::set<std::vector<Point>> got;
    for (const auto& p : regional_maxima(f)) {
      auto px = p.pixels;
      std::sort(px.begin(), px.end());
      got.insert(px);
    }
    plateaus += static_cast<int>(got.size());
    mismatches += got != oracle::regional_maxima(f, Connectivity::Eight);
  }
  report(4, mismatches == 0, "regional maxima equal the definitional oracle on 100 maps",
         std::to_string(plateaus) + " plateaus, " + std::to_string(mismatches) + " mismatching maps");
}

void gradient_check() {
  const auto t0 = Clock::now();
  double worst = 0.0;
  std::size_t checked = 0;
  std::string detail;
  for (const char* heads : {"single-inner", "deepdistance", "extended"}) {
    NetworkConfig cfg;
    cfg.depth = 1;
    cfg.base_channels = 2;
    cfg.tile_size = 8;
    cfg.heads = NetworkConfig::head_preset(heads);
    std::mt19937_64 rng(505);
    const auto x = gradcheck::random_input(rng, 3, 8);
    const auto t = gradcheck::random_targets(rng, cfg);
    const auto r = gradcheck::run(gradcheck::jitter_biases(init_params(cfg), rng), cfg, x, t);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
    detail += std::to_string(cfg.heads.size()) + " heads " + fmt("%.2g", r.max_rel_error) + ", ";
  }
  const double s = seconds_since(t0);
  report(5, worst <= 1e-4 && s < 60.0, "central differences agree with backprop for 1, 2 and 3 heads",
         detail + std::to_string(checked) + " parameters, " + fmt("%.2f", s) + " s");
}

void matching_oracle() {
  std::mt19937_64 rng(606);
  std::uniform_int_distribution<int> count(0, 50), coord(0, 63);
  int mismatches = 0, total_tp = 0;
  for (int k = 0; k < 200; ++k) {
    std::vector<Point> m(count(rng)), d(count(rng));
    for (auto& p : m) p = {coord(rng), coord(rng)};
    for (auto& p : d) p = {coord(rng), coord(rng)};
    const int tp = match_one_to_one(m, d, kMatchThreshold).tp();
    total_tp += tp;
    mismatches += tp != oracle::match_tp(m, d, kMatchThreshold);
  }
  const int crowded = match_one_to_one({{20, 20}}, {{20, 22}, {22, 20}}, kMatchThreshold).tp();
  report(6, mismatches == 0 && crowded == 0, "one-to-one TP counts equal the exhaustive oracle on 200 sets",
         std::to_string(total_tp) + " TP total, " + std::to_string(mismatches) + " mismatches, two-near-one TP " +
             std::to_string(crowded));
}

struct Row {
  std::string name;
  std::size_t heads = 0;
  TrainHistory history;
  double final_train_loss = 0.0;
  std::optional<Prf> test;
};

std::string table_csv(const std::vector<Row>& rows) {
  std::ostringstream out;
  out << "configuration,heads,epochs,selected_epoch,initial_train_loss,final_train_loss,loss_ratio,"
         "best_val_loss,test_f_score\n";
  for (const auto& r : rows) {
    out << r.name << "," << r.heads << "," << r.history.train_loss.size() << "," << r.history.selected_epoch + 1
        << "," << format_double(r.history.initial_train_loss) << "," << format_double(r.final_train_loss) << ","
        << format_double(r.final_train_loss / r.history.initial_train_loss) << ","
        << format_double(r.history.val_loss[r.history.selected_epoch]) << ","
        << (r.test ? format_double(r.test->f_score) : std::string()) << "\n";
  }
  return out.str();
}

}  // namespace

int main() {
  distance_oracle();
  outer_normalization();
  h_maxima_oracle();
  regional_maxima_oracle();
  gradient_check();
  matching_oracle();

  PipelineConfig cfg;
  cfg.net.heads = NetworkConfig::head_preset("extended");
  cfg.train.max_epochs = kEndToEndEpochs;
  cfg.eval.match_threshold = kMatchThreshold;
  const auto samples = to_samples(synth_dataset(cfg.synth));

  const auto t0 = Clock::now();
  const auto rep = run_pipeline(samples, cfg);
  const double s = seconds_since(t0);
  int n_test = 0;
  for (const auto& smp : samples) n_test += smp.split == Split::Test;
  report(7, rep.scores.f_score >= 0.90 && s <= 900.0,
         "extended model pooled test f-score >= 0.90 at 8 px on synthetic data",
         "F " + fmt("%.4f", rep.scores.f_score) + " P " + fmt("%.4f", rep.scores.precision) + " R " +
             fmt("%.4f", rep.scores.recall) + ", h " + format_double(rep.sweep.best_h) + ", " +
             std::to_string(rep.tp) + "/" + std::to_string(rep.n_detections) + "/" + std::to_string(rep.n_markers) +
             " tp/det/markers on " + std::to_string(n_test) + " images, " +
             std::to_string(rep.training.history.train_loss.size()) + " epochs, " + fmt("%.0f", s) + " s");

  std::vector<Row> rows;
  {
    Row r{"extended", cfg.net.heads.size(), rep.training.history, 0.0, rep.scores};
    r.final_train_loss = evaluate_loss(rep.training.params, cfg.net, split_tiles(samples, Split::Train, cfg));
    rows.push_back(r);
  }
  bool single_ok = true;
  std::string single_detail;
  for (const char* preset : {"single-inner", "single-outer", "single-classification"}) {
    PipelineConfig c = cfg;
    c.net.heads = NetworkConfig::head_preset(preset);
    const auto tr = split_tiles(samples, Split::Train, c);
    const auto result = train(tr, split_tiles(samples, Split::Val, c), c.net, c.train);
    Row r{preset, c.net.heads.size(), result.history, evaluate_loss(result.params, c.net, tr), std::nullopt};
    if (c.net.head_index(HeadName::Inner)) {
      std::vector<AnnotatedMap> selection, test;
      for (const auto& smp : samples) {
        auto maps = predict_stitched(result.params, c.net, smp.image, c.detect);
        (smp.split == Split::Test ? test : selection).push_back({std::move(maps[0]), smp.annotations.markers()});
      }
      const auto sw = sweep_h(selection, c.eval.h_candidates, c.detect, kMatchThreshold);
      r.test = sweep_h(test, {sw.best_h}, c.detect, kMatchThreshold).table[0].scores;
    }
    const double ratio = r.final_train_loss / r.history.initial_train_loss;
    single_ok = single_ok && ratio <= 0.5;
    single_detail += std::string(preset) + " " + fmt("%.3f", ratio) + ", ";
    rows.push_back(r);
  }
  const auto csv = table_csv(rows);
  std::ofstream("synthetic_table.csv") << csv;
  report(8, single_ok, "each single-task model trains to <= 0.5 x its initial loss",
         single_detail + "table in synthetic_table.csv");
  std::cout << csv;

  const auto& table = rep.sweep.table;
  std::size_t arg = 0;
  for (std::size_t i = 1; i < table.size(); ++i)
    if (table[i].scores.f_score > table[arg].scores.f_score) arg = i;
  bool unimodal = true;
  for (std::size_t i = 0; i + 1 < table.size(); ++i) {
    const double a = table[i].scores.f_score, b = table[i + 1].scores.f_score;
    if (i < arg ? b < a : b > a) unimodal = false;
  }
  std::string curve;
  for (const auto& row : table) curve += format_double(row.h) + ":" + fmt("%.3f", row.scores.f_score) + " ";
  report(9, unimodal && rep.sweep.best_h == table[arg].h, "h sweep is unimodal or flat and returns its argmax",
         curve + "-> " + format_double(rep.sweep.best_h));

  bool seg_ok = !rep.test.empty();
  int regions = 0, over_bound = 0;
  for (const auto& img : rep.test) {
    const auto& sg = img.segmentation;
    const int markers = max_label(sg.markers);
    std::set<int> present;
    for (int v : sg.labels.values())
      if (v > 0) present.insert(v);
    std::map<int, int> centers;
    for (const auto& d : sg.detections.detections)
      if (const int l = sg.labels[d.center]; l > 0) ++centers[l];
    bool one_each = true;
    for (int l : present) one_each = one_each && centers[l] == 1;
    int foreground = 0;
    for (double v : img.maps[*cfg.net.head_index(HeadName::Classification)].grid.values())
      foreground += v > cfg.segment.foreground_threshold;
    over_bound += sg.grown.iterations > foreground;
    seg_ok = seg_ok && one_each && static_cast<int>(present.size()) == markers && markers > 0;
    regions += static_cast<int>(present.size());
  }
  seg_ok = seg_ok && over_bound == 0;
  report(10, seg_ok, "segmentation regions are disjoint, one center each, one per surviving marker",
         std::to_string(regions) + " regions on " + std::to_string(rep.test.size()) + " images, " +
             std::to_string(over_bound) + " images over the iteration bound");

  return failures == 0 ? 0 : 1;
}
