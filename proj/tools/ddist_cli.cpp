#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>

#include "ddist/pipeline.hpp"

namespace fs = std::filesystem;
using namespace ddist;

namespace {

struct Globals {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
  std::vector<std::string> overrides;
  bool quiet = false;
};

PipelineConfig resolve_config(const Globals& g) {
  PipelineConfig cfg = g.config_path.empty() ? PipelineConfig{} : load_config(g.config_path);
  for (const auto& kv : g.overrides) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw Error("--set expects key=value, got '" + kv + "'");
    cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
  }
  if (g.seed) cfg.set_seed(*g.seed);
  return cfg;
}

std::string stem_of(const fs::path& p) { return p.stem().string(); }

std::string history_csv(const TrainHistory& h) {
  std::string out = "epoch,train_loss,val_loss\n0," + format_double(h.initial_train_loss) + ",\n";
  for (std::size_t i = 0; i < h.train_loss.size(); ++i)
    out += std::to_string(i + 1) + "," + format_double(h.train_loss[i]) + "," + format_double(h.val_loss[i]) + "\n";
  return out;
}

std::string prf_csv(const std::vector<std::string>& names, const std::vector<MatchResult>& matches) {
  std::string out = "image,tp,n_detections,n_markers,precision,recall,f_score\n";
  int tp = 0, nd = 0, nm = 0;
  auto row = [&](const std::string& name, int t, int d, int m) {
    const auto s = prf(t, d, m);
    out += name + "," + std::to_string(t) + "," + std::to_string(d) + "," + std::to_string(m) + "," +
           format_double(s.precision) + "," + format_double(s.recall) + "," + format_double(s.f_score) + "\n";
  };
  for (std::size_t i = 0; i < matches.size(); ++i) {
    row(names[i], matches[i].tp(), matches[i].n_detections, matches[i].n_markers);
    tp += matches[i].tp();
    nd += matches[i].n_detections;
    nm += matches[i].n_markers;
  }
  row("pooled", tp, nd, nm);
  return out;
}

std::vector<Point> centers_of(const std::vector<DetectionRecord>& records) {
  std::vector<Point> out;
  for (const auto& r : records) out.push_back(r.center);
  return out;
}

DatasetManifest manifest_or_synth(const std::string& manifest, const PipelineConfig& cfg, const fs::path& out) {
  if (!manifest.empty()) return load_manifest(manifest);
  return synth_generate(cfg.synth, out / "data");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DeepDistance cell detection and segmentation"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  app.add_option("--seed", g.seed, "seed for synthesis, initialization and training");
  app.add_option("--out", g.out, "output directory");
  app.add_option("--set", g.overrides, "config override key=value (repeatable)");
  app.add_flag("-q,--quiet", g.quiet, "no progress output");

  std::string manifest, annotations, image, network, detections_path;
  std::optional<double> h_override;
  std::string split_name = "selection";

  auto* synth = app.add_subcommand("synth", "generate the synthetic dataset");

  auto* gen = app.add_subcommand("gen-targets", "inner, outer and classification maps from annotations");
  gen->add_option("--annotations", annotations, "annotation file")->required()->check(CLI::ExistingFile);

  auto* train_cmd = app.add_subcommand("train", "train a network on the train/val splits of a manifest");
  train_cmd->add_option("--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);

  auto* detect = app.add_subcommand("detect", "detect cell centers in one image");
  detect->add_option("--network", network, "trained network")->required()->check(CLI::ExistingFile);
  detect->add_option("--image", image, "PPM/PGM image")->required()->check(CLI::ExistingFile);
  detect->add_option("--h-value", h_override, "h-maxima height");

  auto* seg = app.add_subcommand("segment", "detect and segment cells in one image");
  seg->add_option("--network", network, "trained network")->required()->check(CLI::ExistingFile);
  seg->add_option("--image", image, "PPM/PGM image")->required()->check(CLI::ExistingFile);
  seg->add_option("--h-value", h_override, "h-maxima height");

  auto* eval = app.add_subcommand("eval", "score a detections CSV against marker annotations");
  eval->add_option("--detections", detections_path, "detections CSV")->required()->check(CLI::ExistingFile);
  eval->add_option("--annotations", annotations, "annotation file")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep-h", "f-score per candidate h on a manifest split");
  sweep->add_option("--network", network, "trained network")->required()->check(CLI::ExistingFile);
  sweep->add_option("--manifest", manifest, "dataset manifest")->required()->check(CLI::ExistingFile);
  sweep->add_option("--split", split_name, "selection (train+val), train, val or test");

  auto* pipe = app.add_subcommand("pipeline", "synthesize (or load), train, select h, detect, segment, evaluate");
  pipe->add_option("--manifest", manifest, "dataset manifest; synthesized into <out>/data when omitted")
      ->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = resolve_config(g);
    const fs::path out = g.out;
    fs::create_directories(out);
    std::ostream* log = g.quiet ? nullptr : &std::cerr;

    if (*synth) {
      const auto m = synth_generate(cfg.synth, out);
      if (log) *log << "wrote " << m.entries.size() << " images to " << out.string() << "\n";
    } else if (*gen) {
      const auto ann = load_annotations(annotations);
      if (!ann.fully_annotated()) throw Error("annotation file has cells without regions");
      const auto t = make_targets(ann, cfg.targets);
      const auto stem = stem_of(annotations);
      save_map(out / (stem + "_inner.pgm"), t.inner);
      save_map(out / (stem + "_outer.pgm"), t.outer);
      save_map(out / (stem + "_class.pgm"), t.classification);
    } else if (*train_cmd) {
      const auto samples = load_dataset(load_manifest(manifest));
      const auto tr = split_tiles(samples, Split::Train, cfg);
      const auto va = split_tiles(samples, Split::Val, cfg);
      if (tr.empty() || va.empty()) throw Error("manifest needs train and val entries");
      const auto result = train(tr, va, cfg.net, cfg.train, log);
      save_network(out / "network.ddn", cfg.net, result.params);
      write_file_atomic(out / "history.csv", history_csv(result.history));
    } else if (*detect || *seg) {
      const auto [net_cfg, params] = load_network(network);
      auto dcfg = cfg.detect;
      if (h_override) dcfg.h = *h_override;
      const auto img = load_image(image);
      const auto maps = predict_stitched(params, net_cfg, img, dcfg);
      const auto inner = net_cfg.head_index(HeadName::Inner);
      if (!inner) throw Error("network has no inner distance head");
      const auto stem = stem_of(image);
      if (*detect) {
        const auto res = detect_cells(maps[*inner], dcfg);
        save_map(out / (stem + "_inner.pgm"), maps[*inner]);
        save_detections(out / (stem + "_detections.csv"), res);
        render_overlay(img, res, out / (stem + "_detections.ppm"));
      } else {
        const auto o = net_cfg.head_index(HeadName::Outer);
        const auto c = net_cfg.head_index(HeadName::Classification);
        if (!o || !c) throw Error("segmentation needs outer distance and classification heads");
        const auto res = segment(maps[*inner], maps[*o], maps[*c], dcfg, cfg.segment);
        save_detections(out / (stem + "_detections.csv"), res.detections);
        save_labels(out / (stem + "_labels.pgm"), res.labels);
        render_overlay(img, res.labels, out / (stem + "_labels.ppm"));
      }
    } else if (*eval) {
      const auto ann = load_annotations(annotations);
      const auto m = match_one_to_one(ann.markers(), centers_of(load_detections(detections_path)),
                                      cfg.eval.match_threshold);
      const auto csv = prf_csv({stem_of(detections_path)}, {m});
      write_file_atomic(out / "eval.csv", csv);
      std::cout << csv;
    } else if (*sweep) {
      const auto [net_cfg, params] = load_network(network);
      std::optional<Split> only;
      if (split_name != "selection") only = split_from_string(split_name);
      std::vector<AnnotatedImage> images;
      for (const auto& e : load_manifest(manifest).entries) {
        if (only ? e.split != *only : e.split == Split::Test) continue;
        auto s = load_sample(e);
        images.push_back({std::move(s.image), s.annotations.markers()});
      }
      if (images.empty()) throw Error("no images in split '" + split_name + "'");
      const auto res = sweep_h(params, net_cfg, images, cfg.eval.h_candidates, cfg.detect, cfg.eval.match_threshold);
      write_file_atomic(out / "sweep.csv", sweep_csv(res));
      std::cout << sweep_csv(res) << "best_h," << format_double(res.best_h) << "\n";
    } else if (*pipe) {
      const auto m = manifest_or_synth(manifest, cfg, out);
      const auto samples = load_dataset(m);
      const auto report = run_pipeline(samples, cfg, log);
      save_network(out / "network.ddn", cfg.net, report.training.params);
      write_file_atomic(out / "history.csv", history_csv(report.training.history));
      write_file_atomic(out / "sweep.csv", sweep_csv(report.sweep));
      std::vector<std::string> names;
      std::vector<MatchResult> matches;
      for (const auto& r : report.test) {
        const auto& entry = m.entries[r.sample_index];
        const auto stem = stem_of(entry.image);
        const auto& img = samples[r.sample_index].image;
        save_detections(out / (stem + "_detections.csv"), r.segmentation.detections);
        render_overlay(img, r.segmentation.detections, out / (stem + "_detections.ppm"));
        if (r.segmentation.labels.width() > 0) {
          save_labels(out / (stem + "_labels.pgm"), r.segmentation.labels);
          render_overlay(img, r.segmentation.labels, out / (stem + "_labels.ppm"));
        }
        names.push_back(stem);
        matches.push_back(r.match);
      }
      const auto csv = prf_csv(names, matches);
      write_file_atomic(out / "eval.csv", csv);
      std::cout << "h," << format_double(report.sweep.best_h) << "\n" << csv;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
