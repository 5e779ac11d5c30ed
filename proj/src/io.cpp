#include "ddist/io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace ddist {

namespace fs = std::filesystem;

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

void write_file_atomic(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  fs::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) {
      out.close();
      fs::remove(tmp);
      throw Error("short write to " + tmp.string());
    }
  }
  fs::rename(tmp, path);
}

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  if (ec != std::errc()) throw Error("cannot format number");
  return {buf.data(), end};
}

double parse_double(const std::string& s) {
  double v = 0.0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw Error("invalid number '" + s + "'");
  return v;
}

int parse_int(const std::string& s) {
  int v = 0;
  auto [end, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || end != s.data() + s.size()) throw Error("invalid integer '" + s + "'");
  return v;
}

// NetPBM ---------------------------------------------------------------------

namespace {

struct PnmHeader {
  char kind = 0;  // '5' or '6'
  int width = 0;
  int height = 0;
  int maxval = 0;
  std::size_t offset = 0;
};

PnmHeader parse_pnm_header(const std::string& bytes) {
  if (bytes.size() < 2 || bytes[0] != 'P' || (bytes[1] != '5' && bytes[1] != '6'))
    throw Error("malformed header: expected binary P5 or P6");
  PnmHeader h;
  h.kind = bytes[1];
  std::size_t pos = 2;
  auto next_int = [&]() {
    while (pos < bytes.size()) {
      if (bytes[pos] == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < bytes.size() && std::isdigit(static_cast<unsigned char>(bytes[pos]))) ++pos;
    if (start == pos) throw Error("malformed header: expected a number");
    return parse_int(bytes.substr(start, pos - start));
  };
  h.width = next_int();
  h.height = next_int();
  h.maxval = next_int();
  if (pos >= bytes.size() || !std::isspace(static_cast<unsigned char>(bytes[pos])))
    throw Error("malformed header: missing separator before payload");
  h.offset = pos + 1;
  if (h.width <= 0 || h.height <= 0) throw Error("malformed header: non-positive dimensions");
  if (h.maxval <= 0 || h.maxval > 65535) throw Error("malformed header: maxval out of range");
  return h;
}

std::vector<std::uint16_t> read_samples(const std::string& bytes, const PnmHeader& h, std::size_t count) {
  const std::size_t bps = h.maxval > 255 ? 2 : 1;
  if (bytes.size() < h.offset + count * bps) throw Error("truncated payload");
  std::vector<std::uint16_t> out(count);
  const auto* p = reinterpret_cast<const unsigned char*>(bytes.data() + h.offset);
  for (std::size_t i = 0; i < count; ++i) {
    out[i] = bps == 2 ? static_cast<std::uint16_t>((p[2 * i] << 8) | p[2 * i + 1]) : p[i];
    if (out[i] > h.maxval) throw Error("sample exceeds maxval");
  }
  return out;
}

void append_header(std::string& out, char kind, int w, int h, int maxval) {
  out += 'P';
  out += kind;
  out += '\n' + std::to_string(w) + ' ' + std::to_string(h) + '\n' + std::to_string(maxval) + '\n';
}

void append_sample(std::string& out, std::uint16_t v, bool wide) {
  if (wide) out.push_back(static_cast<char>(v >> 8));
  out.push_back(static_cast<char>(v & 0xff));
}

}  // namespace

RgbImage decode_image(const std::string& bytes) {
  const auto h = parse_pnm_header(bytes);
  RgbImage img(h.width, h.height, h.maxval);
  const std::size_t n = static_cast<std::size_t>(h.width) * h.height;
  if (h.kind == '6') {
    const auto s = read_samples(bytes, h, 3 * n);
    for (std::size_t i = 0; i < n; ++i) {
      img.red[i] = s[3 * i];
      img.green[i] = s[3 * i + 1];
      img.blue[i] = s[3 * i + 2];
    }
  } else {
    const auto s = read_samples(bytes, h, n);
    img.red = s;
    img.green = s;
    img.blue = s;
  }
  return img;
}

std::string encode_image(const RgbImage& image) {
  std::string out;
  append_header(out, '6', image.width, image.height, image.max_value);
  const bool wide = image.max_value > 255;
  const std::size_t n = image.red.size();
  out.reserve(out.size() + n * 3 * (wide ? 2 : 1));
  for (std::size_t i = 0; i < n; ++i) {
    append_sample(out, image.red[i], wide);
    append_sample(out, image.green[i], wide);
    append_sample(out, image.blue[i], wide);
  }
  return out;
}

RgbImage load_image(const fs::path& path) {
  try {
    return decode_image(read_file(path));
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

void save_image(const fs::path& path, const RgbImage& image) { write_file_atomic(path, encode_image(image)); }

std::string encode_map(const ScalarMap& map) {
  std::string out;
  append_header(out, '5', map.width(), map.height(), 65535);
  for (double v : map.grid.values()) {
    const double c = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    append_sample(out, static_cast<std::uint16_t>(std::lround(65535.0 * c)), true);
  }
  return out;
}

ScalarMap decode_map(const std::string& bytes, MapRole role) {
  const auto h = parse_pnm_header(bytes);
  if (h.kind != '5') throw Error("map files must be P5");
  const auto s = read_samples(bytes, h, static_cast<std::size_t>(h.width) * h.height);
  ScalarMap m(h.width, h.height, role);
  auto dst = m.grid.values();
  for (std::size_t i = 0; i < s.size(); ++i) dst[i] = static_cast<double>(s[i]) / h.maxval;
  return m;
}

void save_map(const fs::path& path, const ScalarMap& map) { write_file_atomic(path, encode_map(map)); }

ScalarMap load_map(const fs::path& path, MapRole role) { return decode_map(read_file(path), role); }

void save_labels(const fs::path& path, const LabelMap& labels) {
  std::string out;
  append_header(out, '5', labels.width(), labels.height(), 65535);
  for (auto v : labels.values()) {
    if (v < 0 || v > 65535) throw Error("label out of 16-bit range");
    append_sample(out, static_cast<std::uint16_t>(v), true);
  }
  write_file_atomic(path, out);
}

LabelMap load_labels(const fs::path& path) {
  const auto bytes = read_file(path);
  const auto h = parse_pnm_header(bytes);
  if (h.kind != '5') throw Error("label files must be P5");
  const auto s = read_samples(bytes, h, static_cast<std::size_t>(h.width) * h.height);
  LabelMap out(h.width, h.height, 0);
  std::copy(s.begin(), s.end(), out.values().begin());
  return out;
}

// annotations ----------------------------------------------------------------

namespace {

double cross(PolygonVertex o, PolygonVertex a, PolygonVertex b) {
  return (a.row - o.row) * (b.col - o.col) - (a.col - o.col) * (b.row - o.row);
}

bool on_segment(PolygonVertex p, PolygonVertex a, PolygonVertex b) {
  return std::min(a.row, b.row) <= p.row && p.row <= std::max(a.row, b.row) && std::min(a.col, b.col) <= p.col &&
         p.col <= std::max(a.col, b.col);
}

bool segments_intersect(PolygonVertex a, PolygonVertex b, PolygonVertex c, PolygonVertex d) {
  const double d1 = cross(c, d, a), d2 = cross(c, d, b), d3 = cross(a, b, c), d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) return true;
  if (d1 == 0 && on_segment(a, c, d)) return true;
  if (d2 == 0 && on_segment(b, c, d)) return true;
  if (d3 == 0 && on_segment(c, a, b)) return true;
  if (d4 == 0 && on_segment(d, a, b)) return true;
  return false;
}

void require_simple(const std::vector<PolygonVertex>& poly) {
  const std::size_t n = poly.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto a = poly[i], b = poly[(i + 1) % n];
    if (a.row == b.row && a.col == b.col) throw Error("non-simple polygon: repeated vertex");
    for (std::size_t j = i + 1; j < n; ++j) {
      // skip edges sharing a vertex with edge i
      if (j == i + 1 || (i == 0 && j == n - 1)) continue;
      if (segments_intersect(a, b, poly[j], poly[(j + 1) % n])) throw Error("non-simple polygon");
    }
  }
}

}  // namespace

std::vector<Point> rasterize_polygon(const std::vector<PolygonVertex>& polygon, int width, int height) {
  if (polygon.size() < 3) throw Error("polygon needs at least three vertices");
  require_simple(polygon);
  double r0 = polygon[0].row, r1 = r0, c0 = polygon[0].col, c1 = c0;
  for (const auto& v : polygon) {
    r0 = std::min(r0, v.row);
    r1 = std::max(r1, v.row);
    c0 = std::min(c0, v.col);
    c1 = std::max(c1, v.col);
  }
  const int rb = std::max(0, static_cast<int>(std::ceil(r0))), re = std::min(height - 1, static_cast<int>(std::floor(r1)));
  const int cb = std::max(0, static_cast<int>(std::ceil(c0))), ce = std::min(width - 1, static_cast<int>(std::floor(c1)));
  const std::size_t n = polygon.size();
  std::vector<Point> out;
  for (int r = rb; r <= re; ++r) {
    for (int c = cb; c <= ce; ++c) {
      const PolygonVertex p{static_cast<double>(r), static_cast<double>(c)};
      bool inside = false, edge = false;
      for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const auto a = polygon[i], b = polygon[j];
        if (cross(a, b, p) == 0.0 && on_segment(p, a, b)) {
          edge = true;
          break;
        }
        if ((a.row > p.row) != (b.row > p.row)) {
          const double x = a.col + (p.row - a.row) * (b.col - a.col) / (b.row - a.row);
          if (p.col < x) inside = !inside;
        }
      }
      if (inside || edge) out.push_back({r, c});
    }
  }
  return out;
}

AnnotationSet parse_annotations(const std::string& text, std::optional<std::pair<int, int>> size) {
  std::vector<AnnotationRecord> records;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& msg) { throw Error("line " + std::to_string(line_no) + ": " + msg); };
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::vector<std::string> tok;
    for (std::string t; ls >> t;) tok.push_back(t);
    if (tok.empty()) continue;
    try {
      if (tok[0] == "size") {
        if (tok.size() != 3) fail("size takes width and height");
        size = std::pair{parse_int(tok[1]), parse_int(tok[2])};
      } else if (tok[0] == "cell") {
        if (tok.size() != 2) fail("cell takes one id");
        records.push_back({parse_int(tok[1]), std::nullopt, {}});
      } else if (tok[0] == "marker") {
        if (records.empty()) fail("marker before any cell");
        if (tok.size() != 3) fail("marker takes row and col");
        records.back().marker = Point{parse_int(tok[1]), parse_int(tok[2])};
      } else if (tok[0] == "polygon") {
        if (records.empty()) fail("polygon before any cell");
        if (tok.size() < 7 || tok.size() % 2 != 1) fail("polygon takes at least three row/col pairs");
        auto& poly = records.back().polygon;
        poly.clear();
        for (std::size_t i = 1; i < tok.size(); i += 2) poly.push_back({parse_double(tok[i]), parse_double(tok[i + 1])});
      } else {
        fail("unknown keyword '" + tok[0] + "'");
      }
    } catch (const Error& e) {
      if (std::string(e.what()).rfind("line ", 0) == 0) throw;
      fail(e.what());
    }
  }
  if (!size) throw Error("annotation file lacks a size line and no image size was given");

  AnnotationSet set;
  set.width = size->first;
  set.height = size->second;
  if (set.width <= 0 || set.height <= 0) throw Error("annotation size must be positive");
  std::set<int> ids;
  for (const auto& rec : records) {
    if (!ids.insert(rec.id).second) throw Error("duplicate cell id " + std::to_string(rec.id));
    CellAnnotation cell;
    if (!rec.polygon.empty()) {
      auto pixels = rasterize_polygon(rec.polygon, set.width, set.height);
      if (pixels.empty()) throw Error("polygon of cell " + std::to_string(rec.id) + " covers no pixel");
      cell = make_cell(rec.id, std::move(pixels));
    } else if (!rec.marker) {
      throw Error("cell " + std::to_string(rec.id) + " has neither marker nor polygon");
    }
    cell.id = rec.id;
    if (rec.marker) cell.marker = *rec.marker;
    const Point m = cell.marker;
    if (m.row < 0 || m.col < 0 || m.row >= set.height || m.col >= set.width)
      throw Error("marker outside image for cell " + std::to_string(rec.id));
    set.cells.push_back(std::move(cell));
  }
  set.validate();
  return set;
}

AnnotationSet load_annotations(const fs::path& path, std::optional<std::pair<int, int>> size) {
  try {
    return parse_annotations(read_file(path), size);
  } catch (const Error& e) {
    throw Error(path.string() + ": " + e.what());
  }
}

std::string format_annotations(int width, int height, const std::vector<AnnotationRecord>& records) {
  std::ostringstream os;
  os << "size " << width << ' ' << height << '\n';
  for (const auto& r : records) {
    os << "cell " << r.id << '\n';
    if (r.marker) os << "marker " << r.marker->row << ' ' << r.marker->col << '\n';
    if (!r.polygon.empty()) {
      os << "polygon";
      for (const auto& v : r.polygon) os << ' ' << format_double(v.row) << ' ' << format_double(v.col);
      os << '\n';
    }
  }
  return os.str();
}

// detections -----------------------------------------------------------------

std::string detections_csv(const DetectionResult& result) {
  std::vector<const Detection*> sorted;
  for (const auto& d : result.detections) sorted.push_back(&d);
  std::stable_sort(sorted.begin(), sorted.end(), [](auto* a, auto* b) { return a->center < b->center; });
  std::ostringstream os;
  os << "row,col,peak_value,plateau_area\n";
  for (const auto* d : sorted)
    os << d->center.row << ',' << d->center.col << ',' << format_double(d->peak_value) << ',' << d->plateau.size()
       << '\n';
  return os.str();
}

void save_detections(const fs::path& path, const DetectionResult& result) {
  write_file_atomic(path, detections_csv(result));
}

std::vector<DetectionRecord> parse_detections(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line != "row,col,peak_value,plateau_area")
    throw Error("detection file lacks the expected header");
  std::vector<DetectionRecord> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream ls(line);
    for (std::string t; std::getline(ls, t, ',');) f.push_back(t);
    if (f.size() != 4) throw Error("detection line must have four fields");
    out.push_back({{parse_int(f[0]), parse_int(f[1])}, parse_double(f[2]), parse_int(f[3])});
  }
  return out;
}

std::vector<DetectionRecord> load_detections(const fs::path& path) { return parse_detections(read_file(path)); }

// overlays -------------------------------------------------------------------

namespace {

constexpr std::array<std::array<int, 3>, 12> kPalette{{{230, 25, 75},
                                                       {60, 180, 75},
                                                       {255, 225, 25},
                                                       {0, 130, 200},
                                                       {245, 130, 48},
                                                       {145, 30, 180},
                                                       {70, 240, 240},
                                                       {240, 50, 230},
                                                       {210, 245, 60},
                                                       {250, 190, 212},
                                                       {0, 128, 128},
                                                       {170, 110, 40}}};

}  // namespace

RgbImage render_detections(const RgbImage& image, const DetectionResult& result) {
  RgbImage out = image;
  for (const auto& d : result.detections) {
    for (int k = -3; k <= 3; ++k) {
      for (Point p : {Point{d.center.row + k, d.center.col}, Point{d.center.row, d.center.col + k}}) {
        if (p.row < 0 || p.col < 0 || p.row >= out.height || p.col >= out.width) continue;
        out.channel(0, p.row, p.col) = static_cast<std::uint16_t>(out.max_value);
        out.channel(1, p.row, p.col) = 0;
        out.channel(2, p.row, p.col) = 0;
      }
    }
  }
  return out;
}

RgbImage render_labels(const RgbImage& image, const LabelMap& labels) {
  if (labels.width() != image.width || labels.height() != image.height)
    throw Error("label map does not match image size");
  RgbImage out = image;
  for (int r = 0; r < image.height; ++r) {
    for (int c = 0; c < image.width; ++c) {
      const auto l = labels(r, c);
      if (l <= 0) continue;
      const auto& color = kPalette[(l - 1) % kPalette.size()];
      for (int ch = 0; ch < 3; ++ch) {
        const int tint = color[ch] * image.max_value / 255;
        out.channel(ch, r, c) = static_cast<std::uint16_t>((image.channel(ch, r, c) + tint) / 2);
      }
    }
  }
  return out;
}

void render_overlay(const RgbImage& image, const DetectionResult& result, const fs::path& path) {
  save_image(path, render_detections(image, result));
}

void render_overlay(const RgbImage& image, const LabelMap& labels, const fs::path& path) {
  save_image(path, render_labels(image, labels));
}

// dataset manifest -----------------------------------------------------------

std::string to_string(Split s) {
  switch (s) {
    case Split::Train: return "train";
    case Split::Val: return "val";
    case Split::Test: return "test";
  }
  return "unknown";
}

Split split_from_string(const std::string& s) {
  if (s == "train") return Split::Train;
  if (s == "val") return Split::Val;
  if (s == "test") return Split::Test;
  throw Error("unknown split '" + s + "'");
}

std::vector<ManifestEntry> DatasetManifest::with_split(Split s) const {
  std::vector<ManifestEntry> out;
  for (const auto& e : entries)
    if (e.split == s) out.push_back(e);
  return out;
}

DatasetManifest load_manifest(const fs::path& path) {
  const auto text = read_file(path);
  const fs::path base = path.parent_path();
  DatasetManifest m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string split, image, ann;
    if (!(ls >> split)) continue;
    if (!(ls >> image >> ann)) throw Error("manifest line needs split, image and annotation");
    ManifestEntry e{fs::path(image), fs::path(ann), split_from_string(split)};
    if (e.image.is_relative()) e.image = base / e.image;
    if (e.annotation.is_relative()) e.annotation = base / e.annotation;
    if (!fs::exists(e.image)) throw Error("missing image " + e.image.string());
    if (!fs::exists(e.annotation)) throw Error("missing annotation " + e.annotation.string());
    m.entries.push_back(std::move(e));
  }
  return m;
}

void save_manifest(const fs::path& path, const DatasetManifest& manifest) {
  const fs::path base = path.parent_path();
  std::ostringstream os;
  for (const auto& e : manifest.entries) {
    auto rel = [&](const fs::path& p) { return base.empty() ? p : p.lexically_relative(base); };
    os << to_string(e.split) << ' ' << rel(e.image).generic_string() << ' ' << rel(e.annotation).generic_string()
       << '\n';
  }
  write_file_atomic(path, os.str());
}

LoadedSample load_sample(const ManifestEntry& entry) {
  LoadedSample s;
  s.split = entry.split;
  s.image = load_image(entry.image);
  s.annotations = load_annotations(entry.annotation, std::pair{s.image.width, s.image.height});
  if (s.annotations.width != s.image.width || s.annotations.height != s.image.height)
    throw Error(entry.annotation.string() + ": annotation size does not match image");
  if (entry.split != Split::Test && !s.annotations.fully_annotated())
    throw Error(entry.annotation.string() + ": training and validation cells need boundary polygons");
  return s;
}

}  // namespace ddist
