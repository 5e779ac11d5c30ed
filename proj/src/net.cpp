#include "ddist/net.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace ddist {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMatrix>;
using ConstMatMap = Eigen::Map<const RowMatrix>;

std::string to_string(HeadName name) {
  switch (name) {
    case HeadName::Inner: return "inner";
    case HeadName::Outer: return "outer";
    case HeadName::Classification: return "classification";
  }
  return "unknown";
}

HeadName head_from_string(const std::string& s) {
  if (s == "inner") return HeadName::Inner;
  if (s == "outer") return HeadName::Outer;
  if (s == "classification" || s == "class") return HeadName::Classification;
  throw Error("unknown head name '" + s + "'");
}

MapRole role_of(HeadName name) {
  switch (name) {
    case HeadName::Inner: return MapRole::InnerDistance;
    case HeadName::Outer: return MapRole::OuterDistance;
    case HeadName::Classification: return MapRole::Classification;
  }
  return MapRole::Raw;
}

HeadSpec HeadSpec::defaults(HeadName name) {
  if (name == HeadName::Classification) return {name, Activation::Sigmoid, 0.1};
  return {name, Activation::ReLU, 1.0};
}

void NetworkConfig::validate() const {
  if (depth < 1) throw Error("network depth must be at least 1");
  if (base_channels < 1) throw Error("base channel count must be at least 1");
  if (heads.empty() || heads.size() > 3) throw Error("network needs between one and three heads");
  std::set<HeadName> names;
  for (const auto& h : heads) {
    if (!names.insert(h.name).second) throw Error("duplicate head " + to_string(h.name));
    if (!(h.loss_weight >= 0.0)) throw Error("head loss weight must be non-negative");
  }
  if (tile_size < 2 || tile_size % (1 << depth) != 0)
    throw Error("tile size must be divisible by 2^depth");
  if (!(dropout_rate >= 0.0 && dropout_rate < 1.0)) throw Error("dropout rate must lie in [0,1)");
}

int NetworkConfig::channels_at(int level) const { return base_channels << level; }

std::optional<std::size_t> NetworkConfig::head_index(HeadName name) const {
  for (std::size_t i = 0; i < heads.size(); ++i)
    if (heads[i].name == name) return i;
  return std::nullopt;
}

std::vector<HeadSpec> NetworkConfig::head_preset(const std::string& name) {
  using H = HeadName;
  if (name == "extended") return {HeadSpec::defaults(H::Inner), HeadSpec::defaults(H::Outer),
                                  HeadSpec::defaults(H::Classification)};
  if (name == "deepdistance") return {HeadSpec::defaults(H::Inner), HeadSpec::defaults(H::Outer)};
  if (name == "single-inner") return {HeadSpec::defaults(H::Inner)};
  if (name == "single-outer") return {HeadSpec::defaults(H::Outer)};
  // unit weight when classification is the only task
  if (name == "single-classification") return {{H::Classification, Activation::Sigmoid, 1.0}};
  throw Error("unknown head preset '" + name + "'");
}

std::vector<ConvParams*> NetworkParams::layers() {
  std::vector<ConvParams*> out;
  for (auto& c : encoder) out.push_back(&c);
  for (auto& c : bottleneck) out.push_back(&c);
  for (auto& d : decoders) {
    for (std::size_t i = 0; i < d.up.size(); ++i) {
      out.push_back(&d.up[i]);
      out.push_back(&d.conv_a[i]);
      out.push_back(&d.conv_b[i]);
    }
    out.push_back(&d.output);
  }
  return out;
}

std::vector<const ConvParams*> NetworkParams::layers() const {
  auto mut = const_cast<NetworkParams*>(this)->layers();
  return {mut.begin(), mut.end()};
}

std::size_t NetworkParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* l : layers()) n += l->weights.size() + l->bias.size();
  return n;
}

namespace {

ConvParams make_conv(int in, int out, int kernel) {
  ConvParams c;
  c.in_channels = in;
  c.out_channels = out;
  c.kernel = kernel;
  c.weights.assign(static_cast<std::size_t>(out) * in * kernel * kernel, 0.0);
  c.bias.assign(out, 0.0);
  return c;
}

}  // namespace

NetworkParams zero_params(const NetworkConfig& config) {
  config.validate();
  NetworkParams p;
  int in = 3;
  for (int l = 0; l < config.depth; ++l) {
    const int ch = config.channels_at(l);
    p.encoder.push_back(make_conv(in, ch, 3));
    p.encoder.push_back(make_conv(ch, ch, 3));
    in = ch;
  }
  const int bott = config.channels_at(config.depth);
  p.bottleneck.push_back(make_conv(in, bott, 3));
  p.bottleneck.push_back(make_conv(bott, bott, 3));
  for (std::size_t h = 0; h < config.heads.size(); ++h) {
    DecoderParams d;
    for (int l = config.depth - 1; l >= 0; --l) {
      const int ch = config.channels_at(l);
      d.up.push_back(make_conv(config.channels_at(l + 1), ch, 3));
      d.conv_a.push_back(make_conv(2 * ch, ch, 3));
      d.conv_b.push_back(make_conv(ch, ch, 3));
    }
    d.output = make_conv(config.channels_at(0), 1, 1);
    p.decoders.push_back(std::move(d));
  }
  return p;
}

constexpr double kOutputInitScale = 0.1;

NetworkParams init_params(const NetworkConfig& config) {
  NetworkParams p = zero_params(config);
  std::mt19937_64 rng(config.seed);
  for (auto* layer : p.layers()) {
    const double fan_in = static_cast<double>(layer->in_channels) * layer->kernel * layer->kernel;
    std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / fan_in));
    for (double& w : layer->weights) w = dist(rng);
  }
  for (auto& d : p.decoders)
    for (double& w : d.output.weights) w *= kOutputInitScale;
  return p;
}

Tensor normalize_image(const RgbImage& image) {
  Tensor t(3, image.height, image.width);
  const std::size_t n = t.plane();
  for (int c = 0; c < 3; ++c) {
    auto src = image.channel(c);
    double mean = 0.0;
    for (auto v : src) mean += v;
    mean /= static_cast<double>(n);
    double var = 0.0;
    for (auto v : src) var += (v - mean) * (v - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    double* dst = t.data.data() + c * n;
    for (std::size_t i = 0; i < n; ++i) dst[i] = sd > 0.0 ? (src[i] - mean) / sd : 0.0;
  }
  return t;
}

std::vector<int> tile_positions(int length, int tile, int stride) {
  if (tile <= 0 || stride <= 0) throw Error("tile size and stride must be positive");
  if (length < tile) throw Error("image too small");
  std::vector<int> out;
  for (int p = 0; p + tile <= length; p += stride) out.push_back(p);
  if (out.back() + tile < length) out.push_back(length - tile);
  return out;
}

std::vector<TileOrigin> tile_origins(int width, int height, int tile, int stride) {
  const auto rows = tile_positions(height, tile, stride);
  const auto cols = tile_positions(width, tile, stride);
  std::vector<TileOrigin> out;
  for (int r : rows)
    for (int c : cols) out.push_back({r, c});
  return out;
}

Tensor crop(const Tensor& src, TileOrigin o, int tile) {
  if (o.row < 0 || o.col < 0 || o.row + tile > src.height || o.col + tile > src.width)
    throw Error("crop outside tensor");
  Tensor t(src.channels, tile, tile);
  for (int c = 0; c < src.channels; ++c)
    for (int r = 0; r < tile; ++r)
      std::copy_n(&src.data[c * src.plane() + static_cast<std::size_t>(o.row + r) * src.width + o.col], tile,
                  &t.data[c * t.plane() + static_cast<std::size_t>(r) * tile]);
  return t;
}

ScalarMap crop(const ScalarMap& src, TileOrigin o, int tile) {
  if (o.row < 0 || o.col < 0 || o.row + tile > src.height() || o.col + tile > src.width())
    throw Error("crop outside map");
  ScalarMap m(tile, tile, src.role);
  for (int r = 0; r < tile; ++r)
    for (int c = 0; c < tile; ++c) m(r, c) = src(o.row + r, o.col + c);
  return m;
}

std::vector<TrainingTile> crop_training_tiles(const Tensor& image, const std::map<HeadName, ScalarMap>& targets,
                                              int tile_size, int stride) {
  for (const auto& [name, map] : targets)
    if (map.width() != image.width || map.height() != image.height)
      throw Error("target map " + to_string(name) + " does not match image size");
  std::vector<TrainingTile> out;
  for (TileOrigin o : tile_origins(image.width, image.height, tile_size, stride)) {
    TrainingTile t;
    t.origin = o;
    t.input = crop(image, o, tile_size);
    for (const auto& [name, map] : targets) t.targets.emplace(name, crop(map, o, tile_size));
    out.push_back(std::move(t));
  }
  return out;
}

// ---------------------------------------------------------------------------
// layers

namespace {

// (in * k * k, H * W) patch matrix for a same-padded convolution.
void im2col(const Tensor& x, int k, RowMatrix& col) {
  const int h = x.height, w = x.width, pad = k / 2;
  col.resize(static_cast<Eigen::Index>(x.channels) * k * k, static_cast<Eigen::Index>(h) * w);
  for (int c = 0; c < x.channels; ++c) {
    const double* src = x.data.data() + c * x.plane();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        double* dst = col.row((c * k + ky) * k + kx).data();
        const int dy = ky - pad, dx = kx - pad;
        for (int r = 0; r < h; ++r) {
          const int sr = r + dy;
          double* drow = dst + static_cast<std::size_t>(r) * w;
          if (sr < 0 || sr >= h) {
            std::fill_n(drow, w, 0.0);
            continue;
          }
          const double* srow = src + static_cast<std::size_t>(sr) * w;
          const int c0 = std::max(0, -dx), c1 = std::min(w, w - dx);
          std::fill_n(drow, c0, 0.0);
          std::copy(srow + c0 + dx, srow + c1 + dx, drow + c0);
          std::fill(drow + c1, drow + w, 0.0);
        }
      }
    }
  }
}

void col2im(const RowMatrix& col, int k, Tensor& dx) {
  const int h = dx.height, w = dx.width, pad = k / 2;
  std::fill(dx.data.begin(), dx.data.end(), 0.0);
  for (int c = 0; c < dx.channels; ++c) {
    double* dst = dx.data.data() + c * dx.plane();
    for (int ky = 0; ky < k; ++ky) {
      for (int kx = 0; kx < k; ++kx) {
        const double* src = col.row((c * k + ky) * k + kx).data();
        const int dy = ky - pad, ddx = kx - pad;
        for (int r = 0; r < h; ++r) {
          const int sr = r + dy;
          if (sr < 0 || sr >= h) continue;
          const double* srow = src + static_cast<std::size_t>(r) * w;
          double* drow = dst + static_cast<std::size_t>(sr) * w;
          const int c0 = std::max(0, -ddx), c1 = std::min(w, w - ddx);
          for (int cc = c0; cc < c1; ++cc) drow[cc + ddx] += srow[cc];
        }
      }
    }
  }
}

Tensor conv_forward(const ConvParams& p, const Tensor& x) {
  if (x.channels != p.in_channels) throw Error("convolution input channel mismatch");
  Tensor y(p.out_channels, x.height, x.width);
  const Eigen::Index hw = static_cast<Eigen::Index>(x.plane());
  ConstMatMap w(p.weights.data(), p.out_channels, static_cast<Eigen::Index>(p.in_channels) * p.kernel * p.kernel);
  MatMap out(y.data.data(), p.out_channels, hw);
  if (p.kernel == 1) {
    out.noalias() = w * ConstMatMap(x.data.data(), x.channels, hw);
  } else {
    RowMatrix col;
    im2col(x, p.kernel, col);
    out.noalias() = w * col;
  }
  for (int o = 0; o < p.out_channels; ++o) out.row(o).array() += p.bias[o];
  return y;
}

// Accumulates parameter gradients into `g` and returns dL/dx.
Tensor conv_backward(const ConvParams& p, const Tensor& x, const Tensor& dy, ConvParams& g) {
  const Eigen::Index hw = static_cast<Eigen::Index>(x.plane());
  const Eigen::Index kk = static_cast<Eigen::Index>(p.in_channels) * p.kernel * p.kernel;
  ConstMatMap w(p.weights.data(), p.out_channels, kk);
  ConstMatMap d(dy.data.data(), p.out_channels, hw);
  MatMap gw(g.weights.data(), p.out_channels, kk);
  for (int o = 0; o < p.out_channels; ++o) {
    const double* row = dy.data.data() + o * hw;
    g.bias[o] += std::accumulate(row, row + hw, 0.0);
  }
  Tensor dx(x.channels, x.height, x.width);
  if (p.kernel == 1) {
    ConstMatMap xm(x.data.data(), x.channels, hw);
    gw.noalias() += d * xm.transpose();
    MatMap(dx.data.data(), x.channels, hw).noalias() = w.transpose() * d;
  } else {
    RowMatrix col;
    im2col(x, p.kernel, col);
    gw.noalias() += d * col.transpose();
    RowMatrix dcol = w.transpose() * d;
    col2im(dcol, p.kernel, dx);
  }
  return dx;
}

void relu_inplace(Tensor& t) {
  for (double& v : t.data) v = v > 0.0 ? v : 0.0;
}

// dy *= 1[y > 0], y being the post-activation output
void relu_backward_inplace(const Tensor& y, Tensor& dy) {
  for (std::size_t i = 0; i < dy.data.size(); ++i)
    if (!(y.data[i] > 0.0)) dy.data[i] = 0.0;
}

Tensor maxpool_forward(const Tensor& x, std::vector<std::uint32_t>& argmax) {
  Tensor y(x.channels, x.height / 2, x.width / 2);
  argmax.resize(y.data.size());
  std::size_t i = 0;
  for (int c = 0; c < x.channels; ++c) {
    for (int r = 0; r < y.height; ++r) {
      for (int col = 0; col < y.width; ++col, ++i) {
        std::size_t best = c * x.plane() + static_cast<std::size_t>(2 * r) * x.width + 2 * col;
        const std::size_t cand[3] = {best + 1, best + x.width, best + x.width + 1};
        for (std::size_t j : cand)
          if (x.data[j] > x.data[best]) best = j;
        y.data[i] = x.data[best];
        argmax[i] = static_cast<std::uint32_t>(best);
      }
    }
  }
  return y;
}

Tensor maxpool_backward(const Tensor& x_shape, const std::vector<std::uint32_t>& argmax, const Tensor& dy) {
  Tensor dx(x_shape.channels, x_shape.height, x_shape.width);
  for (std::size_t i = 0; i < dy.data.size(); ++i) dx.data[argmax[i]] += dy.data[i];
  return dx;
}

Tensor upsample_forward(const Tensor& x) {
  Tensor y(x.channels, x.height * 2, x.width * 2);
  for (int c = 0; c < x.channels; ++c)
    for (int r = 0; r < y.height; ++r)
      for (int col = 0; col < y.width; ++col) y.at(c, r, col) = x.at(c, r / 2, col / 2);
  return y;
}

Tensor upsample_backward(const Tensor& dy) {
  Tensor dx(dy.channels, dy.height / 2, dy.width / 2);
  for (int c = 0; c < dy.channels; ++c)
    for (int r = 0; r < dy.height; ++r)
      for (int col = 0; col < dy.width; ++col) dx.at(c, r / 2, col / 2) += dy.at(c, r, col);
  return dx;
}

Tensor concat(const Tensor& a, const Tensor& b) {
  Tensor y(a.channels + b.channels, a.height, a.width);
  std::copy(a.data.begin(), a.data.end(), y.data.begin());
  std::copy(b.data.begin(), b.data.end(), y.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return y;
}

void split(const Tensor& dy, Tensor& da, Tensor& db) {
  std::copy_n(dy.data.begin(), da.data.size(), da.data.begin());
  std::copy(dy.data.begin() + static_cast<std::ptrdiff_t>(da.data.size()), dy.data.end(), db.data.begin());
}

void add_inplace(Tensor& acc, const Tensor& t) {
  for (std::size_t i = 0; i < acc.data.size(); ++i) acc.data[i] += t.data[i];
}

bool all_finite(const Tensor& t) {
  return std::all_of(t.data.begin(), t.data.end(), [](double v) { return std::isfinite(v); });
}

struct DecoderLevelCache {
  Tensor up_in;   // upsampled input of the up-convolution
  Tensor up_out;  // after ReLU
  Tensor cat;
  Tensor a;
  Tensor b;
};

struct HeadCache {
  std::vector<DecoderLevelCache> levels;  // deepest first
  Tensor output;                          // post-activation, 1 channel
};

struct Cache {
  std::vector<Tensor> enc_in;   // input of each level's first conv
  std::vector<Tensor> enc_a;
  std::vector<Tensor> skip;     // enc_b, the skip feature
  std::vector<std::vector<std::uint32_t>> pool_idx;
  Tensor bott_in;
  Tensor bott_a;
  Tensor bott_b;                 // before dropout
  std::vector<double> drop_mask; // empty when dropout is inactive
  Tensor bott_out;
  std::vector<HeadCache> heads;
};

Cache run_forward(const NetworkParams& params, const NetworkConfig& config, const Tensor& input, Mode mode,
                  std::mt19937_64* rng) {
  config.validate();
  if (input.channels != 3 || input.height != config.tile_size || input.width != config.tile_size)
    throw Error("input tile shape does not match network configuration");
  if (params.encoder.size() != static_cast<std::size_t>(2 * config.depth) || params.bottleneck.size() != 2 ||
      params.decoders.size() != config.heads.size())
    throw Error("parameters do not match network configuration");

  Cache cache;
  Tensor x = input;
  for (int l = 0; l < config.depth; ++l) {
    cache.enc_in.push_back(x);
    Tensor a = conv_forward(params.encoder[2 * l], x);
    relu_inplace(a);
    Tensor b = conv_forward(params.encoder[2 * l + 1], a);
    relu_inplace(b);
    cache.pool_idx.emplace_back();
    x = maxpool_forward(b, cache.pool_idx.back());
    cache.enc_a.push_back(std::move(a));
    cache.skip.push_back(std::move(b));
  }
  cache.bott_in = x;
  cache.bott_a = conv_forward(params.bottleneck[0], x);
  relu_inplace(cache.bott_a);
  cache.bott_b = conv_forward(params.bottleneck[1], cache.bott_a);
  relu_inplace(cache.bott_b);
  cache.bott_out = cache.bott_b;
  if (mode == Mode::Train && config.dropout_rate > 0.0) {
    if (!rng) throw Error("training-mode forward needs a random generator");
    std::bernoulli_distribution keep(1.0 - config.dropout_rate);
    const double scale = 1.0 / (1.0 - config.dropout_rate);
    cache.drop_mask.resize(cache.bott_out.data.size());
    for (std::size_t i = 0; i < cache.drop_mask.size(); ++i) {
      cache.drop_mask[i] = keep(*rng) ? scale : 0.0;
      cache.bott_out.data[i] *= cache.drop_mask[i];
    }
  }

  for (std::size_t h = 0; h < config.heads.size(); ++h) {
    const auto& dec = params.decoders[h];
    HeadCache hc;
    const Tensor* y = &cache.bott_out;
    for (int i = 0; i < config.depth; ++i) {
      const int level = config.depth - 1 - i;
      DecoderLevelCache lc;
      lc.up_in = upsample_forward(*y);
      lc.up_out = conv_forward(dec.up[i], lc.up_in);
      relu_inplace(lc.up_out);
      lc.cat = concat(cache.skip[level], lc.up_out);
      lc.a = conv_forward(dec.conv_a[i], lc.cat);
      relu_inplace(lc.a);
      lc.b = conv_forward(dec.conv_b[i], lc.a);
      relu_inplace(lc.b);
      hc.levels.push_back(std::move(lc));
      y = &hc.levels.back().b;
    }
    hc.output = conv_forward(dec.output, *y);
    if (config.heads[h].activation == Activation::ReLU) {
      relu_inplace(hc.output);
    } else {
      for (double& v : hc.output.data) v = 1.0 / (1.0 + std::exp(-v));
    }
    if (!all_finite(hc.output)) throw Error("numerical overflow");
    cache.heads.push_back(std::move(hc));
  }
  return cache;
}

ScalarMap to_map(const Tensor& t, MapRole role) {
  ScalarMap m(t.width, t.height, MapRole::Raw);
  std::copy(t.data.begin(), t.data.begin() + static_cast<std::ptrdiff_t>(t.plane()), m.grid.values().begin());
  m.role = role;
  return m;
}

}  // namespace

ForwardResult forward(const NetworkParams& params, const NetworkConfig& config, const Tensor& input, Mode mode,
                      std::mt19937_64* rng) {
  Cache cache = run_forward(params, config, input, mode, rng);
  ForwardResult r;
  for (std::size_t h = 0; h < config.heads.size(); ++h)
    r.outputs.push_back(to_map(cache.heads[h].output, role_of(config.heads[h].name)));
  return r;
}

double loss(const std::vector<ScalarMap>& outputs, const std::map<HeadName, ScalarMap>& targets,
            const std::vector<HeadSpec>& heads) {
  if (outputs.size() != heads.size()) throw Error("output count does not match head count");
  double total = 0.0;
  for (std::size_t h = 0; h < heads.size(); ++h) {
    auto it = targets.find(heads[h].name);
    if (it == targets.end()) throw Error("missing target for head " + to_string(heads[h].name));
    const auto out = outputs[h].grid.values();
    const auto tgt = it->second.grid.values();
    if (out.size() != tgt.size() || out.empty()) throw Error("output and target shapes differ");
    double sum = 0.0;
    for (std::size_t i = 0; i < out.size(); ++i) sum += (out[i] - tgt[i]) * (out[i] - tgt[i]);
    total += heads[h].loss_weight * sum / static_cast<double>(out.size());
  }
  return total;
}

Gradients backward(const NetworkParams& params, const NetworkConfig& config, const Tensor& input,
                   const std::map<HeadName, ScalarMap>& targets, Mode mode, std::mt19937_64* rng) {
  Cache cache = run_forward(params, config, input, mode, rng);
  Gradients g;
  g.grads = zero_params(config);
  for (std::size_t h = 0; h < config.heads.size(); ++h)
    g.outputs.push_back(to_map(cache.heads[h].output, role_of(config.heads[h].name)));
  g.loss = loss(g.outputs, targets, config.heads);

  std::vector<Tensor> d_skip;
  for (const auto& s : cache.skip) d_skip.emplace_back(s.channels, s.height, s.width);
  Tensor d_bott(cache.bott_out.channels, cache.bott_out.height, cache.bott_out.width);

  for (std::size_t h = 0; h < config.heads.size(); ++h) {
    const auto& spec = config.heads[h];
    const auto& hc = cache.heads[h];
    const auto& dec = params.decoders[h];
    auto& gdec = g.grads.decoders[h];
    const auto& tgt = targets.at(spec.name).grid.values();
    const double n = static_cast<double>(hc.output.data.size());

    Tensor d_out(1, hc.output.height, hc.output.width);
    for (std::size_t i = 0; i < d_out.data.size(); ++i) {
      const double o = hc.output.data[i];
      double d = spec.loss_weight * 2.0 * (o - tgt[i]) / n;
      if (spec.activation == Activation::ReLU) {
        if (!(o > 0.0)) d = 0.0;
      } else {
        d *= o * (1.0 - o);
      }
      d_out.data[i] = d;
    }
    const Tensor& last_in = hc.levels.back().b;
    Tensor dy = conv_backward(dec.output, last_in, d_out, gdec.output);

    for (int i = config.depth - 1; i >= 0; --i) {
      const int level = config.depth - 1 - i;
      const auto& lc = hc.levels[i];
      relu_backward_inplace(lc.b, dy);
      Tensor da = conv_backward(dec.conv_b[i], lc.a, dy, gdec.conv_b[i]);
      relu_backward_inplace(lc.a, da);
      Tensor dcat = conv_backward(dec.conv_a[i], lc.cat, da, gdec.conv_a[i]);
      Tensor dskip_part(cache.skip[level].channels, lc.cat.height, lc.cat.width);
      Tensor dup(lc.up_out.channels, lc.cat.height, lc.cat.width);
      split(dcat, dskip_part, dup);
      add_inplace(d_skip[level], dskip_part);
      relu_backward_inplace(lc.up_out, dup);
      Tensor dup_in = conv_backward(dec.up[i], lc.up_in, dup, gdec.up[i]);
      dy = upsample_backward(dup_in);
    }
    add_inplace(d_bott, dy);
  }

  if (!cache.drop_mask.empty())
    for (std::size_t i = 0; i < d_bott.data.size(); ++i) d_bott.data[i] *= cache.drop_mask[i];
  relu_backward_inplace(cache.bott_b, d_bott);
  Tensor d = conv_backward(params.bottleneck[1], cache.bott_a, d_bott, g.grads.bottleneck[1]);
  relu_backward_inplace(cache.bott_a, d);
  d = conv_backward(params.bottleneck[0], cache.bott_in, d, g.grads.bottleneck[0]);

  for (int l = config.depth - 1; l >= 0; --l) {
    Tensor db = maxpool_backward(cache.skip[l], cache.pool_idx[l], d);
    add_inplace(db, d_skip[l]);
    relu_backward_inplace(cache.skip[l], db);
    Tensor da = conv_backward(params.encoder[2 * l + 1], cache.enc_a[l], db, g.grads.encoder[2 * l + 1]);
    relu_backward_inplace(cache.enc_a[l], da);
    d = conv_backward(params.encoder[2 * l], cache.enc_in[l], da, g.grads.encoder[2 * l]);
  }

  for (const auto* layer : g.grads.layers()) {
    for (double v : layer->weights)
      if (!std::isfinite(v)) throw Error("numerical overflow");
    for (double v : layer->bias)
      if (!std::isfinite(v)) throw Error("numerical overflow");
  }
  return g;
}

}  // namespace ddist
