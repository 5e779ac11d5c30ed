#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "ddist/io.hpp"
#include "ddist/net.hpp"

namespace ddist {

namespace {

constexpr char kMagic[] = "DDNET1";
constexpr std::size_t kMagicLen = 6;

std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

class Writer {
 public:
  void u8(std::uint8_t v) { buf_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(std::string_view s) { buf_.append(s); }
  std::string& bytes() { return buf_; }

 private:
  std::string buf_;
};

class Reader {
 public:
  explicit Reader(std::string_view s) : s_(s) {}
  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(s_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string_view raw(std::size_t n) {
    need(n);
    auto r = s_.substr(pos_, n);
    pos_ += n;
    return r;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > s_.size()) throw Error("network file truncated");
  }
  std::string_view s_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_network(const NetworkConfig& config, const NetworkParams& params) {
  config.validate();
  Writer w;
  w.raw(std::string_view(kMagic, kMagicLen));
  w.u32(static_cast<std::uint32_t>(config.depth));
  w.u32(static_cast<std::uint32_t>(config.base_channels));
  w.u32(static_cast<std::uint32_t>(config.tile_size));
  w.f64(config.dropout_rate);
  w.u64(config.seed);
  w.u32(static_cast<std::uint32_t>(config.heads.size()));
  for (const auto& h : config.heads) {
    w.u8(static_cast<std::uint8_t>(h.name));
    w.u8(static_cast<std::uint8_t>(h.activation));
    w.f64(h.loss_weight);
  }
  const auto expected = zero_params(config);
  if (expected.parameter_count() != params.parameter_count())
    throw Error("parameters do not match network configuration");
  w.u64(params.parameter_count());
  for (const auto* l : params.layers()) {
    for (double v : l->weights) w.f64(v);
    for (double v : l->bias) w.f64(v);
  }
  const auto sum = fnv1a(w.bytes());
  w.u64(sum);
  return std::move(w.bytes());
}

std::pair<NetworkConfig, NetworkParams> deserialize_network(const std::string& bytes) {
  if (bytes.size() < kMagicLen + 8 || bytes.compare(0, kMagicLen, kMagic) != 0)
    throw Error("not a DDNET1 network file");
  const std::string_view body(bytes.data(), bytes.size() - 8);
  Reader tail(std::string_view(bytes).substr(bytes.size() - 8));
  if (tail.u64() != fnv1a(body)) throw Error("network file checksum mismatch");

  Reader r(body);
  r.raw(kMagicLen);
  NetworkConfig cfg;
  cfg.depth = static_cast<int>(r.u32());
  cfg.base_channels = static_cast<int>(r.u32());
  cfg.tile_size = static_cast<int>(r.u32());
  cfg.dropout_rate = r.f64();
  cfg.seed = r.u64();
  const auto n_heads = r.u32();
  if (n_heads == 0 || n_heads > 3) throw Error("network file has an invalid head count");
  cfg.heads.clear();
  for (std::uint32_t i = 0; i < n_heads; ++i) {
    HeadSpec h;
    const auto name = r.u8(), act = r.u8();
    if (name > 2 || act > 1) throw Error("network file has an invalid head description");
    h.name = static_cast<HeadName>(name);
    h.activation = static_cast<Activation>(act);
    h.loss_weight = r.f64();
    cfg.heads.push_back(h);
  }
  cfg.validate();
  NetworkParams params = zero_params(cfg);
  if (r.u64() != params.parameter_count()) throw Error("network file parameter count mismatch");
  for (auto* l : params.layers()) {
    for (double& v : l->weights) v = r.f64();
    for (double& v : l->bias) v = r.f64();
  }
  if (r.pos() != body.size()) throw Error("network file has trailing data");
  return {cfg, std::move(params)};
}

void save_network(const std::filesystem::path& path, const NetworkConfig& config, const NetworkParams& params) {
  write_file_atomic(path, serialize_network(config, params));
}

std::pair<NetworkConfig, NetworkParams> load_network(const std::filesystem::path& path) {
  return deserialize_network(read_file(path));
}

}  // namespace ddist
