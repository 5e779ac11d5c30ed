#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "ddist/core.hpp"

namespace ddist {

/// Dense channel-major (C, H, W) tensor of doubles.
struct Tensor {
  int channels = 0;
  int height = 0;
  int width = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(int c, int h, int w, double fill = 0.0)
      : channels(c), height(h), width(w), data(static_cast<std::size_t>(c) * h * w, fill) {}

  std::size_t plane() const { return static_cast<std::size_t>(height) * width; }
  double& at(int c, int r, int col) { return data[c * plane() + static_cast<std::size_t>(r) * width + col]; }
  double at(int c, int r, int col) const { return data[c * plane() + static_cast<std::size_t>(r) * width + col]; }
  bool same_shape(const Tensor& o) const {
    return channels == o.channels && height == o.height && width == o.width;
  }
};

enum class HeadName : std::uint8_t { Inner = 0, Outer = 1, Classification = 2 };
enum class Activation : std::uint8_t { ReLU = 0, Sigmoid = 1 };

std::string to_string(HeadName name);
HeadName head_from_string(const std::string& s);
MapRole role_of(HeadName name);

struct HeadSpec {
  HeadName name = HeadName::Inner;
  Activation activation = Activation::ReLU;
  double loss_weight = 1.0;

  /// Default activation and weight for a head (ReLU/1.0 for distances, Sigmoid/0.1 for classification).
  static HeadSpec defaults(HeadName name);
  friend bool operator==(const HeadSpec&, const HeadSpec&) = default;
};

struct NetworkConfig {
  int depth = 3;
  int base_channels = 16;
  std::vector<HeadSpec> heads{HeadSpec::defaults(HeadName::Inner), HeadSpec::defaults(HeadName::Outer),
                              HeadSpec::defaults(HeadName::Classification)};
  int tile_size = 64;
  double dropout_rate = 0.2;
  std::uint64_t seed = 1;

  void validate() const;
  int channels_at(int level) const;  // level 0 .. depth; level == depth is the bottleneck
  std::optional<std::size_t> head_index(HeadName name) const;

  /// Named head layouts: "extended" (inner+outer+class), "deepdistance" (inner+outer),
  /// "single-inner", "single-outer", "single-classification".
  static std::vector<HeadSpec> head_preset(const std::string& name);

  friend bool operator==(const NetworkConfig&, const NetworkConfig&) = default;
};

/// One convolution: weights laid out (out, in, k, k), bias per output channel.
struct ConvParams {
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  std::vector<double> weights;
  std::vector<double> bias;

  std::size_t weight_count() const { return weights.size(); }
  friend bool operator==(const ConvParams&, const ConvParams&) = default;
};

struct DecoderParams {
  std::vector<ConvParams> up;     // per level, deepest first
  std::vector<ConvParams> conv_a; // after concatenation
  std::vector<ConvParams> conv_b;
  ConvParams output;              // 1x1 projection to a single channel

  friend bool operator==(const DecoderParams&, const DecoderParams&) = default;
};

struct NetworkParams {
  std::vector<ConvParams> encoder;  // two per level, shallowest first
  std::vector<ConvParams> bottleneck;
  std::vector<DecoderParams> decoders;  // one per head, config order

  /// Every convolution in declaration order (encoder, bottleneck, then each decoder).
  std::vector<ConvParams*> layers();
  std::vector<const ConvParams*> layers() const;
  std::size_t parameter_count() const;

  friend bool operator==(const NetworkParams&, const NetworkParams&) = default;
};

/// Zero-filled parameters with the shapes implied by `config`.
NetworkParams zero_params(const NetworkConfig& config);
/// He-scaled normal weights (head projections scaled by 0.1), zero biases, seeded from config.seed.
NetworkParams init_params(const NetworkConfig& config);

/// Per-channel zero-mean / unit-variance normalization over the whole image.
Tensor normalize_image(const RgbImage& image);

struct TileOrigin {
  int row = 0;
  int col = 0;
  friend bool operator==(const TileOrigin&, const TileOrigin&) = default;
};

/// Sliding-window origins along one axis; the last window is clamped to end at the border.
std::vector<int> tile_positions(int length, int tile, int stride);
/// All 2-D tile origins in raster order. Throws "image too small" if the image is smaller than a tile.
std::vector<TileOrigin> tile_origins(int width, int height, int tile, int stride);

Tensor crop(const Tensor& src, TileOrigin origin, int tile);
ScalarMap crop(const ScalarMap& src, TileOrigin origin, int tile);

/// A cropped training example: normalized input and one target per configured head.
struct TrainingTile {
  TileOrigin origin;
  Tensor input;
  std::map<HeadName, ScalarMap> targets;
};

/// Crops aligned tiles out of an image tensor and its target maps.
std::vector<TrainingTile> crop_training_tiles(const Tensor& image, const std::map<HeadName, ScalarMap>& targets,
                                              int tile_size, int stride);

enum class Mode { Inference, Train };

struct ForwardResult {
  std::vector<ScalarMap> outputs;  // one per head, config order
};

/// Full forward pass. In Train mode, bottleneck dropout draws its mask from `rng`.
ForwardResult forward(const NetworkParams& params, const NetworkConfig& config, const Tensor& input,
                      Mode mode = Mode::Inference, std::mt19937_64* rng = nullptr);

/// Weighted sum over heads of mean squared error.
double loss(const std::vector<ScalarMap>& outputs, const std::map<HeadName, ScalarMap>& targets,
            const std::vector<HeadSpec>& heads);

struct Gradients {
  NetworkParams grads;
  double loss = 0.0;
  std::vector<ScalarMap> outputs;
};

/// Analytic gradient of loss() with respect to every parameter.
Gradients backward(const NetworkParams& params, const NetworkConfig& config, const Tensor& input,
                   const std::map<HeadName, ScalarMap>& targets, Mode mode = Mode::Inference,
                   std::mt19937_64* rng = nullptr);

struct AdaDeltaState {
  double rho = 0.95;
  double epsilon = 1e-6;
  double learning_rate = 1.0;
  NetworkParams mean_sq_grad;
  NetworkParams mean_sq_update;

  static AdaDeltaState zeros_like(const NetworkConfig& config, double rho, double epsilon,
                                  double learning_rate = 1.0);
};

void adadelta_step(NetworkParams& params, AdaDeltaState& state, const NetworkParams& grads);

struct TrainConfig {
  int max_epochs = 50;
  int patience = 10;
  int batch_size = 1;
  int train_tile_stride = 0;  // 0 = tile_size / 2
  double adadelta_rho = 0.95;
  double adadelta_epsilon = 1e-6;
  double adadelta_learning_rate = 1.0;
  std::uint64_t seed = 1;

  void validate() const;
};

struct TrainHistory {
  double initial_train_loss = 0.0;
  std::vector<double> train_loss;
  std::vector<double> val_loss;
  int selected_epoch = -1;
  bool stopped_early = false;

  friend bool operator==(const TrainHistory&, const TrainHistory&) = default;
};

struct TrainResult {
  NetworkParams params;
  TrainHistory history;
};

/// Mean loss over a tile set in inference mode.
double evaluate_loss(const NetworkParams& params, const NetworkConfig& config,
                     const std::vector<TrainingTile>& tiles);

/// Batch-1 AdaDelta training with seeded shuffling and validation early stopping.
/// Returns the parameters of the best validation epoch.
TrainResult train(const std::vector<TrainingTile>& train_tiles, const std::vector<TrainingTile>& val_tiles,
                  const NetworkConfig& net_config, const TrainConfig& train_config,
                  std::ostream* log = nullptr);

/// Versioned binary weights ("DDNET1", config block, little-endian float64 tensors, FNV-1a checksum).
void save_network(const std::filesystem::path& path, const NetworkConfig& config, const NetworkParams& params);
std::pair<NetworkConfig, NetworkParams> load_network(const std::filesystem::path& path);
std::string serialize_network(const NetworkConfig& config, const NetworkParams& params);
std::pair<NetworkConfig, NetworkParams> deserialize_network(const std::string& bytes);

}  // namespace ddist
