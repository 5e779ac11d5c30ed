#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "ddist/net.hpp"

namespace ddist {

AdaDeltaState AdaDeltaState::zeros_like(const NetworkConfig& config, double rho, double epsilon,
                                        double learning_rate) {
  AdaDeltaState s;
  s.rho = rho;
  s.epsilon = epsilon;
  s.learning_rate = learning_rate;
  s.mean_sq_grad = zero_params(config);
  s.mean_sq_update = zero_params(config);
  return s;
}

namespace {

void adadelta_update(std::vector<double>& x, std::vector<double>& eg2, std::vector<double>& edx2,
                     const std::vector<double>& g, double rho, double eps, double lr) {
  for (std::size_t i = 0; i < x.size(); ++i) {
    eg2[i] = rho * eg2[i] + (1.0 - rho) * g[i] * g[i];
    const double dx = -std::sqrt(edx2[i] + eps) / std::sqrt(eg2[i] + eps) * g[i];
    edx2[i] = rho * edx2[i] + (1.0 - rho) * dx * dx;
    x[i] += lr * dx;
  }
}

}  // namespace

void adadelta_step(NetworkParams& params, AdaDeltaState& state, const NetworkParams& grads) {
  auto p = params.layers();
  auto eg = state.mean_sq_grad.layers();
  auto ed = state.mean_sq_update.layers();
  auto g = grads.layers();
  if (p.size() != eg.size() || p.size() != ed.size() || p.size() != g.size())
    throw Error("optimizer state does not match parameters");
  for (std::size_t l = 0; l < p.size(); ++l) {
    adadelta_update(p[l]->weights, eg[l]->weights, ed[l]->weights, g[l]->weights, state.rho, state.epsilon,
                    state.learning_rate);
    adadelta_update(p[l]->bias, eg[l]->bias, ed[l]->bias, g[l]->bias, state.rho, state.epsilon,
                    state.learning_rate);
  }
}

void TrainConfig::validate() const {
  if (max_epochs < 1) throw Error("max_epochs must be at least 1");
  if (patience < 1 || patience > max_epochs) throw Error("patience must lie in [1, max_epochs]");
  if (batch_size < 1) throw Error("batch size must be at least 1");
  if (train_tile_stride < 0) throw Error("train tile stride must be non-negative");
  if (!(adadelta_rho > 0.0 && adadelta_rho < 1.0)) throw Error("adadelta rho must lie in (0,1)");
  if (!(adadelta_epsilon > 0.0)) throw Error("adadelta epsilon must be positive");
  if (!(adadelta_learning_rate > 0.0)) throw Error("adadelta learning rate must be positive");
}

double evaluate_loss(const NetworkParams& params, const NetworkConfig& config,
                     const std::vector<TrainingTile>& tiles) {
  if (tiles.empty()) throw Error("no tiles to evaluate");
  double sum = 0.0;
  for (const auto& t : tiles) sum += loss(forward(params, config, t.input).outputs, t.targets, config.heads);
  return sum / static_cast<double>(tiles.size());
}

TrainResult train(const std::vector<TrainingTile>& train_tiles, const std::vector<TrainingTile>& val_tiles,
                  const NetworkConfig& net_config, const TrainConfig& train_config, std::ostream* log) {
  net_config.validate();
  train_config.validate();
  if (train_tiles.empty()) throw Error("no training tiles");
  if (val_tiles.empty()) throw Error("no validation tiles");

  TrainResult result;
  NetworkParams params = init_params(net_config);
  AdaDeltaState opt = AdaDeltaState::zeros_like(net_config, train_config.adadelta_rho,
                                                train_config.adadelta_epsilon,
                                                train_config.adadelta_learning_rate);
  std::mt19937_64 shuffle_rng(train_config.seed);
  std::mt19937_64 dropout_rng(train_config.seed ^ 0x9e3779b97f4a7c15ULL);

  auto& hist = result.history;
  hist.initial_train_loss = evaluate_loss(params, net_config, train_tiles);
  double best = std::numeric_limits<double>::infinity();
  result.params = params;
  int since_best = 0;

  std::vector<std::size_t> order(train_tiles.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < train_config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < order.size(); start += train_config.batch_size) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(train_config.batch_size));
      NetworkParams batch_grad;
      for (std::size_t i = start; i < end; ++i) {
        const auto& tile = train_tiles[order[i]];
        Gradients g = backward(params, net_config, tile.input, tile.targets, Mode::Train, &dropout_rng);
        epoch_loss += g.loss;
        if (i == start) {
          batch_grad = std::move(g.grads);
        } else {
          auto acc = batch_grad.layers();
          auto add = g.grads.layers();
          for (std::size_t l = 0; l < acc.size(); ++l) {
            for (std::size_t k = 0; k < acc[l]->weights.size(); ++k) acc[l]->weights[k] += add[l]->weights[k];
            for (std::size_t k = 0; k < acc[l]->bias.size(); ++k) acc[l]->bias[k] += add[l]->bias[k];
          }
        }
      }
      if (end - start > 1) {
        const double inv = 1.0 / static_cast<double>(end - start);
        for (auto* l : batch_grad.layers()) {
          for (double& v : l->weights) v *= inv;
          for (double& v : l->bias) v *= inv;
        }
      }
      adadelta_step(params, opt, batch_grad);
    }
    hist.train_loss.push_back(epoch_loss / static_cast<double>(order.size()));
    const double val = evaluate_loss(params, net_config, val_tiles);
    hist.val_loss.push_back(val);
    if (val < best) {
      best = val;
      hist.selected_epoch = epoch;
      result.params = params;
      since_best = 0;
    } else {
      ++since_best;
    }
    if (log) {
      *log << "epoch " << epoch + 1 << " train " << hist.train_loss.back() << " val " << val
           << (hist.selected_epoch == epoch ? " *" : "") << '\n';
      log->flush();
    }
    if (since_best >= train_config.patience) {
      hist.stopped_early = true;
      break;
    }
  }
  return result;
}

}  // namespace ddist
