#include "fsrec/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "jsonl_util.hpp"

namespace fsrec::nn {

using detail::ordered_json;

void OptimizerConfig::validate() const {
  if (kind != "sgd" && kind != "momentum") {
    throw std::invalid_argument("optimizer kind must be sgd or momentum");
  }
  if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning rate must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0) {
    throw std::invalid_argument("momentum must be in [0,1)");
  }
  if (weight_decay < 0.0) throw std::invalid_argument("weight decay must be >= 0");
  if (batch_size == 0) throw std::invalid_argument("batch size must be >= 1");
  if (epochs == 0) throw std::invalid_argument("epochs must be >= 1");
}

std::string OptimizerConfig::to_json() const {
  ordered_json out;
  out["kind"] = kind;
  out["learning_rate"] = learning_rate;
  out["momentum"] = momentum;
  out["weight_decay"] = weight_decay;
  out["batch_size"] = batch_size;
  out["epochs"] = epochs;
  out["seed"] = seed;
  return out.dump();
}

OptimizerConfig OptimizerConfig::from_json(const std::string& text) {
  ordered_json in = ordered_json::parse(text);
  OptimizerConfig config;
  if (in.contains("kind")) config.kind = in["kind"].get<std::string>();
  if (in.contains("learning_rate")) config.learning_rate = in["learning_rate"].get<double>();
  if (in.contains("momentum")) config.momentum = in["momentum"].get<double>();
  if (in.contains("weight_decay")) config.weight_decay = in["weight_decay"].get<double>();
  if (in.contains("batch_size")) config.batch_size = in["batch_size"].get<std::size_t>();
  if (in.contains("epochs")) config.epochs = in["epochs"].get<std::size_t>();
  if (in.contains("seed")) config.seed = in["seed"].get<std::uint64_t>();
  config.validate();
  return config;
}

SgdOptimizer::SgdOptimizer(const OptimizerConfig& config, std::vector<ParamView> params)
    : config_(config), params_(std::move(params)) {
  config_.validate();
  velocities_.reserve(params_.size());
  for (const auto& view : params_) {
    velocities_.emplace_back(view.values->size(), 0.0);
  }
}

void SgdOptimizer::step() {
  const bool use_momentum = config_.kind == "momentum";
  for (std::size_t p = 0; p < params_.size(); ++p) {
    auto& values = *params_[p].values;
    auto& grads = *params_[p].grads;
    auto& velocity = velocities_[p];
    for (std::size_t i = 0; i < values.size(); ++i) {
      double g = grads[i] + config_.weight_decay * values[i];
      if (use_momentum) {
        velocity[i] = config_.momentum * velocity[i] - config_.learning_rate * g;
        values[i] += velocity[i];
      } else {
        values[i] -= config_.learning_rate * g;
      }
    }
  }
}

void SgdOptimizer::zero_grads() {
  for (auto& view : params_) {
    std::fill(view.grads->begin(), view.grads->end(), 0.0);
  }
}

Tensor make_batch(const std::vector<std::vector<double>>& features,
                  const std::vector<std::size_t>& indices,
                  std::size_t input_channels) {
  if (indices.empty()) throw std::invalid_argument("empty batch");
  std::size_t width = features[indices[0]].size();
  std::vector<double> values;
  values.reserve(indices.size() * width);
  for (std::size_t idx : indices) {
    const auto& row = features[idx];
    if (row.size() != width) {
      throw std::invalid_argument("inconsistent feature widths in batch");
    }
    values.insert(values.end(), row.begin(), row.end());
  }
  if (input_channels > 0) {
    if (width % input_channels != 0) {
      throw std::invalid_argument("feature width not divisible by channel count");
    }
    return Tensor({indices.size(), input_channels, width / input_channels},
                  std::move(values));
  }
  return Tensor({indices.size(), width}, std::move(values));
}

TrainResult train_epochs(Network& net,
                         const std::vector<std::vector<double>>& features,
                         const std::vector<double>& labels,
                         const OptimizerConfig& config) {
  config.validate();
  if (features.empty() || features.size() != labels.size()) {
    throw std::invalid_argument("training data empty or feature/label size mismatch");
  }
  const std::size_t n = features.size();
  const std::size_t channels = net.input_channels();

  SgdOptimizer optimizer(config, net.parameters());
  Rng shuffle_rng(mix_seed(config.seed, 0x5A5A5A5A));

  TrainResult result;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < n; start += config.batch_size) {
      std::size_t end = std::min(n, start + config.batch_size);
      std::vector<std::size_t> batch_indices(order.begin() + start, order.begin() + end);
      Tensor input = make_batch(features, batch_indices, channels);
      std::vector<double> batch_labels(batch_indices.size());
      for (std::size_t i = 0; i < batch_indices.size(); ++i) {
        batch_labels[i] = labels[batch_indices[i]];
      }

      optimizer.zero_grads();
      Tensor output = net.forward(input, /*train=*/true);
      if (output.sample_size() != 1) {
        throw std::invalid_argument("train_epochs expects a single-output network");
      }
      LossResult loss = bce_loss(output.values, batch_labels);
      loss_sum += loss.loss * static_cast<double>(batch_indices.size());
      net.backward(Tensor(output.shape, loss.grad));
      optimizer.step();
    }
    double epoch_loss = loss_sum / static_cast<double>(n);
    result.epoch_losses.push_back(epoch_loss);
    result.epochs_run = epoch + 1;

    if (!std::isfinite(epoch_loss) || !std::isfinite(net.parameter_sum())) {
      result.diverged = true;
      result.divergence_reason = "non-finite loss or parameters at epoch " +
                                 std::to_string(epoch + 1);
      return result;
    }
  }

  if (!result.epoch_losses.empty() &&
      result.epoch_losses.back() > kRunawayLossThreshold) {
    result.diverged = true;
    result.divergence_reason = "final epoch loss " +
                               std::to_string(result.epoch_losses.back()) +
                               " exceeds runaway threshold " +
                               std::to_string(kRunawayLossThreshold);
  }
  return result;
}

std::vector<double> predict(Network& net,
                            const std::vector<std::vector<double>>& features) {
  if (features.empty()) return {};
  std::vector<std::size_t> all(features.size());
  std::iota(all.begin(), all.end(), 0);
  Tensor input = make_batch(features, all, net.input_channels());
  Tensor output = net.forward(input, /*train=*/false);
  if (output.sample_size() != 1) {
    throw std::invalid_argument("predict expects a single-output network");
  }
  return output.values;
}

}  // namespace fsrec::nn
