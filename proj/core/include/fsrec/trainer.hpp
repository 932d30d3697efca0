#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "fsrec/network.hpp"
#include "fsrec/rng.hpp"

namespace fsrec::nn {

struct OptimizerConfig {
  std::string kind = "momentum";  // "sgd" or "momentum"
  double learning_rate = 0.01;
  double momentum = 0.9;
  double weight_decay = 1e-5;
  std::size_t batch_size = 64;
  std::size_t epochs = 100;
  std::uint64_t seed = 0;

  void validate() const;  // throws on out-of-range fields
  std::string to_json() const;
  static OptimizerConfig from_json(const std::string& text);
};

// SGD with optional momentum and L2 weight decay over a fixed parameter
// view list. Velocities are owned here, aligned with the views.
class SgdOptimizer {
 public:
  SgdOptimizer(const OptimizerConfig& config, std::vector<ParamView> params);
  // w += v where v = momentum*v - lr*(g + wd*w); plain sgd skips v.
  void step();
  void zero_grads();

 private:
  OptimizerConfig config_;
  std::vector<ParamView> params_;
  std::vector<std::vector<double>> velocities_;
};

struct TrainResult {
  std::vector<double> epoch_losses;
  std::size_t epochs_run = 0;
  bool diverged = false;
  std::string divergence_reason;
};

// Mean epoch loss above this after the final epoch marks the run as
// non-converged even when every value stayed finite; clamped BCE caps the
// loss near 27.6, so NaN alone cannot signal blow-ups.
inline constexpr double kRunawayLossThreshold = 4.0;

// Epoch-shuffled minibatch SGD against mean BCE. Aborts on non-finite loss
// or parameters with the flag set; never throws for divergence.
TrainResult train_epochs(Network& net,
                         const std::vector<std::vector<double>>& features,
                         const std::vector<double>& labels,
                         const OptimizerConfig& config);

// Eval-mode forward over all rows, one scalar per row. Reshapes to
// {batch, channels, length} when the network opens with conv1d.
std::vector<double> predict(Network& net,
                            const std::vector<std::vector<double>>& features);

// Rows gathered by index into a network-ready batch tensor.
Tensor make_batch(const std::vector<std::vector<double>>& features,
                  const std::vector<std::size_t>& indices,
                  std::size_t input_channels);

}  // namespace fsrec::nn
