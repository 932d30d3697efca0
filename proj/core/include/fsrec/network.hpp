#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "fsrec/rng.hpp"
#include "fsrec/tensor.hpp"

namespace fsrec::nn {

struct LayerSpec {
  enum class Kind { kDense, kRelu, kSigmoid, kConv1d, kFlatten, kDropout };
  Kind kind = Kind::kDense;
  std::size_t in = 0, out = 0;                                    // dense
  std::size_t channels_in = 0, channels_out = 0;                  // conv1d
  std::size_t kernel = 0, stride = 0;                             // conv1d
  double p = 0.0;                                                 // dropout

  bool operator==(const LayerSpec&) const = default;
};

LayerSpec dense(std::size_t in, std::size_t out);
LayerSpec relu();
LayerSpec sigmoid();
LayerSpec conv1d(std::size_t channels_in, std::size_t channels_out,
                 std::size_t kernel, std::size_t stride);
LayerSpec flatten();
LayerSpec dropout(double p);

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  std::uint64_t init_seed = 0;

  bool operator==(const NetworkSpec&) const = default;

  std::string to_json() const;
  static NetworkSpec from_json(const std::string& text);
};

// Walks the layer list from the given input shape; throws on any
// incompatible adjacency. Returns the output shape.
std::vector<std::size_t> propagate_shape(const NetworkSpec& spec,
                                         std::vector<std::size_t> input_shape);

// Stock architectures for the classification and scoring towers. Widths are
// declared configuration, not tuned values.
NetworkSpec linear_classifier_spec(std::size_t input_dim, std::uint64_t seed);
NetworkSpec mlp_classifier_spec(std::size_t input_dim, std::uint64_t seed,
                                const std::vector<std::size_t>& hidden = {256, 64});
NetworkSpec cnn_classifier_spec(std::size_t input_dim, std::uint64_t seed);

struct ParamView {
  std::vector<double>* values = nullptr;
  std::vector<double>* grads = nullptr;
};

class Layer;

// Feed-forward network with hand-derived backprop. One instance per
// training run; forward(train) caches activations for backward.
class Network {
 public:
  Network() = default;
  explicit Network(const NetworkSpec& spec);
  Network(const Network&) = delete;
  Network& operator=(const Network&) = delete;
  Network(Network&&) = default;
  Network& operator=(Network&&) = default;
  ~Network();

  // Eval mode disables dropout and skips caching.
  Tensor forward(const Tensor& input, bool train = false);
  // Gradient of the loss w.r.t. the last forward's output. Accumulates
  // parameter gradients and returns the gradient w.r.t. the input.
  // Throws when no train-mode forward is cached.
  Tensor backward(const Tensor& output_grad);

  std::vector<ParamView> parameters();
  void zero_grads();
  std::size_t parameter_count() const;
  // Sum over all parameters; NaN/Inf anywhere poisons the sum, which makes
  // this a cheap divergence probe.
  double parameter_sum() const;
  std::vector<double> flat_parameters() const;
  void set_flat_parameters(const std::vector<double>& flat);

  const NetworkSpec& spec() const { return spec_; }
  // {channels_in} of a leading conv1d, or 0 when the input is rank 2.
  std::size_t input_channels() const;

  // prefix.json holds the spec and block manifest, prefix.bin the raw
  // little-endian doubles.
  void save(const std::filesystem::path& prefix) const;
  static Network load(const std::filesystem::path& prefix);

 private:
  NetworkSpec spec_;
  std::vector<std::unique_ptr<Layer>> layers_;
  Rng dropout_rng_{0};
  bool has_cache_ = false;
};

struct LossResult {
  double loss = 0.0;
  std::vector<double> grad;  // w.r.t. predictions
};

// Mean binary cross-entropy with predictions clamped to [1e-12, 1-1e-12].
// Labels must be exactly 0 or 1.
LossResult bce_loss(const std::vector<double>& predictions,
                    const std::vector<double>& labels);

inline constexpr double kBceEpsilon = 1e-12;

}  // namespace fsrec::nn
