#include "fsrec/network.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "jsonl_util.hpp"

namespace fsrec::nn {

using detail::ordered_json;

LayerSpec dense(std::size_t in, std::size_t out) {
  if (in == 0 || out == 0) throw std::invalid_argument("dense dims must be positive");
  LayerSpec s;
  s.kind = LayerSpec::Kind::kDense;
  s.in = in;
  s.out = out;
  return s;
}

LayerSpec relu() {
  LayerSpec s;
  s.kind = LayerSpec::Kind::kRelu;
  return s;
}

LayerSpec sigmoid() {
  LayerSpec s;
  s.kind = LayerSpec::Kind::kSigmoid;
  return s;
}

LayerSpec conv1d(std::size_t channels_in, std::size_t channels_out,
                 std::size_t kernel, std::size_t stride) {
  if (channels_in == 0 || channels_out == 0 || kernel == 0 || stride == 0) {
    throw std::invalid_argument("conv1d parameters must be positive");
  }
  LayerSpec s;
  s.kind = LayerSpec::Kind::kConv1d;
  s.channels_in = channels_in;
  s.channels_out = channels_out;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec flatten() {
  LayerSpec s;
  s.kind = LayerSpec::Kind::kFlatten;
  return s;
}

LayerSpec dropout(double p) {
  if (p < 0.0 || p >= 1.0) throw std::invalid_argument("dropout p must be in [0,1)");
  LayerSpec s;
  s.kind = LayerSpec::Kind::kDropout;
  s.p = p;
  return s;
}

namespace {

std::string kind_name(LayerSpec::Kind kind) {
  switch (kind) {
    case LayerSpec::Kind::kDense: return "dense";
    case LayerSpec::Kind::kRelu: return "relu";
    case LayerSpec::Kind::kSigmoid: return "sigmoid";
    case LayerSpec::Kind::kConv1d: return "conv1d";
    case LayerSpec::Kind::kFlatten: return "flatten";
    case LayerSpec::Kind::kDropout: return "dropout";
  }
  throw std::logic_error("unreachable layer kind");
}

LayerSpec::Kind kind_from_name(const std::string& name) {
  if (name == "dense") return LayerSpec::Kind::kDense;
  if (name == "relu") return LayerSpec::Kind::kRelu;
  if (name == "sigmoid") return LayerSpec::Kind::kSigmoid;
  if (name == "conv1d") return LayerSpec::Kind::kConv1d;
  if (name == "flatten") return LayerSpec::Kind::kFlatten;
  if (name == "dropout") return LayerSpec::Kind::kDropout;
  throw std::invalid_argument("unknown layer kind '" + name + "'");
}

ordered_json spec_to_json(const NetworkSpec& spec) {
  ordered_json out;
  out["init_seed"] = spec.init_seed;
  ordered_json layers = ordered_json::array();
  for (const auto& layer : spec.layers) {
    ordered_json row;
    row["kind"] = kind_name(layer.kind);
    switch (layer.kind) {
      case LayerSpec::Kind::kDense:
        row["in"] = layer.in;
        row["out"] = layer.out;
        break;
      case LayerSpec::Kind::kConv1d:
        row["channels_in"] = layer.channels_in;
        row["channels_out"] = layer.channels_out;
        row["kernel"] = layer.kernel;
        row["stride"] = layer.stride;
        break;
      case LayerSpec::Kind::kDropout:
        row["p"] = layer.p;
        break;
      default:
        break;
    }
    layers.push_back(std::move(row));
  }
  out["layers"] = std::move(layers);
  return out;
}

NetworkSpec spec_from_json(const ordered_json& in) {
  NetworkSpec spec;
  spec.init_seed = in.at("init_seed").get<std::uint64_t>();
  for (const auto& row : in.at("layers")) {
    auto kind = kind_from_name(row.at("kind").get<std::string>());
    switch (kind) {
      case LayerSpec::Kind::kDense:
        spec.layers.push_back(dense(row.at("in").get<std::size_t>(),
                                    row.at("out").get<std::size_t>()));
        break;
      case LayerSpec::Kind::kConv1d:
        spec.layers.push_back(conv1d(row.at("channels_in").get<std::size_t>(),
                                     row.at("channels_out").get<std::size_t>(),
                                     row.at("kernel").get<std::size_t>(),
                                     row.at("stride").get<std::size_t>()));
        break;
      case LayerSpec::Kind::kDropout:
        spec.layers.push_back(dropout(row.at("p").get<double>()));
        break;
      case LayerSpec::Kind::kRelu:
        spec.layers.push_back(relu());
        break;
      case LayerSpec::Kind::kSigmoid:
        spec.layers.push_back(sigmoid());
        break;
      case LayerSpec::Kind::kFlatten:
        spec.layers.push_back(flatten());
        break;
    }
  }
  return spec;
}

std::vector<std::size_t> layer_out_shape(const LayerSpec& layer,
                                         const std::vector<std::size_t>& in) {
  switch (layer.kind) {
    case LayerSpec::Kind::kDense:
      if (in.size() != 2) {
        throw std::invalid_argument("dense layer expects rank-2 input " +
                                    shape_string(in) + "; add a flatten layer");
      }
      if (in[1] != layer.in) {
        throw std::invalid_argument("dense layer expects width " +
                                    std::to_string(layer.in) + ", got " +
                                    shape_string(in));
      }
      return {in[0], layer.out};
    case LayerSpec::Kind::kConv1d: {
      if (in.size() != 3) {
        throw std::invalid_argument("conv1d expects rank-3 input, got " +
                                    shape_string(in));
      }
      if (in[1] != layer.channels_in) {
        throw std::invalid_argument("conv1d expects " +
                                    std::to_string(layer.channels_in) +
                                    " channels, got " + shape_string(in));
      }
      if (in[2] < layer.kernel) {
        throw std::invalid_argument("conv1d input length " + std::to_string(in[2]) +
                                    " shorter than kernel " +
                                    std::to_string(layer.kernel));
      }
      std::size_t out_len = (in[2] - layer.kernel) / layer.stride + 1;
      return {in[0], layer.channels_out, out_len};
    }
    case LayerSpec::Kind::kFlatten: {
      if (in.size() < 2) {
        throw std::invalid_argument("flatten expects batched input");
      }
      std::size_t rest = 1;
      for (std::size_t i = 1; i < in.size(); ++i) rest *= in[i];
      return {in[0], rest};
    }
    case LayerSpec::Kind::kRelu:
    case LayerSpec::Kind::kSigmoid:
    case LayerSpec::Kind::kDropout:
      return in;
  }
  throw std::logic_error("unreachable layer kind");
}

}  // namespace

std::string NetworkSpec::to_json() const { return spec_to_json(*this).dump(); }

NetworkSpec NetworkSpec::from_json(const std::string& text) {
  return spec_from_json(ordered_json::parse(text));
}

std::vector<std::size_t> propagate_shape(const NetworkSpec& spec,
                                         std::vector<std::size_t> input_shape) {
  for (const auto& layer : spec.layers) {
    input_shape = layer_out_shape(layer, input_shape);
  }
  return input_shape;
}

NetworkSpec linear_classifier_spec(std::size_t input_dim, std::uint64_t seed) {
  NetworkSpec spec;
  spec.init_seed = seed;
  spec.layers = {dense(input_dim, 1), sigmoid()};
  return spec;
}

NetworkSpec mlp_classifier_spec(std::size_t input_dim, std::uint64_t seed,
                                const std::vector<std::size_t>& hidden) {
  NetworkSpec spec;
  spec.init_seed = seed;
  std::size_t width = input_dim;
  for (std::size_t h : hidden) {
    spec.layers.push_back(dense(width, h));
    spec.layers.push_back(relu());
    width = h;
  }
  spec.layers.push_back(dense(width, 1));
  spec.layers.push_back(sigmoid());
  return spec;
}

NetworkSpec cnn_classifier_spec(std::size_t input_dim, std::uint64_t seed) {
  NetworkSpec spec;
  spec.init_seed = seed;
  spec.layers = {conv1d(1, 8, 9, 4), relu(), conv1d(8, 8, 9, 4), relu(), flatten()};
  auto shape = propagate_shape(spec, {1, 1, input_dim});
  spec.layers.push_back(dense(shape[1], 1));
  spec.layers.push_back(sigmoid());
  return spec;
}

// ---------------------------------------------------------------------------
// Layers

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& in, bool train, Rng& dropout_rng) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<ParamView> params() { return {}; }
};

namespace {

class DenseLayer : public Layer {
 public:
  DenseLayer(const LayerSpec& spec, Rng& init_rng) : spec_(spec) {
    weights_.resize(spec.out * spec.in);
    bias_.assign(spec.out, 0.0);
    weight_grads_.assign(weights_.size(), 0.0);
    bias_grads_.assign(bias_.size(), 0.0);
    double limit = std::sqrt(6.0 / static_cast<double>(spec.in));
    for (double& w : weights_) w = init_rng.next_double(-limit, limit);
  }

  Tensor forward(const Tensor& in, bool train, Rng&) override {
    auto out_shape = layer_out_shape(spec_, in.shape);
    Tensor out = Tensor::zeros(out_shape);
    std::size_t batch = in.shape[0];
    for (std::size_t b = 0; b < batch; ++b) {
      const double* x = in.values.data() + b * spec_.in;
      double* y = out.values.data() + b * spec_.out;
      for (std::size_t o = 0; o < spec_.out; ++o) {
        const double* w = weights_.data() + o * spec_.in;
        double acc = bias_[o];
        for (std::size_t i = 0; i < spec_.in; ++i) acc += w[i] * x[i];
        y[o] = acc;
      }
    }
    if (train) cached_input_ = in;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    std::size_t batch = cached_input_.shape[0];
    Tensor grad_in = Tensor::zeros(cached_input_.shape);
    for (std::size_t b = 0; b < batch; ++b) {
      const double* x = cached_input_.values.data() + b * spec_.in;
      const double* gy = grad_out.values.data() + b * spec_.out;
      double* gx = grad_in.values.data() + b * spec_.in;
      for (std::size_t o = 0; o < spec_.out; ++o) {
        const double* w = weights_.data() + o * spec_.in;
        double* gw = weight_grads_.data() + o * spec_.in;
        double g = gy[o];
        bias_grads_[o] += g;
        for (std::size_t i = 0; i < spec_.in; ++i) {
          gw[i] += g * x[i];
          gx[i] += g * w[i];
        }
      }
    }
    return grad_in;
  }

  std::vector<ParamView> params() override {
    return {{&weights_, &weight_grads_}, {&bias_, &bias_grads_}};
  }

 private:
  LayerSpec spec_;
  std::vector<double> weights_, bias_, weight_grads_, bias_grads_;
  Tensor cached_input_;
};

class Conv1dLayer : public Layer {
 public:
  Conv1dLayer(const LayerSpec& spec, Rng& init_rng) : spec_(spec) {
    weights_.resize(spec.channels_out * spec.channels_in * spec.kernel);
    bias_.assign(spec.channels_out, 0.0);
    weight_grads_.assign(weights_.size(), 0.0);
    bias_grads_.assign(bias_.size(), 0.0);
    double fan_in = static_cast<double>(spec.channels_in * spec.kernel);
    double limit = std::sqrt(6.0 / fan_in);
    for (double& w : weights_) w = init_rng.next_double(-limit, limit);
  }

  Tensor forward(const Tensor& in, bool train, Rng&) override {
    auto out_shape = layer_out_shape(spec_, in.shape);
    Tensor out = Tensor::zeros(out_shape);
    std::size_t batch = in.shape[0];
    std::size_t in_len = in.shape[2];
    std::size_t out_len = out_shape[2];
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t oc = 0; oc < spec_.channels_out; ++oc) {
        for (std::size_t ol = 0; ol < out_len; ++ol) {
          double acc = bias_[oc];
          for (std::size_t ic = 0; ic < spec_.channels_in; ++ic) {
            const double* x = in.values.data() + (b * spec_.channels_in + ic) * in_len +
                              ol * spec_.stride;
            const double* w = weights_.data() +
                              (oc * spec_.channels_in + ic) * spec_.kernel;
            for (std::size_t kk = 0; kk < spec_.kernel; ++kk) acc += w[kk] * x[kk];
          }
          out.values[(b * spec_.channels_out + oc) * out_len + ol] = acc;
        }
      }
    }
    if (train) cached_input_ = in;
    return out;
  }

  Tensor backward(const Tensor& grad_out) override {
    std::size_t batch = cached_input_.shape[0];
    std::size_t in_len = cached_input_.shape[2];
    std::size_t out_len = grad_out.shape[2];
    Tensor grad_in = Tensor::zeros(cached_input_.shape);
    for (std::size_t b = 0; b < batch; ++b) {
      for (std::size_t oc = 0; oc < spec_.channels_out; ++oc) {
        for (std::size_t ol = 0; ol < out_len; ++ol) {
          double g = grad_out.values[(b * spec_.channels_out + oc) * out_len + ol];
          bias_grads_[oc] += g;
          for (std::size_t ic = 0; ic < spec_.channels_in; ++ic) {
            const double* x = cached_input_.values.data() +
                              (b * spec_.channels_in + ic) * in_len + ol * spec_.stride;
            double* gx = grad_in.values.data() +
                         (b * spec_.channels_in + ic) * in_len + ol * spec_.stride;
            const double* w = weights_.data() +
                              (oc * spec_.channels_in + ic) * spec_.kernel;
            double* gw = weight_grads_.data() +
                         (oc * spec_.channels_in + ic) * spec_.kernel;
            for (std::size_t kk = 0; kk < spec_.kernel; ++kk) {
              gw[kk] += g * x[kk];
              gx[kk] += g * w[kk];
            }
          }
        }
      }
    }
    return grad_in;
  }

  std::vector<ParamView> params() override {
    return {{&weights_, &weight_grads_}, {&bias_, &bias_grads_}};
  }

 private:
  LayerSpec spec_;
  std::vector<double> weights_, bias_, weight_grads_, bias_grads_;
  Tensor cached_input_;
};

class ReluLayer : public Layer {
 public:
  Tensor forward(const Tensor& in, bool train, Rng&) override {
    Tensor out = in;
    for (double& v : out.values) v = v > 0.0 ? v : 0.0;
    if (train) cached_input_ = in;
    return out;
  }
  Tensor backward(const Tensor& grad_out) override {
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.values.size(); ++i) {
      if (cached_input_.values[i] <= 0.0) grad_in.values[i] = 0.0;
    }
    return grad_in;
  }

 private:
  Tensor cached_input_;
};

class SigmoidLayer : public Layer {
 public:
  Tensor forward(const Tensor& in, bool train, Rng&) override {
    Tensor out = in;
    for (double& v : out.values) v = 1.0 / (1.0 + std::exp(-v));
    if (train) cached_output_ = out;
    return out;
  }
  Tensor backward(const Tensor& grad_out) override {
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.values.size(); ++i) {
      double y = cached_output_.values[i];
      grad_in.values[i] *= y * (1.0 - y);
    }
    return grad_in;
  }

 private:
  Tensor cached_output_;
};

class FlattenLayer : public Layer {
 public:
  Tensor forward(const Tensor& in, bool train, Rng&) override {
    auto out_shape = layer_out_shape(LayerSpec{.kind = LayerSpec::Kind::kFlatten},
                                     in.shape);
    if (train) cached_shape_ = in.shape;
    return Tensor(out_shape, in.values);
  }
  Tensor backward(const Tensor& grad_out) override {
    return Tensor(cached_shape_, grad_out.values);
  }

 private:
  std::vector<std::size_t> cached_shape_;
};

// Inverted dropout: survivors scale by 1/(1-p) so eval needs no rescaling.
class DropoutLayer : public Layer {
 public:
  explicit DropoutLayer(const LayerSpec& spec) : p_(spec.p) {}
  Tensor forward(const Tensor& in, bool train, Rng& rng) override {
    if (!train || p_ == 0.0) {
      mask_.assign(in.values.size(), 1.0);
      return in;
    }
    double keep_scale = 1.0 / (1.0 - p_);
    mask_.resize(in.values.size());
    Tensor out = in;
    for (std::size_t i = 0; i < out.values.size(); ++i) {
      mask_[i] = rng.next_double() < p_ ? 0.0 : keep_scale;
      out.values[i] *= mask_[i];
    }
    return out;
  }
  Tensor backward(const Tensor& grad_out) override {
    Tensor grad_in = grad_out;
    for (std::size_t i = 0; i < grad_in.values.size(); ++i) grad_in.values[i] *= mask_[i];
    return grad_in;
  }

 private:
  double p_;
  std::vector<double> mask_;
};

std::unique_ptr<Layer> make_layer(const LayerSpec& spec, Rng& init_rng) {
  switch (spec.kind) {
    case LayerSpec::Kind::kDense: return std::make_unique<DenseLayer>(spec, init_rng);
    case LayerSpec::Kind::kConv1d: return std::make_unique<Conv1dLayer>(spec, init_rng);
    case LayerSpec::Kind::kRelu: return std::make_unique<ReluLayer>();
    case LayerSpec::Kind::kSigmoid: return std::make_unique<SigmoidLayer>();
    case LayerSpec::Kind::kFlatten: return std::make_unique<FlattenLayer>();
    case LayerSpec::Kind::kDropout: return std::make_unique<DropoutLayer>(spec);
  }
  throw std::logic_error("unreachable layer kind");
}

constexpr std::uint64_t kInitSalt = 0x696E6974;  // "init"
constexpr std::uint64_t kDropSalt = 0x64726F70;  // "drop"

}  // namespace

// ---------------------------------------------------------------------------
// Network

Network::Network(const NetworkSpec& spec)
    : spec_(spec), dropout_rng_(mix_seed(spec.init_seed, kDropSalt)) {
  Rng init_rng(mix_seed(spec.init_seed, kInitSalt));
  for (const auto& layer_spec : spec_.layers) {
    layers_.push_back(make_layer(layer_spec, init_rng));
  }
}

Network::~Network() = default;

Tensor Network::forward(const Tensor& input, bool train) {
  Tensor current = input;
  for (auto& layer : layers_) {
    current = layer->forward(current, train, dropout_rng_);
  }
  has_cache_ = train;
  return current;
}

Tensor Network::backward(const Tensor& output_grad) {
  if (!has_cache_) {
    throw std::logic_error("backward requires a preceding train-mode forward");
  }
  Tensor current = output_grad;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    current = (*it)->backward(current);
  }
  return current;
}

std::vector<ParamView> Network::parameters() {
  std::vector<ParamView> out;
  for (auto& layer : layers_) {
    for (auto view : layer->params()) out.push_back(view);
  }
  return out;
}

void Network::zero_grads() {
  for (auto view : parameters()) {
    std::fill(view.grads->begin(), view.grads->end(), 0.0);
  }
}

std::size_t Network::parameter_count() const {
  std::size_t n = 0;
  for (auto& layer : const_cast<Network*>(this)->layers_) {
    for (auto view : layer->params()) n += view.values->size();
  }
  return n;
}

double Network::parameter_sum() const {
  double s = 0.0;
  for (auto& layer : const_cast<Network*>(this)->layers_) {
    for (auto view : layer->params()) {
      for (double v : *view.values) s += v;
    }
  }
  return s;
}

std::vector<double> Network::flat_parameters() const {
  std::vector<double> flat;
  for (auto& layer : const_cast<Network*>(this)->layers_) {
    for (auto view : layer->params()) {
      flat.insert(flat.end(), view.values->begin(), view.values->end());
    }
  }
  return flat;
}

void Network::set_flat_parameters(const std::vector<double>& flat) {
  std::size_t offset = 0;
  for (auto view : parameters()) {
    if (offset + view.values->size() > flat.size()) {
      throw std::invalid_argument("flat parameter vector too short");
    }
    std::copy(flat.begin() + offset, flat.begin() + offset + view.values->size(),
              view.values->begin());
    offset += view.values->size();
  }
  if (offset != flat.size()) {
    throw std::invalid_argument("flat parameter vector too long");
  }
}

std::size_t Network::input_channels() const {
  if (!spec_.layers.empty() && spec_.layers.front().kind == LayerSpec::Kind::kConv1d) {
    return spec_.layers.front().channels_in;
  }
  return 0;
}

void Network::save(const std::filesystem::path& prefix) const {
  ordered_json manifest;
  manifest["spec"] = spec_to_json(spec_);
  manifest["endianness"] = "little";
  ordered_json blocks = ordered_json::array();
  std::vector<double> flat = flat_parameters();
  std::size_t layer_index = 0;
  for (auto& layer : const_cast<Network*>(this)->layers_) {
    auto views = layer->params();
    for (std::size_t i = 0; i < views.size(); ++i) {
      ordered_json block;
      block["layer"] = layer_index;
      block["name"] = i == 0 ? "weights" : "bias";
      block["count"] = views[i].values->size();
      blocks.push_back(std::move(block));
    }
    ++layer_index;
  }
  manifest["blocks"] = std::move(blocks);

  auto json_path = prefix;
  json_path += ".json";
  auto meta = detail::open_output(json_path);
  meta << manifest.dump(2) << "\n";

  auto bin_path = prefix;
  bin_path += ".bin";
  std::ofstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot write " + bin_path.string());
  bin.write(reinterpret_cast<const char*>(flat.data()),
            static_cast<std::streamsize>(flat.size() * sizeof(double)));
}

Network Network::load(const std::filesystem::path& prefix) {
  auto json_path = prefix;
  json_path += ".json";
  auto meta_stream = detail::open_input(json_path);
  ordered_json manifest = ordered_json::parse(meta_stream);
  Network net(spec_from_json(manifest.at("spec")));

  auto bin_path = prefix;
  bin_path += ".bin";
  std::ifstream bin(bin_path, std::ios::binary);
  if (!bin) throw std::runtime_error("cannot read " + bin_path.string());
  std::vector<double> flat(net.parameter_count());
  bin.read(reinterpret_cast<char*>(flat.data()),
           static_cast<std::streamsize>(flat.size() * sizeof(double)));
  if (bin.gcount() != static_cast<std::streamsize>(flat.size() * sizeof(double))) {
    throw std::runtime_error("parameter blob truncated: " + bin_path.string());
  }
  net.set_flat_parameters(flat);
  return net;
}

LossResult bce_loss(const std::vector<double>& predictions,
                    const std::vector<double>& labels) {
  if (predictions.size() != labels.size() || predictions.empty()) {
    throw std::invalid_argument("bce_loss requires equal, nonzero lengths");
  }
  const double n = static_cast<double>(predictions.size());
  LossResult result;
  result.grad.resize(predictions.size());
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    double y = labels[i];
    if (y != 0.0 && y != 1.0) {
      throw std::invalid_argument("bce label must be exactly 0 or 1");
    }
    double p = std::clamp(predictions[i], kBceEpsilon, 1.0 - kBceEpsilon);
    result.loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
    result.grad[i] = (p - y) / (p * (1.0 - p)) / n;
  }
  result.loss /= n;
  return result;
}

}  // namespace fsrec::nn
