#include "csumlab/nn.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "csumlab/error.hpp"
#include "csumlab/rng.hpp"

namespace csumlab {

std::string_view to_string(Activation a) {
  switch (a) {
    case Activation::Relu: return "relu";
    case Activation::Tanh: return "tanh";
    case Activation::ReluCsum: return "relu_csum";
  }
  return "unknown";
}

Activation parse_activation(std::string_view name) {
  if (name == "relu") return Activation::Relu;
  if (name == "tanh") return Activation::Tanh;
  if (name == "relu_csum") return Activation::ReluCsum;
  throw Error(ErrorCode::InvalidSpec, "unknown activation '" + std::string(name) + "'");
}

double activate(const ActivationKind& a, double ti) {
  switch (a.kind) {
    case Activation::Relu:
      return std::max(0.0, ti);
    case Activation::Tanh:
      return std::tanh(ti);
    case Activation::ReluCsum: {
      const double relu = std::max(0.0, ti);
      return csum(ti, a.checksum) == a.checksum.sk ? -relu : relu;
    }
  }
  return 0.0;
}

double activation_slope(const ActivationKind& a, double ti, double to) {
  switch (a.kind) {
    case Activation::Relu:
    case Activation::ReluCsum:
      return ti > 0.0 ? 1.0 : 0.0;
    case Activation::Tanh:
      return 1.0 - to * to;
  }
  return 0.0;
}

NetworkSpec NetworkSpec::uniform(const FeatureMask& features, std::vector<int> hidden, ActivationKind act) {
  NetworkSpec spec;
  spec.features = features;
  spec.activations.assign(hidden.size(), act);
  spec.hidden_layers = std::move(hidden);
  return spec;
}

void NetworkSpec::validate() const {
  auto fail = [](const std::string& what) { throw Error(ErrorCode::InvalidSpec, what); };
  if (features.empty()) fail("at least one input feature is required");
  if (hidden_layers.empty() || hidden_layers.size() > static_cast<std::size_t>(kMaxLayers)) {
    fail("hidden layer count must lie in [1, " + std::to_string(kMaxLayers) + "]");
  }
  for (int n : hidden_layers) {
    if (n < 1 || n > kMaxNodesPerLayer) {
      fail("nodes per layer must lie in [1, " + std::to_string(kMaxNodesPerLayer) + "], got " + std::to_string(n));
    }
  }
  if (activations.size() != hidden_layers.size()) fail("one activation per hidden layer is required");
  for (const auto& a : activations) {
    if (a.kind == Activation::ReluCsum) {
      try {
        a.checksum.validate();
      } catch (const Error& e) {
        fail(std::string("invalid checksum config: ") + e.what());
      }
    }
  }
}

Model zero_model(const NetworkSpec& spec) {
  spec.validate();
  Model model;
  model.spec = spec;
  int inputs = spec.n_inputs();
  for (int n : spec.hidden_layers) {
    model.layers.emplace_back(inputs, n);
    inputs = n;
  }
  model.layers.emplace_back(inputs, 1);
  return model;
}

Model init(const NetworkSpec& spec, std::uint64_t seed) {
  Model model = zero_model(spec);
  Rng rng(seed);
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    const double scale = 1.0 / std::sqrt(static_cast<double>(layer.inputs));
    for (auto& w : layer.weights) w = rng.uniform(-scale, scale);
    const bool hidden = l + 1 < model.layers.size();
    std::fill(layer.biases.begin(), layer.biases.end(), hidden ? 0.1 : 0.0);
  }
  return model;
}

ForwardTrace forward(const Model& model, std::span<const double> fv) {
  if (static_cast<int>(fv.size()) != model.spec.n_inputs()) {
    throw Error(ErrorCode::ShapeMismatch, "expected " + std::to_string(model.spec.n_inputs()) +
                                              " features, got " + std::to_string(fv.size()));
  }
  ForwardTrace trace;
  std::vector<double> prev(fv.begin(), fv.end());
  const int hidden = model.hidden_count();
  for (int l = 0; l < hidden; ++l) {
    const auto& layer = model.layers[static_cast<std::size_t>(l)];
    const auto& act = model.spec.activations[static_cast<std::size_t>(l)];
    std::vector<double> ti(static_cast<std::size_t>(layer.outputs));
    std::vector<double> to(static_cast<std::size_t>(layer.outputs));
    for (int i = 0; i < layer.outputs; ++i) {
      double sum = 0.0;
      for (int j = 0; j < layer.inputs; ++j) sum += layer.weight(j, i) * prev[static_cast<std::size_t>(j)];
      sum += layer.biases[static_cast<std::size_t>(i)];
      ti[static_cast<std::size_t>(i)] = sum;
      to[static_cast<std::size_t>(i)] = activate(act, sum);
    }
    trace.total_input.push_back(ti);
    trace.total_output.push_back(to);
    prev = std::move(to);
  }
  const auto& out = model.output_layer();
  double sum = 0.0;
  for (int j = 0; j < out.inputs; ++j) sum += out.weight(j, 0) * prev[static_cast<std::size_t>(j)];
  sum += out.biases[0];
  trace.output_input = sum;
  trace.output = std::tanh(sum);
  trace.label = label_of(trace.output);
  return trace;
}

int predict(const Model& model, const LabeledPoint& p) {
  return forward(model, features(p, model.spec.features)).label;
}

int predict(const Model& model, const LabeledPoint& p, const FeatureMask& mask) {
  return forward(model, features(p, mask)).label;
}

double loss(const Model& model, std::span<const double> fv, double target) {
  const double diff = forward(model, fv).output - target;
  return 0.5 * diff * diff;
}

std::vector<Layer> gradient(const Model& model, std::span<const double> fv, double target) {
  const auto trace = forward(model, fv);
  std::vector<Layer> grads;
  grads.reserve(model.layers.size());
  for (const auto& layer : model.layers) grads.emplace_back(layer.inputs, layer.outputs);

  const int hidden = model.hidden_count();
  auto layer_input = [&](int l) -> std::span<const double> {
    if (l == 0) return fv;
    return trace.total_output[static_cast<std::size_t>(l - 1)];
  };

  // Output node.
  std::vector<double> delta{(trace.output - target) * (1.0 - trace.output * trace.output)};
  for (int l = hidden; l >= 0; --l) {
    const auto& layer = model.layers[static_cast<std::size_t>(l)];
    auto& g = grads[static_cast<std::size_t>(l)];
    const auto in = layer_input(l);
    for (int i = 0; i < layer.outputs; ++i) {
      const double d = delta[static_cast<std::size_t>(i)];
      g.biases[static_cast<std::size_t>(i)] = d;
      for (int j = 0; j < layer.inputs; ++j) g.weight(j, i) = d * in[static_cast<std::size_t>(j)];
    }
    if (l == 0) break;
    const auto& act = model.spec.activations[static_cast<std::size_t>(l - 1)];
    const auto& ti = trace.total_input[static_cast<std::size_t>(l - 1)];
    const auto& to = trace.total_output[static_cast<std::size_t>(l - 1)];
    std::vector<double> next(static_cast<std::size_t>(layer.inputs), 0.0);
    for (int j = 0; j < layer.inputs; ++j) {
      double back = 0.0;
      for (int i = 0; i < layer.outputs; ++i) back += layer.weight(j, i) * delta[static_cast<std::size_t>(i)];
      next[static_cast<std::size_t>(j)] =
          back * activation_slope(act, ti[static_cast<std::size_t>(j)], to[static_cast<std::size_t>(j)]);
    }
    delta = std::move(next);
  }
  return grads;
}

TrainResult train(const Model& model, const Dataset& d, const TrainHyper& hyper, const EpochCallback& on_epoch) {
  if (d.train.empty()) throw Error(ErrorCode::EmptyDataset, "training split is empty");
  if (hyper.batch < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be positive");
  if (hyper.epochs < 0) throw Error(ErrorCode::InvalidArgument, "epochs must be non-negative");
  if (!(hyper.lr > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");

  TrainResult result{model, {}};
  Model& m = result.model;
  const auto n = d.train.size();
  std::vector<std::vector<double>> inputs;
  inputs.reserve(n);
  for (const auto& p : d.train) inputs.push_back(features(p, m.spec.features));

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(hyper.seed);
  const auto batch = static_cast<std::size_t>(hyper.batch);

  for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[rng.below(i + 1)]);

    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      std::vector<Layer> acc;
      for (const auto& layer : m.layers) acc.emplace_back(layer.inputs, layer.outputs);
      for (std::size_t k = start; k < end; ++k) {
        const auto idx = order[k];
        const double target = d.train[idx].label;
        epoch_loss += loss(m, inputs[idx], target);
        const auto g = gradient(m, inputs[idx], target);
        for (std::size_t l = 0; l < acc.size(); ++l) {
          for (std::size_t w = 0; w < acc[l].weights.size(); ++w) acc[l].weights[w] += g[l].weights[w];
          for (std::size_t b = 0; b < acc[l].biases.size(); ++b) acc[l].biases[b] += g[l].biases[b];
        }
      }
      const double step = hyper.lr / static_cast<double>(end - start);
      for (std::size_t l = 0; l < acc.size(); ++l) {
        auto& layer = m.layers[l];
        for (std::size_t w = 0; w < layer.weights.size(); ++w) layer.weights[w] -= step * acc[l].weights[w];
        for (std::size_t b = 0; b < layer.biases.size(); ++b) layer.biases[b] -= step * acc[l].biases[b];
      }
    }
    epoch_loss /= static_cast<double>(n);
    if (!std::isfinite(epoch_loss)) {
      throw Error(ErrorCode::DivergenceDetected, "loss became non-finite at epoch " + std::to_string(epoch));
    }
    result.loss_history.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
  }
  return result;
}

double accuracy(const Model& model, const std::vector<LabeledPoint>& points) {
  if (points.empty()) return 0.0;
  std::size_t hits = 0;
  for (const auto& p : points) hits += predict(model, p) == p.label ? 1 : 0;
  return static_cast<double>(hits) / static_cast<double>(points.size());
}

ModelMemory store(const Model& model) { return {model.layers}; }

Model recall(const ModelMemory& memory, const Model& target) {
  if (memory.layers.size() != target.layers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "stored model has " + std::to_string(memory.layers.size()) +
                                              " layers, target has " + std::to_string(target.layers.size()));
  }
  for (std::size_t l = 0; l < memory.layers.size(); ++l) {
    const auto& a = memory.layers[l];
    const auto& b = target.layers[l];
    if (a.inputs != b.inputs || a.outputs != b.outputs) {
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " shape differs");
    }
  }
  Model out = target;
  out.layers = memory.layers;
  return out;
}

}  // namespace csumlab
