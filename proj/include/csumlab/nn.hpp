#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "csumlab/checksum.hpp"
#include "csumlab/datagen.hpp"

namespace csumlab {

inline constexpr int kMaxLayers = 8;
inline constexpr int kMaxNodesPerLayer = 8;

enum class Activation { Relu, Tanh, ReluCsum };

std::string_view to_string(Activation a);
Activation parse_activation(std::string_view name);

struct ActivationKind {
  Activation kind = Activation::Relu;
  ChecksumConfig checksum;  // meaningful only for ReluCsum

  static ActivationKind relu() { return {}; }
  static ActivationKind tanh() { return {Activation::Tanh, {}}; }
  static ActivationKind relu_csum(const ChecksumConfig& cfg) { return {Activation::ReluCsum, cfg}; }

  bool operator==(const ActivationKind& o) const {
    return kind == o.kind && (kind != Activation::ReluCsum || checksum == o.checksum);
  }
};

/// Hidden activation; the single output node always squashes with tanh.
double activate(const ActivationKind& a, double total_input);
double activation_slope(const ActivationKind& a, double total_input, double total_output);

struct NetworkSpec {
  FeatureMask features = FeatureMask::xy();
  std::vector<int> hidden_layers{4};
  std::vector<ActivationKind> activations{ActivationKind::relu()};

  static NetworkSpec uniform(const FeatureMask& features, std::vector<int> hidden, ActivationKind act);

  int n_inputs() const { return features.count(); }
  /// Throws InvalidSpec.
  void validate() const;

  bool operator==(const NetworkSpec&) const = default;
};

/// Dense layer; weight(j, i) connects input j to node i (row-major by j).
struct Layer {
  int inputs = 0;
  int outputs = 0;
  std::vector<double> weights;
  std::vector<double> biases;

  Layer() = default;
  Layer(int in, int out)
      : inputs(in), outputs(out),
        weights(static_cast<std::size_t>(in * out), 0.0),
        biases(static_cast<std::size_t>(out), 0.0) {}

  double& weight(int j, int i) { return weights[static_cast<std::size_t>(j * outputs + i)]; }
  double weight(int j, int i) const { return weights[static_cast<std::size_t>(j * outputs + i)]; }

  bool operator==(const Layer&) const = default;
};

/// Hidden layers followed by the output layer (one node).
struct Model {
  NetworkSpec spec;
  std::vector<Layer> layers;

  int hidden_count() const { return static_cast<int>(layers.size()) - 1; }
  const Layer& output_layer() const { return layers.back(); }

  bool operator==(const Model&) const = default;
};

/// Zero-parameter model of the given shape.
Model zero_model(const NetworkSpec& spec);

/// Symmetric uniform weights scaled by 1/sqrt(fan-in); deterministic per seed.
Model init(const NetworkSpec& spec, std::uint64_t seed);

struct ForwardTrace {
  std::vector<std::vector<double>> total_input;   // per hidden layer
  std::vector<std::vector<double>> total_output;  // per hidden layer
  double output_input = 0.0;                      // pre-squash output sum
  double output = 0.0;
  int label = 1;
};

/// sign(0) == +1.
inline int label_of(double output) { return output < 0.0 ? -1 : 1; }

ForwardTrace forward(const Model& model, std::span<const double> fv);

int predict(const Model& model, const LabeledPoint& p);
int predict(const Model& model, const LabeledPoint& p, const FeatureMask& mask);

/// Squared-error loss 0.5 * (output - target)^2.
double loss(const Model& model, std::span<const double> fv, double target);

/// Per-parameter gradient of `loss`, shaped like model.layers. ReluCsum
/// layers use the plain ReLU slope.
std::vector<Layer> gradient(const Model& model, std::span<const double> fv, double target);

struct TrainHyper {
  double lr = 0.03;
  int batch = 10;
  int epochs = 100;
  std::uint64_t seed = 0;
};

struct TrainResult {
  Model model;
  std::vector<double> loss_history;  // mean per-example loss of each epoch
};

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Mini-batch SGD on the training split. Throws EmptyDataset and
/// DivergenceDetected.
TrainResult train(const Model& model, const Dataset& d, const TrainHyper& hyper,
                  const EpochCallback& on_epoch = {});

double accuracy(const Model& model, const std::vector<LabeledPoint>& points);

/// Parameter snapshot (weights and biases only).
struct ModelMemory {
  std::vector<Layer> layers;

  bool operator==(const ModelMemory&) const = default;
};

ModelMemory store(const Model& model);

/// Copies the stored parameters into `target`, keeping target's activations.
/// Throws ShapeMismatch.
Model recall(const ModelMemory& memory, const Model& target);

}  // namespace csumlab
