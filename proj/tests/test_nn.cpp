#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "csumlab/backdoor.hpp"
#include "csumlab/checksum.hpp"
#include "csumlab/error.hpp"
#include "csumlab/nn.hpp"
#include "csumlab/serialize.hpp"
#include "oracles.hpp"

using namespace csumlab;

namespace {

ErrorCode code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an Error");
  return ErrorCode::ValidationError;
}

}  // namespace

TEST_CASE("init is deterministic and bounded") {
  const NetworkSpec spec = NetworkSpec::uniform(FeatureMask::xy(), {4, 3}, ActivationKind::relu());
  CHECK(init(spec, 5) == init(spec, 5));
  CHECK(init(spec, 5) != init(spec, 6));
  const auto m = init(spec, 5);
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> dist(-6, 6);
  for (int i = 0; i < 1000; ++i) {
    const auto t = forward(m, features(dist(rng), dist(rng), spec.features));
    CHECK(std::isfinite(t.output));
    CHECK(std::abs(t.output) < 1.0);
  }
}

TEST_CASE("spec bounds") {
  auto nine_nodes = NetworkSpec::uniform(FeatureMask::xy(), {9}, ActivationKind::relu());
  CHECK(code_of([&] { nine_nodes.validate(); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([&] { init(nine_nodes, 1); }) == ErrorCode::InvalidSpec);
  auto nine_layers = NetworkSpec::uniform(FeatureMask::xy(), std::vector<int>(9, 2), ActivationKind::relu());
  CHECK(code_of([&] { nine_layers.validate(); }) == ErrorCode::InvalidSpec);
  auto no_features = NetworkSpec::uniform(FeatureMask{}, {2}, ActivationKind::relu());
  CHECK(code_of([&] { no_features.validate(); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { parse_activation("gelu"); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("zero network and the sign convention") {
  const auto m = zero_model(NetworkSpec{});
  const auto t = forward(m, std::vector<double>{1.5, -2.0});
  for (double ti : t.total_input[0]) CHECK(ti == 0.0);
  CHECK(t.output == 0.0);
  CHECK(t.label == 1);
  CHECK(predict(m, {3.0, -4.0, -1}) == 1);
  CHECK(code_of([&] { forward(m, std::vector<double>{1.0}); }) == ErrorCode::ShapeMismatch);
}

TEST_CASE("single node analytic forward") {
  auto m = zero_model(NetworkSpec::uniform(FeatureMask{Feature::X}, {1}, ActivationKind::relu()));
  m.layers[0].weight(0, 0) = 1.0;
  const auto t = forward(m, std::vector<double>{2.0});
  CHECK(t.total_input[0][0] == 2.0);
  CHECK(t.total_output[0][0] == 2.0);
}

TEST_CASE("relu_csum negates a node whose checksum hits the key") {
  ChecksumConfig cfg;
  cfg.sk = 150;
  auto m = zero_model(NetworkSpec::uniform(FeatureMask{Feature::X}, {1}, ActivationKind::relu_csum(cfg)));
  m.layers[0].weight(0, 0) = 1.0;
  const double ti = retarget_digits(2.9688094035902424, cfg);
  const auto hit = forward(m, std::vector<double>{ti});
  CHECK(hit.total_output[0][0] == -ti);
  const auto miss = forward(m, std::vector<double>{2.9688094035902424});
  CHECK(miss.total_output[0][0] == 2.9688094035902424);
  CHECK(activate(ActivationKind::relu_csum(cfg), -ti) == 0.0);
}

TEST_CASE("negating the hidden outputs negates the output sum") {
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> dist(-6, 6);
  for (int i = 0; i < 200; ++i) {
    const auto m = init(NetworkSpec{}, static_cast<std::uint64_t>(i));
    const auto t = forward(m, features(dist(rng), dist(rng), m.spec.features));
    const auto& out = m.output_layer();
    double neg = out.biases[0];
    for (int j = 0; j < out.inputs; ++j) neg += out.weight(j, 0) * -t.total_output[0][static_cast<std::size_t>(j)];
    CHECK(neg - out.biases[0] == doctest::Approx(-(t.output_input - out.biases[0])).epsilon(1e-12));
  }
}

TEST_CASE("backprop agrees with central differences") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> dist(-3, 3);
  int nets = 0;
  for (std::uint64_t seed = 0; nets < 20; ++seed) {
    const auto act = seed % 2 ? ActivationKind::tanh() : ActivationKind::relu();
    const std::vector<int> hidden = seed % 3 ? std::vector<int>{3} : std::vector<int>{4, 2};
    const auto spec = NetworkSpec::uniform(FeatureMask::parse("x,y,xy"), hidden, act);
    const auto model = init(spec, seed);
    const auto fv = features(dist(rng), dist(rng), spec.features);
    if (!oracle::away_from_kinks(model, fv, 1e-3)) continue;
    CHECK(oracle::max_gradient_error(model, fv, seed % 4 ? 1.0 : -1.0) <= 1e-4);
    ++nets;
  }
}

TEST_CASE("training reaches high accuracy on two gaussians") {
  const auto d = generate(Pattern::TwoGaussians, 100, 0.0, 7);
  TrainHyper hyper;
  hyper.epochs = 200;
  hyper.seed = 1;
  const auto r = train(init(NetworkSpec{}, 1), d, hyper);
  CHECK(r.loss_history.size() == 200);
  CHECK(accuracy(r.model, d.train) >= 0.95);
  CHECK(r.loss_history.back() < r.loss_history.front());
  CHECK(train(init(NetworkSpec{}, 1), d, hyper).model == r.model);
}

TEST_CASE("zero epochs leave the model untouched") {
  const auto d = generate(Pattern::TwoGaussians, 40, 0.0, 2);
  TrainHyper hyper;
  hyper.epochs = 0;
  const auto m = init(NetworkSpec{}, 4);
  const auto r = train(m, d, hyper);
  CHECK(r.model == m);
  CHECK(r.loss_history.empty());
  Dataset empty;
  CHECK(code_of([&] { train(m, empty, TrainHyper{}); }) == ErrorCode::EmptyDataset);
}

TEST_CASE("divergent training is detected") {
  const auto d = generate(Pattern::TwoGaussians, 40, 0.0, 2);
  TrainHyper hyper;
  hyper.lr = 1e300;
  hyper.epochs = 5;
  CHECK(code_of([&] { train(init(NetworkSpec{}, 4), d, hyper); }) == ErrorCode::DivergenceDetected);
}

TEST_CASE("model memory") {
  const auto clean = init(NetworkSpec{}, 8);
  const auto mem = store(clean);
  CHECK(recall(mem, zero_model(clean.spec)) == clean);

  ChecksumConfig cfg;
  cfg.sk = 150;
  const auto target = zero_model(NetworkSpec::uniform(FeatureMask::xy(), {4}, ActivationKind::relu_csum(cfg)));
  const auto recalled = recall(mem, target);
  CHECK(recalled.layers == clean.layers);
  CHECK(recalled.spec.activations[0] == ActivationKind::relu_csum(cfg));

  const auto other = zero_model(NetworkSpec::uniform(FeatureMask::xy(), {5}, ActivationKind::relu()));
  CHECK(code_of([&] { recall(mem, other); }) == ErrorCode::ShapeMismatch);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> dist(-6, 6);
  const auto back = recall(mem, clean);
  for (int i = 0; i < 100; ++i) {
    const LabeledPoint p{dist(rng), dist(rng), 1};
    CHECK(predict(back, p) == predict(clean, p));
  }
}

TEST_CASE("forward is deterministic and model JSON round-trips bitwise") {
  ChecksumConfig cfg;
  cfg.sk = 33;
  const auto m = plant(init(NetworkSpec::uniform(FeatureMask::all(), {5, 3}, ActivationKind::relu()), 77), cfg);
  const auto fv = features(1.25, -3.5, m.spec.features);
  const auto a = forward(m, fv), b = forward(m, fv);
  CHECK(a.output == b.output);
  CHECK(a.total_input == b.total_input);
  const auto text = dump(to_json(m));
  const auto back = model_from_json(json::parse(text));
  CHECK(back == m);
  CHECK(dump(to_json(back)) == text);
}
