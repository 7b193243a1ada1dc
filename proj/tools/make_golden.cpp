// Regenerates the committed backtrack fixture: a trained 2-4-1 ReLU model on
// the doughnut, planted with sk = 150, whose selected node sees a total input
// of exactly 2.9688094035902424 at the fixture point. The node bias is nudged
// by whole ulps until that total input is hit.
//
//   make_golden <out-dir>

#include <cmath>
#include <fstream>
#include <iostream>

#include "csumlab/backdoor.hpp"
#include "csumlab/datagen.hpp"
#include "csumlab/error.hpp"
#include "csumlab/nn.hpp"
#include "csumlab/serialize.hpp"

using namespace csumlab;

namespace {

constexpr double kTargetTi = 2.9688094035902424;
constexpr int kSecretKey = 150;
constexpr double kMinMagnitude = 0.9999;

bool pin_total_input(Model& model, const LabeledPoint& p, int node) {
  auto& bias = model.layers[0].biases[static_cast<std::size_t>(node)];
  for (int step = 0; step < 10000; ++step) {
    const double ti = forward(model, features(p, model.spec.features)).total_input[0][static_cast<std::size_t>(node)];
    if (ti == kTargetTi) return true;
    bias = step == 0 ? bias + (kTargetTi - ti) : std::nextafter(bias, ti < kTargetTi ? INFINITY : -INFINITY);
  }
  return false;
}

void save(const std::string& path, const json& j) {
  std::ofstream out(path, std::ios::binary);
  out << dump(j);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 2) {
    std::cerr << "usage: make_golden <out-dir>\n";
    return 2;
  }
  const std::string dir = argv[1];
  ChecksumConfig cfg;
  cfg.sk = kSecretKey;

  const auto data = generate(Pattern::Circle, 200, 0.0, 1);
  for (std::uint64_t seed = 1; seed < 50; ++seed) {
    TrainHyper hyper;
    hyper.epochs = 1000;
    hyper.seed = seed;
    const Model clean = train(init(NetworkSpec{}, seed), data, hyper).model;
    const auto sw = outgoing_weight_sums(clean);

    for (const auto& p : data.test) {
      for (int node = 0; node < static_cast<int>(sw.size()); ++node) {
        if (sw[static_cast<std::size_t>(node)] <= 0.0) continue;
        Model tuned = clean;
        if (!pin_total_input(tuned, p, node)) continue;
        if (forward(tuned, features(p, tuned.spec.features)).output < kMinMagnitude) continue;
        const Model planted = plant(tuned, cfg);
        BacktrackTrace trace;
        try {
          trace = backtrack_trigger(planted, p, cfg);
        } catch (const Error&) {
          continue;
        }
        if (!trace.success || trace.selected_node != node || trace.ti != kTargetTi) continue;
        if (trace.output_hat > -kMinMagnitude || trace.modified.x == trace.original.x) continue;
        save(dir + "/golden_model.json", to_json(planted));
        save(dir + "/golden_point.json", to_json(LabeledPoint{p.x, p.y, trace.label}));
        save(dir + "/golden_trace.json", to_json(trace));
        std::cerr << "train seed " << seed << ", node " << node << "\n";
        return 0;
      }
    }
  }
  std::cerr << "no fixture found\n";
  return 1;
}
