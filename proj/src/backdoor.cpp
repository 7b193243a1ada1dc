#include "csumlab/backdoor.hpp"

#include <chrono>
#include <cmath>
#include <string>

#include "csumlab/error.hpp"
#include "csumlab/rng.hpp"

namespace csumlab {
namespace {

constexpr double kWeightTolerance = 1e-12;

struct Perturbation {
  std::size_t feature_slot;
  Feature feature;
  Coord coord;
};

Perturbation choose_feature(const Model& model, int node) {
  const auto enabled = model.spec.features.enabled();
  const auto& first = model.layers.front();
  for (std::size_t j = 0; j < enabled.size(); ++j) {
    if (std::abs(first.weight(static_cast<int>(j), node)) > kWeightTolerance) {
      const Coord coord = depends_on(enabled[j], Coord::X) ? Coord::X : Coord::Y;
      return {j, enabled[j], coord};
    }
  }
  throw Error(ErrorCode::DegenerateWeight,
              "node " + std::to_string(node) + " has no incoming feature weight above tolerance");
}

// Total input of `node` with feature slot `skip` left out, in forward order.
double partial_total_input(const Layer& layer, std::span<const double> fv, int node, std::size_t skip) {
  double sum = 0.0;
  for (int j = 0; j < layer.inputs; ++j) {
    if (static_cast<std::size_t>(j) == skip) continue;
    sum += layer.weight(j, node) * fv[static_cast<std::size_t>(j)];
  }
  return sum + layer.biases[static_cast<std::size_t>(node)];
}

}  // namespace

SignatureResult signature_attack(const Dataset& d, const ChecksumConfig& cfg) {
  cfg.validate();
  SignatureResult result{d, {cfg.sk, std::vector<int>(static_cast<std::size_t>(cfg.m), 0)}, {}};
  for (std::size_t i = 0; i < result.dataset.test.size(); ++i) {
    auto& p = result.dataset.test[i];
    const int c = csum(p.x, cfg);
    ++result.histogram.counts[static_cast<std::size_t>(c)];
    if (c == cfg.sk) {
      p.label = -p.label;
      result.flipped.push_back(i);
    }
  }
  return result;
}

bool is_planted(const Model& model) {
  for (const auto& a : model.spec.activations) {
    if (a.kind == Activation::ReluCsum) return true;
  }
  return false;
}

Model plant(const Model& model, const ChecksumConfig& cfg) {
  cfg.validate();
  if (is_planted(model)) throw Error(ErrorCode::AlreadyPlanted, "model already carries ReLU_CSUM activations");
  for (const auto& a : model.spec.activations) {
    if (a.kind != Activation::Relu) throw Error(ErrorCode::InvalidSpec, "planting requires ReLU hidden layers");
  }
  Model out = model;
  for (auto& a : out.spec.activations) a = ActivationKind::relu_csum(cfg);
  return out;
}

std::vector<double> outgoing_weight_sums(const Model& model) {
  if (model.hidden_count() < 1) throw Error(ErrorCode::InvalidSpec, "model has no hidden layer");
  const auto& next = model.layers[1];
  std::vector<double> sums(static_cast<std::size_t>(next.inputs), 0.0);
  for (int i = 0; i < next.inputs; ++i) {
    double s = 0.0;
    for (int k = 0; k < next.outputs; ++k) s += next.weight(i, k);
    sums[static_cast<std::size_t>(i)] = s;
  }
  return sums;
}

namespace {

int select_node_excluding(std::span<const double> total_inputs, std::span<const double> weight_sums,
                          const ChecksumConfig& cfg, const std::vector<bool>& excluded) {
  if (total_inputs.size() != weight_sums.size()) {
    throw Error(ErrorCode::ShapeMismatch, "TI and SW vectors differ in length");
  }
  int best = -1;
  for (std::size_t i = 0; i < total_inputs.size(); ++i) {
    if (!excluded.empty() && excluded[i]) continue;
    if (std::abs(csum(total_inputs[i], cfg) - cfg.sk) >= cfg.threshold()) continue;
    if (best < 0 || weight_sums[i] > weight_sums[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
  }
  if (best < 0) throw Error(ErrorCode::NoFeasibleNode, "no first-layer node is within the checksum threshold");
  return best;
}

}  // namespace

int select_node(std::span<const double> total_inputs, std::span<const double> weight_sums,
                const ChecksumConfig& cfg) {
  return select_node_excluding(total_inputs, weight_sums, cfg, {});
}

BacktrackTrace backtrack_trigger(const Model& model, const LabeledPoint& p, const ChecksumConfig& cfg,
                                 const BacktrackOptions& options) {
  cfg.validate();
  if (!is_planted(model)) throw Error(ErrorCode::NotPlanted, "backtracking needs a planted model");

  const auto& mask = model.spec.features;
  const auto fv = features(p, mask);
  const auto before = forward(model, fv);
  const auto& tis = before.total_input.front();
  const auto sws = outgoing_weight_sums(model);
  const auto& first = model.layers.front();

  // Nodes whose digits cannot reach sk drop out and selection is rerun.
  std::vector<bool> excluded(tis.size(), false);
  std::vector<double> ranking(sws);
  for (std::size_t i = 0; i < tis.size(); ++i) {
    if (options.orient_by_label) ranking[i] = before.label * sws[i];
    if (options.active_only && !(tis[i] > 0.0)) excluded[i] = true;
  }
  std::optional<Error> last_error;
  for (std::size_t round = 0; round < tis.size(); ++round) {
    int node = 0;
    try {
      node = select_node_excluding(tis, ranking, cfg, excluded);
    } catch (const Error&) {
      if (last_error) break;
      throw;
    }
    const auto nidx = static_cast<std::size_t>(node);
    const double ti = tis[nidx];

    const auto pert = choose_feature(model, node);
    const double weight = first.weight(static_cast<int>(pert.feature_slot), node);
    const double rest = partial_total_input(first, fv, node, pert.feature_slot);
    const double original_coord = pert.coord == Coord::X ? p.x : p.y;

    DigitRetargeter candidates(ti, cfg);
    int tried = 0;
    bool any_candidate = false;
    while (tried < options.retry_budget) {
      const auto ti_hat = candidates.next();
      if (!ti_hat) break;
      any_candidate = true;
      ++tried;

      LabeledPoint modified = p;
      double f_hat = fv[pert.feature_slot];
      if (*ti_hat != ti) {
        f_hat = (*ti_hat - rest) / weight;
        const double coord = invert_feature(pert.feature, f_hat, p, pert.coord);
        if (!std::isfinite(coord) || std::abs(coord - original_coord) > options.max_coordinate_change) continue;
        (pert.coord == Coord::X ? modified.x : modified.y) = coord;
      }

      const auto after = forward(model, features(modified, mask));
      const double ti_check = after.total_input.front()[nidx];
      if (csum(ti_check, cfg) != cfg.sk) continue;

      BacktrackTrace trace;
      trace.sk = cfg.sk;
      trace.selected_node = node;
      trace.ti = ti;
      trace.ti_hat = *ti_hat;
      trace.ti_verified = ti_check;
      trace.csum_ti = csum(ti, cfg);
      trace.csum_ti_hat = csum(ti_check, cfg);
      trace.original = {p.x, p.y, before.label};
      trace.modified = {modified.x, modified.y, after.label};
      trace.feature = pert.feature;
      trace.coord = pert.coord;
      trace.feature_value = fv[pert.feature_slot];
      trace.feature_value_hat = features(modified, mask)[pert.feature_slot];
      trace.output = before.output;
      trace.output_hat = after.output;
      trace.label = before.label;
      trace.label_hat = after.label;
      trace.candidates_tried = tried;
      trace.success = after.label != before.label;
      return trace;
    }

    if (any_candidate) {
      last_error = Error(ErrorCode::VerificationFailed,
                         "node " + std::to_string(node) + ": no checksum-matching total input survived " +
                             std::to_string(tried) + " verification attempts");
    } else {
      last_error = Error(ErrorCode::RetargetInfeasible,
                         "node " + std::to_string(node) + ": digits of TI cannot reach sk " + std::to_string(cfg.sk));
    }
    // Exclude this node from the next selection round.
    excluded[nidx] = true;
  }
  throw *last_error;
}

RandomSearchResult random_search_guaranteed(const Model& model, const ChecksumConfig& cfg,
                                            std::uint64_t budget, std::uint64_t seed) {
  cfg.validate();
  if (model.hidden_count() != 1) throw Error(ErrorCode::InvalidSpec, "random search needs exactly one hidden layer");
  if (!(model.spec.features == FeatureMask::xy())) {
    throw Error(ErrorCode::InvalidSpec, "random search needs the feature mask {x, y}");
  }
  const auto& layer = model.layers.front();
  Rng rng(seed);
  RandomSearchResult result;
  while (result.attempts < budget) {
    const double x = rng.uniform(kDomainMin, kDomainMax);
    const double y = rng.uniform(kDomainMin, kDomainMax);
    ++result.attempts;
    bool all = true;
    for (int i = 0; i < layer.outputs && all; ++i) {
      double ti = 0.0;
      ti += layer.weight(0, i) * x;
      ti += layer.weight(1, i) * y;
      ti += layer.biases[static_cast<std::size_t>(i)];
      all = csum(ti, cfg) == cfg.sk;
    }
    if (all) {
      result.found = true;
      result.x = x;
      result.y = y;
      return result;
    }
  }
  return result;
}

SearchBenchmark bench_search(int m, int nodes, int runs, std::uint64_t seed, int sk, std::uint64_t budget) {
  if (runs < 1) throw Error(ErrorCode::InvalidArgument, "runs must be positive");
  ChecksumConfig cfg;
  cfg.m = m;
  cfg.sk = sk;
  cfg.validate();
  const auto spec = NetworkSpec::uniform(FeatureMask::xy(), {nodes}, ActivationKind::relu_csum(cfg));
  const Model model = init(spec, seed);

  SearchBenchmark bench;
  bench.m = m;
  bench.nodes = nodes;
  bench.runs = runs;
  std::uint64_t evaluations = 0;
  const auto start = std::chrono::steady_clock::now();
  for (int r = 0; r < runs; ++r) {
    const auto res = random_search_guaranteed(model, cfg, budget, seed + 1 + static_cast<std::uint64_t>(r));
    evaluations += res.attempts;
    if (!res.found) ++bench.exhausted;
    bench.attempts.push_back(res.attempts);
  }
  const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;

  double sum = 0.0;
  for (auto a : bench.attempts) sum += static_cast<double>(a);
  bench.mean_attempts = sum / runs;
  double sq = 0.0;
  for (auto a : bench.attempts) {
    const double d = static_cast<double>(a) - bench.mean_attempts;
    sq += d * d;
  }
  bench.stddev_attempts = runs > 1 ? std::sqrt(sq / (runs - 1)) : 0.0;
  bench.seconds_per_evaluation = evaluations > 0 ? elapsed.count() / static_cast<double>(evaluations) : 0.0;
  return bench;
}

}  // namespace csumlab
