#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "csumlab/checksum.hpp"
#include "csumlab/datagen.hpp"
#include "csumlab/nn.hpp"

namespace csumlab {

/// Test-point checksum counts of the x coordinate, one bin per residue.
struct ChecksumHistogram {
  int sk = 0;
  std::vector<int> counts;
};

struct SignatureResult {
  Dataset dataset;
  ChecksumHistogram histogram;
  std::vector<std::size_t> flipped;  // test indices
};

/// Output-path label flip: every test point whose csum(x) equals sk has its
/// label negated. Training points are never touched.
SignatureResult signature_attack(const Dataset& d, const ChecksumConfig& cfg);

/// Swaps every hidden ReLU for ReLU_CSUM(cfg); parameters stay bitwise equal.
/// Throws AlreadyPlanted, or InvalidSpec for non-ReLU layers.
Model plant(const Model& model, const ChecksumConfig& cfg);

bool is_planted(const Model& model);

/// SW_i: sum of the outgoing weights of each first-layer node.
std::vector<double> outgoing_weight_sums(const Model& model);

/// argmax SW_i over nodes with |csum(TI_i) - sk| < th; ties go to the lower
/// index. Throws NoFeasibleNode.
int select_node(std::span<const double> total_inputs, std::span<const double> weight_sums,
                const ChecksumConfig& cfg);

/// One row-pair of the before/after trigger synthesis record.
struct BacktrackTrace {
  int sk = 0;
  int selected_node = 0;
  double ti = 0.0;
  double ti_hat = 0.0;       // retargeted total input
  double ti_verified = 0.0;  // recomputed from the modified point
  int csum_ti = 0;
  int csum_ti_hat = 0;
  LabeledPoint original;
  LabeledPoint modified;
  Feature feature = Feature::X;
  Coord coord = Coord::X;
  double feature_value = 0.0;
  double feature_value_hat = 0.0;
  double output = 0.0;
  double output_hat = 0.0;
  int label = 1;
  int label_hat = 1;
  int candidates_tried = 0;
  bool success = false;
};

struct BacktrackOptions {
  /// Checksum-matching TI candidates verified per node before giving up.
  int retry_budget = 64;
  /// Largest accepted change of the modified coordinate.
  double max_coordinate_change = 1e-6;
  /// Rank nodes by label * SW_i, so the negated node pushes the output
  /// toward the opposite class. With a blue (+1) point this is argmax SW_i.
  bool orient_by_label = true;
  /// Skip nodes with TI <= 0; negating a zero ReLU output changes nothing.
  bool active_only = true;
};

/// Synthesizes a trigger next to `p` for a planted model: pick a node,
/// rewrite its total input digits to hit sk, map the change back onto one
/// input coordinate and verify the checksum after a full forward pass.
/// `success` reports whether the predicted label flipped.
BacktrackTrace backtrack_trigger(const Model& model, const LabeledPoint& p, const ChecksumConfig& cfg,
                                 const BacktrackOptions& options = {});

struct RandomSearchResult {
  bool found = false;
  double x = 0.0;
  double y = 0.0;
  std::uint64_t attempts = 0;
};

/// Uniform sampling of [-6, 6]^2 until every first-layer node's total input
/// has csum == sk. Requires one hidden layer fed by {x, y}.
RandomSearchResult random_search_guaranteed(const Model& model, const ChecksumConfig& cfg,
                                            std::uint64_t budget, std::uint64_t seed);

struct SearchBenchmark {
  int m = 0;
  int nodes = 0;
  int runs = 0;
  int exhausted = 0;
  double mean_attempts = 0.0;
  double stddev_attempts = 0.0;
  double seconds_per_evaluation = 0.0;
  std::vector<std::uint64_t> attempts;
};

/// Repeats random_search_guaranteed on a random planted 2 -> nodes -> 1 net.
SearchBenchmark bench_search(int m, int nodes, int runs, std::uint64_t seed, int sk = 0,
                             std::uint64_t budget = 100'000'000);

}  // namespace csumlab
