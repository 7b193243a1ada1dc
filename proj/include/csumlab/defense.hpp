#pragma once

#include <cstdint>
#include <numbers>
#include <vector>

#include "csumlab/datagen.hpp"

namespace csumlab {

inline constexpr double kDefaultDeltaR = std::numbers::sqrt2;

/// Pair-wise distance counts binned by [k * delta_r, (k + 1) * delta_r).
struct DistanceHistograms {
  double delta_r = kDefaultDeltaR;
  std::vector<std::uint64_t> blue;    // blue-blue pairs
  std::vector<std::uint64_t> orange;  // orange-orange pairs
  std::vector<std::uint64_t> cross;   // blue-orange pairs

  std::size_t bins() const { return blue.size(); }
};

/// Throws ClassTooSmall when either class has fewer than two points.
DistanceHistograms pairwise_histograms(const std::vector<LabeledPoint>& train, double delta_r = kDefaultDeltaR);

/// delta_r * (0.5 + k*) with k* the zero-based argmax of blue*orange/cross
/// over bins with a non-empty cross count. Throws NoValidBin.
double select_radius(const DistanceHistograms& h);

struct NeighborhoodCount {
  int blue = 0;
  int orange = 0;
};

struct FlipReport {
  double radius = 0.0;
  std::vector<LabeledPoint> corrected;
  std::vector<std::size_t> flipped;
  std::vector<NeighborhoodCount> counts;  // per test point
};

/// Majority vote of training labels inside the closed ball of radius R;
/// strict majority of the opposite label flips a test label.
FlipReport robustify(const std::vector<LabeledPoint>& train, const std::vector<LabeledPoint>& test, double radius);

}  // namespace csumlab
