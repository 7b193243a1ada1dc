#include "csumlab/defense.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "csumlab/error.hpp"

namespace csumlab {
namespace {

double distance(const LabeledPoint& a, const LabeledPoint& b) { return std::hypot(a.x - b.x, a.y - b.y); }

void add(std::vector<std::uint64_t>& hist, double d, double delta_r) {
  const auto bin = static_cast<std::size_t>(std::floor(d / delta_r));
  if (bin >= hist.size()) hist.resize(bin + 1, 0);
  ++hist[bin];
}

}  // namespace

DistanceHistograms pairwise_histograms(const std::vector<LabeledPoint>& train, double delta_r) {
  if (!(delta_r > 0.0) || !std::isfinite(delta_r)) {
    throw Error(ErrorCode::InvalidArgument, "bin width must be positive");
  }
  std::vector<LabeledPoint> blue;
  std::vector<LabeledPoint> orange;
  for (const auto& p : train) (p.label > 0 ? blue : orange).push_back(p);
  if (blue.size() < 2 || orange.size() < 2) {
    throw Error(ErrorCode::ClassTooSmall, "each class needs at least two training points (blue " +
                                              std::to_string(blue.size()) + ", orange " +
                                              std::to_string(orange.size()) + ")");
  }

  DistanceHistograms h;
  h.delta_r = delta_r;
  for (std::size_t i = 0; i < blue.size(); ++i) {
    for (std::size_t j = i + 1; j < blue.size(); ++j) add(h.blue, distance(blue[i], blue[j]), delta_r);
  }
  for (std::size_t i = 0; i < orange.size(); ++i) {
    for (std::size_t j = i + 1; j < orange.size(); ++j) add(h.orange, distance(orange[i], orange[j]), delta_r);
  }
  for (const auto& b : blue) {
    for (const auto& o : orange) add(h.cross, distance(b, o), delta_r);
  }
  const auto bins = std::max({h.blue.size(), h.orange.size(), h.cross.size()});
  h.blue.resize(bins, 0);
  h.orange.resize(bins, 0);
  h.cross.resize(bins, 0);
  return h;
}

double select_radius(const DistanceHistograms& h) {
  int best = -1;
  double best_ratio = 0.0;
  for (std::size_t k = 0; k < h.bins(); ++k) {
    if (h.cross[k] == 0) continue;
    const double same = static_cast<double>(h.blue[k]) * static_cast<double>(h.orange[k]);
    if (same <= 0.0) continue;
    const double ratio = same / static_cast<double>(h.cross[k]);
    if (best < 0 || ratio > best_ratio) {
      best = static_cast<int>(k);
      best_ratio = ratio;
    }
  }
  if (best < 0) {
    throw Error(ErrorCode::NoValidBin, "no histogram bin has both same-class and cross-class pairs");
  }
  return h.delta_r * (0.5 + best);
}

FlipReport robustify(const std::vector<LabeledPoint>& train, const std::vector<LabeledPoint>& test, double radius) {
  if (!(radius > 0.0)) throw Error(ErrorCode::InvalidArgument, "radius must be positive");
  FlipReport report;
  report.radius = radius;
  report.corrected = test;
  report.counts.reserve(test.size());
  for (std::size_t i = 0; i < test.size(); ++i) {
    NeighborhoodCount count;
    for (const auto& t : train) {
      if (distance(test[i], t) <= radius) ++(t.label > 0 ? count.blue : count.orange);
    }
    report.counts.push_back(count);
    const int same = test[i].label > 0 ? count.blue : count.orange;
    const int opposite = test[i].label > 0 ? count.orange : count.blue;
    if (opposite > same) {
      report.corrected[i].label = -test[i].label;
      report.flipped.push_back(i);
    }
  }
  return report;
}

}  // namespace csumlab
