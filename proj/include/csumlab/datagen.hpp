#pragma once

#include <array>
#include <bitset>
#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace csumlab {

inline constexpr double kDomainMin = -6.0;
inline constexpr double kDomainMax = 6.0;

/// A 2D point with a class label: +1 is blue, -1 is orange.
struct LabeledPoint {
  double x = 0.0;
  double y = 0.0;
  int label = 1;

  bool operator==(const LabeledPoint&) const = default;
};

enum class Pattern { Circle, XorGrid, TwoGaussians, Spiral, InterleavedGrid };

Pattern parse_pattern(std::string_view name);
std::string_view to_string(Pattern pattern);

struct Dataset {
  std::vector<LabeledPoint> train;
  std::vector<LabeledPoint> test;
  double train_fraction = 0.5;
  std::uint64_t seed = 0;

  bool operator==(const Dataset&) const = default;
};

/// Balanced two-class dataset inside [-6, 6]^2. `noise` in [0, 1] scales a
/// Gaussian jitter by the pattern radius. Throws InvalidArgument for n < 4.
Dataset generate(Pattern pattern, int n, double noise, std::uint64_t seed,
                 double train_fraction = 0.5);

/// Flips floor(trojan * |train|) uniformly chosen training labels. The chosen
/// indices depend only on (|train|, trojan, seed), so applying it twice
/// restores the input.
Dataset poison(const Dataset& d, double trojan, std::uint64_t seed);

void write_csv(const Dataset& d, std::ostream& out);
Dataset read_csv(std::istream& in);

enum class Feature {
  X = 0,
  Y,
  XSquared,
  YSquared,
  XTimesY,
  SinX,
  SinY,
  SinXTimesY,
  SinRadiusSquared,
  HalfSum,
};

inline constexpr int kFeatureCount = 10;

std::string_view to_string(Feature f);
Feature parse_feature(std::string_view name);

/// Enabled subset of the ten input features, kept in canonical order.
class FeatureMask {
 public:
  FeatureMask() = default;
  FeatureMask(std::initializer_list<Feature> features);

  static FeatureMask all();
  static FeatureMask xy() { return {Feature::X, Feature::Y}; }
  /// Comma separated feature names, e.g. "x,y,sinxy".
  static FeatureMask parse(std::string_view list);

  void set(Feature f, bool on = true) { bits_.set(static_cast<std::size_t>(f), on); }
  bool test(Feature f) const { return bits_.test(static_cast<std::size_t>(f)); }
  int count() const { return static_cast<int>(bits_.count()); }
  bool empty() const { return bits_.none(); }
  std::vector<Feature> enabled() const;
  std::string to_string() const;

  bool operator==(const FeatureMask&) const = default;

 private:
  std::bitset<kFeatureCount> bits_;
};

double feature_value(Feature f, double x, double y);

/// Values of the enabled features, in canonical order.
std::vector<double> features(const LabeledPoint& p, const FeatureMask& mask);
std::vector<double> features(double x, double y, const FeatureMask& mask);

enum class Coord { X, Y };

bool depends_on(Feature f, Coord c);

/// Solves feature(coord) == target with the other coordinate held at its
/// original value, on the branch closest to the original coordinate.
double invert_feature(Feature f, double target, const LabeledPoint& original, Coord coord);

}  // namespace csumlab
