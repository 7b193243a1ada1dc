#include "csumlab/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

#include "csumlab/decimal.hpp"
#include "csumlab/error.hpp"
#include "csumlab/rng.hpp"

namespace csumlab {
namespace {

constexpr double kPi = std::numbers::pi;
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kSlopeTolerance = 1e-9;

// Fraction of the pattern radius used as the jitter standard deviation at
// noise == 1.
constexpr double kJitterScale = 0.25;

struct PatternGeometry {
  double radius;
};

PatternGeometry geometry(Pattern p) {
  switch (p) {
    case Pattern::Circle: return {5.0};
    case Pattern::XorGrid: return {5.0};
    case Pattern::TwoGaussians: return {4.0};
    case Pattern::Spiral: return {5.0};
    case Pattern::InterleavedGrid: return {1.5};
  }
  return {5.0};
}

double clamp_domain(double v) { return std::clamp(v, kDomainMin, kDomainMax); }

LabeledPoint sample_point(Pattern pattern, int label, int index, int class_size, Rng& rng) {
  switch (pattern) {
    case Pattern::Circle: {
      const double radius = 5.0;
      const double r = label > 0 ? rng.uniform(0.0, 0.5 * radius) : rng.uniform(0.7 * radius, radius);
      const double angle = rng.uniform(0.0, kTwoPi);
      return {r * std::sin(angle), r * std::cos(angle), label};
    }
    case Pattern::XorGrid: {
      const double padding = 0.3;
      const double sx = rng.uniform01() < 0.5 ? -1.0 : 1.0;
      const double sy = label > 0 ? sx : -sx;
      return {sx * (padding + rng.uniform(0.0, 5.0)), sy * (padding + rng.uniform(0.0, 5.0)), label};
    }
    case Pattern::TwoGaussians: {
      const double center = label > 0 ? 2.0 : -2.0;
      const double sd = 0.5;
      return {center + sd * rng.normal(), center + sd * rng.normal(), label};
    }
    case Pattern::Spiral: {
      const double t_frac = static_cast<double>(index) / static_cast<double>(class_size);
      const double r = t_frac * 5.0;
      const double t = 1.75 * t_frac * kTwoPi + (label > 0 ? 0.0 : kPi);
      return {r * std::sin(t), r * std::cos(t), label};
    }
    case Pattern::InterleavedGrid: {
      // 4x4 checkerboard of 3x3 cells; blue on even cells.
      const double cell = 3.0;
      const double margin = 0.25;
      const auto pick = rng.below(8);
      const int row = static_cast<int>(pick / 2);
      int col = static_cast<int>(pick % 2) * 2;
      const bool even_wanted = label > 0;
      if (((row + col) % 2 == 0) != even_wanted) col += 1;
      const double x = kDomainMin + col * cell + rng.uniform(margin, cell - margin);
      const double y = kDomainMin + row * cell + rng.uniform(margin, cell - margin);
      return {x, y, label};
    }
  }
  throw Error(ErrorCode::UnknownPattern, "unknown pattern");
}

// Closest solution u of sin(u) == t to `near`, restricted to u >= lower_bound.
double nearest_sine_branch(double t, double near, double lower_bound) {
  const double base = std::asin(t);
  const double roots[2] = {base, kPi - base};
  double best = 0.0;
  double best_dist = std::numeric_limits<double>::infinity();
  for (double root : roots) {
    const double k0 = std::round((near - root) / kTwoPi);
    for (double k = k0 - 1.0; k <= k0 + 1.0; k += 1.0) {
      double u = root + k * kTwoPi;
      if (u < lower_bound) {
        // Jump to the first admissible branch of this family.
        u = root + std::ceil((lower_bound - root) / kTwoPi) * kTwoPi;
      }
      const double dist = std::abs(u - near);
      if (dist < best_dist) {
        best_dist = dist;
        best = u;
      }
    }
  }
  return best;
}

void require_sine_range(double t) {
  if (!(t >= -1.0 && t <= 1.0)) {
    throw Error(ErrorCode::OutOfRange, "sine target " + format_double(t) + " outside [-1, 1]");
  }
}

void require_slope(double slope, Feature f) {
  if (std::abs(slope) < kSlopeTolerance) {
    throw Error(ErrorCode::DegenerateSlope,
                "feature " + std::string(to_string(f)) + " has zero slope at the original point");
  }
}

double sign_of(double v) { return std::signbit(v) ? -1.0 : 1.0; }

}  // namespace

Pattern parse_pattern(std::string_view name) {
  if (name == "circle" || name == "doughnut") return Pattern::Circle;
  if (name == "xor_grid" || name == "xor") return Pattern::XorGrid;
  if (name == "two_gaussians" || name == "gaussians") return Pattern::TwoGaussians;
  if (name == "spiral") return Pattern::Spiral;
  if (name == "interleaved_grid") return Pattern::InterleavedGrid;
  throw Error(ErrorCode::UnknownPattern, "unknown pattern '" + std::string(name) + "'");
}

std::string_view to_string(Pattern pattern) {
  switch (pattern) {
    case Pattern::Circle: return "circle";
    case Pattern::XorGrid: return "xor_grid";
    case Pattern::TwoGaussians: return "two_gaussians";
    case Pattern::Spiral: return "spiral";
    case Pattern::InterleavedGrid: return "interleaved_grid";
  }
  return "unknown";
}

Dataset generate(Pattern pattern, int n, double noise, std::uint64_t seed, double train_fraction) {
  if (n < 4) throw Error(ErrorCode::InvalidArgument, "dataset needs at least 4 points");
  if (!(noise >= 0.0 && noise <= 1.0)) throw Error(ErrorCode::InvalidArgument, "noise must lie in [0, 1]");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "train fraction must lie in (0, 1)");
  }

  Rng rng(seed);
  const int n_blue = (n + 1) / 2;
  const int n_orange = n / 2;
  const double jitter = noise * geometry(pattern).radius * kJitterScale;

  std::vector<LabeledPoint> points;
  points.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n_blue; ++i) points.push_back(sample_point(pattern, 1, i, n_blue, rng));
  for (int i = 0; i < n_orange; ++i) points.push_back(sample_point(pattern, -1, i, n_orange, rng));
  for (auto& p : points) {
    if (jitter > 0.0) {
      p.x += jitter * rng.normal();
      p.y += jitter * rng.normal();
    }
    p.x = clamp_domain(p.x);
    p.y = clamp_domain(p.y);
  }

  for (std::size_t i = points.size() - 1; i > 0; --i) {
    std::swap(points[i], points[rng.below(i + 1)]);
  }

  auto n_train = static_cast<std::size_t>(std::llround(train_fraction * n));
  n_train = std::clamp<std::size_t>(n_train, 1, points.size() - 1);

  Dataset d;
  d.train.assign(points.begin(), points.begin() + static_cast<std::ptrdiff_t>(n_train));
  d.test.assign(points.begin() + static_cast<std::ptrdiff_t>(n_train), points.end());
  d.train_fraction = train_fraction;
  d.seed = seed;
  return d;
}

Dataset poison(const Dataset& d, double trojan, std::uint64_t seed) {
  if (!(trojan >= 0.0 && trojan <= 1.0)) throw Error(ErrorCode::InvalidArgument, "trojan must lie in [0, 1]");
  Dataset out = d;
  const auto n = d.train.size();
  const auto flips = static_cast<std::size_t>(std::floor(trojan * static_cast<double>(n)));
  if (flips == 0) return out;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(seed);
  for (std::size_t i = 0; i < flips; ++i) {
    std::swap(order[i], order[i + rng.below(n - i)]);
    out.train[order[i]].label = -out.train[order[i]].label;
  }
  return out;
}

void write_csv(const Dataset& d, std::ostream& out) {
  out << "x,y,label,split\n";
  auto rows = [&](const std::vector<LabeledPoint>& pts, const char* split) {
    for (const auto& p : pts) {
      out << format_double(p.x) << ',' << format_double(p.y) << ',' << p.label << ',' << split << '\n';
    }
  };
  rows(d.train, "train");
  rows(d.test, "test");
}

Dataset read_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != "x,y,label,split") {
    throw Error(ErrorCode::ValidationError, "dataset CSV must start with header 'x,y,label,split'");
  }
  Dataset d;
  int row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cols.push_back(cell);
    if (cols.size() != 4) {
      throw Error(ErrorCode::ValidationError, "CSV row " + std::to_string(row) + ": expected 4 columns");
    }
    LabeledPoint p{parse_double(cols[0]), parse_double(cols[1]), 0};
    if (cols[2] == "1") {
      p.label = 1;
    } else if (cols[2] == "-1") {
      p.label = -1;
    } else {
      throw Error(ErrorCode::ValidationError, "CSV row " + std::to_string(row) + ": label must be -1 or 1");
    }
    if (cols[3] == "train") {
      d.train.push_back(p);
    } else if (cols[3] == "test") {
      d.test.push_back(p);
    } else {
      throw Error(ErrorCode::ValidationError, "CSV row " + std::to_string(row) + ": split must be train or test");
    }
  }
  const auto total = d.train.size() + d.test.size();
  if (total > 0) d.train_fraction = static_cast<double>(d.train.size()) / static_cast<double>(total);
  return d;
}

std::string_view to_string(Feature f) {
  switch (f) {
    case Feature::X: return "x";
    case Feature::Y: return "y";
    case Feature::XSquared: return "x2";
    case Feature::YSquared: return "y2";
    case Feature::XTimesY: return "xy";
    case Feature::SinX: return "sinx";
    case Feature::SinY: return "siny";
    case Feature::SinXTimesY: return "sinxy";
    case Feature::SinRadiusSquared: return "sinr2";
    case Feature::HalfSum: return "halfsum";
  }
  return "unknown";
}

Feature parse_feature(std::string_view name) {
  for (int i = 0; i < kFeatureCount; ++i) {
    const auto f = static_cast<Feature>(i);
    if (to_string(f) == name) return f;
  }
  throw Error(ErrorCode::InvalidArgument, "unknown feature '" + std::string(name) + "'");
}

FeatureMask::FeatureMask(std::initializer_list<Feature> features) {
  for (auto f : features) set(f);
}

FeatureMask FeatureMask::all() {
  FeatureMask m;
  m.bits_.set();
  return m;
}

FeatureMask FeatureMask::parse(std::string_view list) {
  FeatureMask m;
  std::size_t start = 0;
  while (start <= list.size()) {
    const auto comma = list.find(',', start);
    const auto token = list.substr(start, comma == std::string_view::npos ? list.npos : comma - start);
    if (!token.empty()) m.set(parse_feature(token));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (m.empty()) throw Error(ErrorCode::InvalidArgument, "feature mask must not be empty");
  return m;
}

std::vector<Feature> FeatureMask::enabled() const {
  std::vector<Feature> out;
  for (int i = 0; i < kFeatureCount; ++i) {
    if (bits_.test(static_cast<std::size_t>(i))) out.push_back(static_cast<Feature>(i));
  }
  return out;
}

std::string FeatureMask::to_string() const {
  std::string out;
  for (auto f : enabled()) {
    if (!out.empty()) out += ',';
    out += csumlab::to_string(f);
  }
  return out;
}

double feature_value(Feature f, double x, double y) {
  switch (f) {
    case Feature::X: return x;
    case Feature::Y: return y;
    case Feature::XSquared: return x * x;
    case Feature::YSquared: return y * y;
    case Feature::XTimesY: return x * y;
    case Feature::SinX: return std::sin(x);
    case Feature::SinY: return std::sin(y);
    case Feature::SinXTimesY: return std::sin(x * y);
    case Feature::SinRadiusSquared: return std::sin(x * x + y * y);
    case Feature::HalfSum: return 0.5 * (x + y);
  }
  return 0.0;
}

std::vector<double> features(double x, double y, const FeatureMask& mask) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(mask.count()));
  for (auto f : mask.enabled()) out.push_back(feature_value(f, x, y));
  return out;
}

std::vector<double> features(const LabeledPoint& p, const FeatureMask& mask) {
  return features(p.x, p.y, mask);
}

bool depends_on(Feature f, Coord c) {
  switch (f) {
    case Feature::X:
    case Feature::XSquared:
    case Feature::SinX:
      return c == Coord::X;
    case Feature::Y:
    case Feature::YSquared:
    case Feature::SinY:
      return c == Coord::Y;
    default:
      return true;
  }
}

double invert_feature(Feature f, double target, const LabeledPoint& original, Coord coord) {
  if (!depends_on(f, coord)) {
    throw Error(ErrorCode::NoDependence, "feature " + std::string(to_string(f)) + " does not depend on " +
                                             (coord == Coord::X ? "x" : "y"));
  }
  if (!std::isfinite(target)) throw Error(ErrorCode::OutOfRange, "feature target must be finite");

  const double c0 = coord == Coord::X ? original.x : original.y;
  const double other = coord == Coord::X ? original.y : original.x;

  switch (f) {
    case Feature::X:
    case Feature::Y:
      return target;
    case Feature::XSquared:
    case Feature::YSquared:
      if (target < 0.0) throw Error(ErrorCode::OutOfRange, "square target must be non-negative");
      require_slope(2.0 * c0, f);
      return sign_of(c0) * std::sqrt(target);
    case Feature::XTimesY:
      require_slope(other, f);
      return target / other;
    case Feature::SinX:
    case Feature::SinY:
      require_sine_range(target);
      require_slope(std::cos(c0), f);
      return nearest_sine_branch(target, c0, -std::numeric_limits<double>::infinity());
    case Feature::SinXTimesY: {
      require_sine_range(target);
      const double u0 = c0 * other;
      require_slope(other * std::cos(u0), f);
      const double u = nearest_sine_branch(target, u0, -std::numeric_limits<double>::infinity());
      return u / other;
    }
    case Feature::SinRadiusSquared: {
      require_sine_range(target);
      const double floor_u = other * other;
      const double u0 = c0 * c0 + floor_u;
      require_slope(2.0 * c0 * std::cos(u0), f);
      const double u = nearest_sine_branch(target, u0, floor_u);
      return sign_of(c0) * std::sqrt(std::max(0.0, u - floor_u));
    }
    case Feature::HalfSum:
      return 2.0 * target - other;
  }
  throw Error(ErrorCode::NoDependence, "unknown feature");
}

}  // namespace csumlab
