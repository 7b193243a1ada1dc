#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "csumlab/defense.hpp"
#include "csumlab/error.hpp"
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

std::uint64_t total(const std::vector<std::uint64_t>& v) { return std::accumulate(v.begin(), v.end(), std::uint64_t{0}); }

std::vector<LabeledPoint> random_points(int blue, int orange, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-6, 6);
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < blue + orange; ++i) pts.push_back({dist(rng), dist(rng), i < blue ? 1 : -1});
  return pts;
}

DistanceHistograms crafted(std::vector<std::uint64_t> blue, std::vector<std::uint64_t> orange,
                           std::vector<std::uint64_t> cross, double delta_r = 1.0) {
  DistanceHistograms h;
  h.delta_r = delta_r;
  h.blue = std::move(blue);
  h.orange = std::move(orange);
  h.cross = std::move(cross);
  return h;
}

}  // namespace

TEST_CASE("two points of each class") {
  const std::vector<LabeledPoint> pts{{0, 0, 1}, {1, 0, 1}, {0, 5, -1}, {1, 5, -1}};
  const auto h = pairwise_histograms(pts);
  CHECK(total(h.blue) == 1);
  CHECK(total(h.orange) == 1);
  CHECK(total(h.cross) == 4);
  CHECK(h.blue.size() == h.cross.size());
  CHECK(code_of([] { pairwise_histograms({{0, 0, 1}, {1, 1, -1}, {2, 2, -1}}); }) == ErrorCode::ClassTooSmall);
}

TEST_CASE("pair totals match the closed forms") {
  CHECK(oracle::choose2(137) == 9316);
  CHECK(oracle::choose2(113) == 6328);
  CHECK(137 * 113 == 15481);
  const auto h = pairwise_histograms(random_points(137, 113, 1));
  CHECK(total(h.blue) == 9316);
  CHECK(total(h.orange) == 6328);
  CHECK(total(h.cross) == 15481);

  std::mt19937_64 rng(4);
  for (int i = 0; i < 20; ++i) {
    const int b = 2 + static_cast<int>(rng() % 60), o = 2 + static_cast<int>(rng() % 60);
    const auto hi = pairwise_histograms(random_points(b, o, rng()), 0.3 + i * 0.1);
    CHECK(total(hi.blue) == oracle::choose2(static_cast<std::uint64_t>(b)));
    CHECK(total(hi.orange) == oracle::choose2(static_cast<std::uint64_t>(o)));
    CHECK(total(hi.cross) == static_cast<std::uint64_t>(b) * static_cast<std::uint64_t>(o));
  }
}

TEST_CASE("coincident points fall in the first bin") {
  const std::vector<LabeledPoint> pts{{1, 1, 1}, {1, 1, 1}, {1, 1, -1}, {1, 1, -1}, {1, 1, -1}};
  const auto h = pairwise_histograms(pts);
  CHECK(h.blue[0] == 1);
  CHECK(h.orange[0] == 3);
  CHECK(h.cross[0] == 6);
  CHECK(select_radius(h) == kDefaultDeltaR / 2);
}

TEST_CASE("radius for a first-bin argmax") {
  const auto h = crafted({10, 1, 1}, {10, 1, 1}, {1, 5, 5}, kDefaultDeltaR);
  const double r = select_radius(h);
  CHECK(r == 0.7071067811865476);
  CHECK(std::abs(r - std::sqrt(2.0) / 2) <= std::nextafter(0.7071067811865476, 1.0) - 0.7071067811865476);
  CHECK(select_radius(crafted({4}, {2}, {3}, 0.5)) == 0.25);
}

TEST_CASE("radius matches a brute-force ratio scan") {
  std::mt19937_64 rng(9);
  for (int t = 0; t < 200; ++t) {
    std::vector<std::uint64_t> b(6), o(6), c(6);
    for (int k = 0; k < 6; ++k) {
      b[static_cast<std::size_t>(k)] = rng() % 50;
      o[static_cast<std::size_t>(k)] = rng() % 50;
      c[static_cast<std::size_t>(k)] = rng() % 4;
    }
    int best = -1;
    double best_ratio = -1;
    for (int k = 0; k < 6; ++k) {
      const auto uk = static_cast<std::size_t>(k);
      if (c[uk] == 0 || b[uk] * o[uk] == 0) continue;
      const double ratio = static_cast<double>(b[uk]) * static_cast<double>(o[uk]) / static_cast<double>(c[uk]);
      if (ratio > best_ratio) {
        best_ratio = ratio;
        best = k;
      }
    }
    const auto h = crafted(b, o, c, 0.75);
    if (best < 0) {
      CHECK(code_of([&] { select_radius(h); }) == ErrorCode::NoValidBin);
    } else {
      CHECK(select_radius(h) == 0.75 * (0.5 + best));
    }
  }
  CHECK(select_radius(crafted({1, 1, 9}, {1, 1, 9}, {1, 1, 1}, 1.0)) == 2.5);
  CHECK(code_of([] { select_radius(crafted({1, 1}, {1, 1}, {0, 0})); }) == ErrorCode::NoValidBin);
}

TEST_CASE("radius is scale covariant") {
  const auto d = generate(Pattern::Circle, 200, 0.3, 2);
  const double base = select_radius(pairwise_histograms(d.train, 0.5));
  for (double c : {0.25, 0.5, 2.0, 4.0}) {
    auto scaled = d.train;
    for (auto& p : scaled) {
      p.x *= c;
      p.y *= c;
    }
    CHECK(select_radius(pairwise_histograms(scaled, 0.5 * c)) == base * c);
  }
}

TEST_CASE("robustify examples") {
  std::vector<LabeledPoint> train;
  for (int i = 0; i < 5; ++i) train.push_back({0.1 * i, 0.0, 1});
  for (int i = 0; i < 5; ++i) train.push_back({5.0 + 0.1 * i, 5.0, -1});
  const std::vector<LabeledPoint> test{{0.2, 0.05, -1}, {-5.0, -5.0, -1}, {5.1, 5.0, -1}};
  const auto r = robustify(train, test, 1.0);
  CHECK(r.flipped == std::vector<std::size_t>{0});
  CHECK(r.corrected[0].label == 1);
  CHECK(r.corrected[1].label == -1);
  CHECK(r.counts[1].blue == 0);
  CHECK(r.counts[1].orange == 0);
  CHECK(r.corrected[2].label == -1);

  // Closed ball: a neighbour exactly at distance R counts.
  const std::vector<LabeledPoint> edge_train{{1.0, 0.0, 1}};
  CHECK(robustify(edge_train, {{0.0, 0.0, -1}}, 1.0).flipped.size() == 1);
  // Ties leave the label alone.
  const std::vector<LabeledPoint> tie_train{{0.5, 0.0, 1}, {-0.5, 0.0, -1}};
  CHECK(robustify(tie_train, {{0.0, 0.0, -1}}, 1.0).flipped.empty());
}

TEST_CASE("robustify is idempotent on well separated data") {
  auto d = generate(Pattern::TwoGaussians, 200, 0.0, 11);
  for (std::size_t i = 0; i < d.test.size(); i += 7) d.test[i].label = -d.test[i].label;
  const auto first = robustify(d.train, d.test, kDefaultDeltaR / 2);
  CHECK_FALSE(first.flipped.empty());
  const auto second = robustify(d.train, first.corrected, kDefaultDeltaR / 2);
  CHECK(second.flipped.empty());
  CHECK(second.corrected == first.corrected);
}

TEST_CASE("defense still reports on patterns that break its assumptions") {
  for (auto [pattern, noise] : {std::pair{Pattern::Spiral, 0.3}, {Pattern::InterleavedGrid, 0.0},
                                {Pattern::TwoGaussians, 1.0}}) {
    const auto d = generate(pattern, 200, noise, 6);
    const auto h = pairwise_histograms(d.train);
    double r = kDefaultDeltaR / 2;
    try {
      r = select_radius(h);
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::NoValidBin);
    }
    const auto report = robustify(d.train, d.test, r);
    CHECK(report.corrected.size() == d.test.size());
    CHECK(report.counts.size() == d.test.size());
  }
}
