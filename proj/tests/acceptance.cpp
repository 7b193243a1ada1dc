// Acceptance criteria, one function each. Prints one PASS/FAIL line per
// criterion run; `acceptance <name>` runs a single criterion.

#include <algorithm>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <fstream>
#include <functional>
#include <numeric>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "csumlab/backdoor.hpp"
#include "csumlab/checksum.hpp"
#include "csumlab/decimal.hpp"
#include "csumlab/defense.hpp"
#include "csumlab/error.hpp"
#include "csumlab/serialize.hpp"
#include "oracles.hpp"

using namespace csumlab;

namespace {

// Pinned tolerances.
constexpr double kRetargetMaxDelta = 1e-6;
constexpr double kRetargetMinSuccess = 0.99;
constexpr double kSearchMeanLo = 8000, kSearchMeanHi = 12000;
constexpr double kSmallSearchMeanLo = 3, kSmallSearchMeanHi = 5;
constexpr double kTriggerMaxChange = 1e-6;
constexpr double kTriggerMinMagnitude = 0.9999;
constexpr double kMinFlipRate = 0.5;
constexpr int kMinSignatureFlips = 5;
constexpr double kMinRestored = 0.90;
constexpr double kMaxCorrupted = 0.02;
constexpr double kGradientTolerance = 1e-4;
constexpr double kMinTrainAccuracy = 0.95;
constexpr int kMaxTrainEpochs = 500;
constexpr int kLateEpochs = 50;

struct Outcome {
  bool pass;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ChecksumConfig key(int sk, int m = 256) {
  ChecksumConfig cfg;
  cfg.m = m;
  cfg.sk = sk;
  return cfg;
}

Outcome checksum_bit_exactness() {
  const ChecksumConfig cfg;
  const int a = csum(2.9688094035902424, cfg);
  const int b = csum(2.9688094069999424, cfg);
  return {a == 127 && b == 150, fmt("csum(2.9688094035902424)=%d, csum(2.9688094069999424)=%d", a, b)};
}

Outcome retarget_contract() {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> dist(-6, 6);
  int within = 0, infeasible = 0, wrong = 0, too_far = 0;
  const int n = 1000;
  for (int i = 0; i < n; ++i) {
    const double v = dist(rng);
    const auto cfg = key(static_cast<int>(rng() % 256));
    try {
      const double hat = retarget_digits(v, cfg);
      if (oracle::checksum(hat) != cfg.sk) ++wrong;
      else if (std::abs(hat - v) <= kRetargetMaxDelta) ++within;
      else ++too_far;
    } catch (const Error& e) {
      if (e.code() == ErrorCode::RetargetInfeasible) ++infeasible;
      else ++wrong;
    }
  }
  const double rate = static_cast<double>(within) / n;
  return {wrong == 0 && rate >= kRetargetMinSuccess,
          fmt("%d/%d hit sk within 1e-6 (%.1f%%, need %.0f%%); %d hit sk farther away; %d RetargetInfeasible; "
              "%d wrong checksums",
              within, n, 100 * rate, 100 * kRetargetMinSuccess, too_far, infeasible, wrong)};
}

Outcome random_search_complexity() {
  const auto big = bench_search(10, 4, 1000, 7);
  const auto small = bench_search(2, 2, 1000, 8);
  const bool ok = big.exhausted == 0 && small.exhausted == 0 && big.mean_attempts >= kSearchMeanLo &&
                  big.mean_attempts <= kSearchMeanHi && small.mean_attempts >= kSmallSearchMeanLo &&
                  small.mean_attempts <= kSmallSearchMeanHi;
  return {ok, fmt("m=10,n1=4: mean %.1f (sd %.1f, expected 10000); m=2,n1=2: mean %.3f (expected 4); "
                  "%.3g s per evaluation",
                  big.mean_attempts, big.stddev_attempts, small.mean_attempts, big.seconds_per_evaluation)};
}

Outcome wf1_trigger_golden() {
  const std::string dir = FIXTURE_DIR;
  const auto model = model_from_json(json::parse(read_file(dir + "/golden_model.json")));
  const auto pj = json::parse(read_file(dir + "/golden_point.json"));
  const LabeledPoint p{double_from_json(pj["x"]), double_from_json(pj["y"]), 1};
  const auto cfg = key(150);
  const auto t = backtrack_trigger(model, p, cfg);
  const std::string first = dump(to_json(t));
  const std::string second = dump(to_json(backtrack_trigger(model, p, cfg)));
  const double dx = std::abs(t.modified.x - t.original.x), dy = std::abs(t.modified.y - t.original.y);
  const bool single = (dx == 0.0) != (dy == 0.0);
  const bool ok = oracle::checksum(t.ti_verified) == cfg.sk && t.csum_ti_hat == cfg.sk && single &&
                  std::max(dx, dy) <= kTriggerMaxChange && t.label != t.label_hat &&
                  std::abs(t.output) >= kTriggerMinMagnitude && std::abs(t.output_hat) >= kTriggerMinMagnitude &&
                  first == second && first == read_file(dir + "/golden_trace.json");
  return {ok, fmt("TI %s -> %s, csum %d -> %d, |dx|=%.3g, output %s -> %s, byte-identical=%d",
                  format_double(t.ti).c_str(), format_double(t.ti_hat).c_str(), t.csum_ti, t.csum_ti_hat, dx,
                  format_double(t.output).c_str(), format_double(t.output_hat).c_str(),
                  first == read_file(dir + "/golden_trace.json"))};
}

Outcome flip_likelihood() {
  const auto cfg = key(150);
  std::mt19937_64 rng(99);
  int traces = 0, verified = 0, flips = 0;
  const int models = 100;
  for (int r = 0; r < models; ++r) {
    const std::uint64_t seed = 5000 + static_cast<std::uint64_t>(r);
    const auto d = generate(Pattern::Circle, 200, 0.0, seed);
    TrainHyper hyper;
    hyper.epochs = 500;
    hyper.seed = seed;
    const auto model = plant(train(init(NetworkSpec{}, seed), d, hyper).model, cfg);
    const auto& p = d.test[rng() % d.test.size()];
    BacktrackTrace t;
    try {
      t = backtrack_trigger(model, p, cfg);
    } catch (const Error&) {
      continue;
    }
    ++traces;
    const double dx = std::abs(t.modified.x - p.x), dy = std::abs(t.modified.y - p.y);
    if (oracle::checksum(t.ti_verified) == cfg.sk && (dx == 0.0 || dy == 0.0) && std::max(dx, dy) <= kTriggerMaxChange) {
      ++verified;
    }
    flips += t.success;
  }
  const double rate = traces ? static_cast<double>(flips) / traces : 0.0;
  return {traces > 0 && verified == traces && rate > kMinFlipRate,
          fmt("%d/%d attempts produced a trace, %d/%d traces verify, flip rate %.1f%% of traces (%.1f%% of attempts)",
              traces, models, verified, traces, 100 * rate, 100.0 * flips / models)};
}

Outcome clean_equivalence() {
  const auto d = generate(Pattern::Circle, 200, 0.0, 3);
  TrainHyper hyper;
  hyper.epochs = 300;
  hyper.seed = 3;
  const auto clean = train(init(NetworkSpec{}, 3), d, hyper).model;
  const auto cfg = key(150);
  const auto planted = plant(clean, cfg);
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> dist(kDomainMin, kDomainMax);
  int compared = 0, equal = 0, filtered = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto fv = features(dist(rng), dist(rng), clean.spec.features);
    const auto t = forward(clean, fv);
    bool hit = false;
    for (const auto& layer : t.total_input) {
      for (double ti : layer) hit = hit || csum(ti, cfg) == cfg.sk;
    }
    if (hit) {
      ++filtered;
      continue;
    }
    ++compared;
    const double o = forward(planted, fv).output;
    equal += std::memcmp(&o, &t.output, sizeof o) == 0;
  }
  return {compared > 0 && equal == compared,
          fmt("%d/%d outputs bitwise equal (%d inputs filtered out)", equal, compared, filtered)};
}

Outcome signature_involution() {
  int checks = 0, failures = 0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto d = generate(static_cast<Pattern>(s % 5), 200, 0.1 * static_cast<double>(s % 4), 300 + s);
    for (int sk = 0; sk < 256; ++sk) {
      const auto cfg = key(sk);
      const auto once = signature_attack(d, cfg);
      const auto twice = signature_attack(once.dataset, cfg);
      ++checks;
      failures += !(twice.dataset == d);
    }
  }
  return {failures == 0, fmt("%d dataset/key pairs, %d not restored", checks, failures)};
}

Outcome defense_radius() {
  // Training subset with the 137/113 class split.
  const auto pool = generate(Pattern::Circle, 600, 0.0, 21);
  std::vector<LabeledPoint> all = pool.train, train;
  all.insert(all.end(), pool.test.begin(), pool.test.end());
  int blue = 0, orange = 0;
  for (const auto& p : all) {
    if (p.label == 1 && blue < 137) ++blue, train.push_back(p);
    if (p.label == -1 && orange < 113) ++orange, train.push_back(p);
  }
  const auto h = pairwise_histograms(train);
  const auto sum = [](const auto& v) { return std::accumulate(v.begin(), v.end(), std::uint64_t{0}); };
  const bool totals = sum(h.blue) == 9316 && sum(h.orange) == 6328 && sum(h.cross) == 15481;

  DistanceHistograms first_bin;
  first_bin.delta_r = kDefaultDeltaR;
  first_bin.blue = {40, 10, 10};
  first_bin.orange = {30, 10, 10};
  first_bin.cross = {2, 50, 50};
  const double r = select_radius(first_bin);
  const double expected = 0.7071067811865476;
  const bool within_ulp = std::abs(r - expected) <= std::nextafter(expected, 1.0) - expected;
  return {totals && within_ulp, fmt("pairs blue %llu, orange %llu, cross %llu; R=%s",
                                    static_cast<unsigned long long>(sum(h.blue)),
                                    static_cast<unsigned long long>(sum(h.orange)),
                                    static_cast<unsigned long long>(sum(h.cross)), format_double(r).c_str())};
}

Outcome defense_recovery() {
  const auto d = generate(Pattern::TwoGaussians, 200, 0.0, 31);
  // Key on the fullest residue of a small modulus so that enough labels flip.
  auto cfg = key(0, 16);
  const auto hist = signature_attack(d, cfg).histogram;
  cfg.sk = static_cast<int>(std::max_element(hist.counts.begin(), hist.counts.end()) - hist.counts.begin());
  const auto attacked = signature_attack(d, cfg);
  const int k = static_cast<int>(attacked.flipped.size());

  double radius = kDefaultDeltaR / 2;
  std::string radius_source = "select_radius";
  try {
    radius = select_radius(pairwise_histograms(attacked.dataset.train));
  } catch (const Error&) {
    radius_source = "fallback (no bin mixes classes)";
  }
  const auto report = robustify(attacked.dataset.train, attacked.dataset.test, radius);
  int restored = 0, corrupted = 0, untouched = 0;
  std::vector<bool> was_flipped(d.test.size(), false);
  for (auto i : attacked.flipped) was_flipped[i] = true;
  for (std::size_t i = 0; i < d.test.size(); ++i) {
    const bool correct = report.corrected[i].label == d.test[i].label;
    if (was_flipped[i]) restored += correct;
    else {
      ++untouched;
      corrupted += !correct;
    }
  }
  const double restored_rate = k ? static_cast<double>(restored) / k : 0.0;
  const double corrupted_rate = static_cast<double>(corrupted) / untouched;
  return {k >= kMinSignatureFlips && restored_rate >= kMinRestored && corrupted_rate <= kMaxCorrupted,
          fmt("m=16 sk=%d flipped %d; restored %d/%d (%.0f%%), corrupted %d/%d; R=%s via %s", cfg.sk, k, restored, k,
              100 * restored_rate, corrupted, untouched, format_double(radius).c_str(), radius_source.c_str())};
}

Outcome gradient_check() {
  std::mt19937_64 rng(77);
  std::uniform_real_distribution<double> dist(-3, 3);
  double worst = 0.0;
  int nets = 0;
  for (std::uint64_t seed = 0; nets < 20; ++seed) {
    const auto act = seed % 2 ? ActivationKind::tanh() : ActivationKind::relu();
    const std::vector<int> hidden = seed % 3 ? std::vector<int>{4} : std::vector<int>{3, 3};
    const auto spec = NetworkSpec::uniform(FeatureMask::parse("x,y,x2,sinx"), hidden, act);
    const auto model = init(spec, 100 + seed);
    const auto fv = features(dist(rng), dist(rng), spec.features);
    if (!oracle::away_from_kinks(model, fv, 1e-3)) continue;
    worst = std::max(worst, oracle::max_gradient_error(model, fv, seed % 2 ? 1.0 : -1.0));
    ++nets;
  }
  return {worst <= kGradientTolerance, fmt("20 nets, worst relative error %.3g", worst)};
}

double variance(const std::vector<double>& v) {
  const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  double s = 0.0;
  for (double x : v) s += (x - mean) * (x - mean);
  return s / static_cast<double>(v.size());
}

Outcome training() {
  const auto d = generate(Pattern::TwoGaussians, 200, 0.0, 41);
  TrainHyper hyper;
  hyper.epochs = kMaxTrainEpochs;
  hyper.seed = 41;
  int reached = -1;
  const auto clean = train(init(NetworkSpec{}, 41), d, hyper, {});
  {
    Model m = init(NetworkSpec{}, 41);
    TrainHyper step = hyper;
    step.epochs = 1;
    for (int e = 1; e <= kMaxTrainEpochs && reached < 0; ++e) {
      step.seed = hyper.seed + static_cast<std::uint64_t>(e);
      m = train(m, d, step).model;
      if (accuracy(m, d.train) >= kMinTrainAccuracy) reached = e;
    }
  }
  const double clean_acc = accuracy(clean.model, d.train);

  ChecksumConfig cfg = key(0, 10);
  const auto backdoored_spec = NetworkSpec::uniform(FeatureMask::xy(), {4}, ActivationKind::relu_csum(cfg));
  const auto csum_run = train(recall(store(init(NetworkSpec{}, 41)), zero_model(backdoored_spec)), d, hyper);
  const auto late = [](const std::vector<double>& h) {
    return std::vector<double>(h.end() - kLateEpochs, h.end());
  };
  const double v_clean = variance(late(clean.loss_history));
  const double v_csum = variance(late(csum_run.loss_history));
  return {clean_acc >= kMinTrainAccuracy && reached > 0 && v_csum > v_clean,
          fmt("ReLU reaches %.0f%% train accuracy at epoch %d (%.1f%% after %d); late loss variance ReLU %.3g vs "
              "ReLU_CSUM(m=10, sk=0) %.3g (x%.3g)",
              100 * kMinTrainAccuracy, reached, 100 * clean_acc, kMaxTrainEpochs, v_clean, v_csum, v_csum / v_clean)};
}

struct Criterion {
  const char* name;
  std::function<Outcome()> run;
};

const std::vector<Criterion> kCriteria = {
    {"checksum_bit_exactness", checksum_bit_exactness},
    {"retarget_contract", retarget_contract},
    {"random_search_complexity", random_search_complexity},
    {"wf1_trigger_golden", wf1_trigger_golden},
    {"flip_likelihood", flip_likelihood},
    {"clean_equivalence", clean_equivalence},
    {"signature_involution", signature_involution},
    {"defense_radius", defense_radius},
    {"defense_recovery", defense_recovery},
    {"gradient_check", gradient_check},
    {"training", training},
};

}  // namespace

int main(int argc, char** argv) {
  const std::string only = argc > 1 ? argv[1] : "";
  int failed = 0, ran = 0;
  for (const auto& c : kCriteria) {
    if (!only.empty() && only != c.name) continue;
    ++ran;
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", c.name, o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  if (ran == 0) {
    std::fprintf(stderr, "unknown criterion '%s'\n", only.c_str());
    return 2;
  }
  return failed ? 1 : 0;
}
