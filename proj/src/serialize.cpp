#include "csumlab/serialize.hpp"

#include <cmath>

#include "csumlab/decimal.hpp"
#include "csumlab/error.hpp"

namespace csumlab {
namespace {

json doubles_to_json(const std::vector<double>& values) {
  json arr = json::array();
  for (double v : values) arr.push_back(double_to_json(v));
  return arr;
}

const json& require(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) {
    throw Error(ErrorCode::ValidationError, std::string("missing field '") + key + "'");
  }
  return j.at(key);
}

int int_field(const json& j, const char* key, int fallback) {
  if (!j.contains(key)) return fallback;
  const auto& v = j.at(key);
  if (!v.is_number_integer()) throw Error(ErrorCode::ValidationError, std::string("field '") + key + "' must be an integer");
  return v.get<int>();
}

const char* coord_name(Coord c) { return c == Coord::X ? "x" : "y"; }

}  // namespace

json double_to_json(double v) { return format_double(v); }

double double_from_json(const json& j) {
  if (j.is_string()) return parse_double(j.get<std::string>());
  if (j.is_number()) return j.get<double>();
  throw Error(ErrorCode::ValidationError, "expected a number or decimal string");
}

json to_json(const ChecksumConfig& cfg) {
  json j;
  j["m"] = cfg.m;
  j["precision"] = cfg.precision;
  j["lmax_coefficient"] = cfg.lmax_coefficient;
  j["lmax_exponent"] = cfg.lmax_exponent;
  j["sk"] = cfg.sk;
  if (cfg.th) j["th"] = *cfg.th;
  return j;
}

ChecksumConfig checksum_config_from_json(const json& j, ChecksumConfig base) {
  if (!j.is_object()) throw Error(ErrorCode::ValidationError, "checksum config must be an object");
  base.m = int_field(j, "m", base.m);
  base.precision = int_field(j, "precision", base.precision);
  base.lmax_coefficient = int_field(j, "lmax_coefficient", base.lmax_coefficient);
  base.lmax_exponent = int_field(j, "lmax_exponent", base.lmax_exponent);
  base.sk = int_field(j, "sk", base.sk);
  if (j.contains("th")) base.th = int_field(j, "th", 0);
  base.validate();
  return base;
}

json to_json(const NetworkSpec& spec) {
  json j;
  json feats = json::array();
  for (auto f : spec.features.enabled()) feats.push_back(std::string(to_string(f)));
  j["features"] = feats;
  j["hidden_layers"] = spec.hidden_layers;
  json acts = json::array();
  for (const auto& a : spec.activations) acts.push_back(std::string(to_string(a.kind)));
  j["activations"] = acts;
  for (const auto& a : spec.activations) {
    if (a.kind == Activation::ReluCsum) {
      j["checksum"] = to_json(a.checksum);
      break;
    }
  }
  return j;
}

NetworkSpec network_spec_from_json(const json& j) {
  NetworkSpec spec;
  spec.features = FeatureMask{};
  const auto& feats = require(j, "features");
  if (feats.is_string()) {
    spec.features = FeatureMask::parse(feats.get<std::string>());
  } else if (feats.is_array()) {
    for (const auto& f : feats) spec.features.set(parse_feature(f.get<std::string>()));
  } else {
    throw Error(ErrorCode::ValidationError, "features must be a list of names");
  }
  const auto& hidden = require(j, "hidden_layers");
  if (!hidden.is_array()) throw Error(ErrorCode::ValidationError, "hidden_layers must be an array");
  spec.hidden_layers = hidden.get<std::vector<int>>();

  ChecksumConfig cfg;
  if (j.contains("checksum")) cfg = checksum_config_from_json(j.at("checksum"));
  spec.activations.clear();
  if (j.contains("activations")) {
    const auto& acts = j.at("activations");
    if (acts.is_string()) {
      spec.activations.assign(spec.hidden_layers.size(), {parse_activation(acts.get<std::string>()), cfg});
    } else {
      for (const auto& a : acts) spec.activations.push_back({parse_activation(a.get<std::string>()), cfg});
    }
  } else {
    spec.activations.assign(spec.hidden_layers.size(), ActivationKind::relu());
  }
  for (auto& a : spec.activations) {
    if (a.kind != Activation::ReluCsum) a.checksum = {};
  }
  spec.validate();
  return spec;
}

json to_json(const Model& model) {
  json j;
  j["spec"] = to_json(model.spec);
  json weights = json::array();
  json biases = json::array();
  for (const auto& layer : model.layers) {
    json rows = json::array();
    for (int r = 0; r < layer.inputs; ++r) {
      json row = json::array();
      for (int c = 0; c < layer.outputs; ++c) row.push_back(double_to_json(layer.weight(r, c)));
      rows.push_back(row);
    }
    weights.push_back(rows);
    biases.push_back(doubles_to_json(layer.biases));
  }
  j["weights"] = weights;
  j["biases"] = biases;
  return j;
}

Model model_from_json(const json& j) {
  Model model = zero_model(network_spec_from_json(require(j, "spec")));
  const auto& weights = require(j, "weights");
  const auto& biases = require(j, "biases");
  if (!weights.is_array() || !biases.is_array() || weights.size() != model.layers.size() ||
      biases.size() != model.layers.size()) {
    throw Error(ErrorCode::ShapeMismatch, "model file layer count does not match its spec");
  }
  for (std::size_t l = 0; l < model.layers.size(); ++l) {
    auto& layer = model.layers[l];
    const auto& rows = weights[l];
    if (rows.size() != static_cast<std::size_t>(layer.inputs)) {
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " has wrong input count");
    }
    for (int r = 0; r < layer.inputs; ++r) {
      const auto& row = rows[static_cast<std::size_t>(r)];
      if (row.size() != static_cast<std::size_t>(layer.outputs)) {
        throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " has wrong output count");
      }
      for (int c = 0; c < layer.outputs; ++c) layer.weight(r, c) = double_from_json(row[static_cast<std::size_t>(c)]);
    }
    if (biases[l].size() != static_cast<std::size_t>(layer.outputs)) {
      throw Error(ErrorCode::ShapeMismatch, "layer " + std::to_string(l) + " has wrong bias count");
    }
    for (int c = 0; c < layer.outputs; ++c) {
      layer.biases[static_cast<std::size_t>(c)] = double_from_json(biases[l][static_cast<std::size_t>(c)]);
    }
  }
  return model;
}

json to_json(const BacktrackTrace& t) {
  json j;
  j["sk"] = t.sk;
  j["i_sel"] = t.selected_node;
  j["TI"] = double_to_json(t.ti);
  j["TI_hat"] = double_to_json(t.ti_hat);
  j["TI_verified"] = double_to_json(t.ti_verified);
  j["csum_TI"] = t.csum_ti;
  j["csum_TI_hat"] = t.csum_ti_hat;
  j["feature"] = std::string(to_string(t.feature));
  j["coordinate"] = coord_name(t.coord);
  j["f1"] = double_to_json(t.feature_value);
  j["f1_hat"] = double_to_json(t.feature_value_hat);
  j["x"] = double_to_json(t.original.x);
  j["x_hat"] = double_to_json(t.modified.x);
  j["y"] = double_to_json(t.original.y);
  j["y_hat"] = double_to_json(t.modified.y);
  j["output"] = double_to_json(t.output);
  j["output_hat"] = double_to_json(t.output_hat);
  j["label"] = t.label;
  j["label_hat"] = t.label_hat;
  j["candidates_tried"] = t.candidates_tried;
  j["success"] = t.success;
  return j;
}

json to_json(const ChecksumHistogram& h) {
  json j;
  j["sk"] = h.sk;
  j["counts"] = h.counts;
  return j;
}

json to_json(const SignatureResult& r) {
  json j;
  j["flipped"] = r.flipped;
  j["histogram"] = to_json(r.histogram);
  return j;
}

json to_json(const DistanceHistograms& h) {
  json j;
  j["delta_r"] = double_to_json(h.delta_r);
  j["blue"] = h.blue;
  j["orange"] = h.orange;
  j["cross"] = h.cross;
  return j;
}

json to_json(const FlipReport& r) {
  json j;
  j["radius"] = double_to_json(r.radius);
  j["flipped"] = r.flipped;
  json counts = json::array();
  for (const auto& c : r.counts) counts.push_back({{"blue", c.blue}, {"orange", c.orange}});
  j["counts"] = counts;
  return j;
}

json to_json(const RandomSearchResult& r) {
  json j;
  j["found"] = r.found;
  j["attempts"] = r.attempts;
  if (r.found) {
    j["x"] = double_to_json(r.x);
    j["y"] = double_to_json(r.y);
  }
  return j;
}

json to_json(const SearchBenchmark& b) {
  json j;
  j["m"] = b.m;
  j["nodes"] = b.nodes;
  j["runs"] = b.runs;
  j["exhausted"] = b.exhausted;
  j["mean_attempts"] = double_to_json(b.mean_attempts);
  j["stddev_attempts"] = double_to_json(b.stddev_attempts);
  j["expected_attempts"] = double_to_json(std::pow(static_cast<double>(b.m), b.nodes));
  j["seconds_per_evaluation"] = double_to_json(b.seconds_per_evaluation);
  return j;
}

json to_json(const LabeledPoint& p) {
  return {{"x", double_to_json(p.x)}, {"y", double_to_json(p.y)}, {"label", p.label}};
}

json to_json(const Dataset& d) {
  json j;
  json train = json::array();
  for (const auto& p : d.train) train.push_back(to_json(p));
  json test = json::array();
  for (const auto& p : d.test) test.push_back(to_json(p));
  j["train"] = train;
  j["test"] = test;
  return j;
}

std::string dump(const json& j) { return j.dump(2) + "\n"; }

}  // namespace csumlab
