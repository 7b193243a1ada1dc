#pragma once

#include <string>

#include <json.hpp>

#include "csumlab/backdoor.hpp"
#include "csumlab/checksum.hpp"
#include "csumlab/datagen.hpp"
#include "csumlab/defense.hpp"
#include "csumlab/nn.hpp"

// JSON documents exchanged by the CLI and the HTTP service. Every double is
// written as its shortest round-trip decimal string, so documents survive
// any number of save/load cycles bit for bit.
namespace csumlab {

using json = nlohmann::ordered_json;

json double_to_json(double v);
/// Accepts a decimal string or a JSON number.
double double_from_json(const json& j);

json to_json(const ChecksumConfig& cfg);
ChecksumConfig checksum_config_from_json(const json& j, ChecksumConfig base = {});

json to_json(const NetworkSpec& spec);
NetworkSpec network_spec_from_json(const json& j);

json to_json(const Model& model);
Model model_from_json(const json& j);

json to_json(const BacktrackTrace& trace);
json to_json(const ChecksumHistogram& h);
json to_json(const SignatureResult& r);
json to_json(const DistanceHistograms& h);
json to_json(const FlipReport& r);
json to_json(const RandomSearchResult& r);
json to_json(const SearchBenchmark& b);
json to_json(const LabeledPoint& p);
json to_json(const Dataset& d);

/// Canonical text form: two-space indent plus trailing newline.
std::string dump(const json& j);

}  // namespace csumlab
