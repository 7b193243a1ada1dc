#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <shared_mutex>
#include <string>
#include <unordered_map>

#include "csumlab/backdoor.hpp"
#include "csumlab/checksum.hpp"
#include "csumlab/datagen.hpp"
#include "csumlab/defense.hpp"
#include "csumlab/error.hpp"
#include "csumlab/nn.hpp"
#include "csumlab/serialize.hpp"

namespace httplib {
class Server;
}

namespace csumlab {

struct ServiceConfig {
  ChecksumConfig default_checksum;
  std::chrono::seconds session_ttl{3600};
  int max_epochs = 5000;
  std::uint64_t max_search_budget = 10'000'000;
  int max_boundary_grid = 200;
  /// Seeds session id generation; unset draws from std::random_device.
  std::optional<std::uint64_t> id_seed;
};

struct Session {
  using Clock = std::chrono::steady_clock;

  std::string id;
  std::shared_mutex mutex;
  Clock::time_point created;
  Clock::time_point modified;

  std::optional<Dataset> dataset;
  std::optional<Model> model;
  std::optional<ModelMemory> memory;
  ChecksumConfig checksum;
  std::optional<DistanceHistograms> histograms;
  std::optional<double> radius;
  std::optional<BacktrackTrace> last_trace;
};

struct Request {
  std::string method;
  std::string path;
  std::map<std::string, std::string> query;
  std::string body;
};

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

using LineSink = std::function<void(const std::string& line)>;

int http_status(ErrorCode code);

/// Session-oriented front end over the library. `handle` is transport
/// independent; `mount` wires it into an httplib server.
class Service {
 public:
  explicit Service(ServiceConfig config = {});

  /// Runs one request to completion. Training events are collected into the
  /// response body as newline-delimited JSON.
  Response handle(const Request& request);

  /// Registers every route on `server`, streaming training events.
  void mount(httplib::Server& server);

  std::size_t session_count() const;

 private:
  using Params = std::vector<std::string>;
  using TrainJob = std::function<void(const LineSink&)>;

  std::shared_ptr<Session> create_session();
  std::shared_ptr<Session> find_session(const std::string& id);
  void sweep_expired();
  std::string next_id();

  Response route(const Request& request, const LineSink* stream);
  TrainJob begin_train(const std::shared_ptr<Session>& session, const json& body);

  ServiceConfig config_;
  mutable std::mutex sessions_mutex_;
  std::unordered_map<std::string, std::shared_ptr<Session>> sessions_;
  std::mt19937_64 id_engine_;
};

/// Recorded API script: {"steps": [{"method", "path", "body"?, "query"?,
/// "save"?}]}. "{id}" in paths is replaced by the most recently created
/// session id. Returns one {"status", "body"} record per step.
json replay(Service& service, const json& script, const std::string& base_dir = ".");

}  // namespace csumlab
