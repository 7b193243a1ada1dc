#include "csumlab/service.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include <httplib.h>

#include "csumlab/decimal.hpp"
#include "csumlab/error.hpp"

namespace csumlab {
namespace {

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream ss(path);
  while (std::getline(ss, part, '/')) {
    if (!part.empty()) parts.push_back(part);
  }
  return parts;
}

json parse_body(const std::string& body) {
  if (body.empty()) return json::object();
  try {
    auto j = json::parse(body);
    if (!j.is_object()) throw Error(ErrorCode::ValidationError, "request body must be a JSON object");
    return j;
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ValidationError, std::string("malformed JSON body: ") + e.what());
  }
}

Response ok(const json& j) { return {200, dump(j), "application/json"}; }

Response error_response(ErrorCode code, const std::string& message) {
  json j;
  j["code"] = std::string(to_string(code));
  j["message"] = message;
  return {http_status(code), dump(j), "application/json"};
}

template <typename T>
T field_or(const json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::ValidationError, std::string("field '") + key + "' has the wrong type");
  }
}

double double_field_or(const json& j, const char* key, double fallback) {
  return j.contains(key) ? double_from_json(j.at(key)) : fallback;
}

std::uint64_t seed_field(const json& j, const char* key) {
  if (!j.contains(key)) return 0;
  const auto& v = j.at(key);
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    throw Error(ErrorCode::ValidationError, std::string("field '") + key + "' must be a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

const std::string& query_param(const Request& r, const std::string& key) {
  auto it = r.query.find(key);
  if (it == r.query.end()) throw Error(ErrorCode::ValidationError, "missing query parameter '" + key + "'");
  return it->second;
}

Dataset& require_dataset(Session& s) {
  if (!s.dataset) throw Error(ErrorCode::ValidationError, "session has no dataset; POST /dataset first");
  return *s.dataset;
}

Model& require_model(Session& s) {
  if (!s.model) throw Error(ErrorCode::ValidationError, "session has no model; POST /train or PUT /model first");
  return *s.model;
}

ChecksumConfig planted_config(const Model& model) {
  for (const auto& a : model.spec.activations) {
    if (a.kind == Activation::ReluCsum) return a.checksum;
  }
  throw Error(ErrorCode::NotPlanted, "model has no ReLU_CSUM layer");
}

std::unique_lock<std::shared_mutex> lock_for_mutation(Session& s) {
  std::unique_lock lock(s.mutex, std::try_to_lock);
  if (!lock.owns_lock()) {
    throw Error(ErrorCode::ConcurrentMutation, "another mutating request is in flight for session " + s.id);
  }
  s.modified = Session::Clock::now();
  return lock;
}

json prediction_json(const Model& model, double x, double y) {
  const auto trace = forward(model, features(x, y, model.spec.features));
  json j;
  j["x"] = double_to_json(x);
  j["y"] = double_to_json(y);
  j["output"] = double_to_json(trace.output);
  j["label"] = trace.label;
  return j;
}

}  // namespace

int http_status(ErrorCode code) {
  switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::NotFound:
      return 404;
    case ErrorCode::ConcurrentMutation:
      return 409;
    case ErrorCode::ValidationError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::InvalidSpec:
    case ErrorCode::UnknownPattern:
      return 400;
    default:
      return 422;
  }
}

Service::Service(ServiceConfig config) : config_(std::move(config)) {
  config_.default_checksum.validate();
  id_engine_.seed(config_.id_seed ? *config_.id_seed : std::random_device{}());
}

std::size_t Service::session_count() const {
  std::lock_guard lock(sessions_mutex_);
  return sessions_.size();
}

std::string Service::next_id() {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string id;
  std::uint64_t bits = id_engine_();
  for (int i = 0; i < 16; ++i, bits >>= 4) id.push_back(kHex[bits & 0xF]);
  return id;
}

void Service::sweep_expired() {
  const auto now = Session::Clock::now();
  for (auto it = sessions_.begin(); it != sessions_.end();) {
    std::shared_lock probe(it->second->mutex, std::try_to_lock);
    if (probe.owns_lock() && now - it->second->modified > config_.session_ttl) {
      probe.unlock();
      it = sessions_.erase(it);
    } else {
      ++it;
    }
  }
}

std::shared_ptr<Session> Service::create_session() {
  std::lock_guard lock(sessions_mutex_);
  sweep_expired();
  auto s = std::make_shared<Session>();
  do {
    s->id = next_id();
  } while (sessions_.count(s->id) != 0);
  s->created = s->modified = Session::Clock::now();
  s->checksum = config_.default_checksum;
  sessions_[s->id] = s;
  return s;
}

std::shared_ptr<Session> Service::find_session(const std::string& id) {
  std::lock_guard lock(sessions_mutex_);
  sweep_expired();
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "unknown session '" + id + "'");
  return it->second;
}

Service::TrainJob Service::begin_train(const std::shared_ptr<Session>& session, const json& body) {
  auto lock = std::make_shared<std::unique_lock<std::shared_mutex>>(lock_for_mutation(*session));
  const Dataset& data = require_dataset(*session);
  if (data.train.empty()) throw Error(ErrorCode::EmptyDataset, "training split is empty");

  TrainHyper hyper;
  const json hj = body.contains("hyper") ? body.at("hyper") : json::object();
  hyper.lr = double_field_or(hj, "lr", hyper.lr);
  hyper.batch = field_or(hj, "batch", hyper.batch);
  hyper.epochs = field_or(hj, "epochs", hyper.epochs);
  hyper.seed = seed_field(hj, "seed");
  if (hyper.epochs < 0 || hyper.epochs > config_.max_epochs) {
    throw Error(ErrorCode::ValidationError, "epochs must lie in [0, " + std::to_string(config_.max_epochs) + "]");
  }

  Model start;
  if (body.contains("spec")) {
    start = init(network_spec_from_json(body.at("spec")), hyper.seed);
  } else {
    start = require_model(*session);
  }

  return [session, lock, hyper, start](const LineSink& sink) {
    auto on_epoch = [&](int epoch, double loss) {
      json e;
      e["event"] = "epoch";
      e["epoch"] = epoch + 1;
      e["loss"] = double_to_json(loss);
      sink(e.dump() + "\n");
    };
    try {
      auto result = train(start, *session->dataset, hyper, on_epoch);
      session->model = result.model;
      json done;
      done["event"] = "done";
      done["epochs"] = hyper.epochs;
      done["train_accuracy"] = double_to_json(accuracy(result.model, session->dataset->train));
      done["test_accuracy"] = double_to_json(accuracy(result.model, session->dataset->test));
      sink(done.dump() + "\n");
    } catch (const Error& e) {
      json err;
      err["event"] = "error";
      err["code"] = std::string(to_string(e.code()));
      err["message"] = e.what();
      sink(err.dump() + "\n");
      throw;
    }
  };
}

Response Service::handle(const Request& request) {
  try {
    return route(request, nullptr);
  } catch (const Error& e) {
    return error_response(e.code(), e.what());
  } catch (const std::exception& e) {
    return error_response(ErrorCode::ValidationError, e.what());
  }
}

Response Service::route(const Request& req, const LineSink* stream) {
  const auto parts = split_path(req.path);
  const auto& m = req.method;
  if (parts.empty() || parts[0] != "sessions") throw Error(ErrorCode::NotFound, "no route for " + req.path);

  if (parts.size() == 1) {
    if (m != "POST") throw Error(ErrorCode::NotFound, "use POST /sessions");
    auto s = create_session();
    json j;
    j["id"] = s->id;
    j["checksum"] = to_json(s->checksum);
    return ok(j);
  }

  auto session = find_session(parts[1]);
  Session& s = *session;
  const std::string action = parts.size() > 2 ? parts[2] : "";
  const std::string sub = parts.size() > 3 ? parts[3] : "";
  if (parts.size() > 4) throw Error(ErrorCode::NotFound, "no route for " + req.path);
  const json body = (m == "POST" || m == "PUT") && action != "model" ? parse_body(req.body) : json::object();

  if (action.empty() && m == "GET") {
    std::shared_lock lock(s.mutex);
    json j;
    j["id"] = s.id;
    j["has_dataset"] = s.dataset.has_value();
    j["has_model"] = s.model.has_value();
    j["has_memory"] = s.memory.has_value();
    j["planted"] = s.model && is_planted(*s.model);
    j["checksum"] = to_json(s.checksum);
    return ok(j);
  }

  if (action == "dataset" && sub.empty()) {
    if (m == "GET") {
      std::shared_lock lock(s.mutex);
      return ok(to_json(require_dataset(s)));
    }
    if (m != "POST") throw Error(ErrorCode::NotFound, "dataset supports GET and POST");
    auto lock = lock_for_mutation(s);
    const auto pattern = parse_pattern(field_or<std::string>(body, "pattern", "circle"));
    const int n = field_or(body, "n", 200);
    const double noise = double_field_or(body, "noise", 0.0);
    const double trojan = double_field_or(body, "trojan", 0.0);
    const auto seed = seed_field(body, "seed");
    const double fraction = double_field_or(body, "train_fraction", 0.5);
    Dataset d = poison(generate(pattern, n, noise, seed, fraction), trojan, seed);
    s.dataset = d;
    s.histograms.reset();
    s.radius.reset();
    json j = to_json(d);
    j["n_train"] = d.train.size();
    j["n_test"] = d.test.size();
    return ok(j);
  }

  if (action == "train" && sub.empty() && m == "POST") {
    auto job = begin_train(session, body);
    if (stream) {
      job(*stream);
      return {200, "", "application/x-ndjson"};
    }
    std::string lines;
    job([&](const std::string& line) { lines += line; });
    return {200, lines, "application/x-ndjson"};
  }

  if (action == "model") {
    if (sub.empty() && m == "GET") {
      std::shared_lock lock(s.mutex);
      return ok(to_json(require_model(s)));
    }
    if (sub.empty() && m == "PUT") {
      json doc;
      try {
        doc = json::parse(req.body);
      } catch (const json::exception& e) {
        throw Error(ErrorCode::ValidationError, std::string("malformed model JSON: ") + e.what());
      }
      Model model = model_from_json(doc);
      auto lock = lock_for_mutation(s);
      s.model = std::move(model);
      return ok(to_json(*s.model));
    }
    if (m == "POST" && sub == "store") {
      auto lock = lock_for_mutation(s);
      s.memory = store(require_model(s));
      return ok(json{{"stored", true}, {"layers", s.memory->layers.size()}});
    }
    if (m == "POST" && sub == "recall") {
      auto lock = lock_for_mutation(s);
      if (!s.memory) throw Error(ErrorCode::ValidationError, "model memory is empty; POST /model/store first");
      s.model = recall(*s.memory, require_model(s));
      return ok(to_json(*s.model));
    }
    throw Error(ErrorCode::NotFound, "no route for " + req.path);
  }

  if (action == "activation" && sub.empty() && m == "POST") {
    auto lock = lock_for_mutation(s);
    Model& model = require_model(s);
    const auto kind = parse_activation(field_or<std::string>(body, "kind", "relu"));
    ChecksumConfig cfg = s.checksum;
    if (body.contains("checksum_config")) cfg = checksum_config_from_json(body.at("checksum_config"), cfg);
    if (kind == Activation::ReluCsum) {
      s.checksum = cfg;
      if (is_planted(model)) {
        for (auto& a : model.spec.activations) a = ActivationKind::relu_csum(cfg);
      } else {
        model = plant(model, cfg);
      }
    } else {
      for (auto& a : model.spec.activations) a = {kind, {}};
    }
    return ok(to_json(model.spec));
  }

  if (action == "attack" && m == "POST") {
    if (sub == "signature") {
      auto lock = lock_for_mutation(s);
      json overrides = body.contains("checksum_config") ? body.at("checksum_config") : json::object();
      if (body.contains("sk")) overrides["sk"] = body.at("sk");
      const ChecksumConfig cfg = checksum_config_from_json(overrides, s.checksum);
      auto result = signature_attack(require_dataset(s), cfg);
      s.dataset = result.dataset;
      return ok(to_json(result));
    }
    if (sub == "backtrack") {
      auto lock = lock_for_mutation(s);
      const Model& model = require_model(s);
      const ChecksumConfig cfg = planted_config(model);
      LabeledPoint p;
      if (body.contains("point_index")) {
        const auto& test = require_dataset(s).test;
        const auto idx = field_or<long long>(body, "point_index", -1);
        if (idx < 0 || static_cast<std::size_t>(idx) >= test.size()) {
          throw Error(ErrorCode::ValidationError, "point_index out of range");
        }
        p = test[static_cast<std::size_t>(idx)];
      } else if (body.contains("x") && body.contains("y")) {
        p = {double_from_json(body.at("x")), double_from_json(body.at("y")), 1};
      } else {
        throw Error(ErrorCode::ValidationError, "backtrack needs point_index or x and y");
      }
      BacktrackOptions options;
      if (body.contains("max_coordinate_change")) {
        options.max_coordinate_change = double_from_json(body.at("max_coordinate_change"));
      }
      s.last_trace = backtrack_trigger(model, p, cfg, options);
      return ok(to_json(*s.last_trace));
    }
    if (sub == "random_search") {
      std::shared_lock lock(s.mutex);
      const Model& model = require_model(s);
      const auto budget = body.contains("budget") ? seed_field(body, "budget") : config_.max_search_budget;
      if (budget == 0 || budget > config_.max_search_budget) {
        throw Error(ErrorCode::ValidationError,
                    "budget must lie in [1, " + std::to_string(config_.max_search_budget) + "]");
      }
      const auto cfg = planted_config(model);
      auto result = random_search_guaranteed(model, cfg, budget, seed_field(body, "seed"));
      json j = to_json(result);
      j["exhausted"] = !result.found;
      if (cfg.m >= 20) j["warning"] = "modulo >= 20 is unlikely to finish interactively";
      return ok(j);
    }
    throw Error(ErrorCode::NotFound, "no route for " + req.path);
  }

  if (action == "defense" && m == "POST") {
    if (sub == "histograms") {
      auto lock = lock_for_mutation(s);
      const double delta_r = double_field_or(body, "delta_r", kDefaultDeltaR);
      s.histograms = pairwise_histograms(require_dataset(s).train, delta_r);
      json j = to_json(*s.histograms);
      try {
        s.radius = select_radius(*s.histograms);
        j["radius"] = double_to_json(*s.radius);
      } catch (const Error&) {
        s.radius.reset();
        j["radius"] = nullptr;
      }
      return ok(j);
    }
    if (sub == "robustify") {
      auto lock = lock_for_mutation(s);
      Dataset& d = require_dataset(s);
      double radius = 0.0;
      if (body.contains("R")) {
        radius = double_from_json(body.at("R"));
      } else if (s.radius) {
        radius = *s.radius;
      } else {
        throw Error(ErrorCode::ValidationError, "no radius given and none selected; POST /defense/histograms first");
      }
      auto report = robustify(d.train, d.test, radius);
      d.test = report.corrected;
      json j = to_json(report);
      if (s.histograms) j["bins"] = to_json(*s.histograms);
      return ok(j);
    }
    throw Error(ErrorCode::NotFound, "no route for " + req.path);
  }

  if (action == "predict" && sub.empty() && m == "GET") {
    std::shared_lock lock(s.mutex);
    const double x = parse_double(query_param(req, "x"));
    const double y = parse_double(query_param(req, "y"));
    return ok(prediction_json(require_model(s), x, y));
  }

  if (action == "boundary" && sub.empty() && m == "GET") {
    std::shared_lock lock(s.mutex);
    const Model& model = require_model(s);
    int grid = 50;
    if (auto it = req.query.find("grid"); it != req.query.end()) {
      try {
        grid = std::stoi(it->second);
      } catch (const std::exception&) {
        throw Error(ErrorCode::ValidationError, "grid must be an integer");
      }
    }
    if (grid < 1 || grid > config_.max_boundary_grid) {
      throw Error(ErrorCode::ValidationError, "grid must lie in [1, " + std::to_string(config_.max_boundary_grid) + "]");
    }
    const double step = (kDomainMax - kDomainMin) / grid;
    json coords = json::array();
    std::vector<double> centers;
    for (int i = 0; i < grid; ++i) {
      centers.push_back(kDomainMin + (i + 0.5) * step);
      coords.push_back(double_to_json(centers.back()));
    }
    json outputs = json::array();
    json labels = json::array();
    for (int r = 0; r < grid; ++r) {
      json orow = json::array();
      json lrow = json::array();
      for (int c = 0; c < grid; ++c) {
        const auto t = forward(model, features(centers[static_cast<std::size_t>(c)],
                                               centers[static_cast<std::size_t>(r)], model.spec.features));
        orow.push_back(double_to_json(t.output));
        lrow.push_back(t.label);
      }
      outputs.push_back(orow);
      labels.push_back(lrow);
    }
    json j;
    j["grid"] = grid;
    j["coordinates"] = coords;
    j["outputs"] = outputs;  // outputs[row = y index][column = x index]
    j["labels"] = labels;
    return ok(j);
  }

  throw Error(ErrorCode::NotFound, "no route for " + m + " " + req.path);
}

void Service::mount(httplib::Server& server) {
  auto to_request = [](const httplib::Request& r) {
    Request req{r.method, r.path, {}, r.body};
    for (const auto& [k, v] : r.params) req.query[k] = v;
    return req;
  };
  auto send = [](httplib::Response& res, const Response& out) {
    res.status = out.status;
    res.set_content(out.body, out.content_type);
  };

  server.Post(R"(/sessions/([^/]+)/train)", [this, to_request, send](const httplib::Request& r, httplib::Response& res) {
    TrainJob job;
    try {
      job = begin_train(find_session(r.matches[1]), parse_body(r.body));
    } catch (const Error& e) {
      send(res, error_response(e.code(), e.what()));
      return;
    }
    res.set_chunked_content_provider("application/x-ndjson", [job](std::size_t, httplib::DataSink& sink) {
      try {
        job([&](const std::string& line) { sink.write(line.data(), line.size()); });
      } catch (const std::exception&) {
        // The error event has already been streamed.
      }
      sink.done();
      return true;
    });
  });

  auto generic = [this, to_request, send](const httplib::Request& r, httplib::Response& res) {
    send(res, handle(to_request(r)));
  };
  server.Get(R"(/sessions.*)", generic);
  server.Post(R"(/sessions.*)", generic);
  server.Put(R"(/sessions.*)", generic);
}

json replay(Service& service, const json& script, const std::string& base_dir) {
  if (!script.is_object() || !script.contains("steps") || !script.at("steps").is_array()) {
    throw Error(ErrorCode::ValidationError, "replay script needs a 'steps' array");
  }
  json results = json::array();
  std::string current_id;
  for (const auto& step : script.at("steps")) {
    Request req;
    req.method = field_or<std::string>(step, "method", "GET");
    req.path = field_or<std::string>(step, "path", "");
    for (auto pos = req.path.find("{id}"); pos != std::string::npos; pos = req.path.find("{id}")) {
      req.path.replace(pos, 4, current_id);
    }
    if (step.contains("body")) {
      const auto& b = step.at("body");
      req.body = b.is_string() ? b.get<std::string>() : b.dump();
    }
    if (step.contains("query")) {
      for (const auto& [k, v] : step.at("query").items()) req.query[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    const auto res = service.handle(req);
    if (req.method == "POST" && req.path == "/sessions" && res.status == 200) {
      current_id = json::parse(res.body).at("id").get<std::string>();
    }
    if (step.contains("save")) {
      const auto path = base_dir + "/" + step.at("save").get<std::string>();
      std::ofstream out(path, std::ios::binary);
      if (!out) throw Error(ErrorCode::ValidationError, "cannot write " + path);
      out << res.body;
    }
    json record;
    record["method"] = req.method;
    record["path"] = req.path;
    record["status"] = res.status;
    if (res.content_type == "application/json") {
      record["body"] = json::parse(res.body);
    } else {
      record["body"] = res.body;
    }
    results.push_back(record);
  }
  return results;
}

}  // namespace csumlab
