// csumlab: batch front end for dataset generation, training, attacks,
// defense, benchmarks and API replay. Results go to stdout, logs to stderr.

#include <atomic>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <httplib.h>

#include "csumlab/backdoor.hpp"
#include "csumlab/datagen.hpp"
#include "csumlab/decimal.hpp"
#include "csumlab/defense.hpp"
#include "csumlab/error.hpp"
#include "csumlab/nn.hpp"
#include "csumlab/serialize.hpp"
#include "csumlab/service.hpp"

using namespace csumlab;

namespace {

constexpr int kExitContract = 2;
constexpr int kExitIo = 1;

struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_output(const std::string& path, const std::string& content) {
  if (path.empty() || path == "-") {
    std::cout << content;
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path);
  out << content;
}

json read_json(const std::string& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorCode::ValidationError, path + ": " + e.what());
  }
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open " + path);
  return read_csv(in);
}

std::string dataset_csv(const Dataset& d) {
  std::ostringstream out;
  write_csv(d, out);
  return out.str();
}

std::vector<int> parse_layers(const std::string& text) {
  std::vector<int> layers;
  std::istringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      layers.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidSpec, "bad layer size '" + item + "'");
    }
  }
  return layers;
}

struct ChecksumFlags {
  int m = 256;
  int precision = 15;
  int sk = 0;
  int th = -1;

  void add(CLI::App* app) {
    app->add_option("--m", m, "checksum modulus")->capture_default_str();
    app->add_option("--precision", precision, "coefficient digits summed")->capture_default_str();
    app->add_option("--sk", sk, "secret key")->capture_default_str();
    app->add_option("--th", th, "retarget threshold (default: m)");
  }

  ChecksumConfig config() const {
    ChecksumConfig cfg;
    cfg.m = m;
    cfg.precision = precision;
    cfg.sk = sk;
    if (th >= 0) cfg.th = th;
    cfg.validate();
    return cfg;
  }
};

std::atomic<httplib::Server*> g_server{nullptr};

void on_signal(int) {
  if (auto* s = g_server.load()) s->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"checksum backdoor laboratory"};
  app.require_subcommand(1);
  app.fallthrough();
  std::uint64_t seed = 0;
  std::string out_path;
  app.add_option("--seed", seed, "random seed")->capture_default_str();
  app.add_option("-o,--out", out_path, "write the primary output here instead of stdout");

  std::function<void()> action;

  // dataset
  auto* dataset = app.add_subcommand("dataset", "generate or poison a 2D dataset (CSV)");
  dataset->require_subcommand(1);
  std::string pattern = "circle";
  int n = 200;
  double noise = 0.0, trojan = 0.0, train_fraction = 0.5;
  auto* gen = dataset->add_subcommand("gen", "generate a dataset");
  gen->add_option("--pattern", pattern)->capture_default_str();
  gen->add_option("--n", n, "number of points")->capture_default_str();
  gen->add_option("--noise", noise)->capture_default_str();
  gen->add_option("--trojan", trojan, "fraction of training labels to flip")->capture_default_str();
  gen->add_option("--train-fraction", train_fraction)->capture_default_str();
  gen->callback([&] {
    action = [&] {
      auto d = poison(generate(parse_pattern(pattern), n, noise, seed, train_fraction), trojan, seed);
      write_output(out_path, dataset_csv(d));
    };
  });
  std::string data_path;
  auto* pois = dataset->add_subcommand("poison", "flip a fraction of training labels");
  pois->add_option("--data", data_path)->required();
  pois->add_option("--trojan", trojan)->required();
  pois->callback([&] {
    action = [&] { write_output(out_path, dataset_csv(poison(load_dataset(data_path), trojan, seed))); };
  });

  // train
  auto* tr = app.add_subcommand("train", "train a network; model JSON to --out, losses to --loss");
  std::string features = "x,y", hidden = "4", activation = "relu", loss_path, init_model;
  TrainHyper hyper;
  tr->add_option("--data", data_path)->required();
  tr->add_option("--features", features)->capture_default_str();
  tr->add_option("--hidden", hidden, "comma separated layer sizes")->capture_default_str();
  tr->add_option("--activation", activation)->capture_default_str();
  tr->add_option("--lr", hyper.lr)->capture_default_str();
  tr->add_option("--batch", hyper.batch)->capture_default_str();
  tr->add_option("--epochs", hyper.epochs)->capture_default_str();
  tr->add_option("--init", init_model, "continue from this model JSON");
  tr->add_option("--loss", loss_path, "loss CSV path");
  tr->callback([&] {
    action = [&] {
      const auto d = load_dataset(data_path);
      hyper.seed = seed;
      Model start;
      if (!init_model.empty()) {
        start = model_from_json(read_json(init_model));
      } else {
        NetworkSpec spec;
        spec.features = FeatureMask::parse(features);
        spec.hidden_layers = parse_layers(hidden);
        spec.activations.assign(spec.hidden_layers.size(), {parse_activation(activation), {}});
        spec.validate();
        start = init(spec, seed);
      }
      const auto result = train(start, d, hyper);
      std::cerr << "train accuracy " << format_double(accuracy(result.model, d.train)) << ", test accuracy "
                << format_double(accuracy(result.model, d.test)) << "\n";
      write_output(out_path, dump(to_json(result.model)));
      if (!loss_path.empty()) {
        std::ostringstream csv;
        csv << "epoch,loss\n";
        for (std::size_t e = 0; e < result.loss_history.size(); ++e) {
          csv << e + 1 << "," << format_double(result.loss_history[e]) << "\n";
        }
        std::ofstream out(loss_path, std::ios::binary);
        if (!out) throw IoError("cannot write " + loss_path);
        out << csv.str();
      }
    };
  });

  // plant
  auto* pl = app.add_subcommand("plant", "replace ReLU with ReLU_CSUM in every hidden layer");
  std::string model_path;
  ChecksumFlags plant_flags;
  pl->add_option("--model", model_path)->required();
  plant_flags.add(pl);
  pl->callback([&] {
    action = [&] { write_output(out_path, dump(to_json(plant(model_from_json(read_json(model_path)), plant_flags.config())))); };
  });

  // attack
  auto* attack = app.add_subcommand("attack", "run an attack and print a JSON report");
  attack->require_subcommand(1);
  auto* sig = attack->add_subcommand("signature", "flip test labels whose csum(y) equals sk");
  ChecksumFlags sig_flags;
  std::string data_out;
  sig->add_option("--data", data_path)->required();
  sig->add_option("--data-out", data_out, "write the attacked dataset CSV");
  sig_flags.add(sig);
  sig->callback([&] {
    action = [&] {
      auto r = signature_attack(load_dataset(data_path), sig_flags.config());
      if (!data_out.empty()) {
        std::ofstream out(data_out, std::ios::binary);
        if (!out) throw IoError("cannot write " + data_out);
        write_csv(r.dataset, out);
      }
      write_output(out_path, dump(to_json(r)));
    };
  });

  auto* bt = attack->add_subcommand("backtrack", "craft a trigger point for a planted model");
  double px = 0.0, py = 0.0, max_change = 1e-6;
  int index = -1;
  auto* xo = bt->add_option("--x", px);
  auto* yo = bt->add_option("--y", py);
  bt->add_option("--data", data_path, "dataset CSV to pick --index from");
  bt->add_option("--index", index, "test point index");
  std::string point_path;
  bt->add_option("--point", point_path, "JSON file with x and y");
  bt->add_option("--model", model_path)->required();
  bt->add_option("--max-change", max_change)->capture_default_str();
  xo->needs(yo);
  yo->needs(xo);
  bt->callback([&] {
    action = [&] {
      const Model model = model_from_json(read_json(model_path));
      LabeledPoint p{px, py, 1};
      if (index >= 0) {
        if (data_path.empty()) throw Error(ErrorCode::ValidationError, "--index needs --data");
        const auto d = load_dataset(data_path);
        if (static_cast<std::size_t>(index) >= d.test.size()) throw Error(ErrorCode::ValidationError, "--index out of range");
        p = d.test[static_cast<std::size_t>(index)];
      } else if (!point_path.empty()) {
        const auto j = read_json(point_path);
        if (!j.contains("x") || !j.contains("y")) throw Error(ErrorCode::ValidationError, point_path + ": needs x and y");
        p = {double_from_json(j.at("x")), double_from_json(j.at("y")), 1};
      } else if (xo->count() == 0) {
        throw Error(ErrorCode::ValidationError, "give --x/--y, --point or --data/--index");
      }
      ChecksumConfig cfg;
      bool found = false;
      for (const auto& a : model.spec.activations) {
        if (a.kind == Activation::ReluCsum) {
          cfg = a.checksum;
          found = true;
          break;
        }
      }
      if (!found) throw Error(ErrorCode::NotPlanted, "model has no ReLU_CSUM layer; run `plant` first");
      BacktrackOptions options;
      options.max_coordinate_change = max_change;
      write_output(out_path, dump(to_json(backtrack_trigger(model, p, cfg, options))));
    };
  });

  auto* rs = attack->add_subcommand("random-search", "sample inputs until every node hits sk");
  std::uint64_t budget = 10'000'000;
  rs->add_option("--model", model_path)->required();
  rs->add_option("--budget", budget)->capture_default_str();
  rs->callback([&] {
    action = [&] {
      const Model model = model_from_json(read_json(model_path));
      if (!is_planted(model)) throw Error(ErrorCode::NotPlanted, "model has no ReLU_CSUM layer");
      const auto cfg = model.spec.activations.front().checksum;
      auto r = random_search_guaranteed(model, cfg, budget, seed);
      if (!r.found) std::cerr << "budget exhausted after " << r.attempts << " attempts\n";
      write_output(out_path, dump(to_json(r)));
    };
  });

  // defend
  auto* df = app.add_subcommand("defend", "label-proximity histograms and test-label repair");
  double delta_r = kDefaultDeltaR, radius = 0.0;
  df->add_option("--data", data_path)->required();
  df->add_option("--delta-r", delta_r)->capture_default_str();
  df->add_option("--radius", radius, "neighbourhood radius (default: selected from histograms)");
  df->add_option("--data-out", data_out, "write the repaired dataset CSV");
  df->callback([&] {
    action = [&] {
      auto d = load_dataset(data_path);
      const auto h = pairwise_histograms(d.train, delta_r);
      const double r = radius > 0.0 ? radius : select_radius(h);
      auto report = robustify(d.train, d.test, r);
      json j = to_json(report);
      j["bins"] = to_json(h);
      if (!data_out.empty()) {
        d.test = report.corrected;
        std::ofstream out(data_out, std::ios::binary);
        if (!out) throw IoError("cannot write " + data_out);
        write_csv(d, out);
      }
      write_output(out_path, dump(j));
    };
  });

  // bench
  auto* bench = app.add_subcommand("bench", "benchmarks");
  bench->require_subcommand(1);
  auto* bs = bench->add_subcommand("search", "random-search attempt statistics");
  int bm = 10, nodes = 4, runs = 1000, bsk = 0;
  std::uint64_t bbudget = 100'000'000;
  bs->add_option("--m", bm)->capture_default_str();
  bs->add_option("--nodes", nodes)->capture_default_str();
  bs->add_option("--runs", runs)->capture_default_str();
  bs->add_option("--sk", bsk)->capture_default_str();
  bs->add_option("--budget", bbudget, "attempt cap per run")->capture_default_str();
  bs->callback([&] {
    action = [&] { write_output(out_path, dump(to_json(bench_search(bm, nodes, runs, seed, bsk, bbudget)))); };
  });

  // replay
  auto* rp = app.add_subcommand("replay", "re-execute a recorded API script");
  std::string script_path;
  std::string save_dir;
  rp->add_option("script", script_path)->required();
  rp->add_option("--save-dir", save_dir, "where \"save\" steps write (default: the script's directory)");
  rp->callback([&] {
    action = [&] {
      ServiceConfig cfg;
      cfg.id_seed = seed;
      Service service(cfg);
      auto base = save_dir.empty() ? std::filesystem::path(script_path).parent_path().string() : save_dir;
      write_output(out_path, dump(replay(service, read_json(script_path), base.empty() ? "." : base)));
    };
  });

  // serve
  auto* sv = app.add_subcommand("serve", "run the HTTP/JSON service");
  std::string bind = "127.0.0.1";
  int port = 8080;
  long ttl = 3600;
  ChecksumFlags serve_flags;
  sv->add_option("--bind", bind)->envname("CSUMLAB_BIND")->capture_default_str();
  sv->add_option("--port", port)->envname("CSUMLAB_PORT")->capture_default_str();
  sv->add_option("--session-ttl", ttl, "seconds")->envname("CSUMLAB_SESSION_TTL")->capture_default_str();
  serve_flags.add(sv);
  sv->get_option("--m")->envname("CSUMLAB_CHECKSUM_M");
  sv->get_option("--sk")->envname("CSUMLAB_CHECKSUM_SK");
  sv->callback([&] {
    action = [&] {
      ServiceConfig cfg;
      cfg.default_checksum = serve_flags.config();
      cfg.session_ttl = std::chrono::seconds(ttl);
      Service service(cfg);
      httplib::Server server;
      service.mount(server);
      g_server = &server;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::cerr << "listening on " << bind << ":" << port << "\n";
      if (!server.listen(bind, port)) throw IoError("cannot listen on " + bind + ":" + std::to_string(port));
      g_server = nullptr;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitContract;
  }

  try {
    action();
  } catch (const Error& e) {
    json j;
    j["code"] = std::string(to_string(e.code()));
    j["message"] = e.what();
    std::cerr << j.dump() << "\n";
    return kExitContract;
  } catch (const IoError& e) {
    std::cerr << e.what() << "\n";
    return kExitIo;
  }
  return 0;
}
