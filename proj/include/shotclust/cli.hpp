#pragma once

// Command-line driver: ingest, features, elbow, run, report.
// Exit codes: 0 success, 1 computation error, 2 usage or I/O error.

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <thread>
#include <vector>

#include "shotclust/shotclust.hpp"
#include "shotclust/service.hpp"
#include "CLI11.hpp"

namespace shotclust::cli {

namespace fs = std::filesystem;

inline constexpr int kOk = 0;
inline constexpr int kComputeError = 1;
inline constexpr int kUsageError = 2;

inline int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::io_error:
    case ErrorCode::parse_error: return kUsageError;
    default: return kComputeError;
  }
}

inline std::atomic<bool>& interrupted() {
  static std::atomic<bool> flag{false};
  return flag;
}

struct Options {
  std::string manifest;
  std::string embeddings;
  std::string taxonomy;
  std::string mode = "image";
  std::string classifier = "gbt";
  std::size_t k = 190;
  std::size_t batch = 200;
  std::size_t slack = 1;
  std::size_t iterations = 10;
  double weight = 10.0;
  std::uint64_t seed = 0;
  std::string oracle;
  std::string out;
  std::size_t reservoir_k = 500;
  std::size_t k_min = 10;
  std::size_t k_max = 1000;
  std::size_t k_step = 10;
  std::string features;
  std::string metrics;
  std::string host = "127.0.0.1";
  std::string margin = "nearest";
};

inline fs::path out_dir(const Options& o) {
  if (!o.out.empty()) return o.out;
  if (const char* env = std::getenv("SHOTCLUST_OUT"); env && *env) return env;
  return "shotclust-out";
}

inline void write_text(const fs::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + p.string());
  out << body;
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + p.string());
}

inline void require_file(const std::string& p, const std::string& what) {
  require(!p.empty(), ErrorCode::io_error, what + " path is required");
  require(fs::is_regular_file(p), ErrorCode::io_error, what + " not found: " + p);
}

inline int cmd_ingest(const Options& o, std::ostream& log) {
  require_file(o.manifest, "manifest");
  const auto items = load_manifest(o.manifest);
  const auto sample = stratified_sample(group_by_bucket(items), SampleSpec{o.reservoir_k, o.seed});
  const auto dir = out_dir(o);
  fs::create_directories(dir);
  save_manifest(dir / "sample.jsonl", sample);
  log << "sampled " << sample.size() << " of " << items.size() << " items -> "
      << (dir / "sample.jsonl").string() << '\n';
  return kOk;
}

inline int cmd_features(const Options& o, std::ostream& log) {
  require_file(o.manifest, "manifest");
  FeaturizeConfig cfg;
  cfg.mode = parse_feature_mode(o.mode);
  cfg.rsvd.rng_seed = o.seed;
  std::optional<EmbeddingTable> table;
  if (cfg.mode == FeatureMode::joint) {
    require_file(o.embeddings, "embeddings");
    table = load_embeddings(o.embeddings);
  }
  const auto items = load_manifest(o.manifest);
  const auto raw = extract_features(items, cfg, table ? &*table : nullptr);
  const auto dir = out_dir(o);
  fs::create_directories(dir);

  std::string rejects;
  for (const auto& r : raw.rejects) rejects += r.id + "\t" + r.reason + "\n";
  write_text(dir / "rejects.txt", rejects);
  for (const auto& r : raw.rejects) log << "warning: skipped " << r.id << ": " << r.reason << '\n';

  save_manifest(dir / "items.jsonl", raw.items);
  io::save_matrix(dir / "raw.scfm", raw.matrix);
  const auto reduced = reduce_features(raw.matrix, cfg);
  save_pca(dir / "pca.scpc", reduced.pca);
  {
    std::ofstream out(dir / "standardizer.scpc", std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::io_error, "cannot write standardizer");
    io::write_bundle(out, {{"means", reduced.standardizer.means.transpose(), Stage::raw},
                           {"stds", reduced.standardizer.stds.transpose(), Stage::raw}});
  }
  io::save_matrix(dir / "reduced.scfm", reduced.reduced);
  const json meta{{"mode", std::string(to_string(cfg.mode))},
                  {"items", raw.items.size()},
                  {"raw_dim", raw.matrix.cols()},
                  {"visual_dim", raw.visual_dim},
                  {"components", reduced.pca.components()},
                  {"kept", reduced.kept},
                  {"rejects", raw.rejects.size()}};
  write_text(dir / "features.json", meta.dump(2) + "\n");
  log << raw.items.size() << " items x " << raw.matrix.cols() << " features, " << reduced.kept
      << " components kept, " << raw.rejects.size() << " warnings\n";
  return kOk;
}

inline fs::path features_path(const Options& o) {
  return o.features.empty() ? out_dir(o) / "reduced.scfm" : fs::path(o.features);
}

inline int cmd_elbow(const Options& o, std::ostream& log) {
  const auto path = features_path(o);
  require_file(path.string(), "features");
  const auto fm = io::load_matrix(path);
  ElbowOptions opt;
  opt.k_min = o.k_min;
  opt.k_max = o.k_max;
  opt.step = o.k_step;
  opt.seeds = {o.seed, o.seed + 1, o.seed + 2};
  const auto curve = elbow_scan(fm.values, opt);
  for (const auto& w : curve.warnings) log << "warning: " << w << '\n';
  const auto dir = out_dir(o);
  fs::create_directories(dir);
  {
    std::ofstream out(dir / "sse.csv", std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io_error, "cannot write sse.csv");
    write_curve_csv(out, curve);
  }
  const auto k = pick_k_at_break(curve);
  write_text(dir / "chosen_k.txt", std::to_string(k) + "\n");
  log << "chosen K = " << k << '\n';
  std::cout << k << '\n';
  return kOk;
}

inline Workspace load_workspace(const Options& o) {
  const auto dir = out_dir(o);
  const fs::path items_path = o.manifest.empty() ? dir / "items.jsonl" : fs::path(o.manifest);
  require_file(items_path.string(), "items manifest");
  require_file(features_path(o).string(), "features");
  require_file(o.taxonomy, "taxonomy");
  auto items = load_manifest(items_path);
  auto fm = io::load_matrix(features_path(o));
  std::string mode = o.mode;
  if (const auto meta = features_path(o).parent_path() / "features.json"; fs::exists(meta)) {
    std::ifstream in(meta);
    mode = json::parse(in).at("mode").get<std::string>();
    require(mode == o.mode, ErrorCode::invalid_argument,
            "features were built in " + mode + " mode, run requested " + o.mode);
  }
  return Workspace(std::move(items), std::move(fm.values), load_taxonomy(o.taxonomy), mode);
}

inline void write_run_outputs(const LabelSession& s, const fs::path& dir) {
  {
    std::ofstream out(dir / "metrics.csv", std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorCode::io_error, "cannot write metrics.csv");
    write_metrics_csv(out, s.metrics());
  }
  const auto& items = s.workspace().items;
  std::string a = "id,cluster\n";
  const auto assign = s.assignments();
  for (std::size_t i = 0; i < assign.size(); ++i) a += items[i].id + "," + std::to_string(assign[i]) + "\n";
  write_text(dir / "assignments.csv", a);
  std::string l = "id,label\n";
  for (const auto& [row, label] : s.labels()) {
    l += items[row].id + "," + s.workspace().taxonomy.label(label) + "\n";
  }
  write_text(dir / "labels.csv", l);
}

inline int cmd_run(const Options& o, std::ostream& log) {
  const auto colon = o.oracle.find(':');
  require(colon != std::string::npos, ErrorCode::invalid_argument,
          "--oracle must be simulated:FILE or serve:PORT");
  const auto kind = o.oracle.substr(0, colon);
  const auto arg = o.oracle.substr(colon + 1);
  require(kind == "simulated" || kind == "serve", ErrorCode::invalid_argument,
          "--oracle must be simulated:FILE or serve:PORT");

  SessionConfig cfg;
  cfg.mode = o.mode;
  cfg.k = o.k;
  cfg.batch_size = o.batch;
  cfg.slack = o.slack;
  cfg.iterations = o.iterations;
  cfg.proba_weight = o.weight;
  cfg.classifier = parse_classifier_kind(o.classifier);
  cfg.seed = o.seed;
  cfg.margin_reading = o.margin == "largest" ? MarginReading::largest : MarginReading::nearest;
  validate(cfg);

  std::unordered_map<std::string, std::string> transcript;
  if (kind == "simulated") {
    require_file(arg, "transcript");
    transcript = load_transcript(arg);
  }
  const auto ws = load_workspace(o);
  const auto dir = out_dir(o);
  fs::create_directories(dir);
  SessionStore store(ws, dir / "sessions");
  const auto id = store.create(cfg);
  auto& session = store.get(id);
  log << "session " << id << '\n';

  if (kind == "simulated") {
    run_simulated(session, simulated_oracle(transcript, ws));
  } else {
    int port = 0;
    try {
      port = std::stoi(arg);
    } catch (const std::exception&) {
      fail(ErrorCode::invalid_argument, "bad port '" + arg + "'");
    }
    AnnotateService service(store);
    require(service.server().bind_to_port(o.host, port), ErrorCode::io_error,
            "cannot listen on " + o.host + ":" + arg);
    log << "serving session " << id << " on http://" << o.host << ":" << port << '\n';
    std::thread watcher([&] {
      while (!session.finished() && !interrupted()) {
        std::this_thread::sleep_for(std::chrono::milliseconds(100));
      }
      service.stop();
    });
    service.listen_after_bind();
    watcher.join();
    if (!session.finished()) log << "interrupted; session state is in the journal\n";
  }
  for (const auto& w : session.warnings()) log << "warning: " << w << '\n';
  write_run_outputs(session, dir);
  log << session.iteration() << " iterations, " << session.labels().size() << " labels -> "
      << (dir / "metrics.csv").string() << '\n';
  return kOk;
}

inline int cmd_report(const Options& o, std::ostream& log) {
  const fs::path metrics = o.metrics.empty() ? out_dir(o) / "metrics.csv" : fs::path(o.metrics);
  require_file(metrics.string(), "metrics CSV");
  const auto table = load_metrics_csv(metrics);
  for (const auto& p : write_reports(table, out_dir(o))) log << "wrote " << p.string() << '\n';
  return kOk;
}

inline int run(int argc, const char* const* argv, std::ostream& log = std::cerr) {
  CLI::App app{"shotclust: semi-supervised clustering of screenshots"};
  app.require_subcommand(1);
  Options o;

  auto common_out = [&](CLI::App* c) {
    c->add_option("--out", o.out, "output directory (default $SHOTCLUST_OUT)");
    c->add_option("--seed", o.seed, "random seed");
  };

  auto* ingest = app.add_subcommand("ingest", "stratified reservoir sample of a manifest");
  ingest->add_option("--manifest", o.manifest, "input manifest (JSON Lines)")->required();
  ingest->add_option("--reservoir-k", o.reservoir_k, "items kept per bucket");
  common_out(ingest);

  auto* features = app.add_subcommand("features", "extract, standardize and reduce features");
  features->add_option("--manifest", o.manifest, "sampled manifest")->required();
  features->add_option("--mode", o.mode, "image | joint")->check(CLI::IsMember({"image", "joint"}));
  features->add_option("--embeddings", o.embeddings, "word embedding table (joint mode)");
  common_out(features);

  auto* elbow = app.add_subcommand("elbow", "SSE curve over K and elbow pick");
  elbow->add_option("--features", o.features, "feature matrix (default OUT/reduced.scfm)");
  elbow->add_option("--k-min", o.k_min, "smallest K");
  elbow->add_option("--k-max", o.k_max, "largest K");
  elbow->add_option("--k-step", o.k_step, "K increment");
  common_out(elbow);

  auto* runc = app.add_subcommand("run", "active-learning loop");
  runc->add_option("--manifest", o.manifest, "items manifest (default OUT/items.jsonl)");
  runc->add_option("--features", o.features, "feature matrix (default OUT/reduced.scfm)");
  runc->add_option("--taxonomy", o.taxonomy, "label set, one per line")->required();
  runc->add_option("--mode", o.mode, "image | joint")->check(CLI::IsMember({"image", "joint"}));
  runc->add_option("--classifier", o.classifier, "gbt | svm")->check(CLI::IsMember({"gbt", "svm"}));
  runc->add_option("--k", o.k, "clusters");
  runc->add_option("--batch", o.batch, "labels per iteration");
  runc->add_option("--slack", o.slack, "per-cluster quota slack");
  runc->add_option("--iterations", o.iterations, "iterations");
  runc->add_option("--weight", o.weight, "probability weight w");
  runc->add_option("--margin", o.margin, "nearest | largest")->check(CLI::IsMember({"nearest", "largest"}));
  runc->add_option("--oracle", o.oracle, "simulated:FILE | serve:PORT")->required();
  runc->add_option("--host", o.host, "bind address for serve mode");
  common_out(runc);

  auto* report = app.add_subcommand("report", "per-index SVG curves from a metrics CSV");
  report->add_option("--metrics", o.metrics, "metrics CSV (default OUT/metrics.csv)");
  common_out(report);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    log << "error: " << e.what() << '\n';
    return kUsageError;
  }

  try {
    if (*ingest) return cmd_ingest(o, log);
    if (*features) return cmd_features(o, log);
    if (*elbow) return cmd_elbow(o, log);
    if (*runc) return cmd_run(o, log);
    if (*report) return cmd_report(o, log);
  } catch (const Error& e) {
    log << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    log << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    log << "error: " << e.what() << '\n';
    return kComputeError;
  }
  return kUsageError;
}

}  // namespace shotclust::cli
