#pragma once

// Durable labelling sessions on top of ActiveLoop.
//
// Every session lives in its own directory with an append-only
// journal.jsonl. Label records are inputs; every other record is an output
// of the deterministic loop and carries a digest of its payload. Reopening
// a session re-runs the loop from the journal, feeding the recorded labels
// back in and checking each recomputed output against its digest.

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cmath>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"
#include "shotclust/corpus.hpp"
#include "shotclust/error.hpp"
#include "shotclust/hash.hpp"
#include "shotclust/propagate.hpp"

namespace shotclust {

using nlohmann::json;

struct SessionConfig {
  std::string mode = "image";  // image | joint
  std::size_t k = 190;
  std::size_t batch_size = 200;
  std::size_t slack = 1;
  std::size_t iterations = 10;
  double proba_weight = 10.0;
  ClassifierKind classifier = ClassifierKind::gbt;
  std::uint64_t seed = 0;
  MarginReading margin_reading = MarginReading::nearest;
};

inline json to_json(const SessionConfig& c) {
  return json{{"mode", c.mode},
              {"k", c.k},
              {"batch_size", c.batch_size},
              {"slack", c.slack},
              {"iterations", c.iterations},
              {"proba_weight", c.proba_weight},
              {"classifier", std::string(to_string(c.classifier))},
              {"seed", c.seed},
              {"margin", c.margin_reading == MarginReading::nearest ? "nearest" : "largest"}};
}

inline void validate(const SessionConfig& c) {
  require(c.mode == "image" || c.mode == "joint", ErrorCode::invalid_argument,
          "mode must be image or joint, got '" + c.mode + "'");
  require(c.k >= 2, ErrorCode::invalid_argument, "K must be >= 2");
  require(c.batch_size >= 1, ErrorCode::invalid_argument, "batch size must be >= 1");
  require(c.proba_weight > 0.0 && std::isfinite(c.proba_weight), ErrorCode::invalid_argument,
          "probability weight must be positive");
}

// Missing keys keep their defaults; unknown keys are rejected.
inline SessionConfig session_config_from_json(const json& j) {
  require(j.is_object(), ErrorCode::invalid_argument, "session config must be a JSON object");
  SessionConfig c;
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "mode") c.mode = value.get<std::string>();
      else if (key == "k") c.k = value.get<std::size_t>();
      else if (key == "batch_size") c.batch_size = value.get<std::size_t>();
      else if (key == "slack") c.slack = value.get<std::size_t>();
      else if (key == "iterations") c.iterations = value.get<std::size_t>();
      else if (key == "proba_weight") c.proba_weight = value.get<double>();
      else if (key == "classifier") c.classifier = parse_classifier_kind(value.get<std::string>());
      else if (key == "seed") c.seed = value.get<std::uint64_t>();
      else if (key == "margin") {
        const auto m = value.get<std::string>();
        require(m == "nearest" || m == "largest", ErrorCode::invalid_argument,
                "margin must be nearest or largest");
        c.margin_reading = m == "nearest" ? MarginReading::nearest : MarginReading::largest;
      } else {
        fail(ErrorCode::invalid_argument, "unknown config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    fail(ErrorCode::invalid_argument, std::string("bad config value: ") + e.what());
  }
  validate(c);
  return c;
}

inline std::string config_digest(const SessionConfig& c) { return hex_digest(to_json(c).dump()); }

// Items, their feature rows and the label set shared by all sessions.
struct Workspace {
  Dataset items;
  Matrix features;
  Taxonomy taxonomy;
  std::string mode = "image";
  std::unordered_map<std::string, std::size_t> row_of;

  Workspace(Dataset items_, Matrix features_, Taxonomy taxonomy_, std::string mode_ = "image")
      : items(std::move(items_)),
        features(std::move(features_)),
        taxonomy(std::move(taxonomy_)),
        mode(std::move(mode_)) {
    require(static_cast<Eigen::Index>(items.size()) == features.rows(), ErrorCode::invalid_argument,
            "item count (" + std::to_string(items.size()) + ") does not match feature rows (" +
                std::to_string(features.rows()) + ")");
    for (std::size_t i = 0; i < items.size(); ++i) {
      require(row_of.emplace(items[i].id, i).second, ErrorCode::duplicate,
              "duplicate item id \"" + items[i].id + "\"");
    }
  }

  std::size_t row(const std::string& item_id) const {
    auto it = row_of.find(item_id);
    require(it != row_of.end(), ErrorCode::not_found, "unknown item \"" + item_id + "\"");
    return it->second;
  }
};

inline LoopConfig loop_config(const SessionConfig& c, std::size_t num_classes) {
  LoopConfig l;
  l.k = c.k;
  l.batch = {c.batch_size, c.slack};
  l.iterations = c.iterations;
  l.num_classes = num_classes;
  l.classifier.kind = c.classifier;
  l.propagation.proba_weight = c.proba_weight;
  l.seed = c.seed;
  l.margin_reading = c.margin_reading;
  return l;
}

inline json to_json(const IndexTriple& t) {
  auto value = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return json{{"silhouette", value(t.silhouette)},
              {"dunn", value(t.dunn)},
              {"davies_bouldin", value(t.davies_bouldin)}};
}

inline json to_json(const MetricsRow& r) {
  return json{{"iteration", r.iteration},
              {"labels_seen", r.labels_seen},
              {"orig", to_json(r.orig)},
              {"aug", to_json(r.aug)}};
}

inline std::string utc_now() {
  const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

struct JournalRecord {
  std::size_t seq = 0;
  std::size_t iteration = 0;
  std::string step;
  json payload;
  std::string digest;
};

inline json to_json(const JournalRecord& r) {
  return json{{"seq", r.seq},
              {"iteration", r.iteration},
              {"step", r.step},
              {"digest", r.digest},
              {"payload", r.payload}};
}

// Append-only line-delimited log. A torn final line (crash mid-write) is
// dropped on open; damage anywhere else is a parse error.
class Journal {
 public:
  explicit Journal(std::filesystem::path path) : path_(std::move(path)) {
    std::vector<std::string> lines;
    bool torn = false;
    if (std::filesystem::exists(path_)) {
      std::ifstream in(path_, std::ios::binary);
      require(static_cast<bool>(in), ErrorCode::io_error, "cannot read " + path_.string());
      std::stringstream ss;
      ss << in.rdbuf();
      const std::string all = ss.str();
      std::size_t start = 0;
      while (start < all.size()) {
        const auto end = all.find('\n', start);
        if (end == std::string::npos) {
          torn = true;
          break;
        }
        lines.push_back(all.substr(start, end - start));
        start = end + 1;
      }
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
      if (lines[i].empty()) continue;
      try {
        const auto j = json::parse(lines[i]);
        JournalRecord r;
        r.seq = j.at("seq").get<std::size_t>();
        r.iteration = j.at("iteration").get<std::size_t>();
        r.step = j.at("step").get<std::string>();
        r.digest = j.at("digest").get<std::string>();
        r.payload = j.at("payload");
        require(r.seq == records_.size(), ErrorCode::parse_error, "sequence gap");
        require(r.digest == hex_digest(r.payload.dump()), ErrorCode::parse_error,
                "payload digest mismatch");
        records_.push_back(std::move(r));
      } catch (const std::exception& e) {
        fail(ErrorCode::parse_error,
             path_.string() + ":" + std::to_string(i + 1) + ": bad journal record: " + e.what());
      }
    }
    if (torn) rewrite();
    fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND | O_CLOEXEC, 0644);
    require(fd_ >= 0, ErrorCode::io_error,
            "cannot open " + path_.string() + ": " + std::strerror(errno));
  }

  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;
  ~Journal() {
    if (fd_ >= 0) ::close(fd_);
  }

  const std::vector<JournalRecord>& records() const { return records_; }
  const std::filesystem::path& path() const { return path_; }

  const JournalRecord& append(std::size_t iteration, std::string step, json payload) {
    JournalRecord r;
    r.seq = records_.size();
    r.iteration = iteration;
    r.step = std::move(step);
    r.digest = hex_digest(payload.dump());
    r.payload = std::move(payload);
    const std::string line = to_json(r).dump() + "\n";
    std::size_t written = 0;
    while (written < line.size()) {
      const auto n = ::write(fd_, line.data() + written, line.size() - written);
      if (n < 0 && errno == EINTR) continue;
      require(n > 0, ErrorCode::io_error,
              "cannot append to " + path_.string() + ": " + std::strerror(errno));
      written += static_cast<std::size_t>(n);
    }
    records_.push_back(std::move(r));
    return records_.back();
  }

  void sync() {
    require(::fsync(fd_) == 0, ErrorCode::io_error,
            "fsync failed on " + path_.string() + ": " + std::strerror(errno));
  }

 private:
  void rewrite() {
    const auto tmp = path_.string() + ".tmp";
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      for (const auto& r : records_) out << to_json(r).dump() << '\n';
      require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + tmp);
    }
    std::filesystem::rename(tmp, path_);
  }

  std::filesystem::path path_;
  std::vector<JournalRecord> records_;
  int fd_ = -1;
};

struct LabelRecord {
  std::string item_id;
  std::size_t label_id = 0;
  std::string annotator;
  std::string at;  // filled with the current UTC time when empty
};

struct SubmitAck {
  std::size_t accepted = 0;
  std::size_t remaining = 0;  // labels still missing from the current batch
  std::size_t iteration = 0;  // completed iterations after this submission
  bool finished = false;
};

struct BatchView {
  std::size_t iteration = 0;  // 1-based number of the iteration being labelled
  std::size_t batch_size = 0;
  std::size_t labeled = 0;
  std::vector<std::size_t> awaiting;  // rows, selection order
};

class LabelSession {
 public:
  // Opens the session in `dir`, creating it with `config` when the journal
  // is empty and replaying it otherwise.
  LabelSession(std::string id, const Workspace& ws, const std::filesystem::path& dir,
               const std::optional<SessionConfig>& config = std::nullopt)
      : id_(std::move(id)), ws_(ws), dir_(dir) {
    std::filesystem::create_directories(dir_);
    journal_ = std::make_unique<Journal>(dir_ / "journal.jsonl");
    const auto& existing = journal_->records();
    if (existing.empty()) {
      require(config.has_value(), ErrorCode::not_found, "session " + id_ + " has no journal");
      cfg_ = *config;
      validate(cfg_);
      check_workspace();
      journal_->append(0, "create", json{{"config", to_json(cfg_)}, {"digest", config_digest(cfg_)}});
      journal_->sync();
      cursor_ = 1;
    } else {
      const auto& first = existing.front();
      require(first.step == "create", ErrorCode::parse_error,
              "journal of session " + id_ + " does not start with create");
      cfg_ = session_config_from_json(first.payload.at("config"));
      if (config) {
        require(config_digest(*config) == config_digest(cfg_), ErrorCode::conflict,
                "session " + id_ + " exists with a different config");
      }
      check_workspace();
      cursor_ = 1;
    }
    loop_ = std::make_unique<ActiveLoop>(ws_.features, loop_config(cfg_, ws_.taxonomy.size()));
    record(0, "baseline", to_json(loop_->start()));
    advance();
    replay();
  }

  const std::string& id() const { return id_; }
  const SessionConfig& config() const { return cfg_; }
  const std::filesystem::path& directory() const { return dir_; }
  const Workspace& workspace() const { return ws_; }

  bool finished() const {
    std::shared_lock lock(mutex_);
    return loop_->pending().empty();
  }

  BatchView batch() const {
    std::shared_lock lock(mutex_);
    require(!loop_->pending().empty(), ErrorCode::conflict,
            "session " + id_ + " has no pending batch");
    BatchView v;
    v.iteration = loop_->iteration() + 1;
    v.batch_size = loop_->pending().size();
    v.labeled = received_.size();
    for (auto row : loop_->pending()) {
      if (!received_.count(row)) v.awaiting.push_back(row);
    }
    return v;
  }

  json batch_json() const {
    const auto v = batch();
    json items = json::array();
    for (auto row : v.awaiting) {
      const auto& item = ws_.items[row];
      items.push_back({{"id", item.id},
                       {"image", "/sessions/" + id_ + "/items/" + item.id + "/image"},
                       {"text", item.text}});
    }
    return json{{"session_id", id_},
                {"iteration", v.iteration},
                {"batch_size", v.batch_size},
                {"labeled", v.labeled},
                {"pending", v.awaiting.size()},
                {"items", std::move(items)},
                {"taxonomy", ws_.taxonomy.labels()}};
  }

  // All-or-nothing: any invalid record rejects the whole submission.
  SubmitAck submit(std::vector<LabelRecord> records) {
    std::unique_lock lock(mutex_);
    require(!records.empty(), ErrorCode::invalid_argument, "no label records");
    require(!loop_->pending().empty(), ErrorCode::conflict,
            "session " + id_ + " has no pending batch");
    std::unordered_set<std::size_t> seen;
    std::vector<std::size_t> rows;
    for (auto& r : records) {
      const auto row = checked_row(r.item_id);
      require(r.label_id < ws_.taxonomy.size(), ErrorCode::out_of_range,
              "label_id " + std::to_string(r.label_id) + " outside [0, " +
                  std::to_string(ws_.taxonomy.size()) + ")");
      require(!received_.count(row) && seen.insert(row).second, ErrorCode::duplicate,
              "item \"" + r.item_id + "\" already labelled");
      if (r.at.empty()) r.at = utc_now();
      rows.push_back(row);
    }
    for (std::size_t i = 0; i < records.size(); ++i) {
      journal_->append(loop_->iteration() + 1, "label",
                       json{{"item_id", records[i].item_id},
                            {"label_id", records[i].label_id},
                            {"annotator", records[i].annotator},
                            {"at", records[i].at}});
      ++cursor_;
    }
    journal_->sync();
    const auto before = loop_->iteration();
    for (std::size_t i = 0; i < records.size(); ++i) accept(rows[i], records[i].label_id);

    SubmitAck ack;
    ack.accepted = records.size();
    ack.remaining = loop_->iteration() != before ? 0 : loop_->pending().size() - received_.size();
    ack.iteration = loop_->iteration();
    ack.finished = loop_->pending().empty();
    return ack;
  }

  std::vector<MetricsRow> metrics() const {
    std::shared_lock lock(mutex_);
    return loop_->metrics();
  }

  json metrics_json() const {
    json rows = json::array();
    for (const auto& r : metrics()) rows.push_back(to_json(r));
    return json{{"session_id", id_}, {"rows", std::move(rows)}};
  }

  std::vector<std::size_t> assignments() const {
    std::shared_lock lock(mutex_);
    return loop_->clustering().assignments;
  }

  std::map<std::size_t, std::size_t> labels() const {
    std::shared_lock lock(mutex_);
    return loop_->labels();
  }

  std::size_t iteration() const {
    std::shared_lock lock(mutex_);
    return loop_->iteration();
  }

  std::vector<std::string> warnings() const {
    std::shared_lock lock(mutex_);
    return loop_->warnings();
  }

 private:
  void check_workspace() const {
    require(cfg_.mode == ws_.mode, ErrorCode::invalid_argument,
            "session mode '" + cfg_.mode + "' but the features were built in '" + ws_.mode +
                "' mode");
    require(cfg_.k <= static_cast<std::size_t>(ws_.features.rows()), ErrorCode::invalid_argument,
            "K exceeds the number of items");
  }

  std::size_t checked_row(const std::string& item_id) const {
    auto it = ws_.row_of.find(item_id);
    require(it != ws_.row_of.end(), ErrorCode::not_found, "unknown item \"" + item_id + "\"");
    const auto& pending = loop_->pending();
    require(std::find(pending.begin(), pending.end(), it->second) != pending.end(),
            ErrorCode::conflict, "item \"" + item_id + "\" is not in the pending batch");
    return it->second;
  }

  // Output record: verified against the journal while replaying, appended
  // afterwards.
  void record(std::size_t iteration, const std::string& step, json payload) {
    const auto& rs = journal_->records();
    if (cursor_ < rs.size()) {
      const auto& r = rs[cursor_];
      require(r.step == step && r.digest == hex_digest(payload.dump()), ErrorCode::conflict,
              "session " + id_ + ": replay diverged from the journal at record " +
                  std::to_string(r.seq) + " (" + r.step + ")");
      ++cursor_;
      return;
    }
    journal_->append(iteration, step, std::move(payload));
    ++cursor_;
  }

  void advance() {
    const auto& batch = loop_->prepare_batch();
    if (batch.empty()) {
      record(loop_->iteration(), "complete", json{{"iterations", loop_->iteration()}});
      return;
    }
    json ids = json::array();
    for (auto row : batch) ids.push_back(ws_.items[row].id);
    record(loop_->iteration() + 1, "batch", json{{"items", std::move(ids)}});
  }

  void accept(std::size_t row, std::size_t label) {
    received_.emplace(row, label);
    if (received_.size() < loop_->pending().size()) return;
    std::vector<std::size_t> labels;
    for (auto r : loop_->pending()) labels.push_back(received_.at(r));
    received_.clear();
    const auto& row_metrics = loop_->complete_iteration(labels);
    record(loop_->iteration(), "iteration",
           json{{"metrics", to_json(row_metrics)},
                {"assignments", hex_digest(json(loop_->clustering().assignments).dump())}});
    advance();
  }

  void replay() {
    const auto& rs = journal_->records();
    while (cursor_ < rs.size()) {
      const auto& r = rs[cursor_];
      require(r.step == "label", ErrorCode::conflict,
              "session " + id_ + ": unexpected " + r.step + " record at " + std::to_string(r.seq));
      const auto item = r.payload.at("item_id").get<std::string>();
      const auto label = r.payload.at("label_id").get<std::size_t>();
      const auto row = checked_row(item);
      require(label < ws_.taxonomy.size() && !received_.count(row), ErrorCode::conflict,
              "session " + id_ + ": invalid label record at " + std::to_string(r.seq));
      ++cursor_;
      accept(row, label);
    }
  }

  std::string id_;
  const Workspace& ws_;
  std::filesystem::path dir_;
  SessionConfig cfg_;
  std::unique_ptr<Journal> journal_;
  std::unique_ptr<ActiveLoop> loop_;
  std::size_t cursor_ = 0;
  std::map<std::size_t, std::size_t> received_;  // labels for the current batch
  mutable std::shared_mutex mutex_;
};

// Registry of sessions under one root directory.
class SessionStore {
 public:
  SessionStore(const Workspace& ws, std::filesystem::path root) : ws_(ws), root_(std::move(root)) {
    std::filesystem::create_directories(root_);
  }

  const Workspace& workspace() const { return ws_; }

  std::string create(const SessionConfig& cfg) {
    validate(cfg);
    std::lock_guard lock(mutex_);
    std::size_t counter = 0;
    for (const auto& entry : std::filesystem::directory_iterator(root_)) {
      const auto name = entry.path().filename().string();
      if (name.size() > 1 && name[0] == 's') {
        try {
          counter = std::max<std::size_t>(counter, std::stoul(name.substr(1, 6)));
        } catch (const std::exception&) {
        }
      }
    }
    char prefix[16];
    std::snprintf(prefix, sizeof prefix, "s%06zu-", counter + 1);
    const std::string id = prefix + config_digest(cfg).substr(0, 8);
    auto session = std::make_unique<LabelSession>(id, ws_, root_ / id, cfg);
    return sessions_.emplace(id, std::move(session)).first->first;
  }

  // Reopens sessions from disk on first access.
  LabelSession& get(const std::string& id) {
    std::lock_guard lock(mutex_);
    if (auto it = sessions_.find(id); it != sessions_.end()) return *it->second;
    const auto dir = root_ / id;
    require(!id.empty() && id.find('/') == std::string::npos && id.find("..") == std::string::npos &&
                std::filesystem::exists(dir / "journal.jsonl"),
            ErrorCode::not_found, "unknown session \"" + id + "\"");
    auto session = std::make_unique<LabelSession>(id, ws_, dir);
    return *sessions_.emplace(id, std::move(session)).first->second;
  }

 private:
  const Workspace& ws_;
  std::filesystem::path root_;
  std::map<std::string, std::unique_ptr<LabelSession>> sessions_;
  std::mutex mutex_;
};

// id -> label name, from a two-column CSV. A header row starting with "id"
// or "item_id" is skipped.
inline std::unordered_map<std::string, std::string> parse_transcript(std::istream& in) {
  std::unordered_map<std::string, std::string> out;
  std::string line;
  std::size_t line_no = 0;
  auto trim = [](std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
  };
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    require(comma != std::string::npos, ErrorCode::parse_error,
            "transcript line " + std::to_string(line_no) + ": expected id,label");
    const auto id = trim(line.substr(0, comma));
    const auto label = trim(line.substr(comma + 1));
    if (line_no == 1 && (id == "id" || id == "item_id")) continue;
    require(!id.empty() && !label.empty(), ErrorCode::parse_error,
            "transcript line " + std::to_string(line_no) + ": empty field");
    require(out.emplace(id, label).second, ErrorCode::duplicate,
            "transcript line " + std::to_string(line_no) + ": duplicate id \"" + id + "\"");
  }
  return out;
}

inline std::unordered_map<std::string, std::string> load_transcript(const std::filesystem::path& p) {
  std::ifstream in(p);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open transcript " + p.string());
  return parse_transcript(in);
}

// Oracle over feature rows answering from the transcript.
inline Oracle simulated_oracle(const std::unordered_map<std::string, std::string>& transcript,
                               const Workspace& ws) {
  return [&transcript, &ws](const std::vector<std::size_t>& rows) {
    std::vector<std::size_t> out;
    out.reserve(rows.size());
    for (auto row : rows) {
      const auto& id = ws.items.at(row).id;
      auto it = transcript.find(id);
      require(it != transcript.end(), ErrorCode::not_found,
              "transcript has no label for item \"" + id + "\"");
      out.push_back(ws.taxonomy.id(it->second));
    }
    return out;
  };
}

// Answers every batch of `session` until it completes.
inline void run_simulated(LabelSession& session, const Oracle& oracle,
                          const std::string& annotator = "simulated") {
  while (!session.finished()) {
    const auto view = session.batch();
    const auto labels = oracle(view.awaiting);
    std::vector<LabelRecord> records;
    records.reserve(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i) {
      records.push_back({session.workspace().items[view.awaiting[i]].id, labels[i], annotator, ""});
    }
    session.submit(std::move(records));
  }
}

}  // namespace shotclust
