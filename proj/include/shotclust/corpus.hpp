#pragma once

// Dataset model: manifest ingestion, reservoir and stratified sampling,
// taxonomy loading.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ranges>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "json.hpp"

#include "shotclust/error.hpp"
#include "shotclust/hash.hpp"
#include "shotclust/random.hpp"

namespace shotclust {

struct Item {
  std::string id;
  std::filesystem::path image_path;
  std::string text;
  std::string bucket;
  std::optional<std::string> timestamp;

  friend bool operator==(const Item&, const Item&) = default;
};

using Dataset = std::vector<Item>;

// One JSON object per line. Blank lines are skipped; line numbers in
// errors are 1-based.
inline Dataset parse_manifest(std::istream& in) {
  Dataset items;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    const std::string where = "manifest line " + std::to_string(line_no);
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      fail(ErrorCode::parse_error, where + ": " + e.what());
    }
    require(record.is_object(), ErrorCode::parse_error, where + ": expected an object");
    auto required_string = [&](const char* key) -> std::string {
      auto it = record.find(key);
      require(it != record.end() && it->is_string(), ErrorCode::parse_error,
              where + ": missing or non-string field '" + key + "'");
      return it->get<std::string>();
    };
    auto optional_string = [&](const char* key) -> std::optional<std::string> {
      auto it = record.find(key);
      if (it == record.end() || it->is_null()) return std::nullopt;
      require(it->is_string(), ErrorCode::parse_error,
              where + ": field '" + key + "' must be a string");
      return it->get<std::string>();
    };
    Item item;
    item.id = required_string("id");
    item.image_path = required_string("image_path");
    item.bucket = required_string("bucket");
    item.text = optional_string("text").value_or("");
    item.timestamp = optional_string("timestamp");
    require(seen.insert(item.id).second, ErrorCode::duplicate,
            where + ": duplicate id \"" + item.id + "\"");
    items.push_back(std::move(item));
  }
  return items;
}

// Relative image paths are resolved against the manifest's directory.
inline Dataset load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open manifest " + path.string());
  auto items = parse_manifest(in);
  const auto base = std::filesystem::absolute(path).parent_path();
  for (auto& item : items) {
    if (item.image_path.is_relative()) item.image_path = (base / item.image_path).lexically_normal();
  }
  return items;
}

inline nlohmann::json to_json(const Item& item) {
  nlohmann::json j = {{"id", item.id},
                      {"image_path", item.image_path.string()},
                      {"text", item.text},
                      {"bucket", item.bucket}};
  if (item.timestamp) j["timestamp"] = *item.timestamp;
  return j;
}

inline void write_manifest(std::ostream& out, const Dataset& items) {
  for (const auto& item : items) out << to_json(item).dump() << '\n';
}

inline void save_manifest(const std::filesystem::path& path, const Dataset& items) {
  std::ofstream out(path);
  require(static_cast<bool>(out), ErrorCode::io_error, "cannot write " + path.string());
  write_manifest(out, items);
}

struct SampleSpec {
  std::size_t reservoir_k = 500;
  std::uint64_t rng_seed = 0;
};

inline void validate(const SampleSpec& spec) {
  require(spec.reservoir_k >= 1, ErrorCode::invalid_argument, "reservoir_k must be >= 1");
}

// Single-pass Algorithm R over any input range. Streams shorter than k are
// returned unchanged.
template <std::ranges::input_range Stream>
auto reservoir_sample(Stream&& stream, const SampleSpec& spec, Rng& rng)
    -> std::vector<std::ranges::range_value_t<Stream>> {
  validate(spec);
  std::vector<std::ranges::range_value_t<Stream>> reservoir;
  std::uint64_t seen = 0;
  for (auto&& element : stream) {
    if (seen < spec.reservoir_k) {
      reservoir.push_back(element);
    } else {
      const auto slot = rng.below(seen + 1);
      if (slot < spec.reservoir_k) reservoir[slot] = element;
    }
    ++seen;
  }
  return reservoir;
}

template <std::ranges::input_range Stream>
auto reservoir_sample(Stream&& stream, const SampleSpec& spec) {
  Rng rng(spec.rng_seed);
  return reservoir_sample(std::forward<Stream>(stream), spec, rng);
}

// Each bucket gets its own stream derived from (seed, bucket name), so the
// result for one bucket does not depend on which other buckets exist.
template <typename T>
std::vector<T> stratified_sample(const std::map<std::string, std::vector<T>>& buckets,
                                 const SampleSpec& spec) {
  validate(spec);
  std::vector<T> out;
  for (const auto& [name, stream] : buckets) {
    Rng rng(fnv1a(name, spec.rng_seed ^ 0x5bd1e995ULL));
    auto picked = reservoir_sample(stream, spec, rng);
    out.insert(out.end(), std::make_move_iterator(picked.begin()),
               std::make_move_iterator(picked.end()));
  }
  return out;
}

inline std::map<std::string, Dataset> group_by_bucket(const Dataset& items) {
  std::map<std::string, Dataset> buckets;
  for (const auto& item : items) buckets[item.bucket].push_back(item);
  return buckets;
}

class Taxonomy {
 public:
  Taxonomy() = default;

  explicit Taxonomy(std::vector<std::string> labels) : labels_(std::move(labels)) {
    require(!labels_.empty(), ErrorCode::invalid_argument, "taxonomy is empty");
    for (std::size_t i = 0; i < labels_.size(); ++i) {
      require(index_.emplace(labels_[i], i).second, ErrorCode::duplicate,
              "duplicate taxonomy label \"" + labels_[i] + "\"");
    }
  }

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }

  const std::string& label(std::size_t id) const {
    require(id < labels_.size(), ErrorCode::out_of_range,
            "label id " + std::to_string(id) + " outside [0, " +
                std::to_string(labels_.size()) + ")");
    return labels_[id];
  }

  std::optional<std::size_t> find(const std::string& label) const {
    auto it = index_.find(label);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t id(const std::string& label) const {
    auto found = find(label);
    require(found.has_value(), ErrorCode::not_found, "unknown label \"" + label + "\"");
    return *found;
  }

 private:
  std::vector<std::string> labels_;
  std::unordered_map<std::string, std::size_t> index_;
};

inline Taxonomy parse_taxonomy(std::istream& in) {
  std::vector<std::string> labels;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto last = line.find_last_not_of(" \t");
    labels.push_back(line.substr(first, last - first + 1));
  }
  return Taxonomy(std::move(labels));
}

inline Taxonomy load_taxonomy(const std::filesystem::path& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open taxonomy " + path.string());
  return parse_taxonomy(in);
}

}  // namespace shotclust
