#pragma once

#include <cstdio>
#include <memory>
#include <sstream>
#include <unordered_map>

#include "shotclust/session.hpp"
#include "support.hpp"

namespace testing_support {

// Synthetic workspace: item i is "it<i>", its label is "class<label>".
struct Fixture {
  std::unique_ptr<shotclust::Workspace> ws;
  std::vector<std::size_t> truth;
  std::unordered_map<std::string, std::string> transcript;
};

inline std::string item_id(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "it%04zu", i);
  return buf;
}

inline Fixture make_fixture(const Blobs& blobs, std::size_t taxonomy_size,
                            const fs::path& image_dir = {}) {
  Fixture f;
  shotclust::Dataset items;
  for (std::size_t i = 0; i < blobs.labels.size(); ++i) {
    shotclust::Item item;
    item.id = item_id(i);
    item.image_path = image_dir.empty() ? fs::path("none.png") : image_dir / (item.id + ".pgm");
    item.text = "caption " + std::to_string(i);
    item.bucket = "b";
    items.push_back(item);
    f.transcript[item.id] = "class" + std::to_string(blobs.labels[i]);
  }
  std::vector<std::string> labels;
  for (std::size_t c = 0; c < taxonomy_size; ++c) labels.push_back("class" + std::to_string(c));
  f.truth = blobs.labels;
  f.ws = std::make_unique<shotclust::Workspace>(std::move(items), blobs.points,
                                                shotclust::Taxonomy(std::move(labels)));
  return f;
}

inline shotclust::SessionConfig small_session(std::size_t k, std::size_t batch, std::size_t iterations) {
  shotclust::SessionConfig c;
  c.k = k;
  c.batch_size = batch;
  c.iterations = iterations;
  c.seed = 7;
  return c;
}

}  // namespace testing_support
