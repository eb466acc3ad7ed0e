#pragma once

// Dataset-level feature extraction: images to HOG, text to TF-IDF weighted
// embeddings, optional fusion, column standardisation and PCA.

#include <optional>
#include <string>
#include <vector>

#include "shotclust/corpus.hpp"
#include "shotclust/error.hpp"
#include "shotclust/features.hpp"
#include "shotclust/hog.hpp"
#include "shotclust/image.hpp"
#include "shotclust/matrix.hpp"
#include "shotclust/reduce.hpp"
#include "shotclust/text.hpp"

namespace shotclust {

enum class FeatureMode { image, joint };

inline FeatureMode parse_feature_mode(std::string_view s) {
  if (s == "image") return FeatureMode::image;
  if (s == "joint") return FeatureMode::joint;
  fail(ErrorCode::invalid_argument, "mode must be image or joint, got '" + std::string(s) + "'");
}

inline std::string_view to_string(FeatureMode m) { return m == FeatureMode::image ? "image" : "joint"; }

struct FeaturizeConfig {
  FeatureMode mode = FeatureMode::image;
  PreprocessConfig preprocess;
  HogConfig hog;
  Eigen::Index max_components = 1000;
  double marginal_epsilon = 0.001;
  RsvdOptions rsvd;
};

struct Reject {
  std::string id;
  std::string reason;
};

struct RawFeatures {
  Dataset items;  // accepted items, row order of `matrix`
  std::vector<Reject> rejects;
  FeatureMatrix matrix;  // hog or joint stage
  Eigen::Index visual_dim = 0;
};

// Items whose image cannot be decoded are rejected, not fatal.
inline RawFeatures extract_features(const Dataset& items, const FeaturizeConfig& cfg,
                                    const EmbeddingTable* embeddings = nullptr) {
  require(cfg.mode == FeatureMode::image || embeddings != nullptr, ErrorCode::invalid_argument,
          "joint mode needs an embedding table");
  RawFeatures out;
  std::vector<Vector> visual;
  for (const auto& item : items) {
    try {
      visual.push_back(hog(preprocess_image(load_image(item.image_path), cfg.preprocess), cfg.hog));
      out.items.push_back(item);
    } catch (const Error& e) {
      out.rejects.push_back({item.id, e.what()});
    }
  }
  const auto n = static_cast<Eigen::Index>(out.items.size());
  out.visual_dim = visual.empty() ? 0 : visual.front().size();

  if (cfg.mode == FeatureMode::image) {
    out.matrix.stage = Stage::hog;
    out.matrix.values.resize(n, out.visual_dim);
    for (Eigen::Index r = 0; r < n; ++r) out.matrix.values.row(r) = visual[static_cast<std::size_t>(r)];
    return out;
  }

  std::vector<std::vector<std::string>> docs;
  docs.reserve(out.items.size());
  for (const auto& item : out.items) docs.push_back(tokenize(item.text));
  const auto text_dim = embeddings->dimension();
  out.matrix.stage = Stage::joint;
  out.matrix.values.resize(n, out.visual_dim + text_dim);
  if (n == 0) return out;
  const auto tfidf = fit_tfidf(docs);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto i = static_cast<std::size_t>(r);
    out.matrix.values.row(r) =
        fuse(visual[i], embed_document(docs[i], *embeddings, tfidf), out.visual_dim, text_dim);
  }
  return out;
}

struct ReducedFeatures {
  Standardizer standardizer;
  PcaModel pca;
  Eigen::Index kept = 0;
  FeatureMatrix reduced;
};

inline ReducedFeatures reduce_features(const FeatureMatrix& raw, const FeaturizeConfig& cfg) {
  ReducedFeatures out;
  auto st = standardize(raw);
  out.standardizer = std::move(st.stats);
  out.pca = fit_pca(st.matrix.values, cfg.max_components, cfg.rsvd);
  out.kept = select_components(out.pca.explained_variance_ratio, cfg.marginal_epsilon);
  out.reduced = project(st.matrix.values, out.pca, out.kept);
  return out;
}

}  // namespace shotclust
