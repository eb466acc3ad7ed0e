#pragma once

// Text side of the feature pipeline: tokenisation, TF-IDF statistics and
// TF-IDF-weighted averages of pre-trained word embeddings.

#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "shotclust/error.hpp"
#include "shotclust/matrix.hpp"

namespace shotclust {

namespace utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

// Decodes one code point starting at `pos`, advancing it. Malformed
// sequences yield U+FFFD and consume a single byte.
inline char32_t next(std::string_view s, std::size_t& pos) {
  const auto b0 = static_cast<unsigned char>(s[pos]);
  if (b0 < 0x80) {
    ++pos;
    return b0;
  }
  int extra;
  char32_t cp;
  if ((b0 & 0xE0) == 0xC0) {
    extra = 1;
    cp = b0 & 0x1F;
  } else if ((b0 & 0xF0) == 0xE0) {
    extra = 2;
    cp = b0 & 0x0F;
  } else if ((b0 & 0xF8) == 0xF0) {
    extra = 3;
    cp = b0 & 0x07;
  } else {
    ++pos;
    return kReplacement;
  }
  if (pos + extra >= s.size()) {
    ++pos;
    return kReplacement;
  }
  for (int i = 1; i <= extra; ++i) {
    const auto b = static_cast<unsigned char>(s[pos + i]);
    if ((b & 0xC0) != 0x80) {
      ++pos;
      return kReplacement;
    }
    cp = (cp << 6) | (b & 0x3F);
  }
  static constexpr char32_t min_for_length[4] = {0, 0x80, 0x800, 0x10000};
  if (cp < min_for_length[extra] || cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) {
    ++pos;
    return kReplacement;
  }
  pos += extra + 1;
  return cp;
}

inline void append(std::string& out, char32_t cp) {
  if (cp < 0x80) {
    out.push_back(static_cast<char>(cp));
  } else if (cp < 0x800) {
    out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else if (cp < 0x10000) {
    out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  } else {
    out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
    out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
  }
}

}  // namespace utf8

inline bool is_unicode_space(char32_t c) {
  return (c >= 0x09 && c <= 0x0D) || c == 0x20 || c == 0x85 || c == 0xA0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200A) || c == 0x2028 || c == 0x2029 || c == 0x202F ||
         c == 0x205F || c == 0x3000;
}

inline bool is_punctuation(char32_t c) {
  if (c < 0x80) {
    return (c >= 0x21 && c <= 0x2F) || (c >= 0x3A && c <= 0x40) || (c >= 0x5B && c <= 0x60) ||
           (c >= 0x7B && c <= 0x7E);
  }
  switch (c) {
    case 0xA1: case 0xA7: case 0xAB: case 0xB6: case 0xB7: case 0xBB: case 0xBF:
    case 0x037E: case 0x0387: case 0x055C: case 0x055D: case 0x0589: case 0x05BE:
    case 0x060C: case 0x061B: case 0x061F: case 0x06D4:
      return true;
    default:
      break;
  }
  return (c >= 0x2010 && c <= 0x2027) || (c >= 0x2030 && c <= 0x205E) ||
         (c >= 0x3001 && c <= 0x3003) || (c >= 0x3008 && c <= 0x3011) ||
         (c >= 0x3014 && c <= 0x301F) || (c >= 0xFF01 && c <= 0xFF0F) ||
         (c >= 0xFF1A && c <= 0xFF20) || (c >= 0xFF3B && c <= 0xFF40) ||
         (c >= 0xFF5B && c <= 0xFF65) || c == 0xFFFD;
}

// Simple case folding for Latin, Greek and Cyrillic capitals.
inline char32_t to_lower(char32_t c) {
  if (c >= 'A' && c <= 'Z') return c + 0x20;
  if ((c >= 0xC0 && c <= 0xDE) && c != 0xD7) return c + 0x20;
  if (c >= 0x100 && c <= 0x17F) {
    const bool odd_upper = (c >= 0x139 && c <= 0x148) || (c >= 0x179 && c <= 0x17E);
    if (odd_upper) return (c % 2 == 1) ? c + 1 : c;
    if (c == 0x130 || c == 0x131 || c == 0x138 || c == 0x149 || c == 0x17F) return c;
    return (c % 2 == 0) ? c + 1 : c;
  }
  if (c >= 0x391 && c <= 0x3AB && c != 0x3A2) return c + 0x20;
  if (c >= 0x410 && c <= 0x42F) return c + 0x20;
  if (c >= 0x400 && c <= 0x40F) return c + 0x50;
  return c;
}

inline std::string to_lower_utf8(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t pos = 0; pos < s.size();) utf8::append(out, to_lower(utf8::next(s, pos)));
  return out;
}

// Whitespace split, punctuation stripped, lowercased, empty tokens dropped.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  auto flush = [&] {
    if (!current.empty()) tokens.push_back(std::move(current));
    current.clear();
  };
  for (std::size_t pos = 0; pos < text.size();) {
    const char32_t cp = utf8::next(text, pos);
    if (is_unicode_space(cp)) {
      flush();
    } else if (!is_punctuation(cp)) {
      utf8::append(current, to_lower(cp));
    }
  }
  flush();
  return tokens;
}

class TfidfModel {
 public:
  std::size_t corpus_size() const { return corpus_size_; }

  std::size_t df(const std::string& token) const {
    auto it = df_.find(token);
    return it == df_.end() ? 0 : it->second;
  }

  // Smoothed inverse document frequency: ln((1+N)/(1+df)) + 1.
  double idf(const std::string& token) const {
    const double n = static_cast<double>(corpus_size_);
    return std::log((1.0 + n) / (1.0 + static_cast<double>(df(token)))) + 1.0;
  }

  double weight(const std::string& token, std::size_t term_frequency) const {
    return static_cast<double>(term_frequency) * idf(token);
  }

  const std::unordered_map<std::string, std::size_t>& frequencies() const { return df_; }

  friend TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& corpus);

 private:
  std::unordered_map<std::string, std::size_t> df_;
  std::size_t corpus_size_ = 0;
};

inline TfidfModel fit_tfidf(const std::vector<std::vector<std::string>>& corpus) {
  require(!corpus.empty(), ErrorCode::invalid_argument, "TF-IDF corpus is empty");
  TfidfModel model;
  model.corpus_size_ = corpus.size();
  for (const auto& doc : corpus) {
    std::map<std::string_view, bool> distinct;
    for (const auto& token : doc) distinct.emplace(token, true);
    for (const auto& [token, _] : distinct) ++model.df_[std::string(token)];
  }
  return model;
}

class EmbeddingTable {
 public:
  explicit EmbeddingTable(Eigen::Index dimension = 0) : dimension_(dimension) {}

  Eigen::Index dimension() const { return dimension_; }
  std::size_t size() const { return index_.size(); }

  // Tokens are lowercased; the first vector for a token wins.
  bool add(std::string_view token, const Eigen::Ref<const Eigen::VectorXf>& vector) {
    if (dimension_ == 0) dimension_ = vector.size();
    require(vector.size() == dimension_, ErrorCode::invalid_argument,
            "embedding dimension mismatch for token '" + std::string(token) + "'");
    auto key = to_lower_utf8(token);
    if (index_.count(key)) return false;
    index_.emplace(std::move(key), rows_.size() / static_cast<std::size_t>(dimension_));
    rows_.insert(rows_.end(), vector.data(), vector.data() + vector.size());
    return true;
  }

  // Null when the token is out of vocabulary.
  const float* find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return nullptr;
    return rows_.data() + it->second * static_cast<std::size_t>(dimension_);
  }

 private:
  Eigen::Index dimension_;
  std::unordered_map<std::string, std::size_t> index_;
  std::vector<float> rows_;
};

// Whitespace-separated "token v1 ... vD" lines. The dimension is taken from
// the first line unless given.
inline EmbeddingTable parse_embeddings(std::istream& in, Eigen::Index dimension = 0) {
  EmbeddingTable table(dimension);
  std::string line;
  std::size_t line_no = 0;
  std::vector<float> values;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto space = line.find(' ');
    require(space != std::string::npos && space > 0, ErrorCode::parse_error,
            "embedding line " + std::to_string(line_no) + ": no vector");
    values.clear();
    const char* p = line.data() + space;
    const char* end = line.data() + line.size();
    while (p < end) {
      while (p < end && *p == ' ') ++p;
      if (p == end) break;
      float v;
      auto [next, ec] = std::from_chars(p, end, v);
      require(ec == std::errc(), ErrorCode::parse_error,
              "embedding line " + std::to_string(line_no) + ": bad number");
      values.push_back(v);
      p = next;
    }
    const auto expected = table.dimension() == 0 ? static_cast<Eigen::Index>(values.size())
                                                 : table.dimension();
    require(static_cast<Eigen::Index>(values.size()) == expected && expected > 0,
            ErrorCode::parse_error,
            "embedding line " + std::to_string(line_no) + ": expected " +
                std::to_string(expected) + " values, got " + std::to_string(values.size()));
    table.add(std::string_view(line.data(), space),
              Eigen::Map<const Eigen::VectorXf>(values.data(), expected));
  }
  return table;
}

inline EmbeddingTable load_embeddings(const std::filesystem::path& path,
                                      Eigen::Index dimension = 0) {
  std::ifstream in(path);
  require(static_cast<bool>(in), ErrorCode::io_error, "cannot open embeddings " + path.string());
  return parse_embeddings(in, dimension);
}

// sum_t w(t) v(t) / sum_t w(t) over distinct tokens with w = tf * idf.
// Unknown tokens contribute a zero vector but keep their weight in the
// denominator. Summation runs in token order so the result does not depend
// on the order of the input tokens.
inline Vector embed_document(const std::vector<std::string>& tokens, const EmbeddingTable& table,
                             const TfidfModel& tfidf) {
  Vector out = Vector::Zero(table.dimension());
  std::map<std::string_view, std::size_t> counts;
  for (const auto& t : tokens) ++counts[t];
  double total_weight = 0.0;
  for (const auto& [token, tf] : counts) {
    const std::string key(token);
    const double w = tfidf.weight(key, tf);
    total_weight += w;
    if (const float* v = table.find(key)) {
      for (Eigen::Index d = 0; d < out.size(); ++d) out[d] += w * static_cast<double>(v[d]);
    }
  }
  if (total_weight > 0.0) out /= total_weight;
  return out;
}

}  // namespace shotclust
