// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "sparsekit/error.hpp"
#include "sparsekit/sparse_vector.hpp"

namespace sparsekit {

/// A tokenized text: sequence of vocabulary indices.
struct TokenizedText {
  std::vector<TokenId> ids;

  std::size_t size() const noexcept { return ids.size(); }
  bool empty() const noexcept { return ids.empty(); }
  friend bool operator==(const TokenizedText&, const TokenizedText&) = default;
};

/// Closed vocabulary with dense ids in [0, size) and inverse mappings.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Token at position i receives id i. Tokens must be unique and nonempty.
  explicit Vocabulary(std::vector<std::string> tokens)
      : id_to_token_(std::move(tokens)) {
    token_to_id_.reserve(id_to_token_.size());
    for (std::size_t i = 0; i < id_to_token_.size(); ++i) {
      if (id_to_token_[i].empty()) {
        throw input_error("vocabulary tokens must be nonempty");
      }
      auto [it, inserted] =
          token_to_id_.emplace(id_to_token_[i], static_cast<TokenId>(i));
      if (!inserted) {
        throw input_error("duplicate vocabulary token '" + id_to_token_[i] + "'");
      }
    }
  }

  std::size_t size() const noexcept { return id_to_token_.size(); }

  std::optional<TokenId> id_of(std::string_view token) const {
    auto it = token_to_id_.find(std::string(token));
    if (it == token_to_id_.end()) return std::nullopt;
    return it->second;
  }

  const std::string& token_of(TokenId id) const { return id_to_token_[id]; }
  std::span<const std::string> tokens() const noexcept { return id_to_token_; }

 private:
  std::vector<std::string> id_to_token_;
  std::unordered_map<std::string, TokenId> token_to_id_;
};

/// Lowercases and splits on everything that is not a letter or digit.
inline std::vector<std::string> split_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string current;
  for (char c : text) {
    unsigned char uc = static_cast<unsigned char>(c);
    if (std::isalnum(uc)) {
      current.push_back(static_cast<char>(std::tolower(uc)));
    } else if (!current.empty()) {
      out.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) out.push_back(std::move(current));
  return out;
}

/// Builds a closed vocabulary from texts: the max_size most frequent tokens,
/// ordered by (count desc, token asc) so the result is deterministic.
inline Vocabulary build_vocabulary(std::span<const std::string> texts,
                                   std::size_t max_size) {
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto& tok : split_tokens(text)) ++counts[tok];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(),
                                                          counts.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  if (ranked.size() > max_size) ranked.resize(max_size);
  std::vector<std::string> tokens;
  tokens.reserve(ranked.size());
  for (auto& [tok, cnt] : ranked) tokens.push_back(tok);
  return Vocabulary(std::move(tokens));
}

/// Tokenizes against a closed vocabulary; out-of-vocabulary tokens dropped.
inline TokenizedText tokenize(std::string_view text, const Vocabulary& vocab) {
  TokenizedText out;
  for (const auto& tok : split_tokens(text)) {
    if (auto id = vocab.id_of(tok)) out.ids.push_back(*id);
  }
  return out;
}

}  // namespace sparsekit
