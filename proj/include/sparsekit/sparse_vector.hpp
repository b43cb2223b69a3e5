// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "sparsekit/error.hpp"

namespace sparsekit {

using TokenId = std::uint32_t;

/// One (token, weight) pair of a sparse representation.
struct SparseEntry {
  TokenId token;
  double weight;
  friend bool operator==(const SparseEntry&, const SparseEntry&) = default;
};

/// Sparse nonnegative vector over a fixed vocabulary.
///
/// Entries are sorted by token id and zero weights are never stored, so
/// size() is exactly the l0 norm. Immutable after construction.
class SparseVector {
 public:
  SparseVector() = default;

  /// Empty vector over a vocabulary of the given dimension.
  explicit SparseVector(std::size_t dim) : dim_(dim) {}

  /// Validating constructor: ids strictly increasing, ids < dim, weights > 0.
  SparseVector(std::size_t dim, std::vector<SparseEntry> entries)
      : dim_(dim), entries_(std::move(entries)) {
    TokenId prev = 0;
    bool first = true;
    for (const auto& e : entries_) {
      if (!first && e.token <= prev) {
        throw input_error("sparse vector token ids must be strictly increasing");
      }
      if (e.token >= dim_) {
        throw input_error("sparse vector token id " + std::to_string(e.token) +
                          " out of range for dimension " + std::to_string(dim_));
      }
      if (!(e.weight > 0.0)) {
        throw input_error("sparse vector weights must be strictly positive");
      }
      prev = e.token;
      first = false;
    }
  }

  /// Builds from a dense array; values <= 0 are treated as absent.
  static SparseVector from_dense(std::span<const double> values) {
    SparseVector v(values.size());
    for (std::size_t j = 0; j < values.size(); ++j) {
      if (values[j] > 0.0) {
        v.entries_.push_back({static_cast<TokenId>(j), values[j]});
      }
    }
    return v;
  }

  std::vector<double> to_dense() const {
    std::vector<double> out(dim_, 0.0);
    for (const auto& e : entries_) out[e.token] = e.weight;
    return out;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return entries_.size(); }
  bool empty() const noexcept { return entries_.empty(); }
  std::span<const SparseEntry> entries() const noexcept { return entries_; }
  const SparseEntry& operator[](std::size_t i) const { return entries_[i]; }

  friend bool operator==(const SparseVector&, const SparseVector&) = default;

  /// Line format: "token_id:weight" pairs, space-separated, ids ascending.
  /// Weights are printed with shortest round-trip representation.
  std::string to_line() const {
    std::string out;
    char buf[64];
    bool first = true;
    for (const auto& e : entries_) {
      if (!first) out.push_back(' ');
      first = false;
      out += std::to_string(e.token);
      out.push_back(':');
      auto res = std::to_chars(buf, buf + sizeof(buf), e.weight);
      out.append(buf, res.ptr);
    }
    return out;
  }

  static SparseVector parse_line(std::size_t dim, std::string_view line) {
    std::vector<SparseEntry> entries;
    std::size_t pos = 0;
    while (pos < line.size()) {
      while (pos < line.size() && line[pos] == ' ') ++pos;
      if (pos >= line.size()) break;
      std::size_t end = line.find(' ', pos);
      if (end == std::string_view::npos) end = line.size();
      std::string_view pair = line.substr(pos, end - pos);
      std::size_t colon = pair.find(':');
      if (colon == std::string_view::npos) {
        throw input_error("expected token_id:weight pair, got '" +
                          std::string(pair) + "'");
      }
      TokenId token = 0;
      double weight = 0.0;
      auto r1 = std::from_chars(pair.data(), pair.data() + colon, token);
      auto r2 = std::from_chars(pair.data() + colon + 1,
                                pair.data() + pair.size(), weight);
      if (r1.ec != std::errc{} || r1.ptr != pair.data() + colon ||
          r2.ec != std::errc{} || r2.ptr != pair.data() + pair.size()) {
        throw input_error("malformed token_id:weight pair '" +
                          std::string(pair) + "'");
      }
      entries.push_back({token, weight});
      pos = end;
    }
    return SparseVector(dim, std::move(entries));
  }

 private:
  std::size_t dim_ = 0;
  std::vector<SparseEntry> entries_;
};

/// Per-token inverse document frequency over a fixed vocabulary.
/// All values strictly positive; length equals vocabulary size.
class IdfTable {
 public:
  IdfTable() = default;
  explicit IdfTable(std::vector<double> values) : values_(std::move(values)) {
    for (double v : values_) {
      if (!(v > 0.0)) {
        throw input_error("idf values must be strictly positive");
      }
    }
  }

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](TokenId id) const { return values_[id]; }
  std::span<const double> values() const noexcept { return values_; }

  friend bool operator==(const IdfTable&, const IdfTable&) = default;

 private:
  std::vector<double> values_;
};

/// Inner product of two sparse vectors over the same vocabulary.
inline double dot(const SparseVector& a, const SparseVector& b) {
  if (a.dim() != b.dim()) {
    throw dimension_error("dot of vectors over different vocabulary sizes (" +
                          std::to_string(a.dim()) + " vs " +
                          std::to_string(b.dim()) + ")");
  }
  double sum = 0.0;
  auto ea = a.entries();
  auto eb = b.entries();
  std::size_t i = 0, j = 0;
  while (i < ea.size() && j < eb.size()) {
    if (ea[i].token < eb[j].token) {
      ++i;
    } else if (eb[j].token < ea[i].token) {
      ++j;
    } else {
      sum += ea[i].weight * eb[j].weight;
      ++i;
      ++j;
    }
  }
  return sum;
}

/// Number of stored entries; all stored weights are positive by invariant.
inline std::size_t l0_norm(const SparseVector& v) { return v.size(); }

/// Multiplies every weight by its token's idf. Support is unchanged.
inline SparseVector scale_by_idf(const SparseVector& v, const IdfTable& idf) {
  if (v.dim() != idf.size()) {
    throw dimension_error("idf table covers " + std::to_string(idf.size()) +
                          " tokens but vector dimension is " +
                          std::to_string(v.dim()));
  }
  std::vector<SparseEntry> entries(v.entries().begin(), v.entries().end());
  for (auto& e : entries) e.weight *= idf[e.token];
  return SparseVector(v.dim(), std::move(entries));
}

}  // namespace sparsekit
