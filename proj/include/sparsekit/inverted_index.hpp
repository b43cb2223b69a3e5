// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <numeric>
#include <span>
#include <string>
#include <unordered_set>
#include <vector>

#include "sparsekit/error.hpp"
#include "sparsekit/sparse_vector.hpp"

namespace sparsekit {

/// CRC-32 (reflected, polynomial 0xEDB88320) over a byte range.
inline std::uint32_t crc32(const unsigned char* data, std::size_t len) {
  std::uint32_t crc = 0xFFFFFFFFu;
  for (std::size_t i = 0; i < len; ++i) {
    crc ^= data[i];
    for (int b = 0; b < 8; ++b) {
      crc = (crc >> 1) ^ (0xEDB88320u & (0u - (crc & 1u)));
    }
  }
  return ~crc;
}

struct SearchHit {
  std::size_t doc_index = 0;
  double score = 0.0;

  friend bool operator==(const SearchHit&, const SearchHit&) = default;
};

namespace detail {

// Byte-buffer writer, little-endian throughout.
struct ByteWriter {
  std::vector<unsigned char> bytes;

  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<unsigned char>(v >> (8 * i)));
  }
  void f32(float v) {
    u32(std::bit_cast<std::uint32_t>(v));
  }
  void varint(std::uint64_t v) {
    while (v >= 0x80) {
      bytes.push_back(static_cast<unsigned char>(v) | 0x80u);
      v >>= 7;
    }
    bytes.push_back(static_cast<unsigned char>(v));
  }
  void raw(const void* p, std::size_t n) {
    const auto* c = static_cast<const unsigned char*>(p);
    bytes.insert(bytes.end(), c, c + n);
  }
};

// Bounds-checked reader over a loaded file image.
struct ByteReader {
  const unsigned char* data;
  std::size_t size;
  std::size_t pos = 0;

  void need(std::size_t n) const {
    if (size - pos < n) throw index_truncation_error("index file ends mid-record");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(data[pos + i]) << (8 * i);
    pos += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(data[pos + i]) << (8 * i);
    pos += 8;
    return v;
  }
  float f32() { return std::bit_cast<float>(u32()); }
  std::uint64_t varint() {
    std::uint64_t v = 0;
    for (int shift = 0; shift < 64; shift += 7) {
      need(1);
      const unsigned char b = data[pos++];
      v |= static_cast<std::uint64_t>(b & 0x7Fu) << shift;
      if ((b & 0x80u) == 0) return v;
    }
    throw index_truncation_error("varint exceeds 64 bits");
  }
  std::string str(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(data + pos), n);
    pos += n;
    return s;
  }
};

}  // namespace detail

/// Token-major postings over a fixed document set. Weights are quantized to
/// float32 when the index is built, so searching a freshly built index and
/// searching a saved-then-loaded copy produce identical scores.
class InvertedIndex {
 public:
  struct Posting {
    std::uint32_t doc = 0;
    float weight = 0.0f;

    friend bool operator==(const Posting&, const Posting&) = default;
  };

  InvertedIndex() = default;

  /// Builds postings from already-encoded documents. external_ids[i] names
  /// docs[i] and must be unique. An empty corpus is a valid (empty) index.
  static InvertedIndex build(std::size_t vocab_size,
                             std::span<const SparseVector> docs,
                             std::span<const std::string> external_ids) {
    if (docs.size() != external_ids.size()) {
      throw input_error("document and id counts differ");
    }
    std::unordered_set<std::string> unique(external_ids.begin(), external_ids.end());
    if (unique.size() != external_ids.size()) {
      throw input_error("duplicate external document id");
    }
    InvertedIndex idx;
    idx.vocab_size_ = vocab_size;
    idx.external_ids_.assign(external_ids.begin(), external_ids.end());
    idx.postings_.resize(vocab_size);
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (docs[i].dim() != vocab_size) {
        throw dimension_error("document dimension does not match the index vocabulary");
      }
      for (const auto& e : docs[i].entries()) {
        idx.postings_[e.token].push_back(
            {static_cast<std::uint32_t>(i), static_cast<float>(e.weight)});
      }
    }
    return idx;
  }

  std::size_t doc_count() const { return external_ids_.size(); }
  std::size_t vocab_size() const { return vocab_size_; }
  const std::string& external_id(std::size_t doc_index) const {
    if (doc_index >= external_ids_.size()) throw input_error("doc index out of range");
    return external_ids_[doc_index];
  }
  std::size_t posting_count(TokenId token) const {
    if (token >= vocab_size_) throw input_error("token id out of range");
    return postings_[token].size();
  }

  /// Exact top-k by dot product: term-at-a-time accumulation in double over
  /// the query's entries in ascending token order, documents with score zero
  /// omitted, ties broken by ascending document index. An empty query (or an
  /// empty index) returns an empty result.
  std::vector<SearchHit> search(const SparseVector& query, std::size_t k) const {
    if (doc_count() == 0 || k == 0) return {};
    if (query.dim() != vocab_size_) {
      throw dimension_error("query dimension does not match index vocabulary");
    }
    std::vector<double> acc(doc_count(), 0.0);
    std::vector<char> seen(doc_count(), 0);
    std::vector<std::size_t> touched;
    for (const auto& e : query.entries()) {
      for (const auto& p : postings_[e.token]) {
        acc[p.doc] += e.weight * static_cast<double>(p.weight);
        if (!seen[p.doc]) {
          seen[p.doc] = 1;
          touched.push_back(p.doc);
        }
      }
    }
    std::vector<std::size_t> order;
    order.reserve(touched.size());
    for (std::size_t doc : touched) {
      if (acc[doc] != 0.0) order.push_back(doc);
    }
    std::sort(order.begin(), order.end());
    const std::size_t take = std::min(k, order.size());
    std::partial_sort(order.begin(), order.begin() + take, order.end(),
                      [&](std::size_t a, std::size_t b) {
                        if (acc[a] != acc[b]) return acc[a] > acc[b];
                        return a < b;
                      });
    std::vector<SearchHit> hits(take);
    for (std::size_t r = 0; r < take; ++r) hits[r] = {order[r], acc[order[r]]};
    return hits;
  }

  /// Serializes to `path`. Layout (little-endian): magic "SPIX", format
  /// version, vocabulary size, document count, length-prefixed external ids,
  /// postings blob size, per-token directory of (blob offset, posting count),
  /// the blob itself (varint-delta doc ids interleaved with float32 weights),
  /// and a trailing CRC-32 of every preceding byte.
  void save(const std::string& path) const {
    detail::ByteWriter w;
    w.u32(kMagic);
    w.u32(kVersion);
    w.u64(vocab_size_);
    w.u64(external_ids_.size());
    for (const auto& id : external_ids_) {
      w.u32(static_cast<std::uint32_t>(id.size()));
      w.raw(id.data(), id.size());
    }

    detail::ByteWriter blob;
    std::vector<std::pair<std::uint64_t, std::uint32_t>> directory;
    directory.reserve(vocab_size_);
    for (const auto& plist : postings_) {
      directory.emplace_back(blob.bytes.size(),
                             static_cast<std::uint32_t>(plist.size()));
      std::uint32_t prev = 0;
      bool first = true;
      for (const auto& p : plist) {
        blob.varint(first ? p.doc : p.doc - prev);
        blob.f32(p.weight);
        prev = p.doc;
        first = false;
      }
    }
    w.u64(blob.bytes.size());
    for (const auto& [offset, count] : directory) {
      w.u64(offset);
      w.u32(count);
    }
    w.raw(blob.bytes.data(), blob.bytes.size());
    w.u32(crc32(w.bytes.data(), w.bytes.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw io_error("cannot open for writing: " + path);
    out.write(reinterpret_cast<const char*>(w.bytes.data()),
              static_cast<std::streamsize>(w.bytes.size()));
    if (!out) throw io_error("write failed: " + path);
  }

  /// Reads an index written by save(). Structural problems surface as
  /// index_format_error / index_version_error / index_truncation_error before
  /// the checksum is consulted, so a corrupt-but-parseable file is the only
  /// case reported as index_checksum_error.
  static InvertedIndex load(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw io_error("cannot open for reading: " + path);
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    detail::ByteReader r{bytes.data(), bytes.size()};

    if (r.u32() != kMagic) throw index_format_error("bad magic; not an index file");
    const std::uint32_t version = r.u32();
    if (version != kVersion) {
      throw index_version_error("unsupported index version " + std::to_string(version));
    }
    InvertedIndex idx;
    idx.vocab_size_ = r.u64();
    const std::uint64_t docs = r.u64();
    idx.external_ids_.reserve(docs);
    for (std::uint64_t i = 0; i < docs; ++i) {
      const std::uint32_t len = r.u32();
      idx.external_ids_.push_back(r.str(len));
    }
    const std::uint64_t blob_size = r.u64();
    std::vector<std::pair<std::uint64_t, std::uint32_t>> directory(idx.vocab_size_);
    for (auto& [offset, count] : directory) {
      offset = r.u64();
      count = r.u32();
    }
    const std::size_t blob_start = r.pos;
    r.need(blob_size);
    r.pos += blob_size;
    const std::uint32_t stored_crc = r.u32();

    idx.postings_.resize(idx.vocab_size_);
    detail::ByteReader blob{bytes.data() + blob_start, static_cast<std::size_t>(blob_size)};
    for (std::size_t token = 0; token < idx.vocab_size_; ++token) {
      const auto [offset, count] = directory[token];
      if (offset > blob_size) throw index_truncation_error("directory offset out of range");
      blob.pos = offset;
      auto& plist = idx.postings_[token];
      plist.reserve(count);
      std::uint32_t doc = 0;
      for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint64_t delta = blob.varint();
        doc = (i == 0) ? static_cast<std::uint32_t>(delta)
                       : doc + static_cast<std::uint32_t>(delta);
        if (doc >= docs) throw index_truncation_error("posting names a missing document");
        const float weight = blob.f32();
        plist.push_back({doc, weight});
      }
    }
    if (crc32(bytes.data(), bytes.size() - 4) != stored_crc) {
      throw index_checksum_error("checksum mismatch; index file is corrupt");
    }
    return idx;
  }

  friend bool operator==(const InvertedIndex& a, const InvertedIndex& b) {
    return a.vocab_size_ == b.vocab_size_ && a.external_ids_ == b.external_ids_ &&
           a.postings_ == b.postings_;
  }

 private:
  static constexpr std::uint32_t kMagic = 0x58495053u;  // "SPIX" little-endian
  static constexpr std::uint32_t kVersion = 1;

  std::size_t vocab_size_ = 0;
  std::vector<std::string> external_ids_;
  std::vector<std::vector<Posting>> postings_;
};

}  // namespace sparsekit
