// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sparsekit/error.hpp"
#include "sparsekit/sparse_vector.hpp"
#include "sparsekit/vocabulary.hpp"

namespace sparsekit {

/// Relevance judgments: query id -> (doc id -> integer grade). Grades <= 0
/// mean "judged not relevant" and contribute nothing to gains.
using Qrels = std::map<std::string, std::map<std::string, int>>;

/// One retrieved document inside a ranked list.
struct RunEntry {
  std::string doc_id;
  double score = 0.0;
};

/// Retrieval output: query id -> ranked list, best first. The stored order of
/// each list IS the ranking; metrics never re-sort it.
using Run = std::map<std::string, std::vector<RunEntry>>;

/// NDCG@k with gains 2^grade - 1 and discounts 1/log2(rank + 1), averaged over
/// the run's queries that have at least one positively judged document. Throws
/// undefined_metric_error when no query qualifies.
inline double ndcg_at_k(const Run& run, const Qrels& qrels, std::size_t k) {
  if (k == 0) throw config_error("ndcg cutoff must be positive");
  double total = 0.0;
  std::size_t counted = 0;
  for (const auto& [query_id, ranking] : run) {
    const auto q = qrels.find(query_id);
    if (q == qrels.end()) continue;
    std::vector<int> grades;
    for (const auto& [doc_id, grade] : q->second) {
      if (grade > 0) grades.push_back(grade);
    }
    if (grades.empty()) continue;
    std::sort(grades.begin(), grades.end(), std::greater<int>());

    double idcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, grades.size()); ++r) {
      idcg += (std::exp2(grades[r]) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
    }
    double dcg = 0.0;
    for (std::size_t r = 0; r < std::min(k, ranking.size()); ++r) {
      const auto d = q->second.find(ranking[r].doc_id);
      if (d == q->second.end() || d->second <= 0) continue;
      dcg += (std::exp2(d->second) - 1.0) / std::log2(static_cast<double>(r) + 2.0);
    }
    total += dcg / idcg;
    ++counted;
  }
  if (counted == 0) {
    throw undefined_metric_error("no run query has a positively judged document");
  }
  return total / static_cast<double>(counted);
}

inline double ndcg_at_10(const Run& run, const Qrels& qrels) {
  return ndcg_at_k(run, qrels, 10);
}

/// Expected number of floating-point operations per scored query-document
/// pair: sum over tokens of (fraction of queries with the token active) times
/// (fraction of documents with it active). Equals the mean intersection size
/// |supp(q) cap supp(d)| over all query-document pairs.
inline double flops_metric(std::span<const SparseVector> queries,
                           std::span<const SparseVector> docs) {
  if (queries.empty() || docs.empty()) {
    throw input_error("flops metric needs nonempty query and document sets");
  }
  const std::size_t dim = queries.front().dim();
  std::vector<std::size_t> query_df(dim, 0);
  std::vector<std::size_t> doc_df(dim, 0);
  for (const auto& q : queries) {
    if (q.dim() != dim) throw dimension_error("query dimension mismatch");
    for (const auto& e : q.entries()) ++query_df[e.token];
  }
  for (const auto& d : docs) {
    if (d.dim() != dim) throw dimension_error("document dimension mismatch");
    for (const auto& e : d.entries()) ++doc_df[e.token];
  }
  double value = 0.0;
  for (std::size_t j = 0; j < dim; ++j) {
    value += (static_cast<double>(query_df[j]) / static_cast<double>(queries.size())) *
             (static_cast<double>(doc_df[j]) / static_cast<double>(docs.size()));
  }
  return value;
}

/// Mean number of active tokens per representation.
inline double doc_len(std::span<const SparseVector> docs) {
  if (docs.empty()) throw input_error("doc_len needs a nonempty set");
  double total = 0.0;
  for (const auto& d : docs) total += static_cast<double>(l0_norm(d));
  return total / static_cast<double>(docs.size());
}

/// Smoothed inverse document frequency over tokenized documents:
///   idf_j = ln((N + 1) / (df_j + 1)) + 1
/// where df_j counts documents containing token j at least once. Always
/// positive, so it is usable both as a weight and as a divisor.
inline IdfTable build_idf(std::span<const TokenizedText> docs,
                          std::size_t vocab_size) {
  if (docs.empty()) throw input_error("idf needs a nonempty corpus");
  std::vector<std::size_t> df(vocab_size, 0);
  std::vector<char> seen(vocab_size, 0);
  for (const auto& doc : docs) {
    for (TokenId t : doc.ids) {
      if (t >= vocab_size) throw input_error("token id out of vocabulary range");
      seen[t] = 1;
    }
    for (TokenId t : doc.ids) {
      if (seen[t]) {
        ++df[t];
        seen[t] = 0;
      }
    }
  }
  const double n = static_cast<double>(docs.size());
  std::vector<double> idf(vocab_size);
  for (std::size_t j = 0; j < vocab_size; ++j) {
    idf[j] = std::log((n + 1.0) / (static_cast<double>(df[j]) + 1.0)) + 1.0;
  }
  return IdfTable(std::move(idf));
}

}  // namespace sparsekit
