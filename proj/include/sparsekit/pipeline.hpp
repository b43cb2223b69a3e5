// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "sparsekit/encoder.hpp"
#include "sparsekit/error.hpp"
#include "sparsekit/inverted_index.hpp"
#include "sparsekit/metrics.hpp"
#include "sparsekit/sparse_vector.hpp"
#include "sparsekit/trainer.hpp"

namespace sparsekit {

/// Ranking-side representations of every task document, in task order.
inline std::vector<SparseVector> encode_collection(const Task& task,
                                                   const TokenScorer& scorer,
                                                   const EncoderConfig& cfg) {
  std::vector<SparseVector> out;
  out.reserve(task.docs.size());
  for (const auto& doc : task.docs) {
    out.push_back(encode_document(doc, scorer, cfg, task.idf).first);
  }
  return out;
}

/// Query representations for one split, paired with their ids.
struct EncodedQueries {
  std::vector<std::string> ids;
  std::vector<SparseVector> reprs;
};

inline EncodedQueries encode_queries(const Task& task, QuerySplit split) {
  EncodedQueries out;
  for (std::size_t q : query_indices(task, split)) {
    out.ids.push_back(task.query_ids[q]);
    out.reprs.push_back(encode_query(task.queries[q], task.idf));
  }
  return out;
}

/// Retrieves top_k documents per query through an inverted index built over
/// the given document representations.
inline Run retrieve(const InvertedIndex& index, const EncodedQueries& queries,
                    std::size_t top_k) {
  Run run;
  for (std::size_t q = 0; q < queries.reprs.size(); ++q) {
    auto& ranking = run[queries.ids[q]];
    for (const auto& hit : index.search(queries.reprs[q], top_k)) {
      ranking.push_back({index.external_id(hit.doc_index), hit.score});
    }
  }
  return run;
}

/// Retrieval quality plus the two efficiency measures.
struct EvalResult {
  double ndcg10 = 0.0;
  double flops = 0.0;
  double doc_len = 0.0;
};

/// Full evaluation: encode the collection and the split's queries, retrieve
/// top 10 through an inverted index, and report NDCG@10 alongside the
/// expected per-pair FLOPS and the mean document length.
inline EvalResult evaluate_model(const Task& task, const TokenScorer& scorer,
                                 const EncoderConfig& cfg, QuerySplit split) {
  task.validate();
  const auto doc_reprs = encode_collection(task, scorer, cfg);
  const auto queries = encode_queries(task, split);
  if (queries.reprs.empty()) {
    throw input_error("query split is empty");
  }
  const auto index =
      InvertedIndex::build(task.vocab_size, doc_reprs, task.doc_ids);
  const Run run = retrieve(index, queries, 10);

  EvalResult out;
  out.ndcg10 = ndcg_at_10(run, task.relevance);
  out.flops = flops_metric(queries.reprs, doc_reprs);
  out.doc_len = doc_len(doc_reprs);
  return out;
}

}  // namespace sparsekit
