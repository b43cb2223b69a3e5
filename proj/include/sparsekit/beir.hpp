// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>
#include <unordered_set>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sparsekit/error.hpp"
#include "sparsekit/io.hpp"
#include "sparsekit/metrics.hpp"
#include "sparsekit/trainer.hpp"

namespace sparsekit {

/// One text record of a corpus or query file.
struct BeirText {
  std::string id;
  std::string text;

  friend bool operator==(const BeirText&, const BeirText&) = default;
};

/// Parsed dataset triple. Judgments that reference unknown ids are kept but
/// reported in `warnings`, one message per dangling reference.
struct BeirDataset {
  std::vector<BeirText> corpus;
  std::vector<BeirText> queries;
  Qrels qrels;
  std::vector<std::string> warnings;
};

inline constexpr std::string_view kQrelsHeader = "query-id\tcorpus-id\tscore";

namespace detail {

inline std::vector<BeirText> load_beir_jsonl(const std::string& path) {
  const std::string text = read_text_file(path);
  std::vector<BeirText> out;
  for_each_line(text, [&](std::string_view line, std::size_t n) {
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw parse_error(path + ": invalid JSON: " + e.what(), n);
    }
    if (!j.is_object() || !j.contains("_id") || !j.contains("text") ||
        !j["_id"].is_string() || !j["text"].is_string()) {
      throw parse_error(path + ": record needs string \"_id\" and \"text\" fields",
                        n);
    }
    out.push_back({j["_id"].get<std::string>(), j["text"].get<std::string>()});
  });
  return out;
}

}  // namespace detail

/// Qrels TSV with the standard `query-id<TAB>corpus-id<TAB>score` header.
inline void save_qrels(const Qrels& qrels, const std::string& path) {
  std::string text(kQrelsHeader);
  text += '\n';
  for (const auto& [query_id, docs] : qrels) {
    for (const auto& [doc_id, grade] : docs) {
      text += query_id;
      text += '\t';
      text += doc_id;
      text += '\t';
      text += std::to_string(grade);
      text += '\n';
    }
  }
  detail::write_text_file(path, text);
}

inline Qrels load_qrels(const std::string& path) {
  const std::string text = detail::read_text_file(path);
  Qrels qrels;
  bool header_seen = false;
  detail::for_each_line(text, [&](std::string_view line, std::size_t n) {
    if (!header_seen) {
      if (line != kQrelsHeader) {
        throw parse_error(path + ": missing qrels header '" +
                              std::string(kQrelsHeader) + "'",
                          n);
      }
      header_seen = true;
      return;
    }
    const auto fields = detail::split_tsv(line, 3, n);
    qrels[std::string(fields[0])][std::string(fields[1])] =
        detail::parse_number<int>(fields[2], "score", n);
  });
  if (!header_seen) throw parse_error(path + ": empty qrels file", 1);
  return qrels;
}

/// Reads a dataset triple: corpus JSONL, queries JSONL (records with `_id`
/// and `text`; other fields ignored), and the qrels TSV. Judgments naming an
/// id absent from the corpus or query files are loaded anyway, with one
/// warning each.
inline BeirDataset load_beir(const std::string& corpus_path,
                             const std::string& queries_path,
                             const std::string& qrels_path) {
  BeirDataset ds;
  ds.corpus = detail::load_beir_jsonl(corpus_path);
  ds.queries = detail::load_beir_jsonl(queries_path);
  ds.qrels = load_qrels(qrels_path);

  std::unordered_set<std::string_view> doc_ids;
  for (const auto& d : ds.corpus) doc_ids.insert(d.id);
  std::unordered_set<std::string_view> query_ids;
  for (const auto& q : ds.queries) query_ids.insert(q.id);
  for (const auto& [qid, docs] : ds.qrels) {
    if (!query_ids.count(qid)) {
      ds.warnings.push_back("qrels references unknown query id '" + qid + "'");
    }
    for (const auto& [did, grade] : docs) {
      if (!doc_ids.count(did)) {
        ds.warnings.push_back("qrels references unknown doc id '" + did + "'");
      }
    }
  }
  return ds;
}

/// Writes the triple back in the same layout load_beir reads.
inline void write_beir(const BeirDataset& ds, const std::string& corpus_path,
                       const std::string& queries_path,
                       const std::string& qrels_path) {
  auto dump_jsonl = [](const std::vector<BeirText>& records, bool with_title) {
    std::string text;
    for (const auto& r : records) {
      nlohmann::json j{{"_id", r.id}, {"text", r.text}};
      if (with_title) j["title"] = "";
      text += j.dump() + "\n";
    }
    return text;
  };
  detail::write_text_file(corpus_path, dump_jsonl(ds.corpus, true));
  detail::write_text_file(queries_path, dump_jsonl(ds.queries, false));
  save_qrels(ds.qrels, qrels_path);
}

/// Renders a task as a dataset triple, spelling token id N as "tokN" so the
/// text round-trips through a whitespace tokenizer.
inline BeirDataset task_to_beir(const Task& task) {
  task.validate();
  auto render = [](const TokenizedText& text) {
    std::string out;
    for (std::size_t i = 0; i < text.ids.size(); ++i) {
      if (i > 0) out += ' ';
      out += "tok" + std::to_string(text.ids[i]);
    }
    return out;
  };
  BeirDataset ds;
  ds.corpus.reserve(task.docs.size());
  for (std::size_t i = 0; i < task.docs.size(); ++i) {
    ds.corpus.push_back({task.doc_ids[i], render(task.docs[i])});
  }
  ds.queries.reserve(task.queries.size());
  for (std::size_t i = 0; i < task.queries.size(); ++i) {
    ds.queries.push_back({task.query_ids[i], render(task.queries[i])});
  }
  ds.qrels = task.relevance;
  return ds;
}

}  // namespace sparsekit
