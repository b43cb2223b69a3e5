// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <charconv>
#include <cstdint>
#include <fstream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <utility>
#include <vector>

#include "json.hpp"

#include "sparsekit/encoder.hpp"
#include "sparsekit/error.hpp"
#include "sparsekit/metrics.hpp"
#include "sparsekit/sparse_vector.hpp"
#include "sparsekit/sweep.hpp"
#include "sparsekit/trainer.hpp"

namespace sparsekit {

namespace detail {

/// Shortest round-trip decimal form, identical across platforms.
inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw io_error("cannot open for writing: " + path);
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw io_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw io_error("cannot open for reading: " + path);
  return std::string((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
}

inline nlohmann::json parse_json_file(const std::string& path,
                                      const char* expected_format) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
  } catch (const nlohmann::json::exception& e) {
    throw input_error(path + ": invalid JSON: " + e.what());
  }
  if (!j.is_object() || !j.contains("format") ||
      j["format"] != expected_format) {
    throw input_error(path + ": expected a \"format\": \"" +
                      std::string(expected_format) + "\" JSON object");
  }
  return j;
}

/// Splits one line into exactly n tab-separated fields.
inline std::vector<std::string_view> split_tsv(std::string_view line,
                                               std::size_t n,
                                               std::size_t line_number) {
  std::vector<std::string_view> fields;
  std::size_t pos = 0;
  while (true) {
    const std::size_t tab = line.find('\t', pos);
    if (tab == std::string_view::npos) {
      fields.push_back(line.substr(pos));
      break;
    }
    fields.push_back(line.substr(pos, tab - pos));
    pos = tab + 1;
  }
  if (fields.size() != n) {
    throw parse_error("expected " + std::to_string(n) + " tab-separated fields, got " +
                          std::to_string(fields.size()),
                      line_number);
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view field, const char* what,
               std::size_t line_number) {
  T value{};
  const auto res = std::from_chars(field.data(), field.data() + field.size(), value);
  if (res.ec != std::errc{} || res.ptr != field.data() + field.size()) {
    throw parse_error("malformed " + std::string(what) + " '" +
                          std::string(field) + "'",
                      line_number);
  }
  return value;
}

/// Iterates nonempty lines of a text blob with 1-based numbering. The final
/// newline is optional.
template <typename Fn>
void for_each_line(const std::string& text, Fn&& fn) {
  std::size_t pos = 0;
  std::size_t line_number = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    ++line_number;
    std::string_view line(text.data() + pos, end - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!line.empty()) fn(line, line_number);
    if (end == text.size()) break;
    pos = end + 1;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Task JSON ("task-v1")

inline nlohmann::json task_to_json(const Task& task) {
  task.validate();
  nlohmann::json j;
  j["format"] = "task-v1";
  j["vocab_size"] = task.vocab_size;
  j["topic_count"] = task.topic_count;
  j["seed"] = task.seed;
  j["train_query_count"] = task.train_query_count;
  j["docs"] = nlohmann::json::array();
  for (std::size_t i = 0; i < task.docs.size(); ++i) {
    j["docs"].push_back({{"id", task.doc_ids[i]},
                         {"topic", task.doc_topics[i]},
                         {"tokens", task.docs[i].ids}});
  }
  j["queries"] = nlohmann::json::array();
  for (std::size_t i = 0; i < task.queries.size(); ++i) {
    j["queries"].push_back({{"id", task.query_ids[i]},
                            {"topic", task.query_topics[i]},
                            {"tokens", task.queries[i].ids}});
  }
  j["relevance"] = task.relevance;
  j["idf"] = std::vector<double>(task.idf.values().begin(),
                                 task.idf.values().end());
  return j;
}

inline Task task_from_json(const nlohmann::json& j) {
  Task task;
  try {
    task.vocab_size = j.at("vocab_size").get<std::size_t>();
    task.topic_count = j.at("topic_count").get<std::size_t>();
    task.seed = j.at("seed").get<std::uint64_t>();
    task.train_query_count = j.at("train_query_count").get<std::size_t>();
    for (const auto& d : j.at("docs")) {
      task.doc_ids.push_back(d.at("id").get<std::string>());
      task.doc_topics.push_back(d.at("topic").get<std::uint32_t>());
      task.docs.push_back({d.at("tokens").get<std::vector<TokenId>>()});
    }
    for (const auto& q : j.at("queries")) {
      task.query_ids.push_back(q.at("id").get<std::string>());
      task.query_topics.push_back(q.at("topic").get<std::uint32_t>());
      task.queries.push_back({q.at("tokens").get<std::vector<TokenId>>()});
    }
    task.relevance = j.at("relevance").get<Qrels>();
    task.idf = IdfTable(j.at("idf").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw input_error(std::string("malformed task JSON: ") + e.what());
  }
  task.validate();
  return task;
}

inline void save_task(const Task& task, const std::string& path) {
  detail::write_text_file(path, task_to_json(task).dump(2) + "\n");
}

inline Task load_task(const std::string& path) {
  return task_from_json(detail::parse_json_file(path, "task-v1"));
}

// ---------------------------------------------------------------------------
// Model JSON ("model-v1")

inline void save_model(const ToyScorer& scorer, const std::string& path) {
  nlohmann::json j;
  j["format"] = "model-v1";
  j["vocab_size"] = scorer.vocab_size();
  j["embed_dim"] = scorer.embed_dim();
  j["params"] = std::vector<double>(scorer.parameters().begin(),
                                    scorer.parameters().end());
  detail::write_text_file(path, j.dump(2) + "\n");
}

inline ToyScorer load_model(const std::string& path) {
  const auto j = detail::parse_json_file(path, "model-v1");
  try {
    const auto vocab = j.at("vocab_size").get<std::size_t>();
    const auto dim = j.at("embed_dim").get<std::size_t>();
    const auto params = j.at("params").get<std::vector<double>>();
    ToyScorer scorer(vocab, dim, /*seed=*/0);
    if (params.size() != scorer.parameter_count()) {
      throw input_error(path + ": parameter array has wrong length");
    }
    std::copy(params.begin(), params.end(), scorer.parameters().begin());
    return scorer;
  } catch (const nlohmann::json::exception& e) {
    throw input_error(path + ": malformed model JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Idf JSON ("idf-v1")

inline void save_idf(const IdfTable& idf, const std::string& path) {
  nlohmann::json j;
  j["format"] = "idf-v1";
  j["values"] = std::vector<double>(idf.values().begin(), idf.values().end());
  detail::write_text_file(path, j.dump(2) + "\n");
}

inline IdfTable load_idf(const std::string& path) {
  const auto j = detail::parse_json_file(path, "idf-v1");
  try {
    return IdfTable(j.at("values").get<std::vector<double>>());
  } catch (const nlohmann::json::exception& e) {
    throw input_error(path + ": malformed idf JSON: " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Training report JSONL: one "step" object per optimizer step, "probe"
// objects for length probes, one trailing "summary".

inline void save_report(const TrainReport& report, const std::string& path) {
  std::string text;
  for (const auto& s : report.steps) {
    nlohmann::json j{{"kind", "step"},
                     {"step", s.step},
                     {"total", s.total},
                     {"rank", s.rank},
                     {"reg", s.reg},
                     {"ramp", s.ramp},
                     {"masked_fraction", s.masked_fraction},
                     {"doc_len", s.doc_len}};
    text += j.dump() + "\n";
  }
  for (const auto& p : report.probes) {
    nlohmann::json j{{"kind", "probe"}, {"step", p.step}, {"doc_len", p.doc_len}};
    text += j.dump() + "\n";
  }
  nlohmann::json summary{{"kind", "summary"},
                         {"collapsed", report.collapsed},
                         {"final_doc_len", report.final_doc_len}};
  text += summary.dump() + "\n";
  detail::write_text_file(path, text);
}

// ---------------------------------------------------------------------------
// Sparse vectors TSV: "# sparsekit-vectors dim=N" header, then one
// "id<TAB>token:weight token:weight ..." line per vector (weights shortest
// round-trip, tokens ascending). An empty vector keeps its id line.

inline void save_vectors(std::span<const std::string> ids,
                         std::span<const SparseVector> vectors,
                         const std::string& path) {
  if (ids.size() != vectors.size()) {
    throw input_error("id and vector counts differ");
  }
  if (vectors.empty()) throw input_error("nothing to save");
  const std::size_t dim = vectors.front().dim();
  std::string text = "# sparsekit-vectors dim=" + std::to_string(dim) + "\n";
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].dim() != dim) {
      throw dimension_error("vector dimensions differ within one file");
    }
    text += ids[i];
    text += '\t';
    text += vectors[i].to_line();
    text += '\n';
  }
  detail::write_text_file(path, text);
}

struct VectorFile {
  std::size_t dim = 0;
  std::vector<std::string> ids;
  std::vector<SparseVector> vectors;
};

inline VectorFile load_vectors(const std::string& path) {
  const std::string text = detail::read_text_file(path);
  VectorFile out;
  bool header_seen = false;
  detail::for_each_line(text, [&](std::string_view line, std::size_t n) {
    if (!header_seen) {
      constexpr std::string_view prefix = "# sparsekit-vectors dim=";
      if (!line.starts_with(prefix)) {
        throw parse_error("missing '# sparsekit-vectors dim=N' header", n);
      }
      out.dim = detail::parse_number<std::size_t>(line.substr(prefix.size()),
                                                  "dimension", n);
      header_seen = true;
      return;
    }
    const std::size_t tab = line.find('\t');
    if (tab == std::string_view::npos) {
      throw parse_error("expected 'id<TAB>entries'", n);
    }
    out.ids.emplace_back(line.substr(0, tab));
    try {
      out.vectors.push_back(SparseVector::parse_line(out.dim, line.substr(tab + 1)));
    } catch (const input_error& e) {
      throw parse_error(e.what(), n);
    }
  });
  if (!header_seen) throw parse_error("empty vectors file", 1);
  return out;
}

// ---------------------------------------------------------------------------
// Run files: TSV columns query_id, doc_id, rank, score, grouped per query in
// rank order (1..n without gaps) — the format the search subcommand prints
// and the eval subcommand reads back.

inline std::string run_to_tsv(const Run& run) {
  std::string text;
  for (const auto& [query_id, ranking] : run) {
    for (std::size_t r = 0; r < ranking.size(); ++r) {
      text += query_id;
      text += '\t';
      text += ranking[r].doc_id;
      text += '\t';
      text += std::to_string(r + 1);
      text += '\t';
      text += detail::format_double(ranking[r].score);
      text += '\n';
    }
  }
  return text;
}

inline void save_run(const Run& run, const std::string& path) {
  detail::write_text_file(path, run_to_tsv(run));
}

inline Run run_from_tsv(const std::string& text) {
  Run run;
  detail::for_each_line(text, [&](std::string_view line, std::size_t n) {
    const auto fields = detail::split_tsv(line, 4, n);
    auto& ranking = run[std::string(fields[0])];
    const auto rank = detail::parse_number<std::size_t>(fields[2], "rank", n);
    if (rank != ranking.size() + 1) {
      throw parse_error("rank " + std::to_string(rank) + " out of order", n);
    }
    ranking.push_back({std::string(fields[1]),
                       detail::parse_number<double>(fields[3], "score", n)});
  });
  return run;
}

inline Run load_run(const std::string& path) {
  return run_from_tsv(detail::read_text_file(path));
}

// ---------------------------------------------------------------------------
// Sweep CSV, versioned header comment then fixed columns
// axis_value,ndcg10,flops,doc_len,collapsed. A failed point keeps its
// axis_value row with empty metrics and "failed" in the collapsed column.

inline void save_sweep(std::span<const SweepPoint> points, SweepAxis axis,
                       const std::string& path) {
  std::string text = "# sweep-v1 axis=" + to_string(axis) + "\n";
  text += "axis_value,ndcg10,flops,doc_len,collapsed\n";
  for (const auto& p : points) {
    text += detail::format_double(p.axis_value);
    if (!p.failed) {
      text += ',';
      text += detail::format_double(p.eval.ndcg10);
      text += ',';
      text += detail::format_double(p.eval.flops);
      text += ',';
      text += detail::format_double(p.eval.doc_len);
      text += ',';
      text += p.collapsed ? "1" : "0";
    } else {
      text += ",,,,failed";
    }
    text += '\n';
  }
  detail::write_text_file(path, text);
}

}  // namespace sparsekit
