// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sparsekit/encoder.hpp"
#include "sparsekit/error.hpp"
#include "sparsekit/losses.hpp"
#include "sparsekit/metrics.hpp"
#include "sparsekit/random.hpp"
#include "sparsekit/sparse_vector.hpp"
#include "sparsekit/vocabulary.hpp"

namespace sparsekit {

/// Probability that a synthetic document token is drawn from its own topic's
/// token range rather than uniformly from the whole vocabulary.
inline constexpr double kInTopicProbability = 0.85;

/// Generator knobs for the synthetic topic-retrieval task.
struct SyntheticTaskConfig {
  std::size_t vocab_size = 256;
  std::size_t topic_count = 8;
  std::size_t doc_count = 200;
  std::size_t query_count = 50;
  std::size_t min_doc_tokens = 20;
  std::size_t max_doc_tokens = 60;
  std::size_t min_query_tokens = 3;
  std::size_t max_query_tokens = 8;
  double in_topic_prob = kInTopicProbability;
  double train_fraction = 0.8;
  std::uint64_t seed = 1234;

  void validate() const {
    if (topic_count < 2) throw config_error("need at least two topics");
    if (vocab_size < topic_count * 10) {
      throw config_error("vocab_size must be at least 10x topic_count");
    }
    if (vocab_size % topic_count != 0) {
      throw config_error("vocab_size must be divisible by topic_count");
    }
    if (doc_count < topic_count) {
      throw config_error("need at least one document per topic");
    }
    if (query_count < 2) throw config_error("need at least two queries");
    if (min_doc_tokens == 0 || min_doc_tokens > max_doc_tokens) {
      throw config_error("doc token bounds must satisfy 0 < min <= max");
    }
    if (min_query_tokens == 0 || min_query_tokens > max_query_tokens) {
      throw config_error("query token bounds must satisfy 0 < min <= max");
    }
    if (in_topic_prob < 0.0 || in_topic_prob > 1.0) {
      throw config_error("in_topic_prob must lie in [0, 1]");
    }
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
      throw config_error("train_fraction must lie strictly inside (0, 1)");
    }
  }
};

/// A self-contained retrieval task: tokenized corpus, queries, judgments,
/// and the idf table derived from the corpus. Queries [0, train_query_count)
/// are the training split; the rest are held out.
struct Task {
  std::size_t vocab_size = 0;
  std::size_t topic_count = 0;
  std::uint64_t seed = 0;

  std::vector<TokenizedText> docs;
  std::vector<std::string> doc_ids;
  std::vector<std::uint32_t> doc_topics;

  std::vector<TokenizedText> queries;
  std::vector<std::string> query_ids;
  std::vector<std::uint32_t> query_topics;
  std::size_t train_query_count = 0;

  Qrels relevance;
  IdfTable idf;

  void validate() const {
    if (vocab_size == 0) throw input_error("task vocab_size is zero");
    if (topic_count == 0) throw input_error("task topic_count is zero");
    if (docs.empty()) throw input_error("task has no documents");
    if (docs.size() != doc_ids.size() || docs.size() != doc_topics.size()) {
      throw input_error("document arrays disagree in length");
    }
    if (queries.empty()) throw input_error("task has no queries");
    if (queries.size() != query_ids.size() ||
        queries.size() != query_topics.size()) {
      throw input_error("query arrays disagree in length");
    }
    if (train_query_count == 0 || train_query_count >= queries.size()) {
      throw input_error("train_query_count must leave both splits nonempty");
    }
    if (idf.size() != vocab_size) {
      throw dimension_error("idf table size does not match task vocabulary");
    }
    for (const auto& d : docs) {
      for (TokenId t : d.ids) {
        if (t >= vocab_size) throw input_error("document token out of range");
      }
    }
    for (const auto& q : queries) {
      for (TokenId t : q.ids) {
        if (t >= vocab_size) throw input_error("query token out of range");
      }
    }
    for (auto t : doc_topics) {
      if (t >= topic_count) throw input_error("document topic out of range");
    }
    for (auto t : query_topics) {
      if (t >= topic_count) throw input_error("query topic out of range");
    }
    std::unordered_set<std::string> ids(doc_ids.begin(), doc_ids.end());
    if (ids.size() != doc_ids.size()) throw input_error("duplicate doc id");
    std::unordered_set<std::string> qids(query_ids.begin(), query_ids.end());
    if (qids.size() != query_ids.size()) throw input_error("duplicate query id");
    for (const auto& [qid, docs_of_q] : relevance) {
      if (!qids.count(qid)) throw input_error("judgment for unknown query " + qid);
      for (const auto& [did, grade] : docs_of_q) {
        if (!ids.count(did)) throw input_error("judgment for unknown doc " + did);
      }
    }
  }
};

/// Which queries an evaluation runs over.
enum class QuerySplit { kTrain, kEval, kAll };

inline std::vector<std::size_t> query_indices(const Task& task,
                                              QuerySplit split) {
  std::size_t lo = 0, hi = task.queries.size();
  if (split == QuerySplit::kTrain) hi = task.train_query_count;
  if (split == QuerySplit::kEval) lo = task.train_query_count;
  std::vector<std::size_t> out;
  out.reserve(hi - lo);
  for (std::size_t i = lo; i < hi; ++i) out.push_back(i);
  return out;
}

/// Generates the synthetic task. The vocabulary splits into topic_count
/// equal contiguous ranges; documents and queries take topics round-robin,
/// so every topic is populated on both sides. Documents mix in uniform noise
/// tokens; queries are pure-topic. A document is relevant to a query exactly
/// when they share a topic.
inline Task make_synthetic_task(const SyntheticTaskConfig& cfg) {
  cfg.validate();
  Task task;
  task.vocab_size = cfg.vocab_size;
  task.topic_count = cfg.topic_count;
  task.seed = cfg.seed;
  const std::size_t range = cfg.vocab_size / cfg.topic_count;
  Rng rng(cfg.seed);

  task.docs.reserve(cfg.doc_count);
  for (std::size_t i = 0; i < cfg.doc_count; ++i) {
    const std::size_t topic = i % cfg.topic_count;
    const std::size_t len =
        cfg.min_doc_tokens +
        uniform_index(rng, cfg.max_doc_tokens - cfg.min_doc_tokens + 1);
    TokenizedText doc;
    doc.ids.reserve(len);
    for (std::size_t t = 0; t < len; ++t) {
      if (uniform_unit(rng) < cfg.in_topic_prob) {
        doc.ids.push_back(
            static_cast<TokenId>(topic * range + uniform_index(rng, range)));
      } else {
        doc.ids.push_back(
            static_cast<TokenId>(uniform_index(rng, cfg.vocab_size)));
      }
    }
    task.docs.push_back(std::move(doc));
    task.doc_ids.push_back("d" + std::to_string(i));
    task.doc_topics.push_back(static_cast<std::uint32_t>(topic));
  }

  task.queries.reserve(cfg.query_count);
  for (std::size_t i = 0; i < cfg.query_count; ++i) {
    const std::size_t topic = i % cfg.topic_count;
    const std::size_t len =
        cfg.min_query_tokens +
        uniform_index(rng, cfg.max_query_tokens - cfg.min_query_tokens + 1);
    TokenizedText query;
    query.ids.reserve(len);
    for (std::size_t t = 0; t < len; ++t) {
      query.ids.push_back(
          static_cast<TokenId>(topic * range + uniform_index(rng, range)));
    }
    task.queries.push_back(std::move(query));
    task.query_ids.push_back("q" + std::to_string(i));
    task.query_topics.push_back(static_cast<std::uint32_t>(topic));
  }

  for (std::size_t q = 0; q < cfg.query_count; ++q) {
    auto& judged = task.relevance[task.query_ids[q]];
    for (std::size_t d = 0; d < cfg.doc_count; ++d) {
      if (task.doc_topics[d] == task.query_topics[q]) judged[task.doc_ids[d]] = 1;
    }
  }

  task.train_query_count = std::clamp<std::size_t>(
      static_cast<std::size_t>(static_cast<double>(cfg.query_count) *
                               cfg.train_fraction),
      1, cfg.query_count - 1);
  task.idf = build_idf(task.docs, task.vocab_size);
  task.validate();
  return task;
}

/// Distillation target: the idf-weighted size of the set intersection of
/// query and document tokens — the exact score a perfect binary-weighted
/// retriever with idf query weighting would produce.
inline double teacher_score(const Task& task, std::size_t query_index,
                            std::size_t doc_index) {
  auto uniq = [](const TokenizedText& text) {
    std::vector<TokenId> ids(text.ids.begin(), text.ids.end());
    std::sort(ids.begin(), ids.end());
    ids.erase(std::unique(ids.begin(), ids.end()), ids.end());
    return ids;
  };
  const auto q = uniq(task.queries.at(query_index));
  const auto d = uniq(task.docs.at(doc_index));
  double score = 0.0;
  std::size_t i = 0, j = 0;
  while (i < q.size() && j < d.size()) {
    if (q[i] < d[j]) {
      ++i;
    } else if (d[j] < q[i]) {
      ++j;
    } else {
      score += task.idf[q[i]];
      ++i;
      ++j;
    }
  }
  return score;
}

/// Teacher scores for one query against a list of candidate documents.
inline std::vector<double> teacher_scores(const Task& task,
                                          std::size_t query_index,
                                          std::span<const std::size_t> docs) {
  std::vector<double> scores;
  scores.reserve(docs.size());
  for (std::size_t d : docs) scores.push_back(teacher_score(task, query_index, d));
  return scores;
}

/// Optimizer and schedule knobs. The regularizer weight ramps in
/// quadratically over warmup_steps; the sampling stream is seeded with
/// seed + 1 so it is independent of the scorer initialization stream.
struct TrainConfig {
  std::size_t steps = 1200;
  std::size_t batch_size = 8;
  double learning_rate = 0.05;
  std::size_t warmup_steps = 120;
  std::size_t embed_dim = 16;
  double init_scale = kToyScorerDefaultInitScale;
  std::uint64_t seed = 7;
  std::size_t probe_interval = 50;
  std::size_t probe_doc_count = 64;
  LossConfig loss;
  EncoderConfig encoder;

  void validate() const {
    if (steps == 0) throw config_error("steps must be positive");
    if (batch_size < 2) {
      throw config_error("batch_size must be at least 2 for in-batch negatives");
    }
    if (!(learning_rate > 0.0)) throw config_error("learning_rate must be > 0");
    if (embed_dim == 0) throw config_error("embed_dim must be positive");
    if (probe_interval == 0) throw config_error("probe_interval must be positive");
    if (probe_doc_count == 0) throw config_error("probe_doc_count must be positive");
    loss.validate();
    encoder.validate();
  }
};

/// Regularizer schedule: 0 at step 0, rising as (step / warmup)^2, capped at
/// 1. warmup_steps == 0 means no ramp at all.
inline double ramp_factor(std::size_t step, std::size_t warmup_steps) {
  if (warmup_steps == 0) return 1.0;
  const double r = static_cast<double>(step) / static_cast<double>(warmup_steps);
  return std::min(1.0, r * r);
}

struct StepRecord {
  std::size_t step = 0;
  double total = 0.0;
  double rank = 0.0;
  double reg = 0.0;
  double ramp = 0.0;
  double masked_fraction = 0.0;
  double doc_len = 0.0;  // mean active tokens over this batch's documents
};

struct ProbeRecord {
  std::size_t step = 0;
  double doc_len = 0.0;
};

struct TrainReport {
  std::vector<StepRecord> steps;
  std::vector<ProbeRecord> probes;
  std::vector<double> final_params;
  bool collapsed = false;
  double final_doc_len = 0.0;
};

/// One optimization batch: query index a is paired with doc index
/// doc_indices[a], a positive for that query.
struct TrainingBatch {
  std::vector<std::size_t> query_indices;
  std::vector<std::size_t> doc_indices;
};

/// Document indices grouped by topic, with the guarantee that every topic a
/// training query uses has at least one document to sample.
inline std::vector<std::vector<std::size_t>> docs_by_topic(const Task& task) {
  std::vector<std::vector<std::size_t>> pools(task.topic_count);
  for (std::size_t d = 0; d < task.docs.size(); ++d) {
    pools[task.doc_topics[d]].push_back(d);
  }
  for (std::size_t q = 0; q < task.train_query_count; ++q) {
    if (pools[task.query_topics[q]].empty()) {
      throw input_error("training query topic has no documents");
    }
  }
  return pools;
}

/// Samples batch_size training queries with replacement, each with one
/// uniformly chosen same-topic (positive) document.
inline TrainingBatch sample_batch(
    const Task& task, std::size_t batch_size, Rng& rng,
    std::span<const std::vector<std::size_t>> topic_pools) {
  TrainingBatch batch;
  batch.query_indices.reserve(batch_size);
  batch.doc_indices.reserve(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) {
    const std::size_t q = uniform_index(rng, task.train_query_count);
    const auto& pool = topic_pools[task.query_topics[q]];
    batch.query_indices.push_back(q);
    batch.doc_indices.push_back(pool[uniform_index(rng, pool.size())]);
  }
  return batch;
}

/// Loss of one batch, optionally with the full parameter gradient. This is
/// the single code path shared by training steps and by finite-difference
/// probing, so what the optimizer follows is exactly what gets checked.
struct BatchLossResult {
  double total = 0.0;
  double rank_value = 0.0;
  double reg_value = 0.0;
  double masked_fraction = 0.0;
  double batch_doc_len = 0.0;
  std::vector<double> param_grad;
};

inline BatchLossResult batch_loss(const Task& task, const TrainingBatch& batch,
                                  const TokenScorer& scorer,
                                  const EncoderConfig& encoder_cfg,
                                  const LossConfig& loss_cfg, double ramp,
                                  bool with_grad) {
  loss_cfg.validate();
  if (batch.query_indices.empty() ||
      batch.query_indices.size() != batch.doc_indices.size()) {
    throw input_error("batch query and doc index lists must match and be nonempty");
  }
  const std::size_t n = batch.query_indices.size();

  std::vector<DocumentEncoding> encodings;
  encodings.reserve(n);
  std::vector<SparseVector> reg_reprs;
  reg_reprs.reserve(n);
  for (std::size_t b = 0; b < n; ++b) {
    encodings.push_back(encode_document_traced(task.docs.at(batch.doc_indices[b]),
                                               scorer, encoder_cfg, task.idf));
    reg_reprs.push_back(encodings.back().reg_repr);
  }
  std::vector<SparseVector> query_reprs;
  query_reprs.reserve(n);
  for (std::size_t a = 0; a < n; ++a) {
    query_reprs.push_back(encode_query(task.queries.at(batch.query_indices[a]),
                                       task.idf));
  }

  Matrix student(n, n);
  Matrix teacher(n, n);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      student.at(a, b) = dot(query_reprs[a], encodings[b].rank_repr);
      teacher.at(a, b) =
          teacher_score(task, batch.query_indices[a], batch.doc_indices[b]);
    }
  }
  const auto rank = ranking_loss_kd(student, teacher, loss_cfg.temperature);
  const auto reg =
      loss_cfg.mask_enabled
          ? l0_mask_flops_loss(reg_reprs, task.idf, loss_cfg.threshold_t)
          : flops_loss(reg_reprs, task.idf);

  BatchLossResult out;
  out.rank_value = rank.value;
  out.reg_value = reg.value;
  out.masked_fraction = reg.masked_fraction();
  for (const auto& r : reg_reprs) {
    out.batch_doc_len += static_cast<double>(r.size());
  }
  out.batch_doc_len /= static_cast<double>(n);
  out.total = rank.value + ramp * loss_cfg.lambda_d * reg.value;
  if (!with_grad) return out;

  out.param_grad.assign(scorer.parameter_count(), 0.0);
  for (std::size_t b = 0; b < n; ++b) {
    const auto& enc = encodings[b];
    std::vector<double> up_rank(enc.trace.size(), 0.0);
    std::vector<double> up_reg(enc.trace.size(), 0.0);
    // d(rank)/d(rank weight of token j in doc b) = sum_a dS[a,b] * q_a[j].
    for (std::size_t a = 0; a < n; ++a) {
      const double ds = rank.score_grads.at(a, b);
      if (ds == 0.0) continue;
      for (const auto& qe : query_reprs[a].entries()) {
        const auto it = std::lower_bound(
            enc.trace.begin(), enc.trace.end(), qe.token,
            [](const DocumentEncoding::TraceEntry& t, TokenId id) {
              return t.token < id;
            });
        if (it != enc.trace.end() && it->token == qe.token) {
          up_rank[static_cast<std::size_t>(it - enc.trace.begin())] +=
              ds * qe.weight;
        }
      }
    }
    for (std::size_t e = 0; e < enc.trace.size(); ++e) {
      up_reg[e] = ramp * loss_cfg.lambda_d * reg.doc_grads[b][e];
    }
    encode_backward(enc, scorer, encoder_cfg, task.idf, up_rank, up_reg,
                    out.param_grad);
  }
  return out;
}

/// Mean active-token count of the first min(probe_doc_count, corpus) docs
/// under the current parameters. Cheap enough to run during training.
inline double probe_doc_len(const Task& task, const TokenScorer& scorer,
                            const EncoderConfig& encoder_cfg,
                            std::size_t probe_doc_count) {
  const std::size_t n = std::min(probe_doc_count, task.docs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += static_cast<double>(
        encode_document_traced(task.docs[i], scorer, encoder_cfg, task.idf)
            .rank_repr.size());
  }
  return total / static_cast<double>(n);
}

/// SGD over the batch loss. Probes mean document length before the first
/// step, every probe_interval steps, and after the last one; "collapsed"
/// means the final probe came out below one active token per document.
/// Throws divergence_error the first time the loss turns non-finite.
inline TrainReport train(const Task& task, const TrainConfig& cfg,
                         ToyScorer& scorer) {
  cfg.validate();
  task.validate();
  if (scorer.vocab_size() != task.vocab_size) {
    throw dimension_error("scorer vocabulary does not match the task");
  }
  const auto pools = docs_by_topic(task);
  Rng rng(cfg.seed + 1);

  TrainReport report;
  report.probes.push_back(
      {0, probe_doc_len(task, scorer, cfg.encoder, cfg.probe_doc_count)});
  for (std::size_t s = 0; s < cfg.steps; ++s) {
    const double ramp = ramp_factor(s, cfg.warmup_steps);
    const auto batch = sample_batch(task, cfg.batch_size, rng, pools);
    const auto bl =
        batch_loss(task, batch, scorer, cfg.encoder, cfg.loss, ramp, true);
    if (!std::isfinite(bl.total)) {
      throw divergence_error("training loss is non-finite", s);
    }
    auto params = scorer.parameters();
    for (std::size_t p = 0; p < params.size(); ++p) {
      params[p] -= cfg.learning_rate * bl.param_grad[p];
    }
    report.steps.push_back({s, bl.total, bl.rank_value, bl.reg_value, ramp,
                            bl.masked_fraction, bl.batch_doc_len});
    if ((s + 1) % cfg.probe_interval == 0) {
      report.probes.push_back(
          {s + 1, probe_doc_len(task, scorer, cfg.encoder, cfg.probe_doc_count)});
    }
  }
  if (report.probes.back().step != cfg.steps) {
    report.probes.push_back(
        {cfg.steps, probe_doc_len(task, scorer, cfg.encoder, cfg.probe_doc_count)});
  }
  report.final_doc_len = report.probes.back().doc_len;
  report.collapsed = report.final_doc_len < 1.0;
  const auto final_params = scorer.parameters();
  report.final_params.assign(final_params.begin(), final_params.end());
  return report;
}

/// Convenience overload: fresh scorer, then train.
inline std::pair<TrainReport, ToyScorer> train(const Task& task,
                                               const TrainConfig& cfg) {
  cfg.validate();
  ToyScorer scorer(task.vocab_size, cfg.embed_dim, cfg.seed, cfg.init_scale);
  TrainReport report = train(task, cfg, scorer);
  return {std::move(report), std::move(scorer)};
}

/// One finite-difference probe of the batch-loss gradient.
struct GradProbe {
  std::size_t param_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradProbe> probes;
  double max_rel_err = 0.0;
};

/// Compares the analytic batch-loss gradient against central finite
/// differences on probe_count randomly chosen parameters of a freshly
/// initialized scorer, on one frozen batch. The ramp is pinned to 1 so the
/// regularizer path is fully exercised. Relative error uses an absolute
/// floor of 1e-6 to keep near-zero gradients comparable.
inline GradCheckReport grad_check(const Task& task, const TrainConfig& cfg,
                                  std::size_t probe_count) {
  cfg.validate();
  task.validate();
  if (probe_count == 0) throw config_error("probe_count must be positive");
  ToyScorer scorer(task.vocab_size, cfg.embed_dim, cfg.seed, cfg.init_scale);
  Rng rng(cfg.seed + 1);
  const auto pools = docs_by_topic(task);
  const auto batch = sample_batch(task, cfg.batch_size, rng, pools);
  const double ramp = 1.0;

  const auto analytic =
      batch_loss(task, batch, scorer, cfg.encoder, cfg.loss, ramp, true);
  const double h = 1e-5;
  auto params = scorer.parameters();

  GradCheckReport report;
  report.probes.reserve(probe_count);
  for (std::size_t i = 0; i < probe_count; ++i) {
    const std::size_t p = uniform_index(rng, params.size());
    const double saved = params[p];
    params[p] = saved + h;
    const double up =
        batch_loss(task, batch, scorer, cfg.encoder, cfg.loss, ramp, false).total;
    params[p] = saved - h;
    const double down =
        batch_loss(task, batch, scorer, cfg.encoder, cfg.loss, ramp, false).total;
    params[p] = saved;
    const double numeric = (up - down) / (2.0 * h);
    const double a = analytic.param_grad[p];
    const double rel = std::abs(a - numeric) /
                       std::max({std::abs(a), std::abs(numeric), 1e-6});
    report.probes.push_back({p, a, numeric, rel});
    report.max_rel_err = std::max(report.max_rel_err, rel);
  }
  return report;
}

}  // namespace sparsekit
