// SPDX-License-Identifier: Apache-2.0
//
// End-to-end plumbing: collection encoding, split handling, retrieval through
// the inverted index, whole-model evaluation, and parameter sweeps.
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oracles.hpp"
#include "sparsekit/pipeline.hpp"
#include "sparsekit/sweep.hpp"

using namespace sparsekit;

namespace {

Task tiny_task() {
  SyntheticTaskConfig cfg;
  cfg.vocab_size = 40;
  cfg.topic_count = 4;
  cfg.doc_count = 16;
  cfg.query_count = 8;
  cfg.min_doc_tokens = 6;
  cfg.max_doc_tokens = 12;
  cfg.min_query_tokens = 2;
  cfg.max_query_tokens = 4;
  cfg.seed = 21;
  return make_synthetic_task(cfg);
}

}  // namespace

TEST_CASE("collection encoding preserves order and content", "[pipeline]") {
  const Task task = tiny_task();
  ToyScorer scorer(task.vocab_size, 4, 3);
  EncoderConfig cfg;
  const auto reprs = encode_collection(task, scorer, cfg);
  REQUIRE(reprs.size() == task.docs.size());
  for (std::size_t i = 0; i < task.docs.size(); ++i) {
    CHECK(reprs[i] ==
          encode_document(task.docs[i], scorer, cfg, task.idf).first);
  }
}

TEST_CASE("query splits partition the query list", "[pipeline]") {
  const Task task = tiny_task();
  const auto train = encode_queries(task, QuerySplit::kTrain);
  const auto eval = encode_queries(task, QuerySplit::kEval);
  const auto all = encode_queries(task, QuerySplit::kAll);

  REQUIRE(train.ids.size() == task.train_query_count);
  REQUIRE(eval.ids.size() == task.queries.size() - task.train_query_count);
  REQUIRE(all.ids.size() == task.queries.size());
  for (std::size_t i = 0; i < train.ids.size(); ++i) {
    CHECK(train.ids[i] == task.query_ids[i]);
    CHECK(train.reprs[i] == encode_query(task.queries[i], task.idf));
  }
  for (std::size_t i = 0; i < eval.ids.size(); ++i) {
    const std::size_t q = task.train_query_count + i;
    CHECK(eval.ids[i] == task.query_ids[q]);
    CHECK(eval.reprs[i] == encode_query(task.queries[q], task.idf));
  }
}

TEST_CASE("retrieval lists every query and maps hits to external ids",
          "[pipeline]") {
  // Hand-built corpus: doc d1 matches token 1; nothing matches token 5.
  const std::vector<SparseVector> docs = {
      SparseVector(8, {{0, 2.0}, {1, 1.0}}),
      SparseVector(8, {{1, 3.0}}),
  };
  const std::vector<std::string> ids = {"d0", "d1"};
  const auto index = InvertedIndex::build(8, docs, ids);

  EncodedQueries queries;
  queries.ids = {"qa", "qb"};
  queries.reprs = {SparseVector(8, {{1, 1.5}}), SparseVector(8, {{5, 1.0}})};

  const Run run = retrieve(index, queries, 10);
  REQUIRE(run.size() == 2);
  REQUIRE(run.at("qa").size() == 2);
  CHECK(run.at("qa")[0].doc_id == "d1");
  CHECK(run.at("qa")[0].score == 4.5);
  CHECK(run.at("qa")[1].doc_id == "d0");
  CHECK(run.at("qa")[1].score == 1.5);
  CHECK(run.at("qb").empty());  // no hits still records the query
}

TEST_CASE("model evaluation equals its assembled parts", "[pipeline]") {
  const Task task = tiny_task();
  ToyScorer scorer(task.vocab_size, 4, 3);
  EncoderConfig cfg;

  const auto result = evaluate_model(task, scorer, cfg, QuerySplit::kEval);

  const auto doc_reprs = encode_collection(task, scorer, cfg);
  const auto queries = encode_queries(task, QuerySplit::kEval);
  const auto index = InvertedIndex::build(task.vocab_size, doc_reprs,
                                          task.doc_ids);
  const Run run = retrieve(index, queries, 10);
  CHECK(result.ndcg10 == ndcg_at_10(run, task.relevance));
  CHECK(result.flops == flops_metric(queries.reprs, doc_reprs));
  CHECK(result.doc_len == doc_len(doc_reprs));

  CHECK(result.ndcg10 >= 0.0);
  CHECK(result.ndcg10 <= 1.0);
  CHECK(result.flops >= 0.0);
  CHECK(std::isfinite(result.doc_len));
}

TEST_CASE("sweep axis names round-trip", "[sweep]") {
  for (SweepAxis axis : {SweepAxis::kLambda, SweepAxis::kThreshold,
                         SweepAxis::kFoldCount}) {
    CHECK(sweep_axis_from_string(to_string(axis)) == axis);
  }
  CHECK_THROWS_AS(sweep_axis_from_string("nonsense"), config_error);
}

TEST_CASE("axis application writes the right knob", "[sweep]") {
  TrainConfig base;
  base.loss.lambda_d = 0.5;

  const TrainConfig lam = apply_axis(base, SweepAxis::kLambda, 0.25);
  CHECK(lam.loss.lambda_d == 0.25);

  const TrainConfig thr = apply_axis(base, SweepAxis::kThreshold, 20.0);
  CHECK(thr.loss.threshold_t == 20);
  CHECK(thr.loss.lambda_d == 0.5);  // other knobs untouched
  CHECK_THROWS_AS(apply_axis(base, SweepAxis::kThreshold, 2.5), config_error);
  CHECK_THROWS_AS(apply_axis(base, SweepAxis::kThreshold, -1.0), config_error);

  const TrainConfig fold = apply_axis(base, SweepAxis::kFoldCount, 3.0);
  CHECK(fold.encoder.k_rank == 3);
  CHECK(fold.encoder.k_reg == 3);
  CHECK_THROWS_AS(apply_axis(base, SweepAxis::kFoldCount, 0.0), config_error);
  CHECK_THROWS_AS(apply_axis(base, SweepAxis::kFoldCount, 1.5), config_error);
}

TEST_CASE("sweep runs points independently and records failures", "[sweep]") {
  const Task task = tiny_task();
  SweepSpec spec;
  spec.axis = SweepAxis::kLambda;
  spec.values = {0.0, 0.05, -1.0};  // the negative weight cannot validate
  spec.base.steps = 12;
  spec.base.warmup_steps = 2;
  spec.base.batch_size = 2;
  spec.base.embed_dim = 4;
  spec.base.seed = 31;

  const auto points = run_sweep(task, spec);
  REQUIRE(points.size() == 3);
  CHECK_FALSE(points[0].failed);
  CHECK_FALSE(points[1].failed);
  CHECK(points[2].failed);
  CHECK(!points[2].error.empty());

  // Deterministic: a rerun reproduces every metric bitwise.
  const auto again = run_sweep(task, spec);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(points[i].eval.ndcg10 == again[i].eval.ndcg10);
    CHECK(points[i].eval.flops == again[i].eval.flops);
    CHECK(points[i].eval.doc_len == again[i].eval.doc_len);
    CHECK(points[i].collapsed == again[i].collapsed);
  }

  // Point i trains with seed base.seed + i.
  TrainConfig direct_cfg = apply_axis(spec.base, spec.axis, 0.05);
  direct_cfg.seed = spec.base.seed + 1;
  ToyScorer scorer(task.vocab_size, direct_cfg.embed_dim, direct_cfg.seed,
                   direct_cfg.init_scale);
  train(task, direct_cfg, scorer);
  const auto direct =
      evaluate_model(task, scorer, direct_cfg.encoder, QuerySplit::kEval);
  CHECK(points[1].eval.ndcg10 == direct.ndcg10);
  CHECK(points[1].eval.flops == direct.flops);
  CHECK(points[1].eval.doc_len == direct.doc_len);
}

TEST_CASE("sweep requires at least one value", "[sweep]") {
  const Task task = tiny_task();
  SweepSpec spec;
  spec.values = {};
  CHECK_THROWS_AS(run_sweep(task, spec), config_error);
}
