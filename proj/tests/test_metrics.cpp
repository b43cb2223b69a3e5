// SPDX-License-Identifier: Apache-2.0
//
// Ranking-quality and cost metrics: NDCG@k, the retrieval-cost estimator,
// mean active length, and corpus idf.
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oracles.hpp"
#include "sparsekit/metrics.hpp"

using namespace sparsekit;

TEST_CASE("single relevant at rank 2", "[metrics]") {
  Qrels qrels{{"q1", {{"d_hit", 1}}}};
  Run run{{"q1", {{"d_other", 9.0}, {"d_hit", 8.0}, {"d_x", 7.0}}}};
  CHECK(ndcg_at_10(run, qrels) ==
        Catch::Approx(0.630930).margin(1e-6));  // 1 / log2(3)
}

TEST_CASE("perfect and empty rankings", "[metrics]") {
  Qrels qrels{{"q1", {{"a", 2}, {"b", 1}}}};
  Run perfect{{"q1", {{"a", 2.0}, {"b", 1.0}}}};
  CHECK(ndcg_at_10(perfect, qrels) == Catch::Approx(1.0).margin(1e-12));
  Run empty{{"q1", {}}};
  CHECK(ndcg_at_10(empty, qrels) == 0.0);
  // An empty run has no query universe at all.
  CHECK_THROWS_AS(ndcg_at_10(Run{}, qrels), undefined_metric_error);
}

TEST_CASE("queries without positive judgments are skipped", "[metrics]") {
  Qrels qrels{{"q1", {{"a", 1}}}, {"q2", {{"b", 0}}}};
  Run run{{"q1", {{"a", 1.0}}}, {"q2", {{"b", 1.0}}}};
  CHECK(ndcg_at_10(run, qrels) == Catch::Approx(1.0).margin(1e-12));

  Qrels all_zero{{"q2", {{"b", 0}}}};
  CHECK_THROWS_AS(ndcg_at_10(run, all_zero), undefined_metric_error);
  CHECK_THROWS_AS(ndcg_at_10(run, Qrels{}), undefined_metric_error);
}

TEST_CASE("unjudged documents contribute zero gain", "[metrics]") {
  Qrels qrels{{"q1", {{"rel", 1}}}};
  Run run{{"q1", {{"junk1", 5.0}, {"junk2", 4.0}, {"rel", 3.0}}}};
  CHECK(ndcg_at_10(run, qrels) ==
        Catch::Approx(1.0 / std::log2(4.0)).margin(1e-12));
}

TEST_CASE("ndcg truncates at k", "[metrics]") {
  Qrels qrels{{"q1", {{"rel", 1}}}};
  std::vector<RunEntry> ranking;
  for (int i = 0; i < 10; ++i) {
    ranking.push_back({"junk" + std::to_string(i), 20.0 - i});
  }
  ranking.push_back({"rel", 1.0});  // rank 11, outside the cutoff
  Run run{{"q1", ranking}};
  CHECK(ndcg_at_10(run, qrels) == 0.0);
}

TEST_CASE("ndcg matches the brute-force oracle on random instances",
          "[metrics]") {
  Rng rng(51);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n_docs = 5 + uniform_index(rng, 20);
    const std::size_t n_queries = 1 + uniform_index(rng, 6);
    Qrels qrels;
    Run run;
    bool any_positive = false;
    for (std::size_t q = 0; q < n_queries; ++q) {
      const std::string qid = "q" + std::to_string(q);
      for (std::size_t d = 0; d < n_docs; ++d) {
        if (uniform_unit(rng) < 0.3) {
          const int grade = static_cast<int>(uniform_index(rng, 4));
          qrels[qid][std::string("d") + std::to_string(d)] = grade;
          if (grade > 0) any_positive = true;
        }
      }
      std::vector<RunEntry> ranking;
      for (std::size_t d = 0; d < n_docs; ++d) {
        if (uniform_unit(rng) < 0.7) {
          ranking.push_back({"d" + std::to_string(d), uniform_unit(rng)});
        }
      }
      std::sort(ranking.begin(), ranking.end(),
                [](const RunEntry& a, const RunEntry& b) {
                  return a.score > b.score;
                });
      run[qid] = std::move(ranking);
    }
    if (!any_positive) continue;
    CHECK(ndcg_at_10(run, qrels) ==
          Catch::Approx(oracles::ndcg_at_k(run, qrels, 10)).margin(1e-12));
  }
}

TEST_CASE("cost estimator hand case", "[metrics]") {
  // queries: {a}, {a, b}; docs: {a}, {b} -> 1.0 * 0.5 + 0.5 * 0.5 = 0.75
  const std::vector<SparseVector> queries = {
      SparseVector(2, {{0, 1.0}}), SparseVector(2, {{0, 1.0}, {1, 1.0}})};
  const std::vector<SparseVector> docs = {SparseVector(2, {{0, 2.0}}),
                                          SparseVector(2, {{1, 3.0}})};
  CHECK(flops_metric(queries, docs) == 0.75);
}

TEST_CASE("cost estimator equals the pairwise intersection identity",
          "[metrics]") {
  Rng rng(52);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<SparseVector> queries, docs;
    for (int i = 0; i < 8; ++i) {
      queries.push_back(oracles::random_vector(rng, 30, 10));
    }
    for (int i = 0; i < 12; ++i) {
      docs.push_back(oracles::random_vector(rng, 30, 10));
    }
    CHECK(flops_metric(queries, docs) ==
          Catch::Approx(oracles::flops_metric_pairwise(queries, docs))
              .margin(1e-12));
  }
}

TEST_CASE("cost estimator edge cases", "[metrics]") {
  const std::vector<SparseVector> queries = {SparseVector(2, {{0, 1.0}})};
  const std::vector<SparseVector> empty_docs = {SparseVector(2),
                                                SparseVector(2)};
  CHECK(flops_metric(queries, empty_docs) == 0.0);
  CHECK_THROWS_AS(flops_metric(std::vector<SparseVector>{}, empty_docs),
                  input_error);
  CHECK_THROWS_AS(flops_metric(queries, std::vector<SparseVector>{}),
                  input_error);
}

TEST_CASE("cost estimator ignores weights", "[metrics]") {
  const std::vector<SparseVector> q1 = {SparseVector(2, {{0, 1.0}})};
  const std::vector<SparseVector> q2 = {SparseVector(2, {{0, 100.0}})};
  const std::vector<SparseVector> docs = {SparseVector(2, {{0, 0.001}})};
  CHECK(flops_metric(q1, docs) == flops_metric(q2, docs));
}

TEST_CASE("mean active length", "[metrics]") {
  const std::vector<SparseVector> docs = {
      SparseVector(5, {{0, 1.0}, {1, 1.0}}), SparseVector(5),
      SparseVector(5, {{4, 2.0}})};
  CHECK(doc_len(docs) == 1.0);
  CHECK_THROWS_AS(doc_len(std::vector<SparseVector>{}), input_error);
}

TEST_CASE("corpus idf hand values", "[metrics]") {
  // Three docs; token 0 in all, token 1 in one, token 2 in none.
  std::vector<TokenizedText> docs = {{{0, 1}}, {{0}}, {{0, 0}}};
  const auto idf = build_idf(docs, 3);
  REQUIRE(idf.size() == 3);
  CHECK(idf[0] == Catch::Approx(1.0).margin(1e-15));            // ln(4/4)+1
  CHECK(idf[1] == Catch::Approx(std::log(2.0) + 1.0).margin(1e-15));  // ln(4/2)+1
  CHECK(idf[2] == Catch::Approx(std::log(4.0) + 1.0).margin(1e-15));  // ln(4/1)+1
  // Strict positivity even for ubiquitous tokens.
  for (double v : idf.values()) CHECK(v > 0.0);
}

TEST_CASE("idf counts presence, not frequency", "[metrics]") {
  std::vector<TokenizedText> once = {{{3}}};
  std::vector<TokenizedText> thrice = {{{3, 3, 3}}};
  const auto a = build_idf(once, 4);
  const auto b = build_idf(thrice, 4);
  CHECK(a[3] == b[3]);
}
