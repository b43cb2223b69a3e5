// SPDX-License-Identifier: Apache-2.0
//
// Document/query encoding: max pooling, activation folds, idf weighting,
// truncation, the backward pass, and the no-scorer query contract.
#include <catch2/catch_amalgamated.hpp>
#include <cmath>

#include "oracles.hpp"
#include "sparsekit/encoder.hpp"
#include "sparsekit/error.hpp"

using namespace sparsekit;

namespace {

// Test double: logits come from a fixed per-position table, parameters are
// the table cells themselves.
class FixedScorer final : public TokenScorer {
 public:
  FixedScorer(std::size_t vocab, std::vector<std::vector<double>> rows)
      : vocab_(vocab), rows_(std::move(rows)) {
    for (const auto& r : rows_) flat_.insert(flat_.end(), r.begin(), r.end());
  }

  std::size_t vocab_size() const override { return vocab_; }
  std::size_t parameter_count() const override { return flat_.size(); }
  std::span<double> parameters() override { return flat_; }
  std::span<const double> parameters() const override { return flat_; }

  void accumulate_param_grad(const TokenizedText&,
                             std::span<const LogitGrad> grads,
                             std::span<double> out) const override {
    for (const auto& g : grads) {
      out[g.position * vocab_ + g.token] += g.value;
    }
  }

 private:
  TokenLogits do_forward(const TokenizedText& doc) const override {
    TokenLogits logits(doc.size(), vocab_);
    for (std::size_t p = 0; p < doc.size(); ++p) {
      for (std::size_t j = 0; j < vocab_; ++j) {
        logits.at(p, j) = flat_[p * vocab_ + j];
      }
    }
    return logits;
  }

  std::size_t vocab_;
  std::vector<std::vector<double>> rows_;
  std::vector<double> flat_;
};

}  // namespace

TEST_CASE("single position hand case", "[encoder]") {
  FixedScorer scorer(3, {{1.0, -2.0, 0.0}});
  const IdfTable idf({2.0, 1.0, 1.0});
  const TokenizedText doc{{0}};
  const auto [rank, reg] = encode_document(doc, scorer, {}, idf);
  REQUIRE(rank.size() == 1);
  CHECK(rank[0].token == 0);
  CHECK(rank[0].weight == Catch::Approx(2.0 * std::log(2.0)).epsilon(1e-15));
  CHECK(reg == rank);  // k_rank == k_reg shares the values, not just support
}

TEST_CASE("max pooling across positions", "[encoder]") {
  FixedScorer scorer(2, {{1.0, -1.0}, {3.0, -1.0}});
  const IdfTable idf({1.0, 1.0});
  const TokenizedText doc{{0, 1}};
  const auto enc = encode_document_traced(doc, scorer, {}, idf);
  REQUIRE(enc.trace.size() == 1);
  CHECK(enc.trace[0].pooled == 3.0);
  CHECK(enc.trace[0].argmax_position == 1);
  CHECK(enc.rank_repr[0].weight ==
        Catch::Approx(std::log(4.0)).epsilon(1e-15));
}

TEST_CASE("pooling ties resolve to the lowest position", "[encoder]") {
  FixedScorer scorer(1, {{2.0}, {2.0}, {2.0}});
  const IdfTable idf({1.0});
  const TokenizedText doc{{0, 0, 0}};
  const auto enc = encode_document_traced(doc, scorer, {}, idf);
  REQUIRE(enc.trace.size() == 1);
  CHECK(enc.trace[0].argmax_position == 0);
}

TEST_CASE("decoupled folds produce different values on one support",
          "[encoder]") {
  FixedScorer scorer(2, {{4.0, -1.0}});
  const IdfTable idf({1.5, 1.0});
  EncoderConfig cfg;
  cfg.k_rank = 1;
  cfg.k_reg = 2;
  const auto [rank, reg] = encode_document({{0}}, scorer, cfg, idf);
  REQUIRE(rank.size() == 1);
  REQUIRE(reg.size() == 1);
  CHECK(rank[0].weight == Catch::Approx(1.5 * std::log(5.0)).epsilon(1e-15));
  CHECK(reg[0].weight ==
        Catch::Approx(1.5 * std::log1p(std::log(5.0))).epsilon(1e-15));
  CHECK(reg[0].weight < rank[0].weight);
}

TEST_CASE("empty and truncated inputs", "[encoder]") {
  FixedScorer scorer(2, {{5.0, 5.0}, {5.0, 5.0}});
  const IdfTable idf({1.0, 1.0});
  const auto [rank, reg] = encode_document({{}}, scorer, {}, idf);
  CHECK(rank.empty());
  CHECK(reg.empty());

  EncoderConfig cfg;
  cfg.max_input_length = 2;
  const TokenizedText long_doc{{0, 1, 0, 1, 0}};
  const auto enc = encode_document_traced(long_doc, scorer, cfg, idf);
  CHECK(enc.input.size() == 2);
}

TEST_CASE("nonpositive pooled logits leave the support", "[encoder]") {
  FixedScorer scorer(3, {{0.0, -0.5, 1.0}});
  const IdfTable idf({1.0, 1.0, 1.0});
  const auto [rank, reg] = encode_document({{0}}, scorer, {}, idf);
  REQUIRE(rank.size() == 1);
  CHECK(rank[0].token == 2);
}

TEST_CASE("query encoding is idf on distinct tokens and never runs the scorer",
          "[encoder]") {
  const IdfTable idf({1.5, 0.5, 2.0});
  const TokenizedText query{{0, 1, 0}};
  const auto q = encode_query(query, idf);
  CHECK(q == SparseVector(3, {{0, 1.5}, {1, 0.5}}));

  FixedScorer scorer(3, {{1.0, 1.0, 1.0}});
  CHECK(scorer.forward_calls() == 0);
  (void)encode_document({{0}}, scorer, {}, idf);
  CHECK(scorer.forward_calls() == 1);
  (void)encode_query(query, idf);
  CHECK(scorer.forward_calls() == 1);
}

TEST_CASE("query tokens outside the idf table are rejected", "[encoder]") {
  const IdfTable idf({1.0, 1.0});
  CHECK_THROWS_AS(encode_query({{5}}, idf), dimension_error);
}

TEST_CASE("backward matches finite differences through the whole encoder",
          "[encoder]") {
  // Loss = sum of rank weights + 2 * sum of reg weights, a simple functional
  // with known upstream gradients (1 and 2 on every support token).
  Rng rng(11);
  const std::size_t vocab = 6;
  const IdfTable idf = oracles::random_idf(rng, vocab);
  EncoderConfig cfg;
  cfg.k_rank = 1;
  cfg.k_reg = 3;

  std::vector<std::vector<double>> rows(3, std::vector<double>(vocab));
  for (auto& row : rows) {
    for (auto& v : row) v = 4.0 * uniform_unit(rng) - 1.0;
  }
  FixedScorer scorer(vocab, rows);
  const TokenizedText doc{{0, 1, 2}};

  const auto eval = [&](const TokenScorer& s) {
    const auto [rank, reg] = encode_document(doc, s, cfg, idf);
    double total = 0.0;
    for (const auto& e : rank.entries()) total += e.weight;
    for (const auto& e : reg.entries()) total += 2.0 * e.weight;
    return total;
  };

  const auto enc = encode_document_traced(doc, scorer, cfg, idf);
  std::vector<double> up_rank(enc.trace.size(), 1.0);
  std::vector<double> up_reg(enc.trace.size(), 2.0);
  std::vector<double> grad(scorer.parameter_count(), 0.0);
  encode_backward(enc, scorer, cfg, idf, up_rank, up_reg, grad);

  const double h = 1e-6;
  auto params = scorer.parameters();
  for (std::size_t p = 0; p < params.size(); ++p) {
    const double saved = params[p];
    params[p] = saved + h;
    const double up = eval(scorer);
    params[p] = saved - h;
    const double down = eval(scorer);
    params[p] = saved;
    const double numeric = (up - down) / (2.0 * h);
    CHECK(std::abs(grad[p] - numeric) /
              std::max({std::abs(grad[p]), std::abs(numeric), 1e-6}) <
          1e-6);
  }
}

TEST_CASE("toy scorer layout and bias initialization", "[encoder]") {
  ToyScorer scorer(4, 3, 99);
  CHECK(scorer.vocab_size() == 4);
  CHECK(scorer.embed_dim() == 3);
  CHECK(scorer.parameter_count() == 2 * 4 * 3 + 4);
  for (TokenId t = 0; t < 4; ++t) {
    CHECK(scorer.parameters()[scorer.bias_index(t)] == kToyScorerDefaultBias);
  }
  // Deterministic per seed.
  ToyScorer again(4, 3, 99);
  CHECK(std::equal(scorer.parameters().begin(), scorer.parameters().end(),
                   again.parameters().begin()));
  ToyScorer other(4, 3, 100);
  CHECK_FALSE(std::equal(scorer.parameters().begin(),
                         scorer.parameters().end(),
                         other.parameters().begin()));
}

TEST_CASE("toy scorer initial representations are nonempty on average",
          "[encoder]") {
  ToyScorer scorer(32, 8, 5);
  std::vector<double> idf_values(32, 1.0);
  const IdfTable idf(std::move(idf_values));
  Rng rng(3);
  std::size_t nonempty = 0;
  for (int i = 0; i < 20; ++i) {
    TokenizedText doc;
    for (int t = 0; t < 10; ++t) {
      doc.ids.push_back(static_cast<TokenId>(uniform_index(rng, 32)));
    }
    const auto [rank, reg] = encode_document(doc, scorer, {}, idf);
    if (!rank.empty()) ++nonempty;
  }
  CHECK(nonempty >= 15);
}
