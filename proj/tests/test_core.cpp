// SPDX-License-Identifier: Apache-2.0
//
// Core container tests: sparse vectors, idf tables, tokenization, matrices.
#include <catch2/catch_amalgamated.hpp>

#include "oracles.hpp"
#include "sparsekit/error.hpp"
#include "sparsekit/matrix.hpp"
#include "sparsekit/sparse_vector.hpp"
#include "sparsekit/vocabulary.hpp"

using namespace sparsekit;

TEST_CASE("sparse vector basics", "[core]") {
  const SparseVector v(5, {{1, 0.5}, {4, 2.0}});
  CHECK(v.dim() == 5);
  CHECK(v.size() == 2);
  CHECK_FALSE(v.empty());
  CHECK(l0_norm(v) == 2);
  CHECK(v[0].token == 1);
  CHECK(v[1].weight == 2.0);

  const SparseVector empty(7);
  CHECK(empty.empty());
  CHECK(l0_norm(empty) == 0);
}

TEST_CASE("sparse vector constructor validates", "[core]") {
  CHECK_THROWS_AS(SparseVector(3, {{1, 1.0}, {1, 2.0}}), input_error);
  CHECK_THROWS_AS(SparseVector(3, {{2, 1.0}, {1, 2.0}}), input_error);
  CHECK_THROWS_AS(SparseVector(3, {{3, 1.0}}), input_error);
  CHECK_THROWS_AS(SparseVector(3, {{0, 0.0}}), input_error);
  CHECK_THROWS_AS(SparseVector(3, {{0, -1.0}}), input_error);
}

TEST_CASE("from_dense drops nonpositive and round-trips", "[core]") {
  const std::vector<double> dense = {0.0, 1.5, -2.0, 0.25, 0.0};
  const auto v = SparseVector::from_dense(dense);
  CHECK(v.size() == 2);
  CHECK(v[0].token == 1);
  CHECK(v[1].token == 3);
  const auto back = v.to_dense();
  CHECK(back == std::vector<double>{0.0, 1.5, 0.0, 0.25, 0.0});
}

TEST_CASE("dot product hand case", "[core]") {
  const SparseVector a(3, {{0, 1.5}, {2, 0.5}});
  const SparseVector b(3, {{0, 2.0}, {1, 1.0}});
  CHECK(dot(a, b) == 3.0);
  CHECK(dot(b, a) == 3.0);
}

TEST_CASE("dot product matches dense oracle on random vectors", "[core]") {
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    const auto a = oracles::random_vector(rng, 40, 15);
    const auto b = oracles::random_vector(rng, 40, 15);
    CHECK(dot(a, b) == Catch::Approx(oracles::dot(a, b)).margin(1e-12));
  }
}

TEST_CASE("dot product rejects dimension mismatch", "[core]") {
  const SparseVector a(3, {{0, 1.0}});
  const SparseVector b(4, {{0, 1.0}});
  CHECK_THROWS_AS(dot(a, b), dimension_error);
}

TEST_CASE("disjoint supports give zero dot", "[core]") {
  const SparseVector a(6, {{0, 1.0}, {2, 1.0}});
  const SparseVector b(6, {{1, 5.0}, {3, 2.0}});
  CHECK(dot(a, b) == 0.0);
}

TEST_CASE("idf scaling hand case", "[core]") {
  const SparseVector v(5, {{1, 0.5}, {4, 2.0}});
  const IdfTable idf({1.0, 3.0, 1.0, 1.0, 0.5});
  const auto scaled = scale_by_idf(v, idf);
  CHECK(scaled == SparseVector(5, {{1, 1.5}, {4, 1.0}}));
}

TEST_CASE("idf table validates positivity", "[core]") {
  CHECK_THROWS_AS(IdfTable({1.0, 0.0}), input_error);
  CHECK_THROWS_AS(IdfTable({1.0, -0.5}), input_error);
}

TEST_CASE("line format round-trips exactly", "[core]") {
  Rng rng(7);
  for (int trial = 0; trial < 100; ++trial) {
    const auto v = oracles::random_vector(rng, 64, 20);
    const auto parsed = SparseVector::parse_line(64, v.to_line());
    CHECK(parsed == v);
  }
  CHECK(SparseVector::parse_line(8, "").empty());
  CHECK_THROWS_AS(SparseVector::parse_line(8, "3"), input_error);
  CHECK_THROWS_AS(SparseVector::parse_line(8, "3:abc"), input_error);
}

TEST_CASE("tokenizer lowercases and splits on non-alphanumerics", "[core]") {
  const auto tokens = split_tokens("The quick, BROWN fox-jumps!  twice");
  CHECK(tokens == std::vector<std::string>{"the", "quick", "brown", "fox",
                                           "jumps", "twice"});
  CHECK(split_tokens("").empty());
  CHECK(split_tokens("...").empty());
}

TEST_CASE("vocabulary orders by count then token", "[core]") {
  const std::vector<std::string> texts = {"b a b", "c a b"};
  const auto vocab = build_vocabulary(texts, 100);
  // counts: b=3, a=2, c=1
  CHECK(vocab.size() == 3);
  CHECK(vocab.token_of(0) == "b");
  CHECK(vocab.token_of(1) == "a");
  CHECK(vocab.token_of(2) == "c");
  CHECK(vocab.id_of("c") == TokenId{2});
  CHECK_FALSE(vocab.id_of("zzz").has_value());
  const auto ids = tokenize("a c d b", vocab);
  CHECK(ids.ids == std::vector<TokenId>{1, 2, 0});  // d is out of vocabulary
}

TEST_CASE("vocabulary respects max size", "[core]") {
  const std::vector<std::string> texts = {"a a a b b c"};
  const auto vocab = build_vocabulary(texts, 2);
  CHECK(vocab.size() == 2);
  CHECK(vocab.token_of(0) == "a");
  CHECK(vocab.token_of(1) == "b");
}

TEST_CASE("matrix shape and element access", "[core]") {
  Matrix m(2, 3);
  m.at(0, 0) = 1.0;
  m.at(1, 2) = -4.0;
  CHECK(m.rows == 2);
  CHECK(m.cols == 3);
  CHECK(m.at(1, 2) == -4.0);
  const Matrix copy = m;
  CHECK(copy == m);
}
