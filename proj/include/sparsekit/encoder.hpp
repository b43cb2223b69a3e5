// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sparsekit/activation.hpp"
#include "sparsekit/error.hpp"
#include "sparsekit/matrix.hpp"
#include "sparsekit/random.hpp"
#include "sparsekit/sparse_vector.hpp"
#include "sparsekit/vocabulary.hpp"

namespace sparsekit {

/// Raw position x vocabulary scores produced by a token scorer.
using TokenLogits = Matrix;

/// Gradient on a single logit cell, routed back to the scorer.
struct LogitGrad {
  std::uint32_t position;
  TokenId token;
  double value;
};

/// Pluggable token-importance model. forward() must be deterministic given
/// the current parameters. Calls are counted so the inference-free contract
/// on the query path can be checked.
class TokenScorer {
 public:
  virtual ~TokenScorer() = default;

  TokenLogits forward(const TokenizedText& doc) const {
    ++forward_calls_;
    return do_forward(doc);
  }

  std::size_t forward_calls() const noexcept { return forward_calls_; }

  virtual std::size_t vocab_size() const = 0;
  virtual std::size_t parameter_count() const = 0;
  virtual std::span<double> parameters() = 0;
  virtual std::span<const double> parameters() const = 0;

  /// Accumulates d(loss)/d(parameter) into out, given sparse gradients on
  /// the logits this scorer produced for doc.
  virtual void accumulate_param_grad(const TokenizedText& doc,
                                     std::span<const LogitGrad> grads,
                                     std::span<double> out) const = 0;

 private:
  virtual TokenLogits do_forward(const TokenizedText& doc) const = 0;

  mutable std::size_t forward_calls_ = 0;
};

inline constexpr double kToyScorerDefaultInitScale = 2.5;
inline constexpr double kToyScorerDefaultBias = -1.0;

/// Reference scorer: input embeddings E (vocab x d), output projection
/// U (d x vocab) and bias b (vocab), so logits[i,.] = E[t_i] * U + b.
///
/// Embeddings start uniform in +-init_scale/sqrt(d) and the bias at -1, which
/// leaves a thin positive tail: initial representations are sparse-ish but
/// nonempty, so both the ranking and the regularization paths see gradient
/// from step one.
class ToyScorer final : public TokenScorer {
 public:
  ToyScorer(std::size_t vocab_size, std::size_t embed_dim, std::uint64_t seed,
            double init_scale = kToyScorerDefaultInitScale,
            double bias_init = kToyScorerDefaultBias)
      : vocab_(vocab_size), dim_(embed_dim) {
    if (vocab_ == 0 || dim_ == 0) {
      throw config_error("scorer needs a positive vocab size and embed dim");
    }
    params_.resize(parameter_count(), 0.0);
    Rng rng(seed);
    const double bound = init_scale / std::sqrt(static_cast<double>(dim_));
    for (std::size_t p = 0; p < 2 * vocab_ * dim_; ++p) {
      params_[p] = uniform_range(rng, -bound, bound);
    }
    for (std::size_t j = 0; j < vocab_; ++j) {
      params_[bias_index(static_cast<TokenId>(j))] = bias_init;
    }
  }

  std::size_t vocab_size() const override { return vocab_; }
  std::size_t embed_dim() const noexcept { return dim_; }
  std::size_t parameter_count() const override { return 2 * vocab_ * dim_ + vocab_; }
  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const override { return params_; }

  // Flat parameter layout: E rows, then U rows, then b.
  std::size_t embedding_index(TokenId token, std::size_t i) const {
    return token * dim_ + i;
  }
  std::size_t projection_index(std::size_t i, TokenId token) const {
    return vocab_ * dim_ + i * vocab_ + token;
  }
  std::size_t bias_index(TokenId token) const {
    return 2 * vocab_ * dim_ + token;
  }

  void accumulate_param_grad(const TokenizedText& doc,
                             std::span<const LogitGrad> grads,
                             std::span<double> out) const override {
    if (out.size() != parameter_count()) {
      throw input_error("parameter gradient span has wrong size");
    }
    for (const auto& g : grads) {
      if (g.position >= doc.size() || g.token >= vocab_) {
        throw input_error("logit gradient outside the logits shape");
      }
      const TokenId t = doc.ids[g.position];
      out[bias_index(g.token)] += g.value;
      for (std::size_t i = 0; i < dim_; ++i) {
        out[projection_index(i, g.token)] +=
            params_[embedding_index(t, i)] * g.value;
        out[embedding_index(t, i)] +=
            params_[projection_index(i, g.token)] * g.value;
      }
    }
  }

 private:
  TokenLogits do_forward(const TokenizedText& doc) const override {
    TokenLogits logits(doc.size(), vocab_);
    for (std::size_t p = 0; p < doc.size(); ++p) {
      const TokenId t = doc.ids[p];
      if (t >= vocab_) {
        throw input_error("token id " + std::to_string(t) +
                          " outside scorer vocabulary");
      }
      double* row = logits.values.data() + p * vocab_;
      const double* bias = params_.data() + 2 * vocab_ * dim_;
      for (std::size_t j = 0; j < vocab_; ++j) row[j] = bias[j];
      for (std::size_t i = 0; i < dim_; ++i) {
        const double e = params_[embedding_index(t, i)];
        const double* u_row = params_.data() + vocab_ * dim_ + i * vocab_;
        for (std::size_t j = 0; j < vocab_; ++j) row[j] += e * u_row[j];
      }
    }
    return logits;
  }

  std::size_t vocab_;
  std::size_t dim_;
  std::vector<double> params_;
};

/// Fold counts for the ranking and regularization representations plus the
/// input truncation limit. Coupled runs use k_rank == k_reg; the decoupled
/// variants split them.
struct EncoderConfig {
  int k_rank = 1;
  int k_reg = 1;
  std::size_t max_input_length = 64;

  void validate() const {
    if (k_rank < 1) throw config_error("k_rank must be >= 1");
    if (k_reg < 1) throw config_error("k_reg must be >= 1");
    if (max_input_length == 0) {
      throw config_error("max_input_length must be positive");
    }
  }
};

/// Forward result of document encoding plus the trace needed for backward.
/// rank_repr and reg_repr always share one support.
struct DocumentEncoding {
  SparseVector rank_repr;
  SparseVector reg_repr;

  struct TraceEntry {
    TokenId token;
    double pooled;                  // max-pooled raw logit, > 0
    std::uint32_t argmax_position;  // lowest position attaining the max
  };
  std::vector<TraceEntry> trace;
  TokenizedText input;  // truncated token sequence the scorer actually saw
};

/// Document side: w_j = idf_j * g_k(max_i logits[i, j]), one representation
/// per fold count. Pooling raw logits before the monotone activation gives
/// the same result as activating per position.
inline DocumentEncoding encode_document_traced(const TokenizedText& doc,
                                               const TokenScorer& scorer,
                                               const EncoderConfig& cfg,
                                               const IdfTable& idf) {
  cfg.validate();
  if (idf.size() != scorer.vocab_size()) {
    throw dimension_error("idf table size does not match scorer vocabulary");
  }
  DocumentEncoding out;
  out.input.ids.assign(
      doc.ids.begin(),
      doc.ids.begin() +
          std::min<std::size_t>(doc.size(), cfg.max_input_length));
  const std::size_t vocab = scorer.vocab_size();
  if (out.input.empty()) {
    out.rank_repr = SparseVector(vocab);
    out.reg_repr = SparseVector(vocab);
    return out;
  }

  const TokenLogits logits = scorer.forward(out.input);
  if (logits.rows != out.input.size() || logits.cols != vocab) {
    throw dimension_error("scorer produced logits of unexpected shape");
  }

  const ActivationSpec rank_act{cfg.k_rank};
  const ActivationSpec reg_act{cfg.k_reg};
  std::vector<SparseEntry> rank_entries;
  std::vector<SparseEntry> reg_entries;
  for (std::size_t j = 0; j < vocab; ++j) {
    double best = logits.at(0, j);
    std::uint32_t best_pos = 0;
    for (std::size_t p = 1; p < logits.rows; ++p) {
      const double v = logits.at(p, j);
      if (v > best) {  // strict: ties resolve to the lowest position
        best = v;
        best_pos = static_cast<std::uint32_t>(p);
      }
    }
    if (best > 0.0) {
      const TokenId token = static_cast<TokenId>(j);
      rank_entries.push_back({token, idf[token] * activate(best, rank_act)});
      reg_entries.push_back({token, idf[token] * activate(best, reg_act)});
      out.trace.push_back({token, best, best_pos});
    }
  }
  out.rank_repr = SparseVector(vocab, std::move(rank_entries));
  out.reg_repr = SparseVector(vocab, std::move(reg_entries));
  return out;
}

inline std::pair<SparseVector, SparseVector> encode_document(
    const TokenizedText& doc, const TokenScorer& scorer,
    const EncoderConfig& cfg, const IdfTable& idf) {
  auto enc = encode_document_traced(doc, scorer, cfg, idf);
  return {std::move(enc.rank_repr), std::move(enc.reg_repr)};
}

/// Query side, inference-free: weight idf_j for every distinct token present.
/// Never touches a scorer.
inline SparseVector encode_query(const TokenizedText& query,
                                 const IdfTable& idf) {
  std::vector<TokenId> distinct(query.ids.begin(), query.ids.end());
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  std::vector<SparseEntry> entries;
  entries.reserve(distinct.size());
  for (TokenId t : distinct) {
    if (t >= idf.size()) {
      throw dimension_error("query token id " + std::to_string(t) +
                            " outside the idf table");
    }
    entries.push_back({t, idf[t]});
  }
  return SparseVector(idf.size(), std::move(entries));
}

/// Backward through encode_document_traced. upstream_rank / upstream_reg are
/// gradients on the stored weights of rank_repr / reg_repr, aligned with the
/// trace. Gradient flows only through each token's argmax position; idf is a
/// constant multiplier. Accumulates into param_grad.
inline void encode_backward(const DocumentEncoding& enc,
                            const TokenScorer& scorer,
                            const EncoderConfig& cfg, const IdfTable& idf,
                            std::span<const double> upstream_rank,
                            std::span<const double> upstream_reg,
                            std::span<double> param_grad) {
  cfg.validate();
  if (upstream_rank.size() != enc.trace.size() ||
      upstream_reg.size() != enc.trace.size()) {
    throw input_error("upstream gradient size does not match the support");
  }
  if (enc.trace.empty()) return;
  const ActivationSpec rank_act{cfg.k_rank};
  const ActivationSpec reg_act{cfg.k_reg};
  std::vector<LogitGrad> grads;
  grads.reserve(enc.trace.size());
  for (std::size_t e = 0; e < enc.trace.size(); ++e) {
    const auto& t = enc.trace[e];
    const double d_pooled =
        idf[t.token] * (upstream_rank[e] * activate_grad(t.pooled, rank_act) +
                        upstream_reg[e] * activate_grad(t.pooled, reg_act));
    grads.push_back({t.argmax_position, t.token, d_pooled});
  }
  scorer.accumulate_param_grad(enc.input, grads, param_grad);
}

/// One-call form: forward, then backward with the given upstream gradients.
/// Returns d(loss)/d(parameter) for every scorer parameter.
inline std::vector<double> encode_document_with_grad(
    const TokenizedText& doc, const TokenScorer& scorer,
    const EncoderConfig& cfg, const IdfTable& idf,
    std::span<const double> upstream_rank,
    std::span<const double> upstream_reg) {
  auto enc = encode_document_traced(doc, scorer, cfg, idf);
  std::vector<double> grad(scorer.parameter_count(), 0.0);
  encode_backward(enc, scorer, cfg, idf, upstream_rank, upstream_reg, grad);
  return grad;
}

}  // namespace sparsekit
