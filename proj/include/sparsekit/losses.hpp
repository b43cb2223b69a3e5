// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sparsekit/error.hpp"
#include "sparsekit/matrix.hpp"
#include "sparsekit/sparse_vector.hpp"

namespace sparsekit {

/// Training-objective knobs: regularizer weight, mask threshold, and the
/// distillation temperature.
struct LossConfig {
  double lambda_d = 0.0;
  int threshold_t = 0;
  bool mask_enabled = false;
  double temperature = 1.0;

  void validate() const {
    if (lambda_d < 0.0) throw config_error("lambda_d must be >= 0");
    if (threshold_t < 0) throw config_error("threshold_t must be >= 0");
    if (!(temperature > 0.0)) throw config_error("temperature must be > 0");
  }
};

/// Value and gradients of a FLOPS-style regularizer over a document batch.
/// doc_grads[i][e] is d(value)/d(weight of entry e of document i); masked
/// documents carry exactly zero gradients. mask[i] is true when document i
/// participates (l0 norm above the threshold).
struct FlopsLossResult {
  double value = 0.0;
  std::vector<std::vector<double>> doc_grads;
  std::vector<bool> mask;

  double masked_fraction() const {
    if (mask.empty()) return 0.0;
    std::size_t masked = 0;
    for (bool m : mask) {
      if (!m) ++masked;
    }
    return static_cast<double>(masked) / static_cast<double>(mask.size());
  }
};

namespace detail {

// Shared core of the plain and masked losses:
//   value = sum_j ((1/N) sum_i m_i * w_j^(i) / idf_j)^2
// with d(value)/d(w_j^(i)) = 2 * abar_j / (N * idf_j) for participating docs.
// The mask is data, not a differentiable quantity, and the denominator stays
// at the full batch size N.
inline FlopsLossResult flops_core(std::span<const SparseVector> batch,
                                  const IdfTable& idf,
                                  std::vector<bool> mask) {
  if (batch.empty()) throw input_error("flops loss needs a nonempty batch");
  for (const auto& doc : batch) {
    if (doc.dim() != idf.size()) {
      throw dimension_error("batch document dimension does not match idf table");
    }
  }
  const double n = static_cast<double>(batch.size());
  std::vector<double> mean(idf.size(), 0.0);
  std::vector<char> seen(idf.size(), 0);
  std::vector<TokenId> touched;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    if (!mask[i]) continue;
    for (const auto& e : batch[i].entries()) {
      if (!seen[e.token]) {
        seen[e.token] = 1;
        touched.push_back(e.token);
      }
      mean[e.token] += e.weight / idf[e.token] / n;
    }
  }
  FlopsLossResult out;
  out.mask = std::move(mask);
  for (TokenId j : touched) out.value += mean[j] * mean[j];
  out.doc_grads.resize(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    out.doc_grads[i].assign(batch[i].size(), 0.0);
    if (!out.mask[i]) continue;
    const auto entries = batch[i].entries();
    for (std::size_t e = 0; e < entries.size(); ++e) {
      const TokenId j = entries[e].token;
      out.doc_grads[i][e] = 2.0 * mean[j] / (n * idf[j]);
    }
  }
  return out;
}

}  // namespace detail

/// FLOPS regularizer: sum over the vocabulary of squared batch-mean
/// idf-normalized weights. Zero exactly when every representation is empty.
inline FlopsLossResult flops_loss(std::span<const SparseVector> batch,
                                  const IdfTable& idf) {
  return detail::flops_core(batch, idf,
                            std::vector<bool>(batch.size(), true));
}

/// Masked variant: documents whose l0 norm is at or below threshold_t are
/// excluded from the batch mean and receive exactly zero gradient, while the
/// denominator stays at the full batch size.
inline FlopsLossResult l0_mask_flops_loss(std::span<const SparseVector> batch,
                                          const IdfTable& idf,
                                          int threshold_t) {
  if (threshold_t < 0) throw config_error("threshold_t must be >= 0");
  std::vector<bool> mask(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    mask[i] = l0_norm(batch[i]) > static_cast<std::size_t>(threshold_t);
  }
  return detail::flops_core(batch, idf, std::move(mask));
}

/// Distillation ranking loss and its gradient on the student scores.
struct RankingLossResult {
  double value = 0.0;
  Matrix score_grads;
};

namespace detail {

inline std::vector<double> log_softmax_row(const double* row, std::size_t m,
                                           double temperature) {
  double max_v = row[0] / temperature;
  for (std::size_t k = 1; k < m; ++k) {
    max_v = std::max(max_v, row[k] / temperature);
  }
  double sum = 0.0;
  for (std::size_t k = 0; k < m; ++k) sum += std::exp(row[k] / temperature - max_v);
  const double log_z = max_v + std::log(sum);
  std::vector<double> out(m);
  for (std::size_t k = 0; k < m; ++k) out[k] = row[k] / temperature - log_z;
  return out;
}

}  // namespace detail

/// Mean over rows of KL(softmax(teacher/tau) || softmax(student/tau)).
/// Each row holds one query's scores over the same candidate documents.
inline RankingLossResult ranking_loss_kd(const Matrix& student,
                                         const Matrix& teacher,
                                         double temperature) {
  if (student.rows != teacher.rows || student.cols != teacher.cols) {
    throw dimension_error("student and teacher score matrices differ in shape");
  }
  if (student.rows == 0 || student.cols == 0) {
    throw input_error("ranking loss needs a nonempty score matrix");
  }
  if (!(temperature > 0.0)) throw config_error("temperature must be > 0");
  for (double v : student.values) {
    if (!std::isfinite(v)) throw input_error("non-finite student score");
  }
  for (double v : teacher.values) {
    if (!std::isfinite(v)) throw input_error("non-finite teacher score");
  }

  const std::size_t n = student.rows;
  const std::size_t m = student.cols;
  RankingLossResult out;
  out.score_grads = Matrix(n, m);
  for (std::size_t r = 0; r < n; ++r) {
    const auto log_p =
        detail::log_softmax_row(teacher.values.data() + r * m, m, temperature);
    const auto log_q =
        detail::log_softmax_row(student.values.data() + r * m, m, temperature);
    for (std::size_t k = 0; k < m; ++k) {
      const double p = std::exp(log_p[k]);
      out.value += p * (log_p[k] - log_q[k]) / static_cast<double>(n);
      out.score_grads.at(r, k) = (std::exp(log_q[k]) - p) /
                                 (temperature * static_cast<double>(n));
    }
  }
  return out;
}

/// Full objective: rank_value + ramp_factor * lambda_d * reg_value.
inline double total_loss(double rank_value, double reg_value,
                         const LossConfig& cfg, double ramp_factor) {
  cfg.validate();
  if (ramp_factor < 0.0 || ramp_factor > 1.0) {
    throw config_error("ramp_factor must lie in [0, 1]");
  }
  return rank_value + ramp_factor * cfg.lambda_d * reg_value;
}

}  // namespace sparsekit
