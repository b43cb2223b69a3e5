// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <vector>

#include "sparsekit/encoder.hpp"
#include "sparsekit/error.hpp"
#include "sparsekit/pipeline.hpp"
#include "sparsekit/trainer.hpp"

namespace sparsekit {

/// Which training knob a sweep varies.
enum class SweepAxis { kLambda, kThreshold, kFoldCount };

inline std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::kLambda: return "lambda";
    case SweepAxis::kThreshold: return "threshold";
    case SweepAxis::kFoldCount: return "fold_count";
  }
  throw config_error("unknown sweep axis");
}

inline SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "lambda") return SweepAxis::kLambda;
  if (name == "threshold") return SweepAxis::kThreshold;
  if (name == "fold_count") return SweepAxis::kFoldCount;
  throw config_error("unknown sweep axis '" + name + "'");
}

struct SweepSpec {
  SweepAxis axis = SweepAxis::kLambda;
  std::vector<double> values;
  TrainConfig base;
};

/// One sweep point. A failed run (divergence, bad config) is recorded with
/// failed = true and the error text instead of aborting the whole sweep.
struct SweepPoint {
  double axis_value = 0.0;
  EvalResult eval;
  bool collapsed = false;
  double final_doc_len = 0.0;
  bool failed = false;
  std::string error;
};

/// Applies one axis value to a copy of the base config. Threshold and fold
/// values must be nonnegative / positive integers respectively.
inline TrainConfig apply_axis(const TrainConfig& base, SweepAxis axis,
                              double value) {
  TrainConfig cfg = base;
  switch (axis) {
    case SweepAxis::kLambda:
      cfg.loss.lambda_d = value;
      break;
    case SweepAxis::kThreshold: {
      const int t = static_cast<int>(value);
      if (static_cast<double>(t) != value || t < 0) {
        throw config_error("threshold sweep values must be nonnegative integers");
      }
      cfg.loss.threshold_t = t;
      break;
    }
    case SweepAxis::kFoldCount: {
      const int k = static_cast<int>(value);
      if (static_cast<double>(k) != value || k < 1) {
        throw config_error("fold_count sweep values must be positive integers");
      }
      cfg.encoder.k_rank = k;
      cfg.encoder.k_reg = k;
      break;
    }
  }
  return cfg;
}

/// Trains one model per axis value and evaluates each on the held-out
/// split. Runs are independent and individually seeded: point i uses
/// base.seed + i.
inline std::vector<SweepPoint> run_sweep(const Task& task,
                                         const SweepSpec& spec) {
  if (spec.values.empty()) throw config_error("sweep needs at least one value");
  std::vector<SweepPoint> points;
  points.reserve(spec.values.size());
  for (std::size_t i = 0; i < spec.values.size(); ++i) {
    const double value = spec.values[i];
    SweepPoint point;
    point.axis_value = value;
    try {
      TrainConfig cfg = apply_axis(spec.base, spec.axis, value);
      cfg.seed = spec.base.seed + i;
      cfg.validate();
      ToyScorer scorer(task.vocab_size, cfg.embed_dim, cfg.seed, cfg.init_scale);
      const TrainReport report = train(task, cfg, scorer);
      point.eval = evaluate_model(task, scorer, cfg.encoder, QuerySplit::kEval);
      point.collapsed = report.collapsed;
      point.final_doc_len = report.final_doc_len;
    } catch (const error& e) {
      point.failed = true;
      point.error = e.what();
    }
    points.push_back(std::move(point));
  }
  return points;
}

}  // namespace sparsekit
