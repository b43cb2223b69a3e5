// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <string>

#include "sparsekit/error.hpp"

namespace sparsekit {

/// Saturating activation: k applications of log(1+.) after ReLU.
///
/// fold_count 1 is the plain log1p-of-ReLU used for document weights;
/// fold_count 2 and above stack further log transformations, each one a
/// tighter soft cap on large values.
struct ActivationSpec {
  int fold_count = 1;

  void validate() const {
    if (fold_count < 1) {
      throw config_error("activation fold count must be >= 1, got " +
                         std::to_string(fold_count));
    }
  }
};

/// g_k(x) = log1p applied fold_count times to max(0, x).
/// Zero exactly when x <= 0; strictly increasing on x > 0.
inline double activate(double x, ActivationSpec spec) {
  spec.validate();
  double y = x > 0.0 ? x : 0.0;
  for (int i = 0; i < spec.fold_count; ++i) y = std::log1p(y);
  return y;
}

/// d g_k / dx. Zero for x < 0 and, by the subgradient convention, at x = 0;
/// for x > 0 it is the chain product of 1/(1 + inner value).
inline double activate_grad(double x, ActivationSpec spec) {
  spec.validate();
  if (x <= 0.0) return 0.0;
  double y = x;
  double grad = 1.0;
  for (int i = 0; i < spec.fold_count; ++i) {
    grad /= 1.0 + y;
    y = std::log1p(y);
  }
  return grad;
}

}  // namespace sparsekit
