// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <string>
#include <vector>

#include "kanli/param_store.hpp"

namespace kanli {

struct ParamGradError {
  std::string name;
  std::size_t count = 0;
  double max_abs_error = 0.0;
  /// max |analytic - numeric| / max(|analytic|_inf, |numeric|_inf) for this
  /// parameter; 0 when both gradients vanish.
  double rel_error = 0.0;
};

struct GradCheckReport {
  std::vector<ParamGradError> params;
  double max_rel_error = 0.0;
  bool passed = true;
};

/// Compares backward() against central differences (f(t+h) - f(t-h)) / 2h for
/// every scalar of every parameter. f must rebuild its graph from the store on
/// every call and be deterministic.
GradCheckReport finite_diff_check(const std::function<Var(ParamStore&)>& f,
                                  ParamStore& store, double h, double tol);

}  // namespace kanli
