// SPDX-License-Identifier: Apache-2.0
#include "kanli/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "kanli/errors.hpp"

namespace kanli {

GradCheckReport finite_diff_check(const std::function<Var(ParamStore&)>& f,
                                  ParamStore& store, double h, double tol) {
  if (!(h > 0.0)) throw ContractError("finite difference step must be positive");

  store.zero_grad();
  backward(f(store));

  GradCheckReport report;
  for (auto& [name, var] : store) {
    const Tensor analytic = var.grad();
    Tensor& theta = var.mutable_value();
    ParamGradError entry{name, theta.size(), 0.0, 0.0};
    double scale = 0.0;
    for (std::size_t i = 0; i < theta.size(); ++i) {
      const double saved = theta[i];
      theta[i] = saved + h;
      const double up = f(store).value().item();
      theta[i] = saved - h;
      const double down = f(store).value().item();
      theta[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      entry.max_abs_error = std::max(entry.max_abs_error, std::abs(analytic[i] - numeric));
      scale = std::max({scale, std::abs(analytic[i]), std::abs(numeric)});
    }
    entry.rel_error = scale > 0.0 ? entry.max_abs_error / scale : 0.0;
    report.max_rel_error = std::max(report.max_rel_error, entry.rel_error);
    if (!(entry.rel_error < tol)) report.passed = false;
    report.params.push_back(entry);
  }
  return report;
}

}  // namespace kanli
