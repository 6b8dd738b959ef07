// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

#include "fwqa/common.hpp"
#include "fwqa/params.hpp"
#include "fwqa/tape.hpp"

namespace fwqa {

struct GradCheckReport {
  double max_rel_error = 0.0;
  bool pass = false;
  std::string worst_param;
  int worst_index = -1;
  std::size_t coords_checked = 0;
};

/// Compare the tape's analytic gradient of a scalar function against central
/// finite differences, coordinate by coordinate over every parameter in
/// `params`. `f` rebuilds the computation on the given tape and returns the
/// scalar root; it must bind parameters through Tape::param so the analytic
/// gradients land in Parameter::grad.
///
/// Relative error per coordinate: |a - n| / max(|a|, |n|, 1e-8).
template <typename Scalar>
GradCheckReport grad_check(const std::function<Var<Scalar>(Tape<Scalar>&)>& f,
                           ParamRegistry<Scalar>& params, double h, double tol) {
  if (h <= 0) throw ArgumentError("grad_check: h must be positive");
  GradCheckReport report;

  Tape<Scalar> tape;
  params.zero_grads();
  Var<Scalar> root = f(tape);
  tape.backward(root);

  auto eval = [&]() -> double {
    tape.reset();
    return static_cast<double>(tape.value(f(tape))(0, 0));
  };

  for (auto* p : params) {
    for (Eigen::Index idx = 0; idx < p->value.size(); ++idx) {
      Scalar saved = p->value(idx);
      p->value(idx) = saved + static_cast<Scalar>(h);
      double up = eval();
      p->value(idx) = saved - static_cast<Scalar>(h);
      double down = eval();
      p->value(idx) = saved;

      double numeric = (up - down) / (2.0 * h);
      double analytic = static_cast<double>(p->grad(idx));
      double denom = std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
      double rel = std::fabs(analytic - numeric) / denom;
      ++report.coords_checked;
      if (rel > report.max_rel_error) {
        report.max_rel_error = rel;
        report.worst_param = p->name;
        report.worst_index = static_cast<int>(idx);
      }
    }
  }
  report.pass = report.max_rel_error <= tol;
  return report;
}

}  // namespace fwqa
