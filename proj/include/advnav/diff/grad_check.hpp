#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "advnav/diff/param_store.hpp"
#include "advnav/diff/tape.hpp"

namespace advnav::diff {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  Eigen::Index worst_row = 0, worst_col = 0;
  bool pass = false;
};

/// Central finite differences per coordinate against the tape gradient.
/// `build` constructs the scalar objective on a fresh tape from the store's
/// current values; it is re-invoked for every perturbed evaluation.
template <typename BuildFn>
GradCheckReport grad_check(BuildFn&& build, ParamStore& store, double tol) {
  const auto evaluate = [&]() {
    Tape tape;
    const Node root = build(tape, store);
    return tape.scalar(root);
  };

  store.zero_grads();
  {
    Tape tape;
    const Node root = build(tape, store);
    tape.backward(root);
  }

  GradCheckReport report;
  store.for_each([&](const std::string& name, Mat& value, Mat& grad) {
    for (Eigen::Index r = 0; r < value.rows(); ++r)
      for (Eigen::Index c = 0; c < value.cols(); ++c) {
        const double x = value(r, c);
        const double h = 1e-5 * std::max(1.0, std::abs(x));
        value(r, c) = x + h;
        const double fp = evaluate();
        value(r, c) = x - h;
        const double fm = evaluate();
        value(r, c) = x;
        const double numeric = (fp - fm) / (2.0 * h);
        const double analytic = grad(r, c);
        const double rel = std::abs(analytic - numeric) /
                           std::max({1.0, std::abs(analytic), std::abs(numeric)});
        if (rel > report.max_rel_error) {
          report.max_rel_error = rel;
          report.worst_param = name;
          report.worst_row = r;
          report.worst_col = c;
        }
      }
  });
  report.pass = report.max_rel_error < tol;
  return report;
}

}  // namespace advnav::diff
