#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <string>

#include "advnav/diff/param_store.hpp"

namespace advnav::diff {

/// Plain gradient descent, the no-regret update of the adversarial phase.
struct SgdOptimizer {
  double lr = 1e-4;

  void step(ParamStore& store) {
    store.for_each([&](const std::string&, Mat& value, Mat& grad) {
      value -= lr * grad;
    });
    ++store.step;
  }
};

/// Adam with bias correction; moment state lives in the optimizer, keyed by
/// parameter name, and can be round-tripped through checkpoints.
struct AdamOptimizer {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;
  std::map<std::string, Mat> m, v;

  void step(ParamStore& store) {
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    store.for_each([&](const std::string& name, Mat& value, Mat& grad) {
      auto mi = m.find(name);
      if (mi == m.end()) {
        m[name] = Mat::Zero(value.rows(), value.cols());
        v[name] = Mat::Zero(value.rows(), value.cols());
        mi = m.find(name);
      }
      Mat& mm = mi->second;
      Mat& vv = v[name];
      mm = beta1 * mm + (1.0 - beta1) * grad;
      vv = beta2 * vv + (1.0 - beta2) * grad.cwiseProduct(grad);
      const Mat m_hat = mm / c1;
      const Mat v_hat = vv / c2;
      value -= lr * (m_hat.array() / (v_hat.array().sqrt() + eps)).matrix();
    });
    ++store.step;
  }
};

}  // namespace advnav::diff
