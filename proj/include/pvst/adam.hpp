#pragma once

#include "pvst/tensor.hpp"

namespace pvst {

// Per-parameter Adam accumulators with standard bias correction.
struct AdamState {
  Vec m, s;
  long t = 0;
  Scalar lr = 1e-3;
  Scalar beta1 = 0.9;
  Scalar beta2 = 0.999;
  Scalar eps = 1e-8;

  AdamState() = default;
  explicit AdamState(long n, Scalar lr_ = 1e-3)
      : m(Vec::Zero(n)), s(Vec::Zero(n)), lr(lr_) {}
};

void adam_step(Tensor& param, const Vec& grad, AdamState& state);

}  // namespace pvst
