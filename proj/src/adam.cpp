#include "pvst/adam.hpp"

#include <cmath>

namespace pvst {

void adam_step(Tensor& param, const Vec& grad, AdamState& state) {
  const long n = param.size();
  if (grad.size() != n)
    throw ShapeError("adam: gradient size " + std::to_string(grad.size()) +
                     " vs parameter size " + std::to_string(n));
  if (state.m.size() == 0) {
    state.m = Vec::Zero(n);
    state.s = Vec::Zero(n);
  }
  if (state.m.size() != n || state.s.size() != n)
    throw ShapeError("adam: state size " + std::to_string(state.m.size()) +
                     " vs parameter size " + std::to_string(n));

  state.t += 1;
  state.m = state.beta1 * state.m + (1.0 - state.beta1) * grad;
  state.s.array() =
      state.beta2 * state.s.array() + (1.0 - state.beta2) * grad.array().square();
  const Scalar bc1 = 1.0 - std::pow(state.beta1, static_cast<Scalar>(state.t));
  const Scalar bc2 = 1.0 - std::pow(state.beta2, static_cast<Scalar>(state.t));
  param.mutable_data().array() -=
      state.lr * (state.m.array() / bc1) /
      ((state.s.array() / bc2).sqrt() + state.eps);
}

}  // namespace pvst
