#pragma once

#include "pvst/tensor.hpp"

#include <string>
#include <vector>

namespace pvst {

// Primitive catalog. Forward results are pure functions of the inputs; when
// any input is tape-tracked the output is registered with a backward rule.
// Every primitive rejects non-finite outputs with NumericalError.

// [m,k] x [k,n] -> [m,n].
Tensor matmul(const Tensor& a, const Tensor& b);

// x [R,C] + b [C] broadcast over rows, or x [C,H,W] + b [C] per channel.
Tensor bias_add(const Tensor& x, const Tensor& b);

Tensor relu(const Tensor& x);
Tensor sigmoid(const Tensor& x);

// Channel concatenation. All 1-D inputs give a 1-D result. With 2-D inputs
// present, every 2-D input must share the row count and 1-D inputs broadcast
// as one row repeated per point.
Tensor concat(const std::vector<Tensor>& parts);

// Element-wise multiply. Either both operands share a shape, or s is a
// per-point column ([N] or [N,1]) broadcast across the channels of x [N,C].
Tensor cmul(const Tensor& s, const Tensor& x);

// Channel-wise max over the point axis: [N,C] -> [C]. Gradient flows to the
// first row attaining each column maximum.
Tensor max_over_points(const Tensor& x);

// Channel-wise mean over the point axis: [N,C] -> [C].
Tensor mean_over_points(const Tensor& x);

// 2-D convolution, stride 1. Kernel [Co,Ci,kh,kw] with kh == kw in {1,3};
// 3x3 uses zero padding 1, 1x1 uses no padding. Input [Ci,H,W] -> [Co,H,W].
Tensor conv2d(const Tensor& x, const Tensor& kernel);

// Bilinear 2x upsampling with half-pixel centers: [C,H,W] -> [C,2H,2W].
Tensor upsample2x(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);

// Mean absolute error over all elements -> scalar.
Tensor l1_loss(const Tensor& pred, const Tensor& target);

// Mean binary cross-entropy with predictions clamped to
// [kBceEps, 1 - kBceEps] -> scalar. Finite for inputs exactly 0 or 1.
inline constexpr Scalar kBceEps = 1e-7;
Tensor bce_loss(const Tensor& pred, const Tensor& target);

// sum_i weights[i] * terms[i] over same-shape tensors.
Tensor weighted_sum(const std::vector<Tensor>& terms, const std::vector<Scalar>& weights);

// ---------------------------------------------------------------------------
// Generic dispatch used by the gradient-check suite and the CLI.

enum class Primitive {
  kMatmul,
  kBiasAdd,
  kRelu,
  kSigmoid,
  kConcat,
  kCmul,
  kMaxOverPoints,
  kMeanOverPoints,
  kConv2d,
  kUpsample2x,
  kReshape,
  kL1Loss,
  kBceLoss,
  kWeightedSum,
};

struct PrimitiveAttrs {
  Shape shape;                  // reshape target
  std::vector<Scalar> weights;  // weighted_sum coefficients
};

Tensor apply_primitive(Primitive kind, const std::vector<Tensor>& inputs,
                       const PrimitiveAttrs& attrs = {});

// Throws UnsupportedPrimitive for names outside the catalog.
Primitive primitive_from_name(const std::string& name);
const std::vector<std::string>& primitive_names();

}  // namespace pvst
