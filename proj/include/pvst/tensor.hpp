#pragma once

#include "pvst/types.hpp"

#include <functional>
#include <map>
#include <memory>

namespace pvst {

class Tape;

// Dense row-major tensor of 64-bit floats. Storage is shared between copies;
// call mutable_data() before writing so unrelated holders are not disturbed.
// A tensor participates in differentiation when it is bound to a tape node.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, Vec data);

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, Scalar value);
  static Tensor scalar(Scalar value);
  static Tensor from_vector(Vec v);           // rank 1
  static Tensor from_matrix(const Mat& m);    // rank 2

  const Shape& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<size_t>(i)]; }
  long size() const { return data_ ? data_->size() : 0; }
  bool empty() const { return !data_; }

  const Vec& data() const { return *data_; }
  Vec& mutable_data();

  // Rank-2 views of the flat storage.
  Eigen::Map<const Mat> mat() const;
  Eigen::Map<const Mat> mat(int rows, int cols) const;

  Scalar value() const;  // single-element tensors only

  bool requires_grad() const { return node_ >= 0; }
  int node() const { return node_; }
  Tape* tape() const { return tape_; }

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<Vec> data_;
  Tape* tape_ = nullptr;
  int node_ = -1;
};

// Gradients of a backward pass, keyed by leaf node id. Every leaf of the tape
// is present; leaves the loss does not depend on carry zero arrays.
class GradientMap {
 public:
  const Vec& at(const Tensor& leaf) const;
  const Vec& at(int node) const;
  bool contains(int node) const { return grads_.count(node) > 0; }
  const std::map<int, Vec>& all() const { return grads_; }

 private:
  friend class Tape;
  std::map<int, Vec> grads_;
};

// Reverse-mode tape. Node order equals creation order; backward() walks it in
// strict reverse. A tape is single-use: backward() releases all saved
// activations and rejects any further recording or differentiation.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers a differentiable leaf sharing the value's storage.
  Tensor leaf(const Tensor& value);

  // Records one primitive application. `parents` holds the node ids of the
  // tracked inputs (-1 entries for constants); `backward` receives the output
  // gradient and accumulator pointers aligned with `parents` (null for
  // constants). Returns the new node id. Used by the primitives in ops.hpp.
  using BackwardFn =
      std::function<void(const Vec& gout, const std::vector<Vec*>& gin)>;
  int record(std::vector<int> parents, const Shape& out_shape, BackwardFn backward);

  // Marks `out` as produced by node `id` on this tape.
  void bind(Tensor& out, int id);

  GradientMap backward(const Tensor& loss);

  int num_nodes() const { return static_cast<int>(nodes_.size()); }
  bool consumed() const { return consumed_; }

 private:
  struct Node {
    std::vector<int> parents;
    Shape shape;
    BackwardFn backward;
    bool is_leaf = false;
  };
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

// Convenience wrapper dispatching to the loss tensor's tape.
GradientMap backward(const Tensor& loss);

}  // namespace pvst
