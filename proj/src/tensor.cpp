#include "pvst/tensor.hpp"

#include <cstdio>
#include <sstream>

namespace pvst {

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

Tensor::Tensor(Shape shape, Vec data) : shape_(std::move(shape)) {
  if (shape_size(shape_) != data.size())
    throw ShapeError("tensor: shape " + shape_str(shape_) + " does not match " +
                     std::to_string(data.size()) + " elements");
  for (int d : shape_)
    if (d <= 0) throw ShapeError("tensor: non-positive extent in " + shape_str(shape_));
  data_ = std::make_shared<Vec>(std::move(data));
}

Tensor Tensor::zeros(Shape shape) {
  Vec v = Vec::Zero(shape_size(shape));
  return Tensor(std::move(shape), std::move(v));
}

Tensor Tensor::full(Shape shape, Scalar value) {
  Vec v = Vec::Constant(shape_size(shape), value);
  return Tensor(std::move(shape), std::move(v));
}

Tensor Tensor::scalar(Scalar value) {
  Vec v(1);
  v[0] = value;
  return Tensor(Shape{}, std::move(v));
}

Tensor Tensor::from_vector(Vec v) {
  const int n = static_cast<int>(v.size());
  return Tensor(Shape{n}, std::move(v));
}

Tensor Tensor::from_matrix(const Mat& m) {
  Vec v(m.size());
  Eigen::Map<Mat>(v.data(), m.rows(), m.cols()) = m;
  return Tensor(Shape{static_cast<int>(m.rows()), static_cast<int>(m.cols())},
                std::move(v));
}

Vec& Tensor::mutable_data() {
  if (!data_) throw ContractError("tensor: mutable access to empty tensor");
  if (data_.use_count() > 1) data_ = std::make_shared<Vec>(*data_);
  return *data_;
}

Eigen::Map<const Mat> Tensor::mat() const {
  if (rank() != 2)
    throw ShapeError("tensor: mat() on rank-" + std::to_string(rank()) + " tensor");
  return {data_->data(), dim(0), dim(1)};
}

Eigen::Map<const Mat> Tensor::mat(int rows, int cols) const {
  if (static_cast<long>(rows) * cols != size())
    throw ShapeError("tensor: cannot view " + std::to_string(size()) +
                     " elements as " + std::to_string(rows) + "x" + std::to_string(cols));
  return {data_->data(), rows, cols};
}

Scalar Tensor::value() const {
  if (size() != 1) throw ContractError("tensor: value() on non-scalar " + shape_str(shape_));
  return (*data_)[0];
}

const Vec& GradientMap::at(const Tensor& leaf) const { return at(leaf.node()); }

const Vec& GradientMap::at(int node) const {
  auto it = grads_.find(node);
  if (it == grads_.end())
    throw ContractError("gradient map: node " + std::to_string(node) + " is not a leaf");
  return it->second;
}

Tensor Tape::leaf(const Tensor& value) {
  if (value.empty()) throw ContractError("tape: cannot register empty tensor");
  if (consumed_) throw ContractError("tape: already consumed by backward");
  Node n;
  n.shape = value.shape();
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  Tensor bound = value;
  bound.tape_ = this;
  bound.node_ = static_cast<int>(nodes_.size()) - 1;
  return bound;
}

int Tape::record(std::vector<int> parents, const Shape& out_shape, BackwardFn backward) {
  if (consumed_) throw ContractError("tape: already consumed by backward");
  Node n;
  n.parents = std::move(parents);
  n.shape = out_shape;
  n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return static_cast<int>(nodes_.size()) - 1;
}

void Tape::bind(Tensor& out, int id) {
  out.tape_ = this;
  out.node_ = id;
}

GradientMap Tape::backward(const Tensor& loss) {
  if (consumed_) throw ContractError("tape: backward called twice (single-use tape)");
  if (loss.node() < 0 || loss.tape() == nullptr)
    throw NoTapeError("backward: loss is detached from any tape");
  if (loss.tape() != this) throw ContractError("backward: loss lives on another tape");
  if (loss.size() != 1)
    throw ContractError("backward: loss must be scalar, got " + shape_str(loss.shape()));

  std::vector<Vec> grads(nodes_.size());
  std::vector<char> touched(nodes_.size(), 0);
  const int start = loss.node();
  grads[static_cast<size_t>(start)] = Vec::Ones(1);
  touched[static_cast<size_t>(start)] = 1;

  for (int i = start; i >= 0; --i) {
    const auto ui = static_cast<size_t>(i);
#ifdef PVST_TAPE_DEBUG
    if (i >= 118 && i <= 170)
      std::fprintf(stderr, "[tape] node %d touched=%d leaf=%d parents=%zu gnorm=%.3e\n",
                   i, int(touched[ui]), int(nodes_[ui].is_leaf), nodes_[ui].parents.size(),
                   touched[ui] && grads[ui].size() ? grads[ui].cwiseAbs().maxCoeff() : -1.0);
#endif
    if (!touched[ui] || nodes_[ui].is_leaf) continue;
    const Node& node = nodes_[ui];
    std::vector<Vec*> gin(node.parents.size(), nullptr);
    for (size_t k = 0; k < node.parents.size(); ++k) {
      const int p = node.parents[k];
      if (p < 0) continue;
      const auto up = static_cast<size_t>(p);
      if (!touched[up]) {
        grads[up] = Vec::Zero(shape_size(nodes_[up].shape));
        touched[up] = 1;
      }
      gin[k] = &grads[up];
    }
    node.backward(grads[ui], gin);
    grads[ui].resize(0);  // this node's gradient is no longer needed
  }

  GradientMap out;
  for (size_t i = 0; i < nodes_.size(); ++i) {
    if (!nodes_[i].is_leaf) continue;
    const int id = static_cast<int>(i);
    if (touched[i] && grads[i].size() > 0)
      out.grads_.emplace(id, std::move(grads[i]));
    else
      out.grads_.emplace(id, Vec::Zero(shape_size(nodes_[i].shape)));
  }

  consumed_ = true;
  nodes_.clear();
  return out;
}

GradientMap backward(const Tensor& loss) {
  if (loss.tape() == nullptr) throw NoTapeError("backward: loss is detached from any tape");
  return loss.tape()->backward(loss);
}

}  // namespace pvst
