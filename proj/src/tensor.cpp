#include "ncdre/tensor.hpp"

#include <sstream>

namespace ncdre {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << 'x';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

std::pair<Index, Index> storage_extent(const Shape& shape) {
  if (shape.empty()) return {1, 1};
  if (shape.size() == 1) return {1, shape[0]};
  Index rows = 1;
  for (std::size_t i = 0; i + 1 < shape.size(); ++i) rows *= shape[i];
  return {rows, shape.back()};
}

template <typename Scalar>
Tensor<Scalar>::Tensor(Matrix<Scalar> value) : node_(std::make_shared<Node>()) {
  node_->shape = {value.rows(), value.cols()};
  node_->value = std::move(value);
}

template <typename Scalar>
Tensor<Scalar>::Tensor(Matrix<Scalar> value, Shape shape) : node_(std::make_shared<Node>()) {
  const auto [r, c] = storage_extent(shape);
  if (value.rows() != r || value.cols() != c) {
    throw ShapeError("tensor value " + std::to_string(value.rows()) + "x" +
                     std::to_string(value.cols()) + " does not match shape " + to_string(shape));
  }
  node_->shape = std::move(shape);
  node_->value = std::move(value);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::parameter(Matrix<Scalar> value, Shape shape) {
  if (shape.empty()) shape = {value.rows(), value.cols()};
  Tensor t(std::move(value), std::move(shape));
  t.node_->requires_grad = true;
  return t;
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::zeros(const Shape& shape) {
  const auto [r, c] = storage_extent(shape);
  return Tensor(Matrix<Scalar>::Zero(r, c), shape);
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::scalar(Scalar v) {
  Matrix<Scalar> m(1, 1);
  m(0, 0) = v;
  return Tensor(std::move(m), Shape{});
}

template <typename Scalar>
Tensor<Scalar> Tensor<Scalar>::row(const RowVector<Scalar>& v) {
  return Tensor(Matrix<Scalar>(v), Shape{v.size()});
}

template <typename Scalar>
Scalar Tensor<Scalar>::item() const {
  if (size() != 1) throw ShapeError("item() on non-scalar tensor of shape " + to_string(shape()));
  return node_->value(0, 0);
}

template <typename Scalar>
Matrix<Scalar> Tensor<Scalar>::grad() const {
  if (node_->grad.size() == 0) return Matrix<Scalar>::Zero(rows(), cols());
  return node_->grad;
}

template <typename Scalar>
Tape<Scalar>::Tape() : previous_(active_) {
  active_ = this;
}

template <typename Scalar>
Tape<Scalar>::~Tape() {
  // Tapes are scoped; restore whatever was recording before this one.
  if (active_ == this) active_ = previous_;
}

template <typename Scalar>
void Tape<Scalar>::record(const std::shared_ptr<detail::Node<Scalar>>& node) {
  if (consumed_) {
    // A new forward pass after a sweep starts a fresh recording.
    nodes_.clear();
    consumed_ = false;
  }
  node->tape = this;
  nodes_.push_back(node);
}

template <typename Scalar>
void Tape<Scalar>::backward(const Tensor<Scalar>& loss) {
  if (consumed_) {
    throw std::logic_error("backward() called twice without a new forward pass");
  }
  if (!loss.defined() || loss.size() != 1) {
    throw ShapeError("backward() needs a scalar loss, got shape " +
                     (loss.defined() ? to_string(loss.shape()) : std::string("(undefined)")));
  }
  if (loss.node()->tape != this) {
    throw std::logic_error("loss was not recorded on this tape");
  }
  loss.node()->grad = Matrix<Scalar>::Ones(1, 1);
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) {
    auto& node = **it;
    if (node.grad.size() == 0 || !node.backward) continue;
    node.backward(node);
  }
  consumed_ = true;
  for (auto& node : nodes_) {
    node->backward = nullptr;
    node->inputs.clear();
  }
}

template <typename Scalar>
NoGradGuard<Scalar>::NoGradGuard() : saved_(Tape<Scalar>::active_) {
  Tape<Scalar>::active_ = nullptr;
}

template <typename Scalar>
NoGradGuard<Scalar>::~NoGradGuard() {
  Tape<Scalar>::active_ = saved_;
}

namespace detail {

template <typename Scalar, typename Range>
Tensor<Scalar> record_impl(Matrix<Scalar> value, Shape shape, const Range& inputs,
                           std::function<void(Node<Scalar>&)> backward) {
  auto node = std::make_shared<Node<Scalar>>();
  node->value = std::move(value);
  node->shape = std::move(shape);
  node->is_leaf = false;
  auto* tape = Tape<Scalar>::active();
  if (tape != nullptr) {
    bool any = false;
    for (const auto& in : inputs) any = any || in.requires_grad();
    if (any) {
      node->requires_grad = true;
      node->inputs.reserve(inputs.size());
      for (const auto& in : inputs) node->inputs.push_back(in.node());
      node->backward = std::move(backward);
      tape->record(node);
    }
  }
  return Tensor<Scalar>(std::move(node));
}

template <typename Scalar>
Tensor<Scalar> record(Matrix<Scalar> value, Shape shape,
                      std::initializer_list<Tensor<Scalar>> inputs,
                      std::function<void(Node<Scalar>&)> backward) {
  return record_impl<Scalar>(std::move(value), std::move(shape), inputs, std::move(backward));
}

template <typename Scalar>
Tensor<Scalar> record(Matrix<Scalar> value, Shape shape,
                      const std::vector<Tensor<Scalar>>& inputs,
                      std::function<void(Node<Scalar>&)> backward) {
  return record_impl<Scalar>(std::move(value), std::move(shape), inputs, std::move(backward));
}

template Tensor<double> record(Matrix<double>, Shape, std::initializer_list<Tensor<double>>,
                               std::function<void(Node<double>&)>);
template Tensor<float> record(Matrix<float>, Shape, std::initializer_list<Tensor<float>>,
                              std::function<void(Node<float>&)>);
template Tensor<double> record(Matrix<double>, Shape, const std::vector<Tensor<double>>&,
                               std::function<void(Node<double>&)>);
template Tensor<float> record(Matrix<float>, Shape, const std::vector<Tensor<float>>&,
                              std::function<void(Node<float>&)>);

}  // namespace detail

template class Tensor<double>;
template class Tensor<float>;
template class Tape<double>;
template class Tape<float>;
template class NoGradGuard<double>;
template class NoGradGuard<float>;

}  // namespace ncdre
