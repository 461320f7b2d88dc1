#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace ncdre {

using Index = Eigen::Index;

/// Row-major dense matrix. Every tensor is stored as one of these so that
/// the flat data is contiguous in shape order.
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

template <typename Scalar>
using RowVector = Eigen::Matrix<Scalar, 1, Eigen::Dynamic, Eigen::RowMajor>;

/// Binary {0,1} matrix used for attention masks and graph adjacency.
using Mask = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Shape = std::vector<Index>;

std::string to_string(const Shape& shape);

class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Rows/cols of the 2-D storage for a logical shape. Rank 0 and 1 map to a
/// single row; rank >= 3 folds all leading dimensions into rows.
std::pair<Index, Index> storage_extent(const Shape& shape);

template <typename Scalar>
class Tape;
template <typename Scalar>
class NoGradGuard;

namespace detail {

template <typename Scalar>
struct Node {
  Matrix<Scalar> value;
  Matrix<Scalar> grad;  // empty until something flows into it
  Shape shape;
  bool requires_grad = false;
  bool is_leaf = true;
  const Tape<Scalar>* tape = nullptr;
  std::vector<std::shared_ptr<Node>> inputs;
  std::function<void(Node&)> backward;

  template <typename Derived>
  void accumulate(const Eigen::MatrixBase<Derived>& g) {
    if (grad.size() == 0) {
      grad = g;
    } else {
      grad += g;
    }
  }
};

}  // namespace detail

/// Handle to a node of the differentiation graph. Copies share the node.
template <typename Scalar>
class Tensor {
 public:
  using Node = detail::Node<Scalar>;

  Tensor() = default;
  /// Constant 2-D tensor.
  explicit Tensor(Matrix<Scalar> value);
  /// Constant with an explicit logical shape; value must match storage_extent(shape).
  Tensor(Matrix<Scalar> value, Shape shape);
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  /// Trainable leaf. Gradients accumulate into it on every backward pass.
  static Tensor parameter(Matrix<Scalar> value, Shape shape = {});
  static Tensor zeros(const Shape& shape);
  static Tensor scalar(Scalar v);
  static Tensor row(const RowVector<Scalar>& v);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  Index rank() const { return static_cast<Index>(node_->shape.size()); }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  Index size() const { return node_->value.size(); }

  const Matrix<Scalar>& value() const { return node_->value; }
  /// Direct write access; only meaningful for leaves (optimizer updates,
  /// weight surgery in tests).
  Matrix<Scalar>& mutable_value() { return node_->value; }
  Scalar item() const;

  bool requires_grad() const { return node_->requires_grad; }
  bool is_leaf() const { return node_->is_leaf; }
  /// Accumulated gradient, zeros when nothing reached this tensor.
  Matrix<Scalar> grad() const;
  bool has_grad() const { return node_->grad.size() != 0; }
  void zero_grad() { node_->grad.resize(0, 0); }

  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

/// Records differentiable operations issued on the current thread while it
/// is alive. Tapes nest: constructing one shadows the previous tape until it
/// is destroyed.
template <typename Scalar>
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// The tape recording on this thread, or nullptr (inference).
  static Tape* active() { return active_; }

  /// Runs the reverse sweep from a scalar loss, accumulating gradients into
  /// every reachable leaf. A tape can be swept once.
  void backward(const Tensor<Scalar>& loss);

  std::size_t size() const { return nodes_.size(); }
  bool consumed() const { return consumed_; }

  void record(const std::shared_ptr<detail::Node<Scalar>>& node);

 private:
  friend class NoGradGuard<Scalar>;
  static thread_local Tape* active_;
  Tape* previous_ = nullptr;
  std::vector<std::shared_ptr<detail::Node<Scalar>>> nodes_;
  bool consumed_ = false;
};

template <typename Scalar>
thread_local Tape<Scalar>* Tape<Scalar>::active_ = nullptr;

/// Disables recording for its lifetime.
template <typename Scalar>
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  Tape<Scalar>* saved_;
};

namespace detail {

/// Creates the output node of an operation and, when a tape is active and
/// any input requires a gradient, wires in the backward rule.
template <typename Scalar>
Tensor<Scalar> record(Matrix<Scalar> value, Shape shape,
                      std::initializer_list<Tensor<Scalar>> inputs,
                      std::function<void(Node<Scalar>&)> backward);

template <typename Scalar>
Tensor<Scalar> record(Matrix<Scalar> value, Shape shape,
                      const std::vector<Tensor<Scalar>>& inputs,
                      std::function<void(Node<Scalar>&)> backward);

}  // namespace detail

}  // namespace ncdre
