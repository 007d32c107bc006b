#pragma once

#include <cstdint>
#include <functional>
#include <initializer_list>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace sreg {

using Shape = std::vector<int>;

std::int64_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

namespace detail {

template <typename T>
struct TensorNode {
  Shape shape;
  std::vector<T> values;
  std::vector<T> grad;  // allocated on demand, always same length as values
  bool requires_grad = false;
  bool leaf = true;

  void ensure_grad() {
    if (grad.size() != values.size()) grad.assign(values.size(), T(0));
  }
};

}  // namespace detail

template <typename T>
class GradientTape;

// Dense row-major tensor. Copies share storage; values written by the
// producing op are treated as immutable afterwards. Leaves (parameters,
// inputs) may be mutated between tapes via values_mut().
template <typename T>
class Tensor {
 public:
  using Node = detail::TensorNode<T>;

  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return filled(std::move(shape), T(0), requires_grad);
  }

  static Tensor filled(Shape shape, T value, bool requires_grad = false) {
    auto node = std::make_shared<Node>();
    node->values.assign(std::size_t(shape_numel(shape)), value);
    node->shape = std::move(shape);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  static Tensor from_data(Shape shape, std::vector<T> values,
                          bool requires_grad = false) {
    if (shape_numel(shape) != std::int64_t(values.size()))
      throw std::invalid_argument("Tensor: data length " +
                                  std::to_string(values.size()) +
                                  " does not match shape " +
                                  shape_to_string(shape));
    auto node = std::make_shared<Node>();
    node->shape = std::move(shape);
    node->values = std::move(values);
    node->requires_grad = requires_grad;
    return Tensor(std::move(node));
  }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  int rank() const { return int(node_->shape.size()); }
  int dim(int i) const {
    if (i < 0) i += rank();
    return node_->shape[std::size_t(i)];
  }
  std::int64_t numel() const { return std::int64_t(node_->values.size()); }

  std::span<const T> values() const { return node_->values; }
  std::span<T> values_mut() { return node_->values; }

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool rg) { node_->requires_grad = rg; }
  bool is_leaf() const { return node_->leaf; }

  bool grad_allocated() const { return !node_->grad.empty(); }
  // Materializes a zero gradient buffer on first access.
  std::span<const T> grad() const {
    node_->ensure_grad();
    return node_->grad;
  }
  std::span<T> grad_mut() {
    node_->ensure_grad();
    return node_->grad;
  }
  void zero_grad() {
    if (!node_->grad.empty()) node_->grad.assign(node_->grad.size(), T(0));
  }

  T item() const {
    if (numel() != 1)
      throw std::invalid_argument("Tensor::item: tensor is not scalar, shape " +
                                  shape_to_string(shape()));
    return node_->values[0];
  }

  T at(std::initializer_list<int> index) const {
    if (int(index.size()) != rank())
      throw std::invalid_argument("Tensor::at: wrong index rank");
    std::int64_t flat = 0;
    int axis = 0;
    for (int i : index) {
      flat = flat * node_->shape[std::size_t(axis)] + i;
      ++axis;
    }
    return node_->values[std::size_t(flat)];
  }

  std::shared_ptr<Node> node() const { return node_; }
  static Tensor from_node(std::shared_ptr<Node> node) {
    return Tensor(std::move(node));
  }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;
};

// Reverse-mode tape. Construction pushes the tape onto a thread-local
// stack; ops record themselves onto the innermost active tape. Records
// are in creation order, so an op's inputs always precede it and a single
// reverse sweep propagates gradients. Replaying twice accumulates into
// leaf gradients; intermediate gradients are re-zeroed per sweep.
template <typename T>
class GradientTape {
 public:
  GradientTape() { stack().push_back(this); }
  ~GradientTape() { stack().pop_back(); }
  GradientTape(const GradientTape&) = delete;
  GradientTape& operator=(const GradientTape&) = delete;

  static GradientTape* active() {
    return stack().empty() ? nullptr : stack().back();
  }

  void record(std::shared_ptr<detail::TensorNode<T>> out,
              std::function<void()> pull) {
    records_.push_back({std::move(out), std::move(pull)});
  }

  std::size_t size() const { return records_.size(); }

  void backward_from(const std::shared_ptr<detail::TensorNode<T>>& loss) {
    for (auto& record : records_) {
      record.out->grad.assign(record.out->values.size(), T(0));
    }
    loss->ensure_grad();
    if (loss->leaf)
      loss->grad[0] += T(1);
    else
      loss->grad[0] = T(1);
    for (auto it = records_.rbegin(); it != records_.rend(); ++it) it->pull();
  }

 private:
  struct Record {
    std::shared_ptr<detail::TensorNode<T>> out;
    std::function<void()> pull;
  };
  std::vector<Record> records_;

  static std::vector<GradientTape*>& stack() {
    static thread_local std::vector<GradientTape*> s;
    return s;
  }
};

// Populates grad for every requires_grad leaf reachable from `loss` on the
// active tape. `loss` must be scalar.
template <typename T>
void backward(const Tensor<T>& loss) {
  auto* tape = GradientTape<T>::active();
  if (!tape) throw std::logic_error("backward: no active gradient tape");
  if (loss.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar, got shape " +
                                shape_to_string(loss.shape()));
  tape->backward_from(loss.node());
}

namespace detail {

template <typename T>
inline bool tape_active() {
  return GradientTape<T>::active() != nullptr;
}

template <typename T>
inline bool tracked(const Tensor<T>& t) {
  return tape_active<T>() && t.requires_grad();
}

template <typename T>
inline Tensor<T> op_result(Shape shape, std::vector<T> values, bool track) {
  Tensor<T> out = Tensor<T>::from_data(std::move(shape), std::move(values), track);
  out.node()->leaf = false;
  return out;
}

template <typename T>
inline void record_pull(const Tensor<T>& out, std::function<void()> pull) {
  if (out.requires_grad())
    GradientTape<T>::active()->record(out.node(), std::move(pull));
}

}  // namespace detail

}  // namespace sreg
