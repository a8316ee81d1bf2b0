#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace sodyolo {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

struct Node;
using NodePtr = std::shared_ptr<Node>;
using BackwardFn = std::function<void(Node& self)>;

struct Node {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until first accumulation
  bool requires_grad = false;
  bool is_leaf = true;
  std::vector<NodePtr> inputs;
  BackwardFn backward;

  std::span<double> grad_buffer();
  void accumulate(std::span<const double> g);
};

}  // namespace detail

// Dense row-major real tensor with optional reverse-mode gradient tracking.
// Copies share storage; use clone() for a deep copy.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0, bool requires_grad = false);
  Tensor(Shape shape, std::vector<double> values, bool requires_grad = false);

  static Tensor scalar(double v, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t i) const;
  std::size_t numel() const;

  std::span<double> data();
  std::span<const double> data() const;
  double item() const;

  double& at(std::initializer_list<std::size_t> idx);
  double at(std::initializer_list<std::size_t> idx) const;

  bool requires_grad() const;
  Tensor& set_requires_grad(bool on);
  bool has_grad() const;
  // Gradient buffer; allocated (zeros) on first access.
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();

  Tensor clone() const;
  // Same values, no graph history.
  Tensor detach() const;

  const detail::NodePtr& node() const { return node_; }
  static Tensor from_node(detail::NodePtr n);

 private:
  detail::NodePtr node_;
};

// Reverse-mode sweep from a scalar root; leaf gradients accumulate.
// Intermediate graph state is released afterwards.
void backward(const Tensor& root);

bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// Builds an op result. The backward closure is attached only when grad mode
// is on and some input requires grad.
Tensor make_result(Shape shape, std::vector<double> values,
                   std::initializer_list<Tensor> inputs, detail::BackwardFn fn);
Tensor make_result(Shape shape, std::vector<double> values,
                   const std::vector<Tensor>& inputs, detail::BackwardFn fn);

}  // namespace sodyolo
