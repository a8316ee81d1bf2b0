#include "sodyolo/tensor.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace sodyolo {

namespace {
thread_local bool g_grad_enabled = true;
}

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace detail {

std::span<double> Node::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), 0.0);
  return grad;
}

void Node::accumulate(std::span<const double> g) {
  auto buf = grad_buffer();
  for (std::size_t i = 0; i < buf.size(); ++i) buf[i] += g[i];
}

}  // namespace detail

Tensor::Tensor(Shape shape, double fill, bool requires_grad) {
  node_ = std::make_shared<detail::Node>();
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
  node_->requires_grad = requires_grad;
}

Tensor::Tensor(Shape shape, std::vector<double> values, bool requires_grad) {
  if (values.size() != shape_numel(shape)) {
    throw std::invalid_argument("tensor: " + std::to_string(values.size()) +
                                " values do not fill shape " + shape_str(shape));
  }
  node_ = std::make_shared<detail::Node>();
  node_->shape = std::move(shape);
  node_->data = std::move(values);
  node_->requires_grad = requires_grad;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return Tensor(Shape{}, std::vector<double>{v}, requires_grad);
}

Tensor Tensor::from_node(detail::NodePtr n) {
  Tensor t;
  t.node_ = std::move(n);
  return t;
}

const Shape& Tensor::shape() const {
  if (!node_) throw std::logic_error("tensor: use of undefined tensor");
  return node_->shape;
}

std::size_t Tensor::dim(std::size_t i) const {
  const auto& s = shape();
  if (i >= s.size()) {
    throw std::out_of_range("tensor: dim " + std::to_string(i) + " of shape " +
                            shape_str(s));
  }
  return s[i];
}

std::size_t Tensor::numel() const { return node_ ? node_->data.size() : 0; }

std::span<double> Tensor::data() { return node_->data; }
std::span<const double> Tensor::data() const { return node_->data; }

double Tensor::item() const {
  if (numel() != 1) {
    throw std::invalid_argument("tensor: item() on shape " + shape_str(shape()));
  }
  return node_->data[0];
}

namespace {
std::size_t flat_index(const Shape& shape, std::initializer_list<std::size_t> idx) {
  if (idx.size() != shape.size()) {
    throw std::invalid_argument("tensor: index rank mismatch for shape " + shape_str(shape));
  }
  std::size_t off = 0;
  std::size_t k = 0;
  for (auto i : idx) {
    if (i >= shape[k]) throw std::out_of_range("tensor: index out of range for " + shape_str(shape));
    off = off * shape[k] + i;
    ++k;
  }
  return off;
}
}  // namespace

double& Tensor::at(std::initializer_list<std::size_t> idx) {
  return node_->data[flat_index(shape(), idx)];
}

double Tensor::at(std::initializer_list<std::size_t> idx) const {
  return node_->data[flat_index(shape(), idx)];
}

bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }

Tensor& Tensor::set_requires_grad(bool on) {
  node_->requires_grad = on;
  return *this;
}

bool Tensor::has_grad() const { return node_ && !node_->grad.empty(); }

std::span<double> Tensor::grad() { return node_->grad_buffer(); }

std::span<const double> Tensor::grad() const { return node_->grad_buffer(); }

void Tensor::zero_grad() {
  if (node_) std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
}

Tensor Tensor::clone() const {
  Tensor t(shape(), std::vector<double>(node_->data), node_->requires_grad);
  return t;
}

Tensor Tensor::detach() const { return Tensor(shape(), std::vector<double>(node_->data)); }

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

namespace {
template <typename Range>
Tensor make_result_impl(Shape shape, std::vector<double> values, const Range& inputs,
                        detail::BackwardFn fn) {
  Tensor out(std::move(shape), std::move(values));
  if (!g_grad_enabled) return out;
  bool any = false;
  for (const auto& t : inputs) any = any || t.requires_grad();
  if (!any) return out;
  auto& n = *out.node();
  n.requires_grad = true;
  n.is_leaf = false;
  for (const auto& t : inputs) n.inputs.push_back(t.node());
  n.backward = std::move(fn);
  return out;
}
}  // namespace

Tensor make_result(Shape shape, std::vector<double> values,
                   std::initializer_list<Tensor> inputs, detail::BackwardFn fn) {
  return make_result_impl(std::move(shape), std::move(values), inputs, std::move(fn));
}

Tensor make_result(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                   detail::BackwardFn fn) {
  return make_result_impl(std::move(shape), std::move(values), inputs, std::move(fn));
}

void backward(const Tensor& root) {
  if (!root.defined() || root.numel() != 1) {
    throw std::invalid_argument("backward: root must be a scalar");
  }
  if (!root.requires_grad()) return;

  // Iterative post-order DFS gives a topological order (inputs before outputs).
  // Owning pointers: clearing a node's inputs must not free pending children.
  std::vector<detail::NodePtr> order;
  std::unordered_set<detail::Node*> seen;
  std::vector<std::pair<detail::NodePtr, std::size_t>> stack;
  stack.emplace_back(root.node(), 0);
  seen.insert(root.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      detail::NodePtr child = node->inputs[next++];
      if (child->requires_grad && !seen.count(child.get())) {
        seen.insert(child.get());
        stack.emplace_back(std::move(child), 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  root.node()->grad_buffer()[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    detail::Node* n = it->get();
    if (n->is_leaf || !n->backward) continue;
    n->grad_buffer();
    n->backward(*n);
    n->backward = nullptr;
    n->inputs.clear();
    n->grad.clear();
    n->grad.shrink_to_fit();
  }
}

}  // namespace sodyolo
