#include "esvit/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "esvit/error.hpp"

namespace esvit::autograd {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? " x " : "") << shape[i];
  os << ']';
  return os.str();
}

namespace {

Node& checked(const std::shared_ptr<Node>& node) {
  if (!node) fail(ErrorKind::kInvalidArgument, "use of an undefined tensor");
  return *node;
}

void check_finite(const char* op, const std::vector<double>& v) {
  for (double x : v) {
    if (!std::isfinite(x)) fail(ErrorKind::kInvariant, std::string("non-finite value produced by ") + op);
  }
}

}  // namespace

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0.0, requires_grad); }

Tensor Tensor::full(Shape shape, double value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
}

Tensor Tensor::from_data(Shape shape, std::vector<double> data, bool requires_grad) {
  for (std::size_t d : shape) require(d > 0, "tensor dimensions must be positive");
  if (shape_numel(shape) != data.size()) {
    fail(ErrorKind::kInvalidArgument, "tensor data of length " + std::to_string(data.size()) +
                                          " does not fit shape " + shape_string(shape));
  }
  check_finite("tensor construction", data);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(data);
  node->requires_grad = requires_grad;
  return Tensor(std::move(node));
}

Tensor Tensor::scalar(double value, bool requires_grad) { return from_data({}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return checked(node_).shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  const Shape& s = shape();
  require(axis < s.size(), "axis " + std::to_string(axis) + " out of range for " + shape_string(s));
  return s[axis];
}

std::size_t Tensor::numel() const { return checked(node_).value.size(); }

std::span<const double> Tensor::data() const { return checked(node_).value; }

std::span<double> Tensor::mutable_data() {
  Node& n = checked(node_);
  require(n.parents.empty(), "only leaf tensors may be modified in place");
  return n.value;
}

double Tensor::item() const {
  require(numel() == 1, "item() requires a single-element tensor, got " + shape_string(shape()));
  return node_->value[0];
}

bool Tensor::requires_grad() const { return checked(node_).requires_grad; }

void Tensor::set_requires_grad(bool value) {
  require(is_leaf(), "requires_grad can only be toggled on leaves");
  node_->requires_grad = value;
}

bool Tensor::is_leaf() const { return checked(node_).parents.empty(); }

bool Tensor::has_grad() const { return !checked(node_).grad.empty(); }

std::span<const double> Tensor::grad() const { return checked(node_).grad; }

std::span<double> Tensor::mutable_grad() {
  Node& n = checked(node_);
  if (n.grad.empty()) n.grad.assign(n.value.size(), 0.0);
  return n.grad;
}

void Tensor::zero_grad() {
  Node& n = checked(node_);
  if (!n.grad.empty()) std::fill(n.grad.begin(), n.grad.end(), 0.0);
}

Tensor Tensor::detach() const { return from_data(shape(), std::vector<double>(data().begin(), data().end())); }

Tensor make_result(const char* op, Shape shape, std::vector<double> value, const std::vector<Tensor>& parents,
                   std::function<void(Node&)> backward_fn) {
  check_finite(op, value);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->value = std::move(value);
  node->op = op;
  const bool any = std::any_of(parents.begin(), parents.end(), [](const Tensor& t) { return t.requires_grad(); });
  if (any) {
    node->requires_grad = true;
    node->backward = std::move(backward_fn);
    for (const Tensor& p : parents) node->parents.push_back(p.node_ptr());
  }
  return Tensor(std::move(node));
}

void backward(const Tensor& loss) {
  require(loss.defined(), "backward on an undefined tensor");
  if (loss.numel() != 1) {
    fail(ErrorKind::kInvalidArgument, "backward requires a scalar loss, got " + shape_string(loss.shape()));
  }
  require(loss.requires_grad(), "loss does not depend on any tensor that requires a gradient");

  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node(), 0}};
  visited.insert(loss.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* parent = node->parents[next++].get();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node* node : order) {
    if (!node->parents.empty()) {
      node->grad.assign(node->value.size(), 0.0);
    } else if (node->grad.empty()) {
      node->grad.assign(node->value.size(), 0.0);
    }
  }
  loss.node()->grad[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

GradCheckReport gradient_check(const ScalarFunction& f, const std::vector<Tensor>& inputs,
                               const GradCheckOptions& options) {
  std::vector<Tensor> params = inputs;
  for (Tensor& t : params) {
    require(t.is_leaf(), "gradient_check inputs must be leaves");
    t.set_requires_grad(true);
    t.zero_grad();
  }
  backward(f(params));

  std::vector<std::pair<std::size_t, std::size_t>> coords;
  for (std::size_t i = 0; i < params.size(); ++i) {
    for (std::size_t j = 0; j < params[i].numel(); ++j) coords.emplace_back(i, j);
  }
  if (options.max_coordinates > 0 && options.max_coordinates < coords.size()) {
    std::mt19937_64 rng(options.seed);
    for (std::size_t k = 0; k < options.max_coordinates; ++k) {
      std::uniform_int_distribution<std::size_t> pick(k, coords.size() - 1);
      std::swap(coords[k], coords[pick(rng)]);
    }
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  GradCheckReport report;
  for (const auto& [i, j] : coords) {
    Tensor& t = params[i];
    const double analytic = t.grad()[j];
    const double original = t.data()[j];
    t.mutable_data()[j] = original + options.step;
    const double plus = f(params).item();
    t.mutable_data()[j] = original - options.step;
    const double minus = f(params).item();
    t.mutable_data()[j] = original;
    const double numeric = (plus - minus) / (2.0 * options.step);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), options.floor});
    const double rel = std::abs(analytic - numeric) / denom;
    report.entries.push_back({i, j, analytic, numeric, rel});
    report.max_relative_error = std::max(report.max_relative_error, rel);
  }
  report.passed = report.max_relative_error < options.tolerance;
  return report;
}

}  // namespace esvit::autograd
