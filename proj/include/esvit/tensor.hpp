#pragma once

// Minimal dense tensor with reverse-mode automatic differentiation.
//
// Tensors are shared handles onto graph nodes. Every op returns a fresh node
// holding its forward value; when any input requires a gradient the node
// also records its parents and a vector-Jacobian product closure. backward()
// walks the graph once in reverse topological order. Values are 64-bit and
// every forward result is checked for NaN/Inf.
//
// Broadcasting is limited to adding a rank-1 bias along the last axis.

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace esvit::autograd {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

struct Node;

class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, double value, bool requires_grad = false);
  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false);
  static Tensor scalar(double value, bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<const double> data() const;
  // Writable view of a leaf's values (parameter updates, finite differences).
  std::span<double> mutable_data();
  double item() const;
  double at(std::size_t i) const { return data()[i]; }
  double at(std::size_t r, std::size_t c) const { return data()[r * shape()[1] + c]; }

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool is_leaf() const;
  bool has_grad() const;
  std::span<const double> grad() const;
  std::span<double> mutable_grad();
  void zero_grad();

  // Copy of the values with no graph attached.
  Tensor detach() const;

  Node* node() const { return node_.get(); }
  const std::shared_ptr<Node>& node_ptr() const { return node_; }

 private:
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}
  std::shared_ptr<Node> node_;

  friend Tensor make_result(const char*, Shape, std::vector<double>, const std::vector<Tensor>&,
                            std::function<void(Node&)>);
};

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;  // empty until a backward pass reaches the node
  bool requires_grad = false;
  const char* op = "leaf";
  std::vector<std::shared_ptr<Node>> parents;
  // Reads this node's grad and accumulates into parents[i]->grad for every
  // parent that requires a gradient. Parent grads are allocated beforehand.
  std::function<void(Node&)> backward;
};

// Builds an op output. If no parent requires a gradient the closure and the
// parent links are dropped. Throws kInvariant when `value` holds NaN/Inf.
// Exposed so that modules can define fused ops (e.g. cross-entropy).
Tensor make_result(const char* op, Shape shape, std::vector<double> value, const std::vector<Tensor>& parents,
                   std::function<void(Node&)> backward);

// Accumulates d(loss)/d(leaf) into every reachable leaf that requires a
// gradient. Intermediate gradients are recomputed from scratch on each call,
// so calling twice on the same graph adds the leaf gradients twice.
void backward(const Tensor& loss);

// ---- ops ------------------------------------------------------------------

Tensor add(const Tensor& a, const Tensor& b);  // same shape, or rank-1 b over the last axis of a
Tensor sub(const Tensor& a, const Tensor& b);  // same shape
Tensor mul(const Tensor& a, const Tensor& b);  // elementwise, same shape
Tensor scale(const Tensor& a, double c);
Tensor sum(const Tensor& a);  // -> scalar (shape {})

Tensor matmul(const Tensor& a, const Tensor& b);  // [m x k] . [k x n]
Tensor transpose(const Tensor& a);                // rank 2
Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes);
Tensor reshape(const Tensor& a, Shape shape);

Tensor softmax_rows(const Tensor& x);  // along the last axis
Tensor log_softmax_rows(const Tensor& x);
Tensor layer_norm(const Tensor& x, const Tensor& gain, const Tensor& bias, double eps = 1e-12);

Tensor gelu(const Tensor& x);  // exact erf form
Tensor sigmoid(const Tensor& x);
Tensor relu(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);
std::vector<Tensor> split(const Tensor& x, std::size_t axis, const std::vector<std::size_t>& sizes);
Tensor mean_pool(const Tensor& x, const std::vector<std::size_t>& axes);  // reduced axes are removed

// x: [C x H x W]; kernels: [O x C x kh x kw]; bias: [O] or undefined.
Tensor conv2d(const Tensor& x, const Tensor& kernels, const Tensor& bias, std::size_t stride, std::size_t padding);

// x: [H x W x C] -> [(H/p)(W/p) x p*p*C], patches in raster order, each
// flattened as (row, col, channel).
Tensor extract_patches(const Tensor& x, std::size_t patch);

// ---- finite-difference checking -------------------------------------------

struct GradCheckOptions {
  double step = 1e-3;
  double tolerance = 1e-4;
  // Denominator floor of the relative error |a - n| / max(|a|, |n|, floor).
  double floor = 1e-3;
  // 0 checks every coordinate; otherwise a seeded uniform sample of this many.
  std::size_t max_coordinates = 0;
  unsigned long long seed = 0;
};

struct GradCheckEntry {
  std::size_t input = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double max_relative_error = 0.0;
  bool passed = true;
};

using ScalarFunction = std::function<Tensor(const std::vector<Tensor>&)>;

// `inputs` must be leaves; their gradients are overwritten.
GradCheckReport gradient_check(const ScalarFunction& f, const std::vector<Tensor>& inputs,
                               const GradCheckOptions& options = {});

}  // namespace esvit::autograd
