#pragma once

#include <cstdint>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "irsce/tensor.hpp"

namespace irsce::tl {

class Graph;

// Handle to a node in a Graph.
struct Value {
  Graph* graph = nullptr;
  std::int32_t id = -1;
  bool valid() const { return graph != nullptr && id >= 0; }
};

// Raised when an operation produces NaN/Inf while finite checking is on.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

class Node {
 public:
  virtual ~Node() = default;
  virtual void backward(Graph& g) = 0;
  virtual const char* name() const = 0;

  Tensor val;
  Tensor adj;                    // lazily allocated during backward
  std::vector<std::int32_t> in;  // input node ids
  bool requires_grad = false;
};

// Reverse-mode tape. Nodes are appended in evaluation order, which is a
// topological order, so the backward pass is a single reverse sweep.
class Graph {
 public:
  bool check_finite = true;

  Value leaf(Tensor t) { return append_leaf(std::move(t), true); }
  Value constant(Tensor t) { return append_leaf(std::move(t), false); }

  const Tensor& value(Value v) const { return node(v.id).val; }

  // Adjoint accumulated by the last backward(); zeros if never touched.
  Tensor adjoint(Value v) const {
    const Node& n = node(v.id);
    if (n.adj.empty()) return Tensor(n.val.shape(), 0.0);
    return n.adj;
  }

  // Seeds the (scalar) loss with adjoint 1 and sweeps the tape.
  void backward(Value loss);

  std::size_t size() const { return nodes_.size(); }

  // --- internal, used by op implementations ---
  Node& node(std::int32_t id) { return *nodes_[static_cast<size_t>(id)]; }
  const Node& node(std::int32_t id) const { return *nodes_[static_cast<size_t>(id)]; }
  Tensor& grad_buf(std::int32_t id) {
    Node& n = node(id);
    if (n.adj.empty()) n.adj = Tensor(n.val.shape(), 0.0);
    return n.adj;
  }
  Value append(std::unique_ptr<Node> n);

 private:
  Value append_leaf(Tensor t, bool requires);
  std::vector<std::unique_ptr<Node>> nodes_;
};

enum class PoolMode { kAvg, kMax };

// Elementwise / linear algebra
Value add(Value a, Value b);
Value sub(Value a, Value b);
Value neg(Value a);
Value mul(Value a, Value b);                 // hadamard, same shape
Value scale(Value a, double c);              // tensor * compile-time scalar
Value scale_by(Value a, Value s);            // tensor * scalar node (shape [1])
Value matmul(Value a, Value b);              // [m,k]x[k,n] -> [m,n]
Value dense(Value x, Value w, Value b);      // w[m,n]*x[n] + b[m]

// Convolutions over [C,H,W] or [P,C,H,W] (parts share kernels), zero
// same-padding, odd kernel extents.
Value conv2d(Value x, Value kernels, Value bias);
Value depthwise_conv2d(Value x, Value kernels, Value bias);

Value leaky_relu(Value x, double slope);
Value pool_reduce(Value x, const std::vector<int>& axes, PoolMode mode);

// Complex soft threshold, elementwise: out = l1 * max(|r| - l2*sigma, 0) * r/|r|
// with sgn(0) := 0. Inputs re/im of equal shape; l1, l2, sigma are scalar
// nodes. Output is stacked [2, ...re-shape] (part 0 = re, part 1 = im).
Value soft_threshold(Value re, Value im, Value l1, Value l2, Value sigma);

// Count of entries with |r| > l2*sigma; piecewise constant, zero gradient.
Value shrink_active_count(Value re, Value im, Value l2, Value sigma);

// Row-group variant on [G, K] inputs: the threshold acts on row l2 norms,
// out_j = l1 * max(||r_j|| - l2*sigma, 0) * r_j / ||r_j||.
Value soft_threshold_rows(Value re, Value im, Value l1, Value l2, Value sigma);
Value shrink_active_count_rows(Value re, Value im, Value l2, Value sigma);

Value part(Value x, std::int64_t index);     // slice along axis 0, drops axis
Value reshape(Value x, Shape s);
Value concat2(Value a, Value b, int axis);

Value fnorm(Value re, Value im);             // Frobenius norm of complex pair
Value sumsq(Value a);                        // sum of squares
Value sumsq2(Value a, Value b);              // sum of squares of both

// Column-major unflattening of a [G, K] correlation block into per-subcarrier
// planes [K, rows, cols] with G = rows*cols, and its exact inverse.
Value corr_to_planes(Value x, std::int64_t rows, std::int64_t cols);
Value planes_to_corr(Value x);

// Broadcast multiplies used by the attention blocks.
Value scale_planes(Value x, Value s);        // x[P,K,H,W] * s[K,P]
Value scale_spatial(Value x, Value m);       // x[P,K,H,W] * m[P,1,H,W]

}  // namespace irsce::tl
