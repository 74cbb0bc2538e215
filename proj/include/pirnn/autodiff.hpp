#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <span>
#include <vector>

#include "pirnn/param_store.hpp"
#include "pirnn/tensor.hpp"

namespace pirnn {

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::uint32_t id = 0;

  const Tensor& value() const;
  explicit operator bool() const { return tape != nullptr; }
};

/// Dynamic reverse-mode tape.
///
/// Operations append nodes in evaluation order, so the unrolled recurrence is
/// recorded as it runs. backward() walks the nodes in reverse and each node
/// pushes its output gradient to the parents that require one. With
/// gradients disabled, nodes keep only their values.
class Tape {
 public:
  explicit Tape(bool grad_enabled = true) : grad_enabled_(grad_enabled) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool grad_enabled() const { return grad_enabled_; }
  std::size_t size() const { return nodes_.size(); }

  Var constant(Tensor value);
  // Differentiable input that is not a parameter (used by tests and grad checks).
  Var variable(Tensor value);
  // Leaf bound to parameter `index` of `store`; one leaf per parameter per tape.
  Var param(const ParamStore& store, std::size_t index);
  Var param(const ParamStore& store, std::string_view name) { return param(store, store.index(name)); }

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  // Gradient of the last backward() target; zeros when the node was not reached.
  Tensor grad(Var v) const;

  void backward(Var loss);

  // Adds parameter-leaf gradients into `buffers`, indexed like the store.
  void accumulate_param_grads(std::vector<Tensor>& buffers) const;

  // Op plumbing -----------------------------------------------------------
  using BackwardFn = std::function<void(Tape&, std::uint32_t)>;
  Var record(Tensor value, bool requires_grad, BackwardFn fn);
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  bool requires_grad(std::uint32_t id) const { return nodes_[id].requires_grad; }
  const Tensor& value(std::uint32_t id) const { return nodes_[id].value; }
  const Tensor& out_grad(std::uint32_t id) const { return nodes_[id].grad; }
  // Gradient accumulator of a parent, zero-initialized on first touch.
  Tensor& grad_sink(std::uint32_t id);

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    BackwardFn backward;
    std::int64_t param_index = -1;
    bool requires_grad = false;
  };

  bool grad_enabled_;
  std::deque<Node> nodes_;
  std::vector<std::int64_t> param_leaf_;  // store index -> node id, -1 if unbound
};

// Zeroes the store gradients, runs backward and writes every parameter gradient.
void backward(Var loss, ParamStore& store);

// Arithmetic ---------------------------------------------------------------
Var matmul(Var a, Var b);     // a (R x K) * b (K x C)
Var matmul_nt(Var a, Var b);  // a (R x K) * b^T, b is C x K
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);  // elementwise
Var add_row(Var a, Var bias);  // adds the 1 x C row `bias` to every row of a
Var scale(Var a, double s);
Var one_minus(Var a);
Var sigmoid(Var a);
Var tanh_op(Var a);
Var row_softmax(Var a);

// Structure -----------------------------------------------------------------
Var concat_rows(std::span<const Var> parts);
Var concat_cols(std::span<const Var> parts);
Var slice_cols(Var a, std::size_t begin, std::size_t end);
Var slice_rows(Var a, std::size_t begin, std::size_t end);
Var reshape(Var a, Tensor::Shape shape);
// Row i comes from `b` where take_b[i], from `a` otherwise. The mask is not differentiated.
Var select_rows(Var a, Var b, const std::vector<bool>& take_b);

// Reductions ----------------------------------------------------------------
Var sum(Var a);
Var sum_squares(Var a);
// sum_i w_i * ||pred_i - target_i||^2 with constant targets and weights.
Var weighted_sq_dist(Var pred, const Tensor& target, std::span<const double> row_weights);

// Plain-value helpers used outside the tape.
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor row_softmax(const Tensor& a);

}  // namespace pirnn
