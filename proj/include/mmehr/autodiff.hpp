#pragma once

// Reverse-mode automatic differentiation over a per-computation tape.
//
// A Tape records every op in creation order, which is a valid topological
// order, so backward is a single reverse sweep. Vars are lightweight handles
// (tape pointer + node id); op results are immutable once recorded.

#include "mmehr/tensor.hpp"

#include <functional>
#include <optional>
#include <span>
#include <string_view>

namespace mmehr {

using NodeId = std::int32_t;

enum class OpKind {
  kLeaf,
  kMatMul,
  kAdd,
  kSub,
  kMul,
  kScale,
  kConcat,
  kSlice,
  kTranspose,
  kReshape,
  kRelu,
  kSigmoid,
  kTanh,
  kSoftmax,
  kLayerNorm,
  kGather,
  kMean,
  kSum,
  kBceWithLogits,
  kCustom,
};

std::string_view op_name(OpKind kind);

class Tape;

struct Var {
  Tape* tape = nullptr;
  NodeId id = -1;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
};

/// Backward rule for a user-defined op: receives the upstream gradient, the
/// input values and the output value, returns one gradient per input.
using BackwardFn =
    std::function<std::vector<Tensor>(const Tensor& upstream, std::span<const Tensor* const> inputs, const Tensor& output)>;

struct TapeNode {
  OpKind kind = OpKind::kLeaf;
  std::vector<NodeId> parents;
  Tensor value;
  std::vector<Tensor> saved;
  std::vector<Index> iargs;
  double darg = 0.0;
  BackwardFn custom;
  bool requires_grad = false;
};

class Gradients {
 public:
  explicit Gradients(std::vector<std::optional<Tensor>> grads) : grads_(std::move(grads)) {}

  bool has(Var v) const { return v.id >= 0 && static_cast<std::size_t>(v.id) < grads_.size() && grads_[v.id].has_value(); }

  /// Gradient of the loss w.r.t. `v`; zeros when `v` does not reach the loss.
  Tensor operator[](Var v) const;

 private:
  std::vector<std::optional<Tensor>> grads_;
};

class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  Var record(OpKind kind, std::vector<NodeId> parents, Tensor value, std::vector<Tensor> saved = {},
             std::vector<Index> iargs = {}, double darg = 0.0);

  /// Records an op whose backward rule is supplied by the caller.
  Var custom(std::span<const Var> inputs, Tensor value, BackwardFn backward);

  const TapeNode& node(NodeId id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }

  /// Reverse sweep from a scalar loss. Gradients accumulate (sum) over all
  /// uses of a node.
  Gradients backward(Var loss) const;

 private:
  std::vector<TapeNode> nodes_;
};

// Ops. Every op checks conformability and throws ShapeError naming the op and
// both operand shapes; every result is checked for NaN/Inf.

/// [..., K] x [K, N] -> [..., N]
Var matmul(Var a, Var b);
/// Elementwise with broadcasting: the smaller shape must be a suffix of the larger.
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
/// Concatenation along `axis` (negative counts from the end).
Var concat(std::span<const Var> parts, Index axis = -1);
Var slice(Var a, Index axis, Index begin, Index length);
/// 2-D transpose.
Var transpose(Var a);
Var reshape(Var a, Shape shape);
Var relu(Var a);
Var sigmoid(Var a);
Var tanh(Var a);
/// Softmax over the last axis.
Var softmax(Var a);
/// Layer normalisation over the last axis with learned scale/shift of shape [D].
Var layer_norm(Var x, Var gain, Var bias, double eps = 1e-5);
/// Gathers rows of a [V, D] table.
Var gather_rows(Var table, std::span<const Index> indices);
Var mean(Var a, Index axis);
Var sum(Var a);
/// Mean binary cross-entropy, computed from logits. `labels` must match the logits' shape.
Var bce_with_logits(Var logits, const Tensor& labels);

inline Var operator+(Var a, Var b) { return add(a, b); }
inline Var operator-(Var a, Var b) { return sub(a, b); }
inline Var operator*(Var a, Var b) { return mul(a, b); }

using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  Index worst_index = 0;
};

/// Compares the tape gradient of `f` at `inputs` against central differences
/// with step `h`; relative error is |analytic - numeric| / max(1, |numeric|).
GradCheckResult grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double h = 1e-5);

double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double h = 1e-5);

}  // namespace mmehr
