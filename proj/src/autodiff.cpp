#include "mmehr/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace mmehr {

std::string_view op_name(OpKind kind) {
  switch (kind) {
    case OpKind::kLeaf: return "leaf";
    case OpKind::kMatMul: return "matmul";
    case OpKind::kAdd: return "add";
    case OpKind::kSub: return "sub";
    case OpKind::kMul: return "mul";
    case OpKind::kScale: return "scale";
    case OpKind::kConcat: return "concat";
    case OpKind::kSlice: return "slice";
    case OpKind::kTranspose: return "transpose";
    case OpKind::kReshape: return "reshape";
    case OpKind::kRelu: return "relu";
    case OpKind::kSigmoid: return "sigmoid";
    case OpKind::kTanh: return "tanh";
    case OpKind::kSoftmax: return "softmax";
    case OpKind::kLayerNorm: return "layer_norm";
    case OpKind::kGather: return "gather_rows";
    case OpKind::kMean: return "mean";
    case OpKind::kSum: return "sum";
    case OpKind::kBceWithLogits: return "bce_with_logits";
    case OpKind::kCustom: return "custom";
  }
  return "unknown";
}

namespace {

using Map = Eigen::Map<MatrixXd>;
using ConstMap = Eigen::Map<const MatrixXd>;

Index normalize_axis(Index axis, Index rank, const char* op, const Shape& shape) {
  Index a = axis < 0 ? axis + rank : axis;
  if (a < 0 || a >= rank) throw ShapeError(op, shape, {axis});
  return a;
}

// (outer, n, inner) decomposition of a shape around one axis.
struct AxisView {
  Index outer = 1;
  Index n = 1;
  Index inner = 1;
};

AxisView axis_view(const Shape& s, Index axis) {
  AxisView v;
  for (Index i = 0; i < axis; ++i) v.outer *= s[i];
  v.n = s[axis];
  for (Index i = axis + 1; i < static_cast<Index>(s.size()); ++i) v.inner *= s[i];
  return v;
}

bool is_suffix(const Shape& small, const Shape& big) {
  return small.size() <= big.size() && std::equal(small.rbegin(), small.rend(), big.rbegin());
}

// Sums a gradient of the broadcast (big) shape down to `target` shape.
Tensor reduce_to(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  const Index n = numel(target);
  ConstMap view(g.data(), g.size() / n, n);
  Tensor out(target);
  Map(out.data(), 1, n) = view.colwise().sum();
  return out;
}

template <typename F>
Tensor broadcast_binary(const char* op, const Tensor& a, const Tensor& b, F f) {
  if (a.shape() == b.shape()) {
    Tensor out(a.shape());
    out.matrix() = f(a.matrix().array(), b.matrix().array()).matrix();
    return out;
  }
  const bool a_big = is_suffix(b.shape(), a.shape());
  if (!a_big && !is_suffix(a.shape(), b.shape())) throw ShapeError(op, a.shape(), b.shape());
  const Tensor& big = a_big ? a : b;
  const Tensor& small = a_big ? b : a;
  const Index n = small.size();
  const Index reps = big.size() / n;
  Tensor out(big.shape());
  ConstMap bv(big.data(), reps, n);
  ConstMap sv(small.data(), 1, n);
  Map ov(out.data(), reps, n);
  for (Index r = 0; r < reps; ++r) {
    if (a_big)
      ov.row(r) = f(bv.row(r).array(), sv.row(0).array()).matrix();
    else
      ov.row(r) = f(sv.row(0).array(), bv.row(r).array()).matrix();
  }
  return out;
}

// Expands `small` to `big_shape` by repetition over leading dims.
Tensor expand(const Tensor& small, const Shape& big_shape) {
  if (small.shape() == big_shape) return small;
  const Index n = small.size();
  Tensor out(big_shape);
  Map ov(out.data(), out.size() / n, n);
  ov.rowwise() = ConstMap(small.data(), 1, n).row(0);
  return out;
}

void accumulate(std::vector<std::optional<Tensor>>& grads, NodeId id, Tensor g) {
  auto& slot = grads[static_cast<std::size_t>(id)];
  if (slot)
    slot->matrix() += g.matrix();
  else
    slot = std::move(g);
}

Tape& tape_of(Var v) {
  if (!v.tape) throw Error("op on a detached Var");
  return *v.tape;
}

Tape& common_tape(Var a, Var b) {
  if (a.tape != b.tape) throw Error("operands recorded on different tapes");
  return tape_of(a);
}

double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const Tensor& Var::value() const {
  if (!tape) throw Error("value of a detached Var");
  return tape->node(id).value;
}

Tensor Gradients::operator[](Var v) const {
  if (has(v)) return *grads_[v.id];
  return Tensor::zeros_like(v.value());
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite()) throw NonFiniteError("leaf");
  TapeNode n;
  n.kind = OpKind::kLeaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

Var Tape::record(OpKind kind, std::vector<NodeId> parents, Tensor value, std::vector<Tensor> saved,
                 std::vector<Index> iargs, double darg) {
  if (!value.all_finite()) throw NonFiniteError(std::string(op_name(kind)));
  TapeNode n;
  n.kind = kind;
  n.requires_grad = std::any_of(parents.begin(), parents.end(), [&](NodeId p) { return node(p).requires_grad; });
  n.parents = std::move(parents);
  n.value = std::move(value);
  n.saved = std::move(saved);
  n.iargs = std::move(iargs);
  n.darg = darg;
  nodes_.push_back(std::move(n));
  return {this, static_cast<NodeId>(nodes_.size() - 1)};
}

Var Tape::custom(std::span<const Var> inputs, Tensor value, BackwardFn backward) {
  std::vector<NodeId> parents;
  for (const Var& v : inputs) {
    if (v.tape != this) throw Error("custom: input recorded on a different tape");
    parents.push_back(v.id);
  }
  Var out = record(OpKind::kCustom, std::move(parents), std::move(value));
  nodes_.back().custom = std::move(backward);
  return out;
}

Gradients Tape::backward(Var loss) const {
  if (loss.tape != this) throw Error("backward: loss recorded on a different tape");
  const TapeNode& root = node(loss.id);
  if (root.value.size() != 1) throw ShapeError("backward (loss must be scalar)", root.value.shape(), {});

  std::vector<std::optional<Tensor>> grads(nodes_.size());
  grads[loss.id] = Tensor(root.value.shape(), MatrixXd::Ones(1, 1));

  for (NodeId id = loss.id; id >= 0; --id) {
    const TapeNode& n = nodes_[static_cast<std::size_t>(id)];
    if (!grads[id] || !n.requires_grad || n.kind == OpKind::kLeaf) continue;
    const Tensor& g = *grads[id];
    auto wants = [&](std::size_t i) { return node(n.parents[i]).requires_grad; };
    auto in = [&](std::size_t i) -> const Tensor& { return node(n.parents[i]).value; };

    switch (n.kind) {
      case OpKind::kLeaf:
        break;
      case OpKind::kMatMul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        if (wants(0)) accumulate(grads, n.parents[0], Tensor(a.shape(), g.matrix() * b.matrix().transpose()));
        if (wants(1)) accumulate(grads, n.parents[1], Tensor(b.shape(), a.matrix().transpose() * g.matrix()));
        break;
      }
      case OpKind::kAdd:
      case OpKind::kSub: {
        if (wants(0)) accumulate(grads, n.parents[0], reduce_to(g, in(0).shape()));
        if (wants(1)) {
          Tensor gb = reduce_to(g, in(1).shape());
          if (n.kind == OpKind::kSub) gb.matrix() = -gb.matrix();
          accumulate(grads, n.parents[1], std::move(gb));
        }
        break;
      }
      case OpKind::kMul: {
        const Tensor& a = in(0);
        const Tensor& b = in(1);
        if (wants(0)) {
          Tensor t(g.shape());
          t.matrix() = g.matrix().cwiseProduct(expand(b, g.shape()).matrix());
          accumulate(grads, n.parents[0], reduce_to(t, a.shape()));
        }
        if (wants(1)) {
          Tensor t(g.shape());
          t.matrix() = g.matrix().cwiseProduct(expand(a, g.shape()).matrix());
          accumulate(grads, n.parents[1], reduce_to(t, b.shape()));
        }
        break;
      }
      case OpKind::kScale: {
        Tensor t(g.shape());
        t.matrix() = g.matrix() * n.darg;
        accumulate(grads, n.parents[0], std::move(t));
        break;
      }
      case OpKind::kConcat: {
        const Index axis = n.iargs[0];
        const AxisView ov = axis_view(g.shape(), axis);
        ConstMap gv(g.data(), ov.outer, ov.n * ov.inner);
        Index offset = 0;
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
          const Tensor& part = in(i);
          const Index width = part.dim(axis) * ov.inner;
          if (wants(i)) {
            Tensor t(part.shape());
            Map(t.data(), ov.outer, width) = gv.block(0, offset, ov.outer, width);
            accumulate(grads, n.parents[i], std::move(t));
          }
          offset += width;
        }
        break;
      }
      case OpKind::kSlice: {
        const Index axis = n.iargs[0];
        const Index begin = n.iargs[1];
        const Tensor& a = in(0);
        const AxisView av = axis_view(a.shape(), axis);
        Tensor t(a.shape());
        Map(t.data(), av.outer, av.n * av.inner).block(0, begin * av.inner, av.outer, g.dim(axis) * av.inner) =
            ConstMap(g.data(), av.outer, g.dim(axis) * av.inner);
        accumulate(grads, n.parents[0], std::move(t));
        break;
      }
      case OpKind::kTranspose:
        accumulate(grads, n.parents[0], Tensor(in(0).shape(), g.matrix().transpose()));
        break;
      case OpKind::kReshape:
        accumulate(grads, n.parents[0], g.reshaped(in(0).shape()));
        break;
      case OpKind::kRelu: {
        Tensor t(g.shape());
        t.matrix() = (in(0).matrix().array() > 0.0).select(g.matrix(), 0.0);
        accumulate(grads, n.parents[0], std::move(t));
        break;
      }
      case OpKind::kSigmoid: {
        const auto y = n.value.matrix().array();
        Tensor t(g.shape());
        t.matrix() = (g.matrix().array() * y * (1.0 - y)).matrix();
        accumulate(grads, n.parents[0], std::move(t));
        break;
      }
      case OpKind::kTanh: {
        const auto y = n.value.matrix().array();
        Tensor t(g.shape());
        t.matrix() = (g.matrix().array() * (1.0 - y.square())).matrix();
        accumulate(grads, n.parents[0], std::move(t));
        break;
      }
      case OpKind::kSoftmax: {
        const MatrixXd& y = n.value.matrix();
        const Eigen::VectorXd dots = g.matrix().cwiseProduct(y).rowwise().sum();
        Tensor t(g.shape());
        t.matrix() = y.cwiseProduct(g.matrix() - dots.replicate(1, y.cols()));
        accumulate(grads, n.parents[0], std::move(t));
        break;
      }
      case OpKind::kLayerNorm: {
        const MatrixXd& xhat = n.saved[0].matrix();
        const MatrixXd& inv_sigma = n.saved[1].matrix();  // rows x 1
        const Tensor& gain = in(1);
        const Index d = xhat.cols();
        if (wants(1)) {
          Tensor t(gain.shape());
          t.matrix() = g.matrix().cwiseProduct(xhat).colwise().sum();
          accumulate(grads, n.parents[1], std::move(t));
        }
        if (wants(2)) {
          Tensor t(in(2).shape());
          t.matrix() = g.matrix().colwise().sum();
          accumulate(grads, n.parents[2], std::move(t));
        }
        if (wants(0)) {
          const MatrixXd dxhat = g.matrix().array().rowwise() * gain.matrix().row(0).array();
          const Eigen::VectorXd mean_d = dxhat.rowwise().sum() / static_cast<double>(d);
          const Eigen::VectorXd mean_dx = dxhat.cwiseProduct(xhat).rowwise().sum() / static_cast<double>(d);
          MatrixXd dx = dxhat;
          dx.colwise() -= mean_d;
          dx.array() -= xhat.array().colwise() * mean_dx.array();
          dx = dx.array().colwise() * inv_sigma.col(0).array();
          accumulate(grads, n.parents[0], Tensor(in(0).shape(), std::move(dx)));
        }
        break;
      }
      case OpKind::kGather: {
        Tensor t(in(0).shape());
        for (std::size_t r = 0; r < n.iargs.size(); ++r) t.matrix().row(n.iargs[r]) += g.matrix().row(r);
        accumulate(grads, n.parents[0], std::move(t));
        break;
      }
      case OpKind::kMean: {
        const Index axis = n.iargs[0];
        const Tensor& a = in(0);
        const AxisView av = axis_view(a.shape(), axis);
        Tensor t(a.shape());
        const double inv = 1.0 / static_cast<double>(av.n);
        ConstMap gv(g.data(), av.outer, av.inner);
        Map tv(t.data(), av.outer * av.n, av.inner);
        for (Index o = 0; o < av.outer; ++o)
          for (Index k = 0; k < av.n; ++k) tv.row(o * av.n + k) = gv.row(o) * inv;
        accumulate(grads, n.parents[0], std::move(t));
        break;
      }
      case OpKind::kSum: {
        Tensor t(in(0).shape());
        t.matrix().setConstant(g.item());
        accumulate(grads, n.parents[0], std::move(t));
        break;
      }
      case OpKind::kBceWithLogits: {
        const Tensor& z = in(0);
        const MatrixXd& y = n.saved[0].matrix();
        Tensor t(z.shape());
        const double s = g.item() / static_cast<double>(z.size());
        t.matrix() = (z.matrix().unaryExpr([](double v) { return stable_sigmoid(v); }) - y) * s;
        accumulate(grads, n.parents[0], std::move(t));
        break;
      }
      case OpKind::kCustom: {
        std::vector<const Tensor*> inputs;
        for (std::size_t i = 0; i < n.parents.size(); ++i) inputs.push_back(&in(i));
        std::vector<Tensor> pg = n.custom(g, inputs, n.value);
        if (pg.size() != n.parents.size()) throw Error("custom backward returned wrong gradient count");
        for (std::size_t i = 0; i < n.parents.size(); ++i) {
          if (pg[i].shape() != in(i).shape()) throw ShapeError("custom backward", pg[i].shape(), in(i).shape());
          if (wants(i)) accumulate(grads, n.parents[i], std::move(pg[i]));
        }
        break;
      }
    }
  }
  return Gradients(std::move(grads));
}

Var matmul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() < 1 || bv.rank() != 2 || av.shape().back() != bv.dim(0)) throw ShapeError("matmul", av.shape(), bv.shape());
  Shape out_shape(av.shape().begin(), av.shape().end() - 1);
  out_shape.push_back(bv.dim(1));
  return t.record(OpKind::kMatMul, {a.id, b.id}, Tensor(std::move(out_shape), av.matrix() * bv.matrix()));
}

Var add(Var a, Var b) {
  Tape& t = common_tape(a, b);
  return t.record(OpKind::kAdd, {a.id, b.id},
                  broadcast_binary("add", a.value(), b.value(), [](const auto& x, const auto& y) { return x + y; }));
}

Var sub(Var a, Var b) {
  Tape& t = common_tape(a, b);
  return t.record(OpKind::kSub, {a.id, b.id},
                  broadcast_binary("sub", a.value(), b.value(), [](const auto& x, const auto& y) { return x - y; }));
}

Var mul(Var a, Var b) {
  Tape& t = common_tape(a, b);
  return t.record(OpKind::kMul, {a.id, b.id},
                  broadcast_binary("mul", a.value(), b.value(), [](const auto& x, const auto& y) { return x * y; }));
}

Var scale(Var a, double factor) {
  const Tensor& av = a.value();
  Tensor out(av.shape(), av.matrix() * factor);
  return tape_of(a).record(OpKind::kScale, {a.id}, std::move(out), {}, {}, factor);
}

Var concat(std::span<const Var> parts, Index axis) {
  if (parts.empty()) throw Error("concat: no inputs");
  Tape& t = tape_of(parts[0]);
  const Shape& first = parts[0].shape();
  const Index ax = normalize_axis(axis, static_cast<Index>(first.size()), "concat", first);
  Shape out_shape = first;
  out_shape[ax] = 0;
  std::vector<NodeId> ids;
  for (const Var& p : parts) {
    if (p.tape != &t) throw Error("concat: inputs recorded on different tapes");
    const Shape& s = p.shape();
    if (s.size() != first.size()) throw ShapeError("concat", first, s);
    for (std::size_t i = 0; i < s.size(); ++i)
      if (static_cast<Index>(i) != ax && s[i] != first[i]) throw ShapeError("concat", first, s);
    out_shape[ax] += s[ax];
    ids.push_back(p.id);
  }
  Tensor out(out_shape);
  const AxisView ov = axis_view(out_shape, ax);
  Map outv(out.data(), ov.outer, ov.n * ov.inner);
  Index offset = 0;
  for (const Var& p : parts) {
    const Index width = p.shape()[ax] * ov.inner;
    outv.block(0, offset, ov.outer, width) = ConstMap(p.value().data(), ov.outer, width);
    offset += width;
  }
  return t.record(OpKind::kConcat, std::move(ids), std::move(out), {}, {ax});
}

Var slice(Var a, Index axis, Index begin, Index length) {
  const Tensor& av = a.value();
  const Index ax = normalize_axis(axis, av.rank(), "slice", av.shape());
  if (begin < 0 || length < 0 || begin + length > av.dim(ax)) throw ShapeError("slice", av.shape(), {begin, length});
  Shape out_shape = av.shape();
  out_shape[ax] = length;
  Tensor out(out_shape);
  const AxisView v = axis_view(av.shape(), ax);
  Map(out.data(), v.outer, length * v.inner) =
      ConstMap(av.data(), v.outer, v.n * v.inner).block(0, begin * v.inner, v.outer, length * v.inner);
  return tape_of(a).record(OpKind::kSlice, {a.id}, std::move(out), {}, {ax, begin});
}

Var transpose(Var a) {
  const Tensor& av = a.value();
  if (av.rank() != 2) throw ShapeError("transpose", av.shape(), {});
  return tape_of(a).record(OpKind::kTranspose, {a.id}, Tensor({av.dim(1), av.dim(0)}, av.matrix().transpose()));
}

Var reshape(Var a, Shape shape) {
  return tape_of(a).record(OpKind::kReshape, {a.id}, a.value().reshaped(std::move(shape)));
}

Var relu(Var a) {
  const Tensor& av = a.value();
  return tape_of(a).record(OpKind::kRelu, {a.id}, Tensor(av.shape(), av.matrix().cwiseMax(0.0)));
}

Var sigmoid(Var a) {
  const Tensor& av = a.value();
  return tape_of(a).record(OpKind::kSigmoid, {a.id},
                           Tensor(av.shape(), av.matrix().unaryExpr([](double v) { return stable_sigmoid(v); })));
}

Var tanh(Var a) {
  const Tensor& av = a.value();
  return tape_of(a).record(OpKind::kTanh, {a.id}, Tensor(av.shape(), av.matrix().array().tanh().matrix()));
}

Var softmax(Var a) {
  const Tensor& av = a.value();
  if (av.rank() < 1) throw ShapeError("softmax", av.shape(), {});
  MatrixXd y = av.matrix();
  for (Index r = 0; r < y.rows(); ++r) {
    auto row = y.row(r);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return tape_of(a).record(OpKind::kSoftmax, {a.id}, Tensor(av.shape(), std::move(y)));
}

Var layer_norm(Var x, Var gain, Var bias, double eps) {
  Tape& t = common_tape(x, gain);
  common_tape(x, bias);
  const Tensor& xv = x.value();
  const Index d = xv.cols();
  if (xv.rank() < 1 || gain.value().shape() != Shape{d}) throw ShapeError("layer_norm", xv.shape(), gain.value().shape());
  if (bias.value().shape() != Shape{d}) throw ShapeError("layer_norm", xv.shape(), bias.value().shape());
  const MatrixXd& m = xv.matrix();
  const Eigen::VectorXd mu = m.rowwise().mean();
  MatrixXd centered = m.colwise() - mu;
  const Eigen::VectorXd var = centered.array().square().rowwise().sum() / static_cast<double>(d);
  const Eigen::VectorXd inv_sigma = (var.array() + eps).rsqrt();
  MatrixXd xhat = centered.array().colwise() * inv_sigma.array();
  MatrixXd y = (xhat.array().rowwise() * gain.value().matrix().row(0).array()).rowwise() +
               bias.value().matrix().row(0).array();
  return t.record(OpKind::kLayerNorm, {x.id, gain.id, bias.id}, Tensor(xv.shape(), std::move(y)),
                  {Tensor({m.rows(), d}, std::move(xhat)), Tensor({m.rows(), 1}, MatrixXd(inv_sigma))});
}

Var gather_rows(Var table, std::span<const Index> indices) {
  const Tensor& tv = table.value();
  if (tv.rank() != 2) throw ShapeError("gather_rows", tv.shape(), {});
  MatrixXd out(static_cast<Index>(indices.size()), tv.cols());
  for (std::size_t r = 0; r < indices.size(); ++r) {
    if (indices[r] < 0 || indices[r] >= tv.rows()) throw ShapeError("gather_rows", tv.shape(), {indices[r]});
    out.row(static_cast<Index>(r)) = tv.matrix().row(indices[r]);
  }
  return tape_of(table).record(OpKind::kGather, {table.id},
                               Tensor({static_cast<Index>(indices.size()), tv.cols()}, std::move(out)), {},
                               std::vector<Index>(indices.begin(), indices.end()));
}

Var mean(Var a, Index axis) {
  const Tensor& av = a.value();
  const Index ax = normalize_axis(axis, av.rank(), "mean", av.shape());
  const AxisView v = axis_view(av.shape(), ax);
  Shape out_shape = av.shape();
  out_shape.erase(out_shape.begin() + ax);
  Tensor out(out_shape);
  ConstMap in(av.data(), v.outer * v.n, v.inner);
  Map ov(out.data(), v.outer, v.inner);
  for (Index o = 0; o < v.outer; ++o) ov.row(o) = in.middleRows(o * v.n, v.n).colwise().sum() / static_cast<double>(v.n);
  return tape_of(a).record(OpKind::kMean, {a.id}, std::move(out), {}, {ax});
}

Var sum(Var a) {
  return tape_of(a).record(OpKind::kSum, {a.id}, Tensor::scalar(a.value().matrix().sum()));
}

Var bce_with_logits(Var logits, const Tensor& labels) {
  const Tensor& z = logits.value();
  if (z.shape() != labels.shape()) throw ShapeError("bce_with_logits", z.shape(), labels.shape());
  if (z.size() == 0) throw ShapeError("bce_with_logits", z.shape(), labels.shape());
  if (!labels.all_finite()) throw NonFiniteError("bce_with_logits labels");
  const auto za = z.matrix().array();
  const auto ya = labels.matrix().array();
  const double loss = (za.max(0.0) - za * ya + (-za.abs()).exp().log1p()).sum() / static_cast<double>(z.size());
  return tape_of(logits).record(OpKind::kBceWithLogits, {logits.id}, Tensor::scalar(loss), {labels});
}

GradCheckResult grad_check(const ScalarFn& f, const std::vector<Tensor>& inputs, double h) {
  auto evaluate = [&](const std::vector<Tensor>& xs) {
    Tape tape;
    std::vector<Var> vars;
    for (const Tensor& x : xs) vars.push_back(tape.leaf(x));
    const double v = f(tape, vars).value().item();
    if (!std::isfinite(v)) throw NonFiniteError("grad_check");
    return v;
  };

  Tape tape;
  std::vector<Var> vars;
  for (const Tensor& x : inputs) vars.push_back(tape.leaf(x));
  Var loss = f(tape, vars);
  if (!std::isfinite(loss.value().item())) throw NonFiniteError("grad_check");
  const Gradients grads = tape.backward(loss);

  GradCheckResult result;
  std::vector<Tensor> probe = inputs;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const Tensor analytic = grads[vars[k]];
    for (Index i = 0; i < inputs[k].size(); ++i) {
      const double x0 = inputs[k][i];
      probe[k][i] = x0 + h;
      const double fp = evaluate(probe);
      probe[k][i] = x0 - h;
      const double fm = evaluate(probe);
      probe[k][i] = x0;
      const double numeric = (fp - fm) / (2.0 * h);
      const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(numeric));
      if (err > result.max_rel_error) result = {err, k, i};
    }
  }
  return result;
}

double grad_check(const std::function<Var(Tape&, Var)>& f, const Tensor& x, double h) {
  return grad_check([&](Tape& t, std::span<const Var> v) { return f(t, v[0]); }, std::vector<Tensor>{x}, h).max_rel_error;
}

}  // namespace mmehr
