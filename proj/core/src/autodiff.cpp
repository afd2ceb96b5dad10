#include "chor/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "chor/error.hpp"

namespace chor::ad {

namespace {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMatrix>;
using MutMap = Eigen::Map<RowMatrix>;

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw InvalidArgument("operands recorded on different tapes");
  return *a.tape;
}

Tape& tape_of(Var a) {
  if (a.tape == nullptr) throw InvalidArgument("variable is not attached to a tape");
  return *a.tape;
}

// Strides of `shape` aligned to an output of rank `rank`, zero on broadcast dims.
std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t stride = 1;
  for (std::size_t k = 0; k < shape.size(); ++k) {
    const std::size_t src = shape.size() - 1 - k;
    const std::size_t dst = out.size() - 1 - k;
    strides[dst] = shape[src] == 1 ? 0 : stride;
    stride *= shape[src];
  }
  return strides;
}

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t rank = std::max(a.size(), b.size());
  Shape out(rank, 1);
  for (std::size_t k = 0; k < rank; ++k) {
    const std::size_t da = k < a.size() ? a[a.size() - 1 - k] : 1;
    const std::size_t db = k < b.size() ? b[b.size() - 1 - k] : 1;
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": cannot broadcast " + shape_string(a) + " with " + shape_string(b));
    }
    out[rank - 1 - k] = std::max(da, db);
  }
  return out;
}

// Calls f(out_index, a_index, b_index) for every output element.
template <class F>
void for_each_broadcast(const Shape& out, const Shape& sa, const Shape& sb, F&& f) {
  const std::size_t n = shape_size(out);
  const std::size_t na = shape_size(sa);
  const std::size_t nb = shape_size(sb);
  if (sa == out && sb == out) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i);
    return;
  }
  if (sa == out && nb == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, 0);
    return;
  }
  if (sb == out && na == 1) {
    for (std::size_t i = 0; i < n; ++i) f(i, 0, i);
    return;
  }
  // Row broadcast: b matches the trailing dims of a == out.
  if (sa == out && sb.size() <= out.size() && std::equal(sb.begin(), sb.end(), out.end() - sb.size())) {
    for (std::size_t i = 0; i < n; ++i) f(i, i, i % nb);
    return;
  }
  const auto stra = broadcast_strides(sa, out);
  const auto strb = broadcast_strides(sb, out);
  std::vector<std::size_t> idx(out.size(), 0);
  std::size_t ia = 0;
  std::size_t ib = 0;
  for (std::size_t i = 0; i < n; ++i) {
    f(i, ia, ib);
    for (std::size_t d = out.size(); d-- > 0;) {
      ++idx[d];
      ia += stra[d];
      ib += strb[d];
      if (idx[d] < out[d]) break;
      ia -= stra[d] * out[d];
      ib -= strb[d] * out[d];
      idx[d] = 0;
    }
  }
}

enum class BinaryOp { kAdd, kSub, kMul, kDiv };

Var binary(Var a, Var b, BinaryOp op, const char* name) {
  Tape& tape = same_tape(a, b);
  const Shape sa = a.shape();
  const Shape sb = b.shape();
  const Shape out_shape = broadcast_shape(sa, sb, name);
  Tensor out(out_shape);
  {
    auto o = out.mutable_data();
    auto x = a.value().data();
    auto y = b.value().data();
    switch (op) {
      case BinaryOp::kAdd:
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] + y[ib]; });
        break;
      case BinaryOp::kSub:
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] - y[ib]; });
        break;
      case BinaryOp::kMul:
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] * y[ib]; });
        break;
      case BinaryOp::kDiv:
        for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) { o[i] = x[ia] / y[ib]; });
        break;
    }
  }
  const std::size_t ida = a.id;
  const std::size_t idb = b.id;
  return tape.record(std::move(out), {ida, idb}, [ida, idb, sa, sb, out_shape, op](Tape& t, std::size_t self) {
    auto g = t.grad_of(self).data();
    auto x = t.value(ida).data();
    auto y = t.value(idb).data();
    if (t.requires_grad(ida)) {
      auto ga = t.grad_buffer(ida);
      for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        switch (op) {
          case BinaryOp::kAdd:
          case BinaryOp::kSub: ga[ia] += g[i]; break;
          case BinaryOp::kMul: ga[ia] += g[i] * y[ib]; break;
          case BinaryOp::kDiv: ga[ia] += g[i] / y[ib]; break;
        }
      });
    }
    if (t.requires_grad(idb)) {
      auto gb = t.grad_buffer(idb);
      for_each_broadcast(out_shape, sa, sb, [&](std::size_t i, std::size_t ia, std::size_t ib) {
        switch (op) {
          case BinaryOp::kAdd: gb[ib] += g[i]; break;
          case BinaryOp::kSub: gb[ib] -= g[i]; break;
          case BinaryOp::kMul: gb[ib] += g[i] * x[ia]; break;
          case BinaryOp::kDiv: gb[ib] -= g[i] * x[ia] / (y[ib] * y[ib]); break;
        }
      });
    }
  });
}

// Elementwise op; `deriv(x, y)` is dy/dx given input x and output y.
template <class Fwd, class Deriv>
Var unary(Var a, Fwd fwd, Deriv deriv) {
  Tape& tape = tape_of(a);
  const Tensor& in = a.value();
  Tensor out(in.shape());
  {
    auto o = out.mutable_data();
    auto x = in.data();
    for (std::size_t i = 0; i < x.size(); ++i) o[i] = fwd(x[i]);
  }
  const std::size_t id = a.id;
  return tape.record(std::move(out), {id}, [id, deriv](Tape& t, std::size_t self) {
    if (!t.requires_grad(id)) return;
    auto g = t.grad_of(self).data();
    auto x = t.value(id).data();
    auto y = t.value(self).data();
    auto ga = t.grad_buffer(id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * deriv(x[i], y[i]);
  });
}

struct AxisSplit {
  std::size_t outer = 1;
  std::size_t extent = 1;
  std::size_t inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis) {
  AxisSplit s;
  for (std::size_t d = 0; d < axis; ++d) s.outer *= shape[d];
  s.extent = shape[axis];
  for (std::size_t d = axis + 1; d < shape.size(); ++d) s.inner *= shape[d];
  return s;
}

std::size_t last_dim(const Shape& shape, const char* op) {
  if (shape.empty()) throw ShapeError(std::string(op) + " needs rank >= 1, got a scalar");
  return shape.back();
}

}  // namespace

const Tensor& Var::value() const {
  if (tape == nullptr) throw InvalidArgument("variable is not attached to a tape");
  return tape->value(id);
}

Var Tape::leaf(Tensor value) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
  Node node;
  node.value = std::move(value);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = std::any_of(parents.begin(), parents.end(), [&](std::size_t p) { return nodes_[p].requires_grad; });
  node.parents = std::move(parents);
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, nodes_.size() - 1};
}

std::span<double> Tape::grad_buffer(std::size_t id) {
  Node& node = nodes_[id];
  if (!node.has_grad) {
    node.grad = Tensor(node.value.shape(), 0.0);
    node.has_grad = true;
  }
  return node.grad.mutable_data();
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw InvalidArgument("loss was recorded on a different tape");
  if (nodes_[loss.id].value.size() != 1) {
    throw ShapeError("backward needs a scalar loss, got shape " + shape_string(nodes_[loss.id].value.shape()));
  }
  for (auto& node : nodes_) {
    node.has_grad = false;
    node.grad = Tensor();
  }
  grad_buffer(loss.id)[0] = 1.0;
  for (std::size_t id = loss.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.has_grad || !node.backward) continue;
    node.backward(*this, id);
  }
}

Tensor Tape::grad(Var v) const {
  const Node& node = nodes_.at(v.id);
  if (!node.has_grad) return Tensor(node.value.shape(), 0.0);
  return node.grad;
}

Var matmul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  if (sa.size() != 2 || sb.size() != 2 || sa[1] != sb[0]) {
    throw ShapeError("matmul: incompatible shapes " + shape_string(sa) + " and " + shape_string(sb));
  }
  const auto m = static_cast<Eigen::Index>(sa[0]);
  const auto k = static_cast<Eigen::Index>(sa[1]);
  const auto n = static_cast<Eigen::Index>(sb[1]);
  Tensor out(Shape{sa[0], sb[1]});
  // Row-wise products; batch-invariant.
  MutMap dst(out.mutable_data().data(), m, n);
  ConstMap lhs(a.value().data().data(), m, k);
  ConstMap rhs(b.value().data().data(), k, n);
  for (Eigen::Index r = 0; r < m; ++r) dst.row(r).noalias() = lhs.row(r) * rhs;
  const std::size_t ida = a.id;
  const std::size_t idb = b.id;
  return tape.record(std::move(out), {ida, idb}, [ida, idb, m, k, n](Tape& t, std::size_t self) {
    ConstMap g(t.grad_of(self).data().data(), m, n);
    if (t.requires_grad(ida)) {
      MutMap(t.grad_buffer(ida).data(), m, k).noalias() += g * ConstMap(t.value(idb).data().data(), k, n).transpose();
    }
    if (t.requires_grad(idb)) {
      MutMap(t.grad_buffer(idb).data(), k, n).noalias() += ConstMap(t.value(ida).data().data(), m, k).transpose() * g;
    }
  });
}

Var add(Var a, Var b) { return binary(a, b, BinaryOp::kAdd, "add"); }
Var sub(Var a, Var b) { return binary(a, b, BinaryOp::kSub, "sub"); }
Var mul(Var a, Var b) { return binary(a, b, BinaryOp::kMul, "mul"); }
Var div(Var a, Var b) { return binary(a, b, BinaryOp::kDiv, "div"); }

Var neg(Var a) {
  return unary(a, [](double x) { return -x; }, [](double, double) { return -1.0; });
}

Var scale(Var a, double factor) {
  return unary(a, [factor](double x) { return factor * x; }, [factor](double, double) { return factor; });
}

Var add_scalar(Var a, double value) {
  return unary(a, [value](double x) { return x + value; }, [](double, double) { return 1.0; });
}

Var sigmoid(Var a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); });
}

Var tanh(Var a) {
  return unary(a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var relu(Var a) {
  return unary(a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var leaky_relu(Var a, double alpha) {
  return unary(
      a, [alpha](double x) { return x > 0 ? x : alpha * x; }, [alpha](double x, double) { return x > 0 ? 1.0 : alpha; });
}

Var exp(Var a) {
  return unary(a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(Var a) {
  return unary(a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var square(Var a) {
  return unary(a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Var clamp(Var a, double lo, double hi) {
  return unary(
      a, [lo, hi](double x) { return std::clamp(x, lo, hi); },
      [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

Var softmax(Var a) {
  Tape& tape = tape_of(a);
  const std::size_t n = last_dim(a.shape(), "softmax");
  const Tensor& in = a.value();
  const std::size_t rows = in.size() / n;
  Tensor out(in.shape());
  {
    auto x = in.data();
    auto y = out.mutable_data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x.data() + r * n;
      double* yr = y.data() + r * n;
      const double peak = *std::max_element(xr, xr + n);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += (yr[j] = std::exp(xr[j] - peak));
      for (std::size_t j = 0; j < n; ++j) yr[j] /= total;
    }
  }
  const std::size_t id = a.id;
  return tape.record(std::move(out), {id}, [id, n, rows](Tape& t, std::size_t self) {
    auto g = t.grad_of(self).data();
    auto y = t.value(self).data();
    auto ga = t.grad_buffer(id);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t j = 0; j < n; ++j) dot += g[r * n + j] * y[r * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += y[r * n + j] * (g[r * n + j] - dot);
    }
  });
}

Var log_softmax(Var a) {
  Tape& tape = tape_of(a);
  const std::size_t n = last_dim(a.shape(), "log_softmax");
  const Tensor& in = a.value();
  const std::size_t rows = in.size() / n;
  Tensor out(in.shape());
  {
    auto x = in.data();
    auto y = out.mutable_data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x.data() + r * n;
      const double peak = *std::max_element(xr, xr + n);
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += std::exp(xr[j] - peak);
      const double lse = peak + std::log(total);
      for (std::size_t j = 0; j < n; ++j) y[r * n + j] = xr[j] - lse;
    }
  }
  const std::size_t id = a.id;
  return tape.record(std::move(out), {id}, [id, n, rows](Tape& t, std::size_t self) {
    auto g = t.grad_of(self).data();
    auto y = t.value(self).data();
    auto ga = t.grad_buffer(id);
    for (std::size_t r = 0; r < rows; ++r) {
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += g[r * n + j];
      for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += g[r * n + j] - std::exp(y[r * n + j]) * total;
    }
  });
}

Var logsumexp(Var a) {
  Tape& tape = tape_of(a);
  const Shape& in_shape = a.shape();
  const std::size_t n = last_dim(in_shape, "logsumexp");
  const Tensor& in = a.value();
  const std::size_t rows = in.size() / n;
  Tensor out(Shape(in_shape.begin(), in_shape.end() - 1));
  {
    auto x = in.data();
    auto y = out.mutable_data();
    for (std::size_t r = 0; r < rows; ++r) {
      const double* xr = x.data() + r * n;
      const double peak = *std::max_element(xr, xr + n);
      if (!std::isfinite(peak)) {
        y[r] = peak;
        continue;
      }
      double total = 0.0;
      for (std::size_t j = 0; j < n; ++j) total += std::exp(xr[j] - peak);
      y[r] = peak + std::log(total);
    }
  }
  const std::size_t id = a.id;
  return tape.record(std::move(out), {id}, [id, n, rows](Tape& t, std::size_t self) {
    auto g = t.grad_of(self).data();
    auto y = t.value(self).data();
    auto x = t.value(id).data();
    auto ga = t.grad_buffer(id);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < n; ++j) ga[r * n + j] += g[r] * std::exp(x[r * n + j] - y[r]);
    }
  });
}

Var sum(Var a) {
  Tape& tape = tape_of(a);
  double total = 0.0;
  for (double v : a.value().data()) total += v;
  const std::size_t id = a.id;
  return tape.record(Tensor::scalar(total), {id}, [id](Tape& t, std::size_t self) {
    const double g = t.grad_of(self)[0];
    for (double& v : t.grad_buffer(id)) v += g;
  });
}

Var mean(Var a) { return scale(sum(a), 1.0 / static_cast<double>(a.value().size())); }

Var sum_axis(Var a, std::size_t axis) {
  Tape& tape = tape_of(a);
  const Shape& in_shape = a.shape();
  if (axis >= in_shape.size()) {
    throw ShapeError("sum_axis: axis " + std::to_string(axis) + " out of range for " + shape_string(in_shape));
  }
  const AxisSplit s = split_axis(in_shape, axis);
  Shape out_shape = in_shape;
  out_shape.erase(out_shape.begin() + static_cast<std::ptrdiff_t>(axis));
  Tensor out(out_shape, 0.0);
  {
    auto x = a.value().data();
    auto y = out.mutable_data();
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t e = 0; e < s.extent; ++e)
        for (std::size_t i = 0; i < s.inner; ++i) y[o * s.inner + i] += x[(o * s.extent + e) * s.inner + i];
  }
  const std::size_t id = a.id;
  return tape.record(std::move(out), {id}, [id, s](Tape& t, std::size_t self) {
    auto g = t.grad_of(self).data();
    auto ga = t.grad_buffer(id);
    for (std::size_t o = 0; o < s.outer; ++o)
      for (std::size_t e = 0; e < s.extent; ++e)
        for (std::size_t i = 0; i < s.inner; ++i) ga[(o * s.extent + e) * s.inner + i] += g[o * s.inner + i];
  });
}

Var concat(std::span<const Var> parts, std::size_t axis) {
  if (parts.empty()) throw InvalidArgument("concat: no inputs");
  Tape& tape = tape_of(parts[0]);
  const Shape& first = parts[0].shape();
  if (axis >= first.size()) {
    throw ShapeError("concat: axis " + std::to_string(axis) + " out of range for " + shape_string(first));
  }
  Shape out_shape = first;
  out_shape[axis] = 0;
  std::vector<std::size_t> ids;
  std::vector<std::size_t> extents;
  for (const Var& p : parts) {
    if (p.tape != &tape) throw InvalidArgument("concat: operands recorded on different tapes");
    const Shape& s = p.shape();
    bool ok = s.size() == first.size();
    for (std::size_t d = 0; ok && d < s.size(); ++d) ok = d == axis || s[d] == first[d];
    if (!ok) throw ShapeError("concat: cannot join " + shape_string(first) + " with " + shape_string(s));
    out_shape[axis] += s[axis];
    ids.push_back(p.id);
    extents.push_back(s[axis]);
  }
  const AxisSplit total = split_axis(out_shape, axis);
  Tensor out(out_shape);
  {
    auto y = out.mutable_data();
    std::size_t offset = 0;
    for (std::size_t k = 0; k < parts.size(); ++k) {
      auto x = parts[k].value().data();
      const std::size_t block = extents[k] * total.inner;
      for (std::size_t o = 0; o < total.outer; ++o) {
        std::copy_n(x.data() + o * block, block, y.data() + (o * total.extent + offset) * total.inner);
      }
      offset += extents[k];
    }
  }
  return tape.record(std::move(out), ids, [ids, extents, total](Tape& t, std::size_t self) {
    auto g = t.grad_of(self).data();
    std::size_t offset = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const std::size_t block = extents[k] * total.inner;
      if (t.requires_grad(ids[k])) {
        auto gx = t.grad_buffer(ids[k]);
        for (std::size_t o = 0; o < total.outer; ++o) {
          const double* src = g.data() + (o * total.extent + offset) * total.inner;
          for (std::size_t i = 0; i < block; ++i) gx[o * block + i] += src[i];
        }
      }
      offset += extents[k];
    }
  });
}

Var slice(Var a, std::size_t axis, std::size_t begin, std::size_t end) {
  Tape& tape = tape_of(a);
  const Shape& in_shape = a.shape();
  if (axis >= in_shape.size() || begin >= end || end > in_shape[axis]) {
    throw ShapeError("slice: range [" + std::to_string(begin) + ", " + std::to_string(end) + ") on axis " +
                     std::to_string(axis) + " invalid for " + shape_string(in_shape));
  }
  const AxisSplit s = split_axis(in_shape, axis);
  Shape out_shape = in_shape;
  out_shape[axis] = end - begin;
  const std::size_t block = (end - begin) * s.inner;
  Tensor out(out_shape);
  {
    auto x = a.value().data();
    auto y = out.mutable_data();
    for (std::size_t o = 0; o < s.outer; ++o) {
      std::copy_n(x.data() + (o * s.extent + begin) * s.inner, block, y.data() + o * block);
    }
  }
  const std::size_t id = a.id;
  return tape.record(std::move(out), {id}, [id, s, begin, block](Tape& t, std::size_t self) {
    auto g = t.grad_of(self).data();
    auto ga = t.grad_buffer(id);
    for (std::size_t o = 0; o < s.outer; ++o) {
      double* dst = ga.data() + (o * s.extent + begin) * s.inner;
      for (std::size_t i = 0; i < block; ++i) dst[i] += g[o * block + i];
    }
  });
}

Var reshape(Var a, Shape shape) {
  Tape& tape = tape_of(a);
  Tensor out = a.value().reshaped(std::move(shape));
  const std::size_t id = a.id;
  return tape.record(std::move(out), {id}, [id](Tape& t, std::size_t self) {
    auto g = t.grad_of(self).data();
    auto ga = t.grad_buffer(id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var mse(Var a, Var b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("mse: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  }
  return mean(square(sub(a, b)));
}

}  // namespace chor::ad
