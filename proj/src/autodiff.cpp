#include "pirnn/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "pirnn/errors.hpp"
#include "pirnn/kernels.hpp"

namespace pirnn {

namespace {

void require_same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw UsageError("operands recorded on different tapes");
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) {
    throw DimensionError(std::string(op) + ": shapes " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " differ");
  }
}

void require_matrix(const char* op, const Tensor& a) {
  if (a.rank() != 2) throw DimensionError(std::string(op) + ": expected a matrix, got " + shape_string(a.shape()));
}

bool any_requires(Tape& t, std::initializer_list<Var> vs) {
  if (!t.grad_enabled()) return false;
  return std::any_of(vs.begin(), vs.end(), [&](Var v) { return t.requires_grad(v); });
}

void add_into(Tensor& dst, const Tensor& src) {
  auto d = dst.values();
  auto s = src.values();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] += s[i];
}

// Elementwise unary op whose derivative is a function of the output value.
template <typename F, typename DF>
Var unary_from_output(Var a, F f, DF df) {
  Tape& t = *a.tape;
  Tensor out = Tensor::zeros(a.value().shape());
  const auto in = a.value().values();
  auto o = out.values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] = f(in[i]);
  const bool rg = any_requires(t, {a});
  return t.record(std::move(out), rg, [ia = a.id, df](Tape& tp, std::uint32_t self) {
    const auto y = tp.value(self).values();
    const auto g = tp.out_grad(self).values();
    auto dst = tp.grad_sink(ia).values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += g[i] * df(y[i]);
  });
}

}  // namespace

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::record(Tensor value, bool requires_grad, BackwardFn fn) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_ && requires_grad;
  if (n.requires_grad) n.backward = std::move(fn);
  nodes_.push_back(std::move(n));
  return Var{this, static_cast<std::uint32_t>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) { return record(std::move(value), false, nullptr); }

Var Tape::variable(Tensor value) { return record(std::move(value), true, nullptr); }

Var Tape::param(const ParamStore& store, std::size_t index) {
  if (param_leaf_.size() < store.size()) param_leaf_.resize(store.size(), -1);
  if (param_leaf_[index] >= 0) return Var{this, static_cast<std::uint32_t>(param_leaf_[index])};
  Var v = record(store.value(index), true, nullptr);
  nodes_[v.id].param_index = static_cast<std::int64_t>(index);
  param_leaf_[index] = v.id;
  return v;
}

Tensor Tape::grad(Var v) const {
  const Node& n = nodes_[v.id];
  return n.grad.empty() ? Tensor::zeros(n.value.shape()) : n.grad;
}

Tensor& Tape::grad_sink(std::uint32_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty()) n.grad = Tensor::zeros(n.value.shape());
  return n.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw UsageError("backward: loss belongs to another tape");
  if (value(loss).size() != 1) {
    throw UsageError("backward: loss must be a scalar, got shape " + shape_string(value(loss).shape()));
  }
  for (auto& n : nodes_) n.grad = Tensor();
  if (!nodes_[loss.id].requires_grad) return;
  grad_sink(loss.id)[0] = 1.0;
  for (std::int64_t id = loss.id; id >= 0; --id) {
    Node& n = nodes_[static_cast<std::size_t>(id)];
    if (n.backward && !n.grad.empty()) n.backward(*this, static_cast<std::uint32_t>(id));
  }
}

void Tape::accumulate_param_grads(std::vector<Tensor>& buffers) const {
  for (std::size_t i = 0; i < param_leaf_.size(); ++i) {
    if (param_leaf_[i] < 0) continue;
    const Node& n = nodes_[static_cast<std::size_t>(param_leaf_[i])];
    if (!n.grad.empty()) add_into(buffers.at(i), n.grad);
  }
}

void backward(Var loss, ParamStore& store) {
  loss.tape->backward(loss);
  store.zero_grad();
  std::vector<Tensor> grads;
  grads.reserve(store.size());
  for (std::size_t i = 0; i < store.size(); ++i) grads.push_back(std::move(store.grad(i)));
  loss.tape->accumulate_param_grads(grads);
  for (std::size_t i = 0; i < store.size(); ++i) store.grad(i) = std::move(grads[i]);
}

Var matmul(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix("matmul", av);
  require_matrix("matmul", bv);
  if (av.cols() != bv.rows()) {
    throw DimensionError("matmul: inner dimensions of " + shape_string(av.shape()) + " and " +
                         shape_string(bv.shape()) + " disagree");
  }
  const std::size_t r = av.rows(), k = av.cols(), c = bv.cols();
  Tensor out = Tensor::zeros({r, c});
  kernels::gemm_nn(av.values(), bv.values(), out.values(), r, k, c);
  Tape& t = *a.tape;
  return t.record(std::move(out), any_requires(t, {a, b}), [ia = a.id, ib = b.id, r, k, c](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.requires_grad(ia)) kernels::gemm_nt(g.values(), tp.value(ib).values(), tp.grad_sink(ia).values(), r, c, k, true);
    if (tp.requires_grad(ib)) kernels::gemm_tn(tp.value(ia).values(), g.values(), tp.grad_sink(ib).values(), k, r, c, true);
  });
}

Var matmul_nt(Var a, Var b) {
  require_same_tape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  require_matrix("matmul_nt", av);
  require_matrix("matmul_nt", bv);
  if (av.cols() != bv.cols()) {
    throw DimensionError("matmul_nt: widths of " + shape_string(av.shape()) + " and " + shape_string(bv.shape()) +
                         " disagree");
  }
  const std::size_t r = av.rows(), k = av.cols(), c = bv.rows();
  Tensor out = Tensor::zeros({r, c});
  kernels::gemm_nt(av.values(), bv.values(), out.values(), r, k, c);
  Tape& t = *a.tape;
  return t.record(std::move(out), any_requires(t, {a, b}), [ia = a.id, ib = b.id, r, k, c](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.requires_grad(ia)) kernels::gemm_nn(g.values(), tp.value(ib).values(), tp.grad_sink(ia).values(), r, c, k, true);
    if (tp.requires_grad(ib)) kernels::gemm_tn(g.values(), tp.value(ia).values(), tp.grad_sink(ib).values(), c, r, k, true);
  });
}

Var add(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("add", a.value(), b.value());
  Tensor out = a.value();
  add_into(out, b.value());
  Tape& t = *a.tape;
  return t.record(std::move(out), any_requires(t, {a, b}), [ia = a.id, ib = b.id](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.requires_grad(ia)) add_into(tp.grad_sink(ia), g);
    if (tp.requires_grad(ib)) add_into(tp.grad_sink(ib), g);
  });
}

Var sub(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("sub", a.value(), b.value());
  Tensor out = a.value();
  auto o = out.values();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] -= bv[i];
  Tape& t = *a.tape;
  return t.record(std::move(out), any_requires(t, {a, b}), [ia = a.id, ib = b.id](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.requires_grad(ia)) add_into(tp.grad_sink(ia), g);
    if (tp.requires_grad(ib)) {
      auto d = tp.grad_sink(ib).values();
      const auto gv = g.values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] -= gv[i];
    }
  });
}

Var mul(Var a, Var b) {
  require_same_tape(a, b);
  require_same_shape("mul", a.value(), b.value());
  Tensor out = a.value();
  auto o = out.values();
  const auto bv = b.value().values();
  for (std::size_t i = 0; i < o.size(); ++i) o[i] *= bv[i];
  Tape& t = *a.tape;
  return t.record(std::move(out), any_requires(t, {a, b}), [ia = a.id, ib = b.id](Tape& tp, std::uint32_t self) {
    const auto g = tp.out_grad(self).values();
    if (tp.requires_grad(ia)) {
      auto d = tp.grad_sink(ia).values();
      const auto other = tp.value(ib).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * other[i];
    }
    if (tp.requires_grad(ib)) {
      auto d = tp.grad_sink(ib).values();
      const auto other = tp.value(ia).values();
      for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i] * other[i];
    }
  });
}

Var add_row(Var a, Var bias) {
  require_same_tape(a, bias);
  const Tensor& av = a.value();
  const Tensor& bv = bias.value();
  require_matrix("add_row", av);
  if (bv.size() != av.cols()) {
    throw DimensionError("add_row: bias " + shape_string(bv.shape()) + " does not fit rows of " +
                         shape_string(av.shape()));
  }
  Tensor out = av;
  const std::size_t r = av.rows(), c = av.cols();
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < c; ++j) out(i, j) += bv[j];
  }
  Tape& t = *a.tape;
  return t.record(std::move(out), any_requires(t, {a, bias}), [ia = a.id, ib = bias.id, r, c](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.requires_grad(ia)) add_into(tp.grad_sink(ia), g);
    if (tp.requires_grad(ib)) {
      auto d = tp.grad_sink(ib).values();
      for (std::size_t i = 0; i < r; ++i) {
        for (std::size_t j = 0; j < c; ++j) d[j] += g(i, j);
      }
    }
  });
}

Var scale(Var a, double s) {
  Tensor out = a.value();
  for (auto& v : out.values()) v *= s;
  Tape& t = *a.tape;
  return t.record(std::move(out), any_requires(t, {a}), [ia = a.id, s](Tape& tp, std::uint32_t self) {
    const auto g = tp.out_grad(self).values();
    auto d = tp.grad_sink(ia).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += s * g[i];
  });
}

Var one_minus(Var a) {
  return unary_from_output(a, [](double x) { return 1.0 - x; }, [](double) { return -1.0; });
}

Var sigmoid(Var a) {
  return unary_from_output(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); }, [](double y) { return y * (1.0 - y); });
}

Var tanh_op(Var a) {
  return unary_from_output(a, [](double x) { return std::tanh(x); }, [](double y) { return 1.0 - y * y; });
}

Tensor row_softmax(const Tensor& a) {
  Tensor out = a;
  const std::size_t r = a.rows(), c = a.cols();
  for (std::size_t i = 0; i < r; ++i) {
    auto row = out.row(i);
    const double mx = *std::max_element(row.begin(), row.end());
    double total = 0.0;
    for (auto& v : row) {
      v = std::exp(v - mx);
      total += v;
    }
    for (auto& v : row) v /= total;
  }
  (void)c;
  return out;
}

Var row_softmax(Var a) {
  require_matrix("row_softmax", a.value());
  Tensor out = row_softmax(a.value());
  Tape& t = *a.tape;
  return t.record(std::move(out), any_requires(t, {a}), [ia = a.id](Tape& tp, std::uint32_t self) {
    const Tensor& y = tp.value(self);
    const Tensor& g = tp.out_grad(self);
    Tensor& d = tp.grad_sink(ia);
    const std::size_t r = y.rows(), c = y.cols();
    for (std::size_t i = 0; i < r; ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += g(i, j) * y(i, j);
      for (std::size_t j = 0; j < c; ++j) d(i, j) += y(i, j) * (g(i, j) - dot);
    }
  });
}

Var concat_rows(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_rows: no operands");
  Tape& t = *parts[0].tape;
  const std::size_t c = parts[0].value().cols();
  std::size_t r = 0;
  bool rg = false;
  std::vector<std::uint32_t> ids;
  for (Var p : parts) {
    require_same_tape(parts[0], p);
    require_matrix("concat_rows", p.value());
    if (p.value().cols() != c) {
      throw DimensionError("concat_rows: width " + std::to_string(p.value().cols()) + " does not match " +
                           std::to_string(c));
    }
    r += p.value().rows();
    rg = rg || (t.grad_enabled() && t.requires_grad(p));
    ids.push_back(p.id);
  }
  Tensor out = Tensor::zeros({r, c});
  std::size_t offset = 0;
  for (Var p : parts) {
    const auto v = p.value().values();
    std::copy(v.begin(), v.end(), out.values().begin() + static_cast<std::ptrdiff_t>(offset));
    offset += v.size();
  }
  return t.record(std::move(out), rg, [ids = std::move(ids)](Tape& tp, std::uint32_t self) {
    const auto g = tp.out_grad(self).values();
    std::size_t off = 0;
    for (auto id : ids) {
      const std::size_t n = tp.value(id).size();
      if (tp.requires_grad(id)) {
        auto d = tp.grad_sink(id).values();
        for (std::size_t i = 0; i < n; ++i) d[i] += g[off + i];
      }
      off += n;
    }
  });
}

Var concat_cols(std::span<const Var> parts) {
  if (parts.empty()) throw UsageError("concat_cols: no operands");
  Tape& t = *parts[0].tape;
  const std::size_t r = parts[0].value().rows();
  std::size_t c = 0;
  bool rg = false;
  std::vector<std::uint32_t> ids;
  for (Var p : parts) {
    require_same_tape(parts[0], p);
    require_matrix("concat_cols", p.value());
    if (p.value().rows() != r) {
      throw DimensionError("concat_cols: height " + std::to_string(p.value().rows()) + " does not match " +
                           std::to_string(r));
    }
    c += p.value().cols();
    rg = rg || (t.grad_enabled() && t.requires_grad(p));
    ids.push_back(p.id);
  }
  Tensor out = Tensor::zeros({r, c});
  std::size_t col = 0;
  for (Var p : parts) {
    const Tensor& v = p.value();
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < v.cols(); ++j) out(i, col + j) = v(i, j);
    }
    col += v.cols();
  }
  return t.record(std::move(out), rg, [ids = std::move(ids)](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.out_grad(self);
    std::size_t col0 = 0;
    for (auto id : ids) {
      const std::size_t w = tp.value(id).cols();
      if (tp.requires_grad(id)) {
        Tensor& d = tp.grad_sink(id);
        for (std::size_t i = 0; i < g.rows(); ++i) {
          for (std::size_t j = 0; j < w; ++j) d(i, j) += g(i, col0 + j);
        }
      }
      col0 += w;
    }
  });
}

Var slice_cols(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_matrix("slice_cols", av);
  if (begin >= end || end > av.cols()) {
    throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of " +
                         shape_string(av.shape()));
  }
  const std::size_t r = av.rows(), w = end - begin;
  Tensor out = Tensor::zeros({r, w});
  for (std::size_t i = 0; i < r; ++i) {
    for (std::size_t j = 0; j < w; ++j) out(i, j) = av(i, begin + j);
  }
  Tape& t = *a.tape;
  return t.record(std::move(out), any_requires(t, {a}), [ia = a.id, begin, r, w](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.out_grad(self);
    Tensor& d = tp.grad_sink(ia);
    for (std::size_t i = 0; i < r; ++i) {
      for (std::size_t j = 0; j < w; ++j) d(i, begin + j) += g(i, j);
    }
  });
}

Var slice_rows(Var a, std::size_t begin, std::size_t end) {
  const Tensor& av = a.value();
  require_matrix("slice_rows", av);
  if (begin >= end || end > av.rows()) {
    throw DimensionError("slice_rows: [" + std::to_string(begin) + ", " + std::to_string(end) + ") out of " +
                         shape_string(av.shape()));
  }
  const std::size_t c = av.cols();
  std::vector<double> data(av.values().begin() + static_cast<std::ptrdiff_t>(begin * c),
                           av.values().begin() + static_cast<std::ptrdiff_t>(end * c));
  Tensor out = Tensor::zeros({end - begin, c});
  std::copy(data.begin(), data.end(), out.values().begin());
  Tape& t = *a.tape;
  return t.record(std::move(out), any_requires(t, {a}), [ia = a.id, begin, c](Tape& tp, std::uint32_t self) {
    const auto g = tp.out_grad(self).values();
    auto d = tp.grad_sink(ia).values();
    for (std::size_t i = 0; i < g.size(); ++i) d[begin * c + i] += g[i];
  });
}

Var reshape(Var a, Tensor::Shape shape) {
  Tensor out = Tensor::zeros(shape);
  if (out.size() != a.value().size()) {
    throw DimensionError("reshape: " + shape_string(a.value().shape()) + " to " + shape_string(shape));
  }
  std::copy(a.value().values().begin(), a.value().values().end(), out.values().begin());
  Tape& t = *a.tape;
  return t.record(std::move(out), any_requires(t, {a}), [ia = a.id](Tape& tp, std::uint32_t self) {
    const auto g = tp.out_grad(self).values();
    auto d = tp.grad_sink(ia).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += g[i];
  });
}

Var select_rows(Var a, Var b, const std::vector<bool>& take_b) {
  require_same_tape(a, b);
  require_same_shape("select_rows", a.value(), b.value());
  const std::size_t r = a.value().rows(), c = a.value().cols();
  if (take_b.size() != r) throw DimensionError("select_rows: mask length does not match row count");
  Tensor out = a.value();
  for (std::size_t i = 0; i < r; ++i) {
    if (!take_b[i]) continue;
    auto src = b.value().row(i);
    std::copy(src.begin(), src.end(), out.row(i).begin());
  }
  Tape& t = *a.tape;
  return t.record(std::move(out), any_requires(t, {a, b}), [ia = a.id, ib = b.id, take_b, c](Tape& tp, std::uint32_t self) {
    const Tensor& g = tp.out_grad(self);
    for (std::size_t i = 0; i < take_b.size(); ++i) {
      const std::uint32_t id = take_b[i] ? ib : ia;
      if (!tp.requires_grad(id)) continue;
      auto d = tp.grad_sink(id).row(i);
      auto gr = g.row(i);
      for (std::size_t j = 0; j < c; ++j) d[j] += gr[j];
    }
  });
}

Var sum(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v;
  Tape& t = *a.tape;
  return t.record(Tensor::scalar(s), any_requires(t, {a}), [ia = a.id](Tape& tp, std::uint32_t self) {
    const double g = tp.out_grad(self)[0];
    for (auto& d : tp.grad_sink(ia).values()) d += g;
  });
}

Var sum_squares(Var a) {
  double s = 0.0;
  for (double v : a.value().values()) s += v * v;
  Tape& t = *a.tape;
  return t.record(Tensor::scalar(s), any_requires(t, {a}), [ia = a.id](Tape& tp, std::uint32_t self) {
    const double g = tp.out_grad(self)[0];
    const auto x = tp.value(ia).values();
    auto d = tp.grad_sink(ia).values();
    for (std::size_t i = 0; i < d.size(); ++i) d[i] += 2.0 * g * x[i];
  });
}

Var weighted_sq_dist(Var pred, const Tensor& target, std::span<const double> row_weights) {
  const Tensor& p = pred.value();
  require_same_shape("weighted_sq_dist", p, target);
  const std::size_t r = p.rows(), c = p.cols();
  if (row_weights.size() != r) throw DimensionError("weighted_sq_dist: one weight per row required");
  double s = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double e = p(i, j) - target(i, j);
      row += e * e;
    }
    s += row_weights[i] * row;
  }
  Tape& t = *pred.tape;
  std::vector<double> w(row_weights.begin(), row_weights.end());
  return t.record(Tensor::scalar(s), any_requires(t, {pred}),
                  [ip = pred.id, target, w = std::move(w), c](Tape& tp, std::uint32_t self) {
                    const double g = tp.out_grad(self)[0];
                    const Tensor& x = tp.value(ip);
                    Tensor& d = tp.grad_sink(ip);
                    for (std::size_t i = 0; i < w.size(); ++i) {
                      for (std::size_t j = 0; j < c; ++j) d(i, j) += 2.0 * g * w[i] * (x(i, j) - target(i, j));
                    }
                  });
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions of " + shape_string(a.shape()) + " and " +
                         shape_string(b.shape()) + " disagree");
  }
  Tensor out = Tensor::zeros({a.rows(), b.cols()});
  kernels::gemm_nn(a.values(), b.values(), out.values(), a.rows(), a.cols(), b.cols());
  return out;
}

}  // namespace pirnn
