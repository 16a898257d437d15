#include "gtc/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "gtc/error.hpp"
#include "gtc/gemm.hpp"

namespace gtc::ad {

// ---- tape -----------------------------------------------------------------

const Tensor& Var::value() const { return tape_->value(id_); }

Tape::Tape(Mode mode, std::uint64_t seed, std::uint64_t step) : mode_(mode), seed_(seed), step_(step) {}

Var Tape::constant(Tensor value) {
  nodes_.push_back(Node{"constant", std::move(value), {}, false, false, {}, {}});
  return Var(this, nodes_.size() - 1);
}

Var Tape::param(const Tensor& value) {
  if (auto it = params_.find(&value); it != params_.end()) return Var(this, it->second);
  nodes_.push_back(Node{"param", value, {}, true, false, {}, {}});
  const std::size_t id = nodes_.size() - 1;
  params_.emplace(&value, id);
  return Var(this, id);
}

Var Tape::record(const char* op, Tensor value, std::vector<std::size_t> inputs, Backward backward) {
  bool rg = false;
  for (auto i : inputs) rg = rg || nodes_[i].requires_grad;
  nodes_.push_back(Node{op, std::move(value), {}, rg, false, std::move(inputs), rg ? std::move(backward) : Backward{}});
  return Var(this, nodes_.size() - 1);
}

Tensor& Tape::grad_buffer(std::size_t id) {
  Node& n = nodes_[id];
  if (!n.has_grad) {
    n.grad = Tensor(n.value.shape());
    n.has_grad = true;
  }
  return n.grad;
}

void Tape::backward(const Var& loss) {
  if (loss.tape_ != this) throw ArgumentError("backward: loss belongs to another tape");
  if (nodes_[loss.id()].value.size() != 1) {
    throw ArgumentError("backward: loss must be a scalar, got shape " + shape_str(nodes_[loss.id()].value.shape()));
  }
  for (auto& n : nodes_) {
    n.has_grad = false;
    n.grad = Tensor();
  }
  grad_buffer(loss.id())[0] = 1.0;
  for (std::size_t id = loss.id() + 1; id-- > 0;) {
    Node& n = nodes_[id];
    if (!n.has_grad || !n.requires_grad || !n.backward) continue;
    n.backward(*this, id);
  }
}

Tensor Tape::grad(const Var& v) const {
  const Node& n = nodes_[v.id()];
  return n.has_grad ? n.grad : Tensor(n.value.shape());
}

Tensor Tape::grad(const Tensor& param) const {
  const auto it = params_.find(&param);
  if (it == params_.end()) return Tensor(param.shape());
  return grad(Var(const_cast<Tape*>(this), it->second));
}

std::optional<std::string> Tape::first_non_finite() const {
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (!nodes_[id].value.all_finite()) {
      return std::string(nodes_[id].op) + "#" + std::to_string(id) + " " + shape_str(nodes_[id].value.shape());
    }
  }
  return std::nullopt;
}

Activation parse_activation(const std::string& s) {
  if (s == "identity" || s == "none") return Activation::identity;
  if (s == "elu") return Activation::elu;
  if (s == "tanh") return Activation::tanh;
  if (s == "sigmoid") return Activation::sigmoid;
  if (s == "relu") return Activation::relu;
  throw ArgumentError("unknown activation '" + s + "'");
}

const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::elu: return "elu";
    case Activation::tanh: return "tanh";
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
  }
  return "?";
}

// ---- helpers --------------------------------------------------------------

namespace {

Tape& same_tape(const Var& a, const Var& b, const char* op) {
  if (&a.tape() != &b.tape()) throw ArgumentError(std::string(op) + ": operands recorded on different tapes");
  return a.tape();
}

[[noreturn]] void shape_fail(const char* op, const Var& a, const Var& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

enum class Bcast { same, row, col, scalar };

Bcast broadcast_kind(const Var& a, const Var& b, const char* op) {
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.shape() == bv.shape()) return Bcast::same;
  if (bv.size() == 1) return Bcast::scalar;
  if (bv.rank() == 2 && bv.dim(0) == 1 && bv.dim(1) == av.cols()) return Bcast::row;
  if (bv.rank() == 2 && bv.dim(1) == 1 && bv.dim(0) == av.rows()) return Bcast::col;
  shape_fail(op, a, b);
}

inline std::size_t bindex(Bcast k, std::size_t r, std::size_t c, std::size_t cols) {
  switch (k) {
    case Bcast::same: return r * cols + c;
    case Bcast::row: return c;
    case Bcast::col: return r;
    case Bcast::scalar: return 0;
  }
  return 0;
}

// Folds a gradient shaped like `a` down to the broadcast operand's shape.
void reduce_into(Bcast k, const Tensor& g, const Tensor* weight, Tensor& dst, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      const std::size_t i = r * cols + c;
      dst[bindex(k, r, c, cols)] += weight ? g[i] * (*weight)[i] : g[i];
    }
  }
}

template <typename F, typename D>
Var unary(const Var& a, const char* op, F f, D dfdx) {
  Tape& t = a.tape();
  const Tensor& x = a.value();
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = f(x[i]);
  const std::size_t ia = a.id();
  return t.record(op, std::move(y), {ia}, [ia, dfdx](Tape& tp, std::size_t self) {
    if (!tp.requires_grad(ia)) return;
    const Tensor& g = tp.out_grad(self);
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * dfdx(xv[i], yv[i]);
  });
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

}  // namespace

// ---- elementwise ------------------------------------------------------------

Var add(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "add");
  const Bcast k = broadcast_kind(a, b, "add");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor y(av.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = av[r * cols + c] + bv[bindex(k, r, c, cols)];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("add", std::move(y), {ia, ib}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(ib)) reduce_into(k, g, nullptr, tp.grad_buffer(ib), rows, cols);
  });
}

Var sub(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "sub");
  const Bcast k = broadcast_kind(a, b, "sub");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor y(av.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = av[r * cols + c] - bv[bindex(k, r, c, cols)];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("sub", std::move(y), {ia, ib}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    }
    if (tp.requires_grad(ib)) {
      Tensor neg(g.shape());
      for (std::size_t i = 0; i < g.size(); ++i) neg[i] = -g[i];
      reduce_into(k, neg, nullptr, tp.grad_buffer(ib), rows, cols);
    }
  });
}

Var mul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "mul");
  const Bcast k = broadcast_kind(a, b, "mul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  const std::size_t rows = av.rows(), cols = av.cols();
  Tensor y(av.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = av[r * cols + c] * bv[bindex(k, r, c, cols)];
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("mul", std::move(y), {ia, ib}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& x = tp.value(ia);
    const Tensor& w = tp.value(ib);
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[r * cols + c] * w[bindex(k, r, c, cols)];
    }
    if (tp.requires_grad(ib)) reduce_into(k, g, &x, tp.grad_buffer(ib), rows, cols);
  });
}

Var scale(const Var& a, double s) {
  return unary(a, "scale", [s](double x) { return s * x; }, [s](double, double) { return s; });
}

Var tanh(const Var& a) {
  return unary(a, "tanh", [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; });
}

Var sigmoid(const Var& a) {
  return unary(
      a, "sigmoid",
      [](double x) { return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x)); },
      [](double, double y) { return y * (1.0 - y); });
}

Var elu(const Var& a, double alpha) {
  return unary(
      a, "elu", [alpha](double x) { return x > 0 ? x : alpha * std::expm1(x); },
      [alpha](double x, double y) { return x > 0 ? 1.0 : y + alpha; });
}

Var relu(const Var& a) {
  return unary(a, "relu", [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Var exp(const Var& a) {
  return unary(a, "exp", [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Var log(const Var& a) {
  return unary(a, "log", [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Var activate(const Var& a, Activation act) {
  switch (act) {
    case Activation::identity: return a;
    case Activation::elu: return elu(a);
    case Activation::tanh: return tanh(a);
    case Activation::sigmoid: return sigmoid(a);
    case Activation::relu: return relu(a);
  }
  return a;
}

// ---- linear algebra ---------------------------------------------------------

Var matmul(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "matmul");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() < 2 || bv.rank() != 2 || av.cols() != bv.dim(0)) shape_fail("matmul", a, b);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.dim(1);
  Shape out_shape = av.shape();
  out_shape.back() = n;
  Tensor y(out_shape);
  gemm(false, false, m, n, k, av.data(), bv.data(), y.data(), false);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("matmul", std::move(y), {ia, ib}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.requires_grad(ia)) gemm(false, true, m, k, n, g.data(), tp.value(ib).data(), tp.grad_buffer(ia).data(), true);
    if (tp.requires_grad(ib)) gemm(true, false, k, n, m, tp.value(ia).data(), g.data(), tp.grad_buffer(ib).data(), true);
  });
}

Var matmul_nt(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "matmul_nt");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() < 2 || bv.rank() != 2 || av.cols() != bv.dim(1)) shape_fail("matmul_nt", a, b);
  const std::size_t m = av.rows(), k = av.cols(), n = bv.dim(0);
  Shape out_shape = av.shape();
  out_shape.back() = n;
  Tensor y(out_shape);
  gemm(false, true, m, n, k, av.data(), bv.data(), y.data(), false);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("matmul_nt", std::move(y), {ia, ib}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    if (tp.requires_grad(ia)) gemm(false, false, m, k, n, g.data(), tp.value(ib).data(), tp.grad_buffer(ia).data(), true);
    if (tp.requires_grad(ib)) gemm(true, false, n, k, m, g.data(), tp.value(ia).data(), tp.grad_buffer(ib).data(), true);
  });
}

Var bmm(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "bmm");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(1)) shape_fail("bmm", a, b);
  const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(2);
  Tensor y({batch, m, n});
  for (std::size_t s = 0; s < batch; ++s) gemm(false, false, m, n, k, av.data() + s * m * k, bv.data() + s * k * n, y.data() + s * m * n, false);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("bmm", std::move(y), {ia, ib}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& x = tp.value(ia);
    const Tensor& w = tp.value(ib);
    for (std::size_t s = 0; s < batch; ++s) {
      if (tp.requires_grad(ia))
        gemm(false, true, m, k, n, g.data() + s * m * n, w.data() + s * k * n, tp.grad_buffer(ia).data() + s * m * k, true);
      if (tp.requires_grad(ib))
        gemm(true, false, k, n, m, x.data() + s * m * k, g.data() + s * m * n, tp.grad_buffer(ib).data() + s * k * n, true);
    }
  });
}

Var bmm_nt(const Var& a, const Var& b) {
  Tape& t = same_tape(a, b, "bmm_nt");
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  if (av.rank() != 3 || bv.rank() != 3 || av.dim(0) != bv.dim(0) || av.dim(2) != bv.dim(2)) shape_fail("bmm_nt", a, b);
  const std::size_t batch = av.dim(0), m = av.dim(1), k = av.dim(2), n = bv.dim(1);
  Tensor y({batch, m, n});
  for (std::size_t s = 0; s < batch; ++s) gemm(false, true, m, n, k, av.data() + s * m * k, bv.data() + s * n * k, y.data() + s * m * n, false);
  const std::size_t ia = a.id(), ib = b.id();
  return t.record("bmm_nt", std::move(y), {ia, ib}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& x = tp.value(ia);
    const Tensor& w = tp.value(ib);
    for (std::size_t s = 0; s < batch; ++s) {
      if (tp.requires_grad(ia))
        gemm(false, false, m, k, n, g.data() + s * m * n, w.data() + s * n * k, tp.grad_buffer(ia).data() + s * m * k, true);
      if (tp.requires_grad(ib))
        gemm(true, false, n, k, m, g.data() + s * m * n, x.data() + s * m * k, tp.grad_buffer(ib).data() + s * n * k, true);
    }
  });
}

Var transpose(const Var& a) {
  const Tensor& x = a.value();
  if (x.rank() != 2) throw ShapeError("transpose: expected a matrix, got " + shape_str(x.shape()));
  const std::size_t r = x.dim(0), c = x.dim(1);
  Tensor y({c, r});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) y[j * r + i] = x[i * c + j];
  const std::size_t ia = a.id();
  return a.tape().record("transpose", std::move(y), {ia}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += g[j * r + i];
  });
}

Var reshape(const Var& a, Shape shape) {
  const Tensor& x = a.value();
  Tensor y = x.reshaped(std::move(shape));
  const std::size_t ia = a.id();
  return a.tape().record("reshape", std::move(y), {ia}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

// ---- structural -------------------------------------------------------------

Var concat_last(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("concat_last: no inputs");
  Tape& t = parts.front().tape();
  const std::size_t rows = parts.front().value().rows();
  std::vector<std::size_t> widths, ids;
  std::size_t total = 0;
  for (const auto& p : parts) {
    same_tape(parts.front(), p, "concat_last");
    if (p.value().rows() != rows) shape_fail("concat_last", parts.front(), p);
    widths.push_back(p.value().cols());
    ids.push_back(p.id());
    total += p.value().cols();
  }
  Shape shape = parts.front().shape();
  shape.back() = total;
  Tensor y(shape);
  std::size_t off = 0;
  for (std::size_t k = 0; k < parts.size(); ++k) {
    const Tensor& x = parts[k].value();
    for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.data() + r * widths[k], widths[k], y.data() + r * total + off);
    off += widths[k];
  }
  return t.record("concat_last", std::move(y), ids, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    std::size_t o = 0;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      if (tp.requires_grad(ids[k])) {
        Tensor& gk = tp.grad_buffer(ids[k]);
        for (std::size_t r = 0; r < rows; ++r)
          for (std::size_t c = 0; c < widths[k]; ++c) gk[r * widths[k] + c] += g[r * total + o + c];
      }
      o += widths[k];
    }
  });
}

Var slice_last(const Var& a, std::size_t start, std::size_t len) {
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (start + len > cols) {
    throw ShapeError("slice_last: columns [" + std::to_string(start) + ", " + std::to_string(start + len) + ") of " + shape_str(x.shape()));
  }
  Shape shape = x.shape();
  shape.back() = len;
  Tensor y(shape);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(x.data() + r * cols + start, len, y.data() + r * len);
  const std::size_t ia = a.id();
  return a.tape().record("slice_last", std::move(y), {ia}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < len; ++c) ga[r * cols + start + c] += g[r * len + c];
  });
}

Var stack_middle(std::span<const Var> parts) {
  if (parts.empty()) throw ArgumentError("stack_middle: no inputs");
  Tape& t = parts.front().tape();
  const Shape& s0 = parts.front().shape();
  if (s0.size() != 2) throw ShapeError("stack_middle: inputs must be matrices, got " + shape_str(s0));
  const std::size_t n = s0[0], d = s0[1], L = parts.size();
  std::vector<std::size_t> ids;
  for (const auto& p : parts) {
    same_tape(parts.front(), p, "stack_middle");
    if (p.shape() != s0) shape_fail("stack_middle", parts.front(), p);
    ids.push_back(p.id());
  }
  Tensor y({n, L, d});
  for (std::size_t l = 0; l < L; ++l) {
    const Tensor& x = parts[l].value();
    for (std::size_t i = 0; i < n; ++i) std::copy_n(x.data() + i * d, d, y.data() + (i * L + l) * d);
  }
  return t.record("stack_middle", std::move(y), ids, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    for (std::size_t l = 0; l < L; ++l) {
      if (!tp.requires_grad(ids[l])) continue;
      Tensor& gl = tp.grad_buffer(ids[l]);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t c = 0; c < d; ++c) gl[i * d + c] += g[(i * L + l) * d + c];
    }
  });
}

Var gather_rows(const Var& a, std::span<const std::size_t> ids) {
  const Tensor& x = a.value();
  if (x.rank() == 0) throw ShapeError("gather_rows: scalar input");
  const std::size_t n = x.dim(0);
  const std::size_t stride = n ? x.size() / n : 0;
  std::vector<std::size_t> idx(ids.begin(), ids.end());
  for (auto i : idx) {
    if (i >= n) throw ArgumentError("gather_rows: row " + std::to_string(i) + " out of range for " + shape_str(x.shape()));
  }
  Shape shape = x.shape();
  shape[0] = idx.size();
  Tensor y(shape);
  for (std::size_t k = 0; k < idx.size(); ++k) std::copy_n(x.data() + idx[k] * stride, stride, y.data() + k * stride);
  const std::size_t ia = a.id();
  return a.tape().record("gather_rows", std::move(y), {ia}, [=, idx = std::move(idx)](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t k = 0; k < idx.size(); ++k)
      for (std::size_t c = 0; c < stride; ++c) ga[idx[k] * stride + c] += g[k * stride + c];
  });
}

// ---- normalizations ---------------------------------------------------------

Var row_softmax(const Var& a) {
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double* yr = y.data() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += (yr[c] = std::exp(xr[c] - mx));
    for (std::size_t c = 0; c < cols; ++c) yr[c] /= s;
  }
  const std::size_t ia = a.id();
  return a.tape().record("row_softmax", std::move(y), {ia}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * yv[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += yv[r * cols + c] * (g[r * cols + c] - dot);
    }
  });
}

Var layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps) {
  Tape& t = same_tape(a, gamma, "layer_norm");
  same_tape(a, beta, "layer_norm");
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (gamma.value().size() != cols || beta.value().size() != cols) shape_fail("layer_norm", a, gamma);
  Tensor xhat(x.shape());
  std::vector<double> rstd(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    double mu = 0.0;
    for (std::size_t c = 0; c < cols; ++c) mu += xr[c];
    mu /= static_cast<double>(cols);
    double var = 0.0;
    for (std::size_t c = 0; c < cols; ++c) var += (xr[c] - mu) * (xr[c] - mu);
    var /= static_cast<double>(cols);
    rstd[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t c = 0; c < cols; ++c) xhat[r * cols + c] = (xr[c] - mu) * rstd[r];
  }
  const Tensor& gv = gamma.value();
  const Tensor& bv = beta.value();
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = xhat[r * cols + c] * gv[c] + bv[c];
  const std::size_t ia = a.id(), ig = gamma.id(), ib = beta.id();
  return t.record("layer_norm", std::move(y), {ia, ig, ib},
                  [=, xhat = std::move(xhat), rstd = std::move(rstd)](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& gam = tp.value(ig);
    if (tp.requires_grad(ig)) {
      Tensor& gg = tp.grad_buffer(ig);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gg[c] += g[r * cols + c] * xhat[r * cols + c];
    }
    if (tp.requires_grad(ib)) {
      Tensor& gb = tp.grad_buffer(ib);
      for (std::size_t r = 0; r < rows; ++r)
        for (std::size_t c = 0; c < cols; ++c) gb[c] += g[r * cols + c];
    }
    if (tp.requires_grad(ia)) {
      Tensor& ga = tp.grad_buffer(ia);
      const double inv_n = 1.0 / static_cast<double>(cols);
      for (std::size_t r = 0; r < rows; ++r) {
        double m1 = 0.0, m2 = 0.0;
        for (std::size_t c = 0; c < cols; ++c) {
          const double dxh = g[r * cols + c] * gam[c];
          m1 += dxh;
          m2 += dxh * xhat[r * cols + c];
        }
        m1 *= inv_n;
        m2 *= inv_n;
        for (std::size_t c = 0; c < cols; ++c) {
          const double dxh = g[r * cols + c] * gam[c];
          ga[r * cols + c] += rstd[r] * (dxh - m1 - xhat[r * cols + c] * m2);
        }
      }
    }
  });
}

Var l2_normalize_rows(const Var& a) {
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  std::vector<double> norms(rows);
  Tensor y(x.shape());
  for (std::size_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += x[r * cols + c] * x[r * cols + c];
    norms[r] = std::sqrt(s);
    if (!(norms[r] > 0.0)) throw NumericError("l2_normalize_rows: row " + std::to_string(r) + " has zero norm");
    for (std::size_t c = 0; c < cols; ++c) y[r * cols + c] = x[r * cols + c] / norms[r];
  }
  const std::size_t ia = a.id();
  return a.tape().record("l2_normalize_rows", std::move(y), {ia}, [=, norms = std::move(norms)](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r) {
      double dot = 0.0;
      for (std::size_t c = 0; c < cols; ++c) dot += g[r * cols + c] * yv[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += (g[r * cols + c] - yv[r * cols + c] * dot) / norms[r];
    }
  });
}

// ---- reductions -------------------------------------------------------------

Var sum(const Var& a) {
  const Tensor& x = a.value();
  double s = 0.0;
  for (double v : x.values()) s += v;
  const std::size_t ia = a.id();
  return a.tape().record("sum", Tensor::scalar(s), {ia}, [=](Tape& tp, std::size_t self) {
    const double g = tp.out_grad(self)[0];
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g;
  });
}

Var mean(const Var& a) {
  const std::size_t n = a.value().size();
  if (n == 0) throw ShapeError("mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(n));
}

Var dropout(const Var& a, double p, std::uint64_t layer) {
  Tape& t = a.tape();
  if (!t.training() || p <= 0.0) return a;
  if (p >= 1.0) throw ArgumentError("dropout: p must be < 1, got " + std::to_string(p));
  const Tensor& x = a.value();
  const std::uint64_t key = splitmix64(splitmix64(splitmix64(t.seed()) ^ t.step()) ^ layer);
  const double keep_scale = 1.0 / (1.0 - p);
  Tensor mask(x.shape());
  Tensor y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double u = static_cast<double>(splitmix64(key ^ splitmix64(i)) >> 11) * 0x1.0p-53;
    mask[i] = u >= p ? keep_scale : 0.0;
    y[i] = x[i] * mask[i];
  }
  const std::size_t ia = a.id();
  return t.record("dropout", std::move(y), {ia}, [=, mask = std::move(mask)](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * mask[i];
  });
}

// ---- sparse / log-sum-exp ---------------------------------------------------

Var spmm(std::shared_ptr<const SparseMatrix> a, const Var& x) {
  const Tensor& xv = x.value();
  if (xv.rank() != 2 || xv.rows() != a->cols()) {
    throw ShapeError("spmm: " + std::to_string(a->rows()) + "x" + std::to_string(a->cols()) + " times " + shape_str(xv.shape()));
  }
  Tensor y = multiply(*a, xv);
  const std::size_t ix = x.id();
  return x.tape().record("spmm", std::move(y), {ix}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    multiply_transpose_accumulate(*a, g.data(), g.cols(), tp.grad_buffer(ix).data());
  });
}

Var row_logsumexp(const Var& a) {
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (cols == 0) throw ShapeError("row_logsumexp: no columns");
  Tensor y({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x.data() + r * cols;
    const double mx = *std::max_element(xr, xr + cols);
    double s = 0.0;
    for (std::size_t c = 0; c < cols; ++c) s += std::exp(xr[c] - mx);
    y[r] = mx + std::log(s);
  }
  const std::size_t ia = a.id();
  return a.tape().record("row_logsumexp", std::move(y), {ia}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t c = 0; c < cols; ++c) ga[r * cols + c] += g[r] * std::exp(xv[r * cols + c] - yv[r]);
  });
}

Var masked_row_logsumexp(const Var& a, std::shared_ptr<const SparseMatrix> mask) {
  const Tensor& x = a.value();
  const std::size_t rows = x.rows(), cols = x.cols();
  if (mask->rows() != rows || mask->cols() != cols) {
    throw ShapeError("masked_row_logsumexp: mask " + std::to_string(mask->rows()) + "x" + std::to_string(mask->cols()) +
                     " for values " + shape_str(x.shape()));
  }
  Tensor y({rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    const auto sel = mask->row_cols(r);
    if (sel.empty()) throw ArgumentError("masked_row_logsumexp: row " + std::to_string(r) + " selects nothing");
    double mx = -std::numeric_limits<double>::infinity();
    for (auto c : sel) mx = std::max(mx, x[r * cols + c]);
    double s = 0.0;
    for (auto c : sel) s += std::exp(x[r * cols + c] - mx);
    y[r] = mx + std::log(s);
  }
  const std::size_t ia = a.id();
  return a.tape().record("masked_row_logsumexp", std::move(y), {ia}, [=](Tape& tp, std::size_t self) {
    const Tensor& g = tp.out_grad(self);
    const Tensor& xv = tp.value(ia);
    const Tensor& yv = tp.value(self);
    Tensor& ga = tp.grad_buffer(ia);
    for (std::size_t r = 0; r < rows; ++r)
      for (auto c : mask->row_cols(r)) ga[r * cols + c] += g[r] * std::exp(xv[r * cols + c] - yv[r]);
  });
}

}  // namespace gtc::ad
