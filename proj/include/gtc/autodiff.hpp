#pragma once

#include <cstddef>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "gtc/sparse.hpp"
#include "gtc/tensor.hpp"

// Reverse-mode differentiation over dense double tensors.
//
// A Tape records every primitive applied to its Vars. backward() walks the
// recording in reverse and accumulates gradients into every node that
// depends on a parameter leaf. One tape corresponds to one forward pass; a
// new tape is built for every optimizer step.
namespace gtc::ad {

enum class Mode { eval, train };

class Tape;

/// Handle to a recorded node. Cheap to copy; only valid while its tape lives.
class Var {
 public:
  Var() = default;

  const Tensor& value() const;
  const Shape& shape() const { return value().shape(); }
  std::size_t rows() const { return value().rows(); }
  std::size_t cols() const { return value().cols(); }
  std::size_t id() const { return id_; }
  Tape& tape() const { return *tape_; }
  bool valid() const { return tape_ != nullptr; }

 private:
  friend class Tape;
  Var(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

class Tape {
 public:
  // Called with the tape and the node's own id once its gradient is final.
  using Backward = std::function<void(Tape&, std::size_t)>;

  explicit Tape(Mode mode = Mode::eval, std::uint64_t seed = 0, std::uint64_t step = 0);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // Leaf that requires a gradient. The same tensor (by address) always maps
  // to the same leaf within one tape.
  Var param(const Tensor& value);
  Var record(const char* op, Tensor value, std::vector<std::size_t> inputs, Backward backward);

  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  const char* op(std::size_t id) const { return nodes_[id].op; }
  // Lazily zero-initialized gradient accumulator of a node.
  Tensor& grad_buffer(std::size_t id);
  const Tensor& out_grad(std::size_t id) const { return nodes_[id].grad; }

  // Seeds d(loss)/d(loss) = 1 and propagates. Loss must hold one value.
  void backward(const Var& loss);
  // Gradient of a node or of a parameter leaf; zeros when unreachable.
  Tensor grad(const Var& v) const;
  Tensor grad(const Tensor& param) const;

  Mode mode() const { return mode_; }
  bool training() const { return mode_ == Mode::train; }
  std::uint64_t seed() const { return seed_; }
  std::uint64_t step() const { return step_; }
  std::size_t size() const { return nodes_.size(); }

  // "op#id shape" of the earliest node holding a NaN or infinity.
  std::optional<std::string> first_non_finite() const;

 private:
  struct Node {
    const char* op;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    bool has_grad = false;
    std::vector<std::size_t> inputs;
    Backward backward;
  };

  std::deque<Node> nodes_;
  std::unordered_map<const Tensor*, std::size_t> params_;
  Mode mode_;
  std::uint64_t seed_;
  std::uint64_t step_;
};

enum class Activation { identity, elu, tanh, sigmoid, relu };

Activation parse_activation(const std::string& s);
const char* to_string(Activation a);

// ---- primitives -----------------------------------------------------------
//
// Elementwise binary ops broadcast `b` when it has the same shape as `a`, is
// a single row (1 x n), a single column (rows(a) x 1), or a single value.

Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double s);

Var matmul(const Var& a, const Var& b);     // (m,k)(k,n); leading axes of a fold into m
Var matmul_nt(const Var& a, const Var& b);  // a * b^T
Var bmm(const Var& a, const Var& b);        // (B,m,k)(B,k,n) -> (B,m,n)
Var bmm_nt(const Var& a, const Var& b);     // (B,m,k)(B,n,k) -> (B,m,n)
Var transpose(const Var& a);                // 2-D
Var reshape(const Var& a, Shape shape);

Var concat_last(std::span<const Var> parts);
Var slice_last(const Var& a, std::size_t start, std::size_t len);
// Stacks equally shaped (n, d) inputs into (n, parts.size(), d).
Var stack_middle(std::span<const Var> parts);
// Selects entries of the leading axis; ids may repeat.
Var gather_rows(const Var& a, std::span<const std::size_t> ids);

Var row_softmax(const Var& a);  // over the last axis
Var layer_norm(const Var& a, const Var& gamma, const Var& beta, double eps = 1e-5);
Var l2_normalize_rows(const Var& a);

Var tanh(const Var& a);
Var sigmoid(const Var& a);
Var elu(const Var& a, double alpha = 1.0);
Var relu(const Var& a);
Var exp(const Var& a);
Var log(const Var& a);
Var activate(const Var& a, Activation act);

Var sum(const Var& a);   // -> shape {1}
Var mean(const Var& a);  // -> shape {1}

// Inverted dropout; identity unless the tape is in training mode and p > 0.
// The keep mask is a pure function of (tape seed, tape step, layer, index).
Var dropout(const Var& a, double p, std::uint64_t layer);

// Constant sparse matrix times a dense (A.cols x d) Var.
Var spmm(std::shared_ptr<const SparseMatrix> a, const Var& x);
// Row-wise log-sum-exp over all columns, (m,n) -> (m,1), max-shifted.
Var row_logsumexp(const Var& a);
// Same, restricted to the stored pattern of `mask` row by row.
Var masked_row_logsumexp(const Var& a, std::shared_ptr<const SparseMatrix> mask);

}  // namespace gtc::ad
