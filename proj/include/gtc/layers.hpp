#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <string>

#include "gtc/autodiff.hpp"
#include "gtc/tensor.hpp"

namespace gtc {

using Rng = std::mt19937_64;

// Visitor over (qualified name, parameter) pairs; the order is the
// parameter order used by the optimizer and checkpoints.
using ParamVisitor = std::function<void(const std::string&, Tensor&)>;

// Uniform in [0, 1) from the top 53 bits; identical on every platform.
double uniform01(Rng& rng);
// Standard normal via Box-Muller on uniform01.
double standard_normal(Rng& rng);

// Glorot/Xavier uniform with the given fan sizes.
Tensor glorot(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng);

/// Affine map y = x W^T + b with W stored (out x in), b (1 x out).
struct Affine {
  Tensor weight;
  Tensor bias;

  static Affine init(std::size_t in, std::size_t out, Rng& rng);
  std::size_t in_dim() const { return weight.dim(1); }
  std::size_t out_dim() const { return weight.dim(0); }
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

ad::Var apply(ad::Tape& tape, const Affine& layer, const ad::Var& x);

}  // namespace gtc
