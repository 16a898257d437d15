#include "gtc/layers.hpp"

#include <cmath>
#include <numbers>

namespace gtc {

double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double standard_normal(Rng& rng) {
  double u1 = uniform01(rng);
  while (u1 <= 0.0) u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Tensor glorot(const Shape& shape, std::size_t fan_in, std::size_t fan_out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  Tensor t(shape);
  for (auto& v : t.values()) v = (2.0 * uniform01(rng) - 1.0) * limit;
  return t;
}

Affine Affine::init(std::size_t in, std::size_t out, Rng& rng) {
  return Affine{glorot({out, in}, in, out, rng), Tensor({1, out})};
}

void Affine::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".weight", weight);
  fn(prefix + ".bias", bias);
}

ad::Var apply(ad::Tape& tape, const Affine& layer, const ad::Var& x) {
  return ad::add(ad::matmul_nt(x, tape.param(layer.weight)), tape.param(layer.bias));
}

}  // namespace gtc
