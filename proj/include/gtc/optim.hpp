#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "gtc/tensor.hpp"

namespace gtc {

struct AdamConfig {
  double lr = 5e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // L2 term added to the gradient
};

struct AdamState {
  AdamConfig config;
  std::uint64_t step = 0;
  std::vector<Tensor> m;  // first moments, one per parameter
  std::vector<Tensor> v;  // second moments
};

// Bias-corrected Adam update. Moments are created on the first call; later
// calls must pass the same parameter list in the same order.
void adam_step(std::span<Tensor* const> params, std::span<const Tensor> grads, AdamState& state);

}  // namespace gtc
