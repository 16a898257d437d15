#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "gtc/autodiff.hpp"
#include "gtc/graph.hpp"

namespace gtc {

enum class TokenMode { recorded, frozen };

TokenMode parse_token_mode(const std::string& s);
const char* to_string(TokenMode m);

/// Every knob of one GTC training run. Keys accepted by set() are the names
/// printed by entries(), e.g. "K", "lr", "tau".
struct TrainConfig {
  std::size_t schema_layers = 2;   // L_g
  std::size_t encoder_blocks = 1;  // L_tm
  std::size_t heads = 4;
  std::size_t max_hop = 3;         // K
  std::size_t dim = 64;            // d
  std::size_t model_dim = 64;      // d_m
  std::size_t attn_dim = 0;        // d_a; 0 means d_m
  double lr = 5e-3;
  double weight_decay = 0.0;
  double tau = 0.6;
  double lambda = 0.4;
  int theta_pos = 2;
  CountMode count_mode = CountMode::binary;
  std::size_t epochs = 200;
  std::size_t patience = 30;
  std::uint64_t seed = 0;
  TokenMode tokens = TokenMode::recorded;
  std::size_t batch_size = 0;  // 0 = full graph
  double dropout = 0.1;
  ad::Activation activation = ad::Activation::elu;
  ad::Activation semantic_outer = ad::Activation::identity;
  bool shared_encoder = false;
  bool mean_pooled = false;
  bool head = true;
  std::size_t head_dim = 64;
  bool extended_ranges = false;

  // Throws ConfigError naming the key for unknown keys or unparseable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  // (key, value) pairs in a fixed order; set(k, v) on each reproduces *this.
  std::vector<std::pair<std::string, std::string>> entries() const;
  // Range checks (L_g in [1,6]; L_tm, heads, K in [1,9] unless extended_ranges).
  void validate() const;
  std::size_t effective_attn_dim() const { return attn_dim ? attn_dim : model_dim; }

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

std::vector<std::string> config_keys();

}  // namespace gtc
