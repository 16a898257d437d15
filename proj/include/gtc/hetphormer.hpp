#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "gtc/autodiff.hpp"
#include "gtc/layers.hpp"

// Hops-view branch: a pre-LN Transformer encoder over each metapath's hop
// token sequence followed by two-stage (token, then semantic) attention.
namespace gtc::hetphormer {

/// One pre-LN block: Z' = MSA(LN(Z)) + Z; Z = FFN(LN(Z')) + Z'.
/// Query/key/value/output weights are (d_m x d_m) applied as x W^T; head h
/// owns columns [h*d_K, (h+1)*d_K) of the projected width.
struct EncoderBlock {
  Tensor ln1_gamma, ln1_beta;
  Tensor wq, wk, wv, wo;
  Tensor ln2_gamma, ln2_beta;
  Affine ffn_in;   // d_m -> 2 d_m
  Affine ffn_out;  // 2 d_m -> d_m

  static EncoderBlock init(std::size_t model_dim, Rng& rng);
  void visit(const std::string& prefix, const ParamVisitor& fn);
};

struct EncoderParams {
  Tensor token_map;  // M_phi, (d x d_m)
  std::size_t heads = 1;
  std::vector<EncoderBlock> blocks;

  std::size_t model_dim() const { return token_map.dim(1); }
};

EncoderParams init_encoder(std::size_t in_dim, std::size_t model_dim, std::size_t heads, std::size_t blocks, Rng& rng);

struct EncoderOptions {
  double dropout = 0.0;
  ad::Activation ffn_activation = ad::Activation::elu;
  std::uint64_t dropout_layer = 0;  // base id for dropout keys
};

struct EncoderOutput {
  ad::Var sequence;                 // (b, K+1, d_m)
  std::vector<ad::Var> attention;   // per block and head, (b, K+1, K+1)
};

// Shared blocks with a per-metapath token map are expressed by passing the
// map and the block list separately.
EncoderOutput encoder_forward(ad::Tape& tape, const ad::Var& tokens, const Tensor& token_map,
                              std::span<const EncoderBlock> blocks, std::size_t heads, const EncoderOptions& opts = {});
EncoderOutput encoder_forward(ad::Tape& tape, const ad::Var& tokens, const EncoderParams& params,
                              const EncoderOptions& opts = {});

struct TokenAttention {
  ad::Var weights;  // (b, K)
  ad::Var fused;    // (b, d_m)
};

// alpha_k = softmax_k([Z^0 || Z^k] w^T) over k = 1..K; fused = Z^0 + sum_k alpha_k Z^k.
// `weight` is (1 x 2 d_m).
TokenAttention token_level_attention(ad::Tape& tape, const ad::Var& sequence, const Tensor& weight);

struct SemanticParams {
  Tensor projection;  // W_phi, (d_a x d_m)
  Tensor vector;      // delta_phi, (1 x d_a)
};

struct HierAttnParams {
  std::vector<Tensor> token_weights;  // per metapath, (1 x 2 d_m)
  std::vector<SemanticParams> semantic;
  ad::Activation outer = ad::Activation::identity;
  bool mean_pooled = false;

  void visit(const std::vector<std::string>& metapaths, const ParamVisitor& fn);
};

HierAttnParams init_hier_attention(std::size_t metapaths, std::size_t model_dim, std::size_t attn_dim, Rng& rng);

struct SemanticAttention {
  ad::Var weights;  // (b, |Phi|)
  ad::Var fused;    // (b, d_m), Z^hv
};

// logit_{phi,i} = outer(delta_phi tanh(W_phi Z_{phi,i})), softmax over phi per
// node (or over node-averaged logits when mean_pooled).
SemanticAttention semantic_attention(ad::Tape& tape, std::span<const ad::Var> fused, const HierAttnParams& params);

}  // namespace gtc::hetphormer
