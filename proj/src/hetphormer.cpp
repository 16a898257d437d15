#include "gtc/hetphormer.hpp"

#include <cmath>

#include "gtc/error.hpp"

namespace gtc::hetphormer {

EncoderBlock EncoderBlock::init(std::size_t dm, Rng& rng) {
  EncoderBlock b;
  b.ln1_gamma = Tensor({1, dm}, 1.0);
  b.ln1_beta = Tensor({1, dm}, 0.0);
  b.ln2_gamma = Tensor({1, dm}, 1.0);
  b.ln2_beta = Tensor({1, dm}, 0.0);
  b.wq = glorot({dm, dm}, dm, dm, rng);
  b.wk = glorot({dm, dm}, dm, dm, rng);
  b.wv = glorot({dm, dm}, dm, dm, rng);
  b.wo = glorot({dm, dm}, dm, dm, rng);
  b.ffn_in = Affine::init(dm, 2 * dm, rng);
  b.ffn_out = Affine::init(2 * dm, dm, rng);
  return b;
}

void EncoderBlock::visit(const std::string& prefix, const ParamVisitor& fn) {
  fn(prefix + ".ln1.gamma", ln1_gamma);
  fn(prefix + ".ln1.beta", ln1_beta);
  fn(prefix + ".wq", wq);
  fn(prefix + ".wk", wk);
  fn(prefix + ".wv", wv);
  fn(prefix + ".wo", wo);
  fn(prefix + ".ln2.gamma", ln2_gamma);
  fn(prefix + ".ln2.beta", ln2_beta);
  ffn_in.visit(prefix + ".ffn_in", fn);
  ffn_out.visit(prefix + ".ffn_out", fn);
}

EncoderParams init_encoder(std::size_t in_dim, std::size_t dm, std::size_t heads, std::size_t blocks, Rng& rng) {
  if (heads == 0 || dm % heads != 0) {
    throw ConfigError("encoder: model dim " + std::to_string(dm) + " is not divisible by " + std::to_string(heads) + " heads");
  }
  if (blocks == 0) throw ConfigError("encoder: L_tm must be >= 1");
  EncoderParams p;
  p.token_map = glorot({in_dim, dm}, in_dim, dm, rng);
  p.heads = heads;
  for (std::size_t l = 0; l < blocks; ++l) p.blocks.push_back(EncoderBlock::init(dm, rng));
  return p;
}

namespace {

ad::Var multi_head(ad::Tape& tape, const ad::Var& x, const EncoderBlock& blk, std::size_t heads, const EncoderOptions& opts,
                   std::uint64_t layer, std::vector<ad::Var>& attention) {
  const std::size_t dm = x.value().cols();
  const std::size_t dk = dm / heads;
  const double inv = 1.0 / std::sqrt(static_cast<double>(dk));
  const ad::Var q = ad::matmul_nt(x, tape.param(blk.wq));
  const ad::Var k = ad::matmul_nt(x, tape.param(blk.wk));
  const ad::Var v = ad::matmul_nt(x, tape.param(blk.wv));
  std::vector<ad::Var> outs;
  for (std::size_t h = 0; h < heads; ++h) {
    const ad::Var qh = ad::slice_last(q, h * dk, dk);
    const ad::Var kh = ad::slice_last(k, h * dk, dk);
    const ad::Var vh = ad::slice_last(v, h * dk, dk);
    const ad::Var probs = ad::row_softmax(ad::scale(ad::bmm_nt(qh, kh), inv));
    attention.push_back(probs);
    outs.push_back(ad::bmm(ad::dropout(probs, opts.dropout, layer * 64 + h), vh));
  }
  const ad::Var merged = heads == 1 ? outs.front() : ad::concat_last(outs);
  return ad::matmul_nt(merged, tape.param(blk.wo));
}

}  // namespace

EncoderOutput encoder_forward(ad::Tape& tape, const ad::Var& tokens, const Tensor& token_map,
                              std::span<const EncoderBlock> blocks, std::size_t heads, const EncoderOptions& opts) {
  if (tokens.value().rank() != 3) throw ShapeError("encoder_forward: tokens must be (b, K+1, d), got " + shape_str(tokens.shape()));
  if (token_map.rank() != 2 || tokens.value().dim(2) != token_map.dim(0)) {
    throw ShapeError("encoder_forward: token dim " + std::to_string(tokens.value().dim(2)) + " does not match token map " +
                     shape_str(token_map.shape()));
  }
  const std::size_t dm = token_map.dim(1);
  if (heads == 0 || dm % heads != 0) {
    throw ConfigError("encoder_forward: model dim " + std::to_string(dm) + " is not divisible by " + std::to_string(heads) + " heads");
  }
  if (blocks.empty()) throw ConfigError("encoder_forward: L_tm must be >= 1");

  EncoderOutput out;
  ad::Var z = ad::matmul(tokens, tape.param(token_map));
  std::uint64_t layer = opts.dropout_layer;
  for (const auto& blk : blocks) {
    const ad::Var n1 = ad::layer_norm(z, tape.param(blk.ln1_gamma), tape.param(blk.ln1_beta));
    const ad::Var attn = multi_head(tape, n1, blk, heads, opts, layer++, out.attention);
    const ad::Var z1 = ad::add(ad::dropout(attn, opts.dropout, layer * 64 + 63), z);
    const ad::Var n2 = ad::layer_norm(z1, tape.param(blk.ln2_gamma), tape.param(blk.ln2_beta));
    ad::Var f = ad::activate(apply(tape, blk.ffn_in, n2), opts.ffn_activation);
    f = apply(tape, blk.ffn_out, ad::dropout(f, opts.dropout, layer * 64 + 62));
    z = ad::add(f, z1);
  }
  out.sequence = z;
  return out;
}

EncoderOutput encoder_forward(ad::Tape& tape, const ad::Var& tokens, const EncoderParams& params, const EncoderOptions& opts) {
  return encoder_forward(tape, tokens, params.token_map, params.blocks, params.heads, opts);
}

TokenAttention token_level_attention(ad::Tape& tape, const ad::Var& sequence, const Tensor& weight) {
  const Tensor& s = sequence.value();
  if (s.rank() != 3) throw ShapeError("token_level_attention: expected (b, K+1, d_m), got " + shape_str(s.shape()));
  const std::size_t b = s.dim(0), len = s.dim(1), dm = s.dim(2);
  if (weight.size() != 2 * dm) {
    throw ShapeError("token_level_attention: weight " + shape_str(weight.shape()) + " does not match d_m=" + std::to_string(dm));
  }
  const ad::Var flat = ad::reshape(sequence, {b, len * dm});
  const ad::Var z0 = ad::slice_last(flat, 0, dm);
  const std::size_t hops = len - 1;
  if (hops == 0) return {tape.constant(Tensor({b, 0})), z0};

  const ad::Var w = tape.param(weight);
  const ad::Var w_self = ad::slice_last(w, 0, dm);
  const ad::Var w_hop = ad::slice_last(w, dm, dm);
  const ad::Var zk = ad::reshape(ad::slice_last(flat, dm, hops * dm), {b, hops, dm});
  const ad::Var hop_logit = ad::reshape(ad::matmul_nt(zk, w_hop), {b, hops});
  const ad::Var logits = ad::add(hop_logit, ad::matmul_nt(z0, w_self));
  const ad::Var alpha = ad::row_softmax(logits);
  const ad::Var mixed = ad::reshape(ad::bmm(ad::reshape(alpha, {b, 1, hops}), zk), {b, dm});
  return {alpha, ad::add(z0, mixed)};
}

void HierAttnParams::visit(const std::vector<std::string>& metapaths, const ParamVisitor& fn) {
  for (std::size_t p = 0; p < token_weights.size(); ++p) {
    const std::string prefix = "attn." + metapaths.at(p);
    fn(prefix + ".token", token_weights[p]);
    fn(prefix + ".semantic.W", semantic[p].projection);
    fn(prefix + ".semantic.delta", semantic[p].vector);
  }
}

HierAttnParams init_hier_attention(std::size_t metapaths, std::size_t dm, std::size_t da, Rng& rng) {
  HierAttnParams p;
  for (std::size_t i = 0; i < metapaths; ++i) {
    p.token_weights.push_back(glorot({1, 2 * dm}, 2 * dm, 1, rng));
    p.semantic.push_back({glorot({da, dm}, dm, da, rng), glorot({1, da}, da, 1, rng)});
  }
  return p;
}

SemanticAttention semantic_attention(ad::Tape& tape, std::span<const ad::Var> fused, const HierAttnParams& params) {
  if (fused.empty()) throw ArgumentError("semantic_attention: at least one metapath is required");
  if (params.semantic.size() != fused.size()) {
    throw ShapeError("semantic_attention: " + std::to_string(fused.size()) + " inputs but " +
                     std::to_string(params.semantic.size()) + " parameter sets");
  }
  const std::size_t b = fused.front().rows();
  std::vector<ad::Var> logits;
  for (std::size_t p = 0; p < fused.size(); ++p) {
    if (fused[p].shape() != fused.front().shape()) throw ShapeError("semantic_attention: metapath inputs differ in shape");
    const auto& sp = params.semantic[p];
    const ad::Var hidden = ad::tanh(ad::matmul_nt(fused[p], tape.param(sp.projection)));
    ad::Var s = ad::activate(ad::matmul_nt(hidden, tape.param(sp.vector)), params.outer);
    if (params.mean_pooled) s = ad::reshape(ad::mean(s), {1, 1});
    logits.push_back(s);
  }
  ad::Var alpha = ad::row_softmax(fused.size() == 1 ? logits.front() : ad::concat_last(logits));
  if (params.mean_pooled) {
    const std::vector<std::size_t> zeros(b, 0);
    alpha = ad::gather_rows(alpha, zeros);
  }
  ad::Var z;
  for (std::size_t p = 0; p < fused.size(); ++p) {
    const ad::Var term = ad::mul(fused[p], ad::slice_last(alpha, p, 1));
    z = p == 0 ? term : ad::add(z, term);
  }
  return {alpha, z};
}

}  // namespace gtc::hetphormer
