#include "gtc/model.hpp"

#include "gtc/error.hpp"

namespace gtc {

GtcModel::GtcModel(const HeteroGraph& graph, const TrainConfig& config)
    : graph_(&graph),
      config_(config),
      ops_(tokens::build_operators(graph, config.count_mode)),
      rgcn_adj_(schema::build_rgcn_adjacency(graph)),
      sets_(mine_contrastive_sets(std::span<const SparseMatrix>(ops_.adjacency), config.theta_pos)) {
  config_.validate();
  Rng rng(config_.seed);
  projection_ = schema::init_projection(graph, config_.dim, rng, config_.activation);
  rgcn_ = schema::init_rgcn(graph, config_.dim, config_.schema_layers, rng, config_.activation);
  const std::size_t paths = graph.metapaths().size();
  for (std::size_t p = 0; p < paths; ++p) {
    token_maps_.push_back(glorot({config_.dim, config_.model_dim}, config_.dim, config_.model_dim, rng));
  }
  const std::size_t stacks = config_.shared_encoder ? 1 : paths;
  for (std::size_t s = 0; s < stacks; ++s) {
    std::vector<hetphormer::EncoderBlock> blocks;
    for (std::size_t l = 0; l < config_.encoder_blocks; ++l) blocks.push_back(hetphormer::EncoderBlock::init(config_.model_dim, rng));
    blocks_.push_back(std::move(blocks));
  }
  attention_ = hetphormer::init_hier_attention(paths, config_.model_dim, config_.effective_attn_dim(), rng);
  attention_.outer = config_.semantic_outer;
  attention_.mean_pooled = config_.mean_pooled;
  if (config_.head) {
    schema_head_ = contrast::ContrastHead::init(config_.dim, config_.head_dim, rng);
    hops_head_ = contrast::ContrastHead::init(config_.model_dim, config_.head_dim, rng);
  } else {
    schema_head_ = contrast::ContrastHead::disabled();
    hops_head_ = contrast::ContrastHead::disabled();
  }
  contrast::check_contrast_dims(config_.dim, config_.model_dim, schema_head_, hops_head_);
}

GtcModel::Forward GtcModel::forward(ad::Tape& tape, std::span<const std::size_t> batch, bool with_loss) const {
  const HeteroGraph& g = *graph_;
  const std::vector<ad::Var> h = schema::project_features(tape, g, projection_);
  const ad::Var target = h[g.type_index(g.target_type())];
  const ad::Var sv_all = schema::rgcn_forward(tape, g, rgcn_adj_, h, rgcn_);

  std::vector<ad::Var> seqs;
  if (config_.tokens == TokenMode::recorded) {
    seqs = tokens::build_tokens(ops_, target, config_.max_hop);
  } else {
    auto frozen = tokens::build_tokens(ops_, target.value(), config_.max_hop);
    for (auto& t : frozen.tokens) seqs.push_back(tape.constant(std::move(t)));
  }

  Forward out;
  std::vector<ad::Var> fused;
  for (std::size_t p = 0; p < seqs.size(); ++p) {
    const ad::Var tok = batch.empty() ? seqs[p] : ad::gather_rows(seqs[p], batch);
    hetphormer::EncoderOptions opts;
    opts.dropout = config_.dropout;
    opts.ffn_activation = config_.activation;
    opts.dropout_layer = 1000 * p;
    const auto& blocks = blocks_[config_.shared_encoder ? 0 : p];
    auto enc = hetphormer::encoder_forward(tape, tok, token_maps_[p], blocks, config_.heads, opts);
    for (auto& a : enc.attention) out.encoder_attention.push_back(a);
    auto ta = hetphormer::token_level_attention(tape, enc.sequence, attention_.token_weights[p]);
    out.token_weights.push_back(ta.weights);
    fused.push_back(ta.fused);
  }
  const auto sem = hetphormer::semantic_attention(tape, fused, attention_);
  out.semantic_weights = sem.weights;
  out.z_hv = sem.fused;
  out.z_sv = batch.empty() ? sv_all : ad::gather_rows(sv_all, batch);

  if (with_loss) {
    const ad::Var p_sv = contrast::project_to_contrast_space(tape, out.z_sv, schema_head_);
    const ad::Var p_hv = contrast::project_to_contrast_space(tape, out.z_hv, hops_head_);
    if (batch.empty()) {
      out.loss = contrast::contrastive_loss(p_sv, p_hv, sets_, config_.tau, config_.lambda);
    } else {
      out.loss = contrast::contrastive_loss(p_sv, p_hv, sets_.restricted(batch), config_.tau, config_.lambda);
    }
  }
  return out;
}

Tensor GtcModel::embed() const {
  ad::Tape tape(ad::Mode::eval, config_.seed);
  return forward(tape, {}, false).z_hv.value();
}

Tensor GtcModel::projected_target() const {
  ad::Tape tape(ad::Mode::eval, config_.seed);
  return schema::project_features(tape, *graph_, projection_)[graph_->type_index(graph_->target_type())].value();
}

void GtcModel::visit(const ParamVisitor& fn) {
  projection_.visit(fn);
  std::vector<std::string> rel_names;
  for (const auto& r : graph_->relations()) rel_names.push_back(r.name);
  rgcn_.visit(rel_names, fn);
  for (std::size_t p = 0; p < token_maps_.size(); ++p) fn("token_map." + ops_.names[p], token_maps_[p]);
  for (std::size_t s = 0; s < blocks_.size(); ++s) {
    const std::string stack = config_.shared_encoder ? "shared" : ops_.names[s];
    for (std::size_t l = 0; l < blocks_[s].size(); ++l) blocks_[s][l].visit("encoder." + stack + "." + std::to_string(l), fn);
  }
  attention_.visit(ops_.names, fn);
  schema_head_.visit("head.sv", fn);
  hops_head_.visit("head.hv", fn);
}

std::vector<Tensor*> GtcModel::parameters() {
  std::vector<Tensor*> out;
  visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
  return out;
}

std::vector<NamedTensor> GtcModel::named_parameters() const {
  std::vector<NamedTensor> out;
  const_cast<GtcModel*>(this)->visit([&](const std::string& name, Tensor& t) { out.push_back({name, t}); });
  return out;
}

void GtcModel::assign(std::span<const Tensor> params) {
  auto ps = parameters();
  if (ps.size() != params.size()) {
    throw ShapeError("assign: model has " + std::to_string(ps.size()) + " parameters, got " + std::to_string(params.size()));
  }
  for (std::size_t i = 0; i < ps.size(); ++i) {
    if (ps[i]->shape() != params[i].shape()) {
      throw ShapeError("assign: parameter " + std::to_string(i) + " is " + shape_str(ps[i]->shape()) + ", got " +
                       shape_str(params[i].shape()));
    }
    *ps[i] = params[i];
  }
}

std::vector<Tensor> GtcModel::snapshot() const {
  std::vector<Tensor> out;
  const_cast<GtcModel*>(this)->visit([&](const std::string&, Tensor& t) { out.push_back(t); });
  return out;
}

std::size_t GtcModel::parameter_count() const {
  std::size_t n = 0;
  const_cast<GtcModel*>(this)->visit([&](const std::string&, Tensor& t) { n += t.size(); });
  return n;
}

}  // namespace gtc
