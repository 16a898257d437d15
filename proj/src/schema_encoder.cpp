#include "gtc/schema_encoder.hpp"

#include "gtc/error.hpp"

namespace gtc::schema {

const Affine* ProjectionParams::find(const std::string& type) const {
  for (std::size_t i = 0; i < types.size(); ++i) {
    if (types[i] == type) return &maps[i];
  }
  return nullptr;
}

void ProjectionParams::visit(const ParamVisitor& fn) {
  for (std::size_t i = 0; i < types.size(); ++i) maps[i].visit("proj." + types[i], fn);
}

ProjectionParams init_projection(const HeteroGraph& graph, std::size_t dim, Rng& rng, ad::Activation act) {
  ProjectionParams p;
  p.activation = act;
  for (const auto& t : graph.node_types()) {
    p.types.push_back(t.name);
    p.maps.push_back(Affine::init(t.features.cols(), dim, rng));
  }
  return p;
}

std::vector<ad::Var> project_features(ad::Tape& tape, const HeteroGraph& graph, const ProjectionParams& params) {
  std::vector<ad::Var> out;
  for (const auto& t : graph.node_types()) {
    const Affine* map = params.find(t.name);
    if (!map) throw ConfigError("project_features: no projection for node type '" + t.name + "'");
    if (map->in_dim() != t.features.cols()) {
      throw ShapeError("project_features: type '" + t.name + "' has " + std::to_string(t.features.cols()) +
                       "-dim features but its projection expects " + std::to_string(map->in_dim()));
    }
    out.push_back(ad::activate(apply(tape, *map, tape.constant(t.features)), params.activation));
  }
  return out;
}

void RgcnParams::visit(const std::vector<std::string>& relation_names, const ParamVisitor& fn) {
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const std::string prefix = "rgcn." + std::to_string(l) + ".";
    for (std::size_t r = 0; r < layers[l].relation_weights.size(); ++r) {
      fn(prefix + relation_names.at(r), layers[l].relation_weights[r]);
    }
    fn(prefix + "self", layers[l].self_weight);
  }
}

RgcnParams init_rgcn(const HeteroGraph& graph, std::size_t dim, std::size_t layers, Rng& rng, ad::Activation act) {
  if (layers == 0) throw ConfigError("rgcn: at least one layer is required");
  RgcnParams p;
  p.activation = act;
  for (std::size_t l = 0; l < layers; ++l) {
    RgcnLayer layer;
    for (std::size_t r = 0; r < graph.relations().size(); ++r) layer.relation_weights.push_back(glorot({dim, dim}, dim, dim, rng));
    layer.self_weight = glorot({dim, dim}, dim, dim, rng);
    p.layers.push_back(std::move(layer));
  }
  return p;
}

RgcnAdjacency build_rgcn_adjacency(const HeteroGraph& graph) {
  RgcnAdjacency adj;
  for (const auto& r : graph.relations()) adj.mean.push_back(std::make_shared<const SparseMatrix>(normalize_rows(r.adjacency)));
  return adj;
}

std::vector<ad::Var> rgcn_forward_all(ad::Tape& tape, const HeteroGraph& graph, const RgcnAdjacency& adjacency,
                                      std::vector<ad::Var> h, const RgcnParams& params) {
  if (params.layers.empty()) throw ConfigError("rgcn_forward: L_g must be >= 1");
  if (h.size() != graph.node_types().size()) throw ShapeError("rgcn_forward: one feature matrix per node type expected");
  if (adjacency.mean.size() != graph.relations().size()) throw ShapeError("rgcn_forward: adjacency does not match relations");
  for (const auto& layer : params.layers) {
    if (layer.relation_weights.size() != graph.relations().size()) {
      throw ConfigError("rgcn_forward: layer has " + std::to_string(layer.relation_weights.size()) + " relation weights for " +
                        std::to_string(graph.relations().size()) + " relations");
    }
    std::vector<ad::Var> next;
    next.reserve(h.size());
    for (std::size_t t = 0; t < h.size(); ++t) {
      const std::string& type = graph.node_types()[t].name;
      ad::Var acc = ad::matmul_nt(h[t], tape.param(layer.self_weight));
      for (std::size_t r = 0; r < graph.relations().size(); ++r) {
        const Relation& rel = graph.relations()[r];
        if (rel.src != type || rel.adjacency.nnz() == 0) continue;
        const ad::Var agg = ad::spmm(adjacency.mean[r], h[graph.type_index(rel.dst)]);
        acc = ad::add(acc, ad::matmul_nt(agg, tape.param(layer.relation_weights[r])));
      }
      next.push_back(ad::activate(acc, params.activation));
    }
    h = std::move(next);
  }
  return h;
}

ad::Var rgcn_forward(ad::Tape& tape, const HeteroGraph& graph, const RgcnAdjacency& adjacency,
                     std::vector<ad::Var> features, const RgcnParams& params) {
  auto all = rgcn_forward_all(tape, graph, adjacency, std::move(features), params);
  return all[graph.type_index(graph.target_type())];
}

void GcnParams::visit(const ParamVisitor& fn) {
  for (std::size_t l = 0; l < weights.size(); ++l) fn("gcn." + std::to_string(l), weights[l]);
}

GcnParams init_gcn(std::size_t dim, std::size_t layers, Rng& rng, ad::Activation act) {
  if (layers == 0) throw ConfigError("gcn: at least one layer is required");
  GcnParams p;
  p.activation = act;
  for (std::size_t l = 0; l < layers; ++l) p.weights.push_back(glorot({dim, dim}, dim, dim, rng));
  return p;
}

ad::Var gcn_forward(ad::Tape& tape, std::shared_ptr<const SparseMatrix> propagation, const ad::Var& features,
                    const GcnParams& params) {
  if (params.weights.empty()) throw ConfigError("gcn_forward: at least one layer is required");
  if (!propagation->square()) throw ShapeError("gcn_forward: propagation matrix must be square");
  ad::Var h = features;
  for (const auto& w : params.weights) {
    h = ad::activate(ad::spmm(propagation, ad::matmul(h, tape.param(w))), params.activation);
  }
  return h;
}

}  // namespace gtc::schema
