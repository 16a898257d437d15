#pragma once

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

#include "gtc/autodiff.hpp"
#include "gtc/graph.hpp"
#include "gtc/layers.hpp"

// Graph-schema-view branch: per-type feature projection into a shared space
// followed by relation-typed mean aggregation (RGCN style). Also hosts the
// homogeneous GCN layer used as a depth baseline.
namespace gtc::schema {

// One affine map per node type, raw feature dim -> d, then sigma.
struct ProjectionParams {
  std::vector<std::string> types;
  std::vector<Affine> maps;
  ad::Activation activation = ad::Activation::elu;

  const Affine* find(const std::string& type) const;
  void visit(const ParamVisitor& fn);
};

ProjectionParams init_projection(const HeteroGraph& graph, std::size_t dim, Rng& rng,
                                 ad::Activation act = ad::Activation::elu);

// Projected features, one Var per graph node type in graph order.
std::vector<ad::Var> project_features(ad::Tape& tape, const HeteroGraph& graph, const ProjectionParams& params);

struct RgcnLayer {
  std::vector<Tensor> relation_weights;  // per graph relation, (d x d) applied as h W^T
  Tensor self_weight;                    // W_0, (d x d)
};

struct RgcnParams {
  std::vector<RgcnLayer> layers;
  ad::Activation activation = ad::Activation::elu;

  void visit(const std::vector<std::string>& relation_names, const ParamVisitor& fn);
};

RgcnParams init_rgcn(const HeteroGraph& graph, std::size_t dim, std::size_t layers, Rng& rng,
                     ad::Activation act = ad::Activation::elu);

// Row-normalized relation adjacencies D_r^{-1} A_r, so that row i of the
// product averages over N_i^r (c_{i,r} = |N_i^r|).
struct RgcnAdjacency {
  std::vector<std::shared_ptr<const SparseMatrix>> mean;
};

RgcnAdjacency build_rgcn_adjacency(const HeteroGraph& graph);

// L_g layers over every node type; returns the target-type rows of the last layer.
ad::Var rgcn_forward(ad::Tape& tape, const HeteroGraph& graph, const RgcnAdjacency& adjacency,
                     std::vector<ad::Var> features, const RgcnParams& params);
// Same, returning every type's representation after the last layer.
std::vector<ad::Var> rgcn_forward_all(ad::Tape& tape, const HeteroGraph& graph, const RgcnAdjacency& adjacency,
                                      std::vector<ad::Var> features, const RgcnParams& params);

struct GcnParams {
  std::vector<Tensor> weights;  // W^(l), (d_l x d_{l+1}) applied as H W
  ad::Activation activation = ad::Activation::elu;

  void visit(const ParamVisitor& fn);
};

GcnParams init_gcn(std::size_t dim, std::size_t layers, Rng& rng, ad::Activation act = ad::Activation::elu);

// H^(l+1) = sigma(P H^(l) W^(l)) with P = (D+I)^{-1/2}(A+I)(D+I)^{-1/2}
// precomputed by gcn_normalize().
ad::Var gcn_forward(ad::Tape& tape, std::shared_ptr<const SparseMatrix> propagation, const ad::Var& features,
                    const GcnParams& params);

}  // namespace gtc::schema
