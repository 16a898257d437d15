#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gtc/autodiff.hpp"
#include "gtc/checkpoint.hpp"
#include "gtc/config.hpp"
#include "gtc/contrastive.hpp"
#include "gtc/graph.hpp"
#include "gtc/hetphormer.hpp"
#include "gtc/hop2token.hpp"
#include "gtc/schema_encoder.hpp"

namespace gtc {

/// Full GTC network: both encoder branches, hierarchical attention and the
/// two contrast heads, plus the graph-derived operators they consume.
///
/// Keeps a reference to the graph; the graph must outlive the model.
class GtcModel {
 public:
  GtcModel(const HeteroGraph& graph, const TrainConfig& config);

  struct Forward {
    ad::Var z_sv;                                // (b, d) schema view, target rows
    ad::Var z_hv;                                // (b, d_m) hops view
    std::vector<ad::Var> token_weights;          // per metapath, (b, K)
    ad::Var semantic_weights;                    // (b, |Phi|)
    std::vector<ad::Var> encoder_attention;      // per metapath, block and head
    contrast::LossTerms loss;
  };

  // One forward pass recorded on `tape`. With an empty `batch` every target
  // node participates; otherwise only those ids (loss negatives restricted
  // to the batch). `with_loss` = false skips the contrastive objective.
  Forward forward(ad::Tape& tape, std::span<const std::size_t> batch = {}, bool with_loss = true) const;

  // Z^hv for every target node in evaluation mode (no dropout).
  Tensor embed() const;
  // Target-type features after the per-type projection (the tokenizer input).
  Tensor projected_target() const;

  // Parameters in a fixed order with qualified names.
  void visit(const ParamVisitor& fn);
  std::vector<Tensor*> parameters();
  std::vector<NamedTensor> named_parameters() const;
  // Copies values from `params` (same order as parameters()).
  void assign(std::span<const Tensor> params);
  std::vector<Tensor> snapshot() const;
  std::size_t parameter_count() const;

  const HeteroGraph& graph() const { return *graph_; }
  const TrainConfig& config() const { return config_; }
  const tokens::MetapathOperators& operators() const { return ops_; }
  const ContrastiveSets& contrastive_sets() const { return sets_; }

 private:
  const HeteroGraph* graph_;
  TrainConfig config_;
  tokens::MetapathOperators ops_;
  schema::RgcnAdjacency rgcn_adj_;
  ContrastiveSets sets_;

  schema::ProjectionParams projection_;
  schema::RgcnParams rgcn_;
  std::vector<Tensor> token_maps_;
  std::vector<std::vector<hetphormer::EncoderBlock>> blocks_;  // one list, or one per metapath
  hetphormer::HierAttnParams attention_;
  contrast::ContrastHead schema_head_;
  contrast::ContrastHead hops_head_;
};

}  // namespace gtc
