#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gtc/autodiff.hpp"
#include "gtc/config.hpp"
#include "gtc/evaluator.hpp"
#include "gtc/graph.hpp"

// Depth sweep comparing GTC (varying the max hop K) against RGCN and GCN
// baselines (varying the layer count).
namespace gtc::eval {

enum class Baseline { rgcn, gcn };

/// Baselines are trained end to end with cross-entropy on the split's train
/// rows; the reported scores come from the epoch with the best validation
/// Mi-F1.
struct BaselineConfig {
  std::size_t dim = 64;
  double lr = 5e-3;
  double weight_decay = 0.0;
  std::size_t epochs = 200;
  std::size_t patience = 30;
  ad::Activation activation = ad::Activation::elu;
  std::uint64_t seed = 0;
};

// Binary union of every metapath adjacency (the homogeneous graph the GCN
// baseline runs on).
SparseMatrix metapath_union(const HeteroGraph& graph);

Scores train_baseline(const HeteroGraph& graph, const Labels& labels, const Split& split, Baseline kind, std::size_t layers,
                      const BaselineConfig& cfg);

struct SweepSpec {
  std::vector<std::size_t> depths;
  std::vector<std::string> methods = {"gtc", "rgcn", "gcn"};
  std::size_t runs = 1;
  std::size_t train_per_class = 20;
  std::uint64_t seed = 0;
  BaselineConfig baseline;
};

struct SweepRow {
  std::size_t depth = 0;
  std::string method;
  double mi_f1 = 0.0;
  double ma_f1 = 0.0;
};

// One row per (depth, method), scores averaged over `runs` seeds. Run r uses
// seed + r for both the model and the split, shared across methods.
std::vector<SweepRow> oversmoothing_sweep(const HeteroGraph& graph, const Labels& labels, const TrainConfig& base,
                                          const SweepSpec& spec);

// Header "depth,method,mi_f1,ma_f1" then one line per row.
std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace gtc::eval
