#pragma once

#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "gtc/config.hpp"
#include "gtc/evaluator.hpp"
#include "gtc/graph.hpp"
#include "gtc/model.hpp"

namespace gtc {

struct TrainReport {
  std::vector<double> losses;  // one per epoch, in order
  std::size_t best_epoch = 0;  // 1-based
  double best_loss = 0.0;
  std::string stop_reason;     // "patience" or "max_epochs"
  double seconds = 0.0;
  std::size_t degenerate_nodes = 0;
};

struct TrainResult {
  GtcModel model;     // parameters of the best-loss epoch
  Tensor embeddings;  // Z^hv of every target node from those parameters
  TrainReport report;
};

using EpochCallback = std::function<void(std::size_t epoch, double loss)>;

// Self-supervised training loop. Early stopping tracks the training loss and
// needs a strict improvement to reset the patience counter. Throws
// NumericError naming the epoch and the first non-finite tensor when the
// loss stops being finite.
TrainResult train(const HeteroGraph& graph, const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Cartesian grid over TrainConfig keys.
struct GridSpec {
  std::vector<std::pair<std::string, std::vector<std::string>>> axes;

  std::size_t size() const;
  // Point `index` in row-major order over the axes (last axis fastest).
  std::vector<std::pair<std::string, std::string>> point(std::size_t index) const;
};

// "lr=0.001,0.005;tau=0.5,0.6" -> two axes. Throws ArgumentError on bad syntax.
GridSpec parse_grid(const std::string& text);

struct Trial {
  std::vector<std::pair<std::string, std::string>> point;
  TrainConfig config;
  bool ok = false;
  double objective = 0.0;
  std::string error;
};

struct GridResult {
  TrainConfig best;
  double best_objective = 0.0;
  std::string objective;  // "val_mi_f1" or "neg_loss"
  std::vector<Trial> trials;
};

struct GridOptions {
  std::size_t budget = 0;  // 0 = every point; otherwise a seeded subset
  const eval::Labels* labels = nullptr;
  eval::SplitSpec split;
};

// Trains every selected point. With labels the objective is validation
// Mi-F1 of the linear probe, otherwise the negated best training loss.
// Trials whose loss diverges are disqualified. Throws ArgumentError for an
// empty grid and NumericError when every trial diverges.
GridResult grid_search(const HeteroGraph& graph, const TrainConfig& base, const GridSpec& grid, const GridOptions& opts = {});

}  // namespace gtc
