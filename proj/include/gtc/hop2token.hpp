#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gtc/autodiff.hpp"
#include "gtc/graph.hpp"
#include "gtc/tensor.hpp"

// Metapath-aware hop tokenization: for every metapath phi and node i the
// token sequence is (x_i^0, ..., x_i^K) with x^k = Ahat_phi^k H and
// Ahat_phi = D^{-1/2} A_phi D^{-1/2}.
namespace gtc::tokens {

/// Symmetrically normalized metapath adjacencies, in metapath order.
struct MetapathOperators {
  std::vector<std::string> names;
  std::vector<SparseMatrix> adjacency;                          // A_phi
  std::vector<std::shared_ptr<const SparseMatrix>> normalized;  // Ahat_phi
};

MetapathOperators build_operators(const HeteroGraph& graph, CountMode mode = CountMode::binary);
MetapathOperators build_operators(std::vector<std::string> names, std::vector<SparseMatrix> adjacency);

/// Token tensors per metapath, each (n, K+1, d).
struct TokenSequenceSet {
  std::vector<std::string> metapaths;
  std::size_t max_hop = 0;
  std::vector<Tensor> tokens;

  std::size_t node_count() const { return tokens.empty() ? 0 : tokens.front().dim(0); }
  std::size_t dim() const { return tokens.empty() ? 0 : tokens.front().dim(2); }
};

// Detached construction: K sparse-dense products per metapath.
TokenSequenceSet build_tokens(const MetapathOperators& ops, const Tensor& features, std::size_t max_hop);

// Recorded construction; gradients flow back into `features`. One
// (n, K+1, d) Var per metapath.
std::vector<ad::Var> build_tokens(const MetapathOperators& ops, const ad::Var& features, std::size_t max_hop);

// Rows `ids` of every metapath's sequence, (|ids|, K+1, d) each.
TokenSequenceSet batch_tokens(const TokenSequenceSet& set, std::span<const std::size_t> ids);

}  // namespace gtc::tokens
