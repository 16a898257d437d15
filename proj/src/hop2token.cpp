#include "gtc/hop2token.hpp"

#include <algorithm>

#include "gtc/error.hpp"

namespace gtc::tokens {

MetapathOperators build_operators(const HeteroGraph& graph, CountMode mode) {
  std::vector<std::string> names;
  std::vector<SparseMatrix> adj;
  for (const auto& mp : graph.metapaths()) {
    names.push_back(mp.name);
    adj.push_back(compose_metapath_adjacency(graph, mp, mode));
  }
  return build_operators(std::move(names), std::move(adj));
}

MetapathOperators build_operators(std::vector<std::string> names, std::vector<SparseMatrix> adjacency) {
  if (names.size() != adjacency.size()) throw ArgumentError("build_operators: names and adjacency differ in length");
  if (adjacency.empty()) throw ConfigError("build_operators: at least one metapath is required");
  MetapathOperators ops;
  ops.names = std::move(names);
  for (const auto& a : adjacency) {
    if (!a.square() || a.rows() != adjacency.front().rows()) {
      throw ShapeError("build_operators: metapath adjacency must be square over the target type");
    }
    ops.normalized.push_back(std::make_shared<const SparseMatrix>(normalize_sym(a)));
  }
  ops.adjacency = std::move(adjacency);
  return ops;
}

TokenSequenceSet build_tokens(const MetapathOperators& ops, const Tensor& features, std::size_t max_hop) {
  if (features.rank() != 2) throw ShapeError("build_tokens: features must be 2-D, got " + shape_str(features.shape()));
  const std::size_t n = features.rows();
  const std::size_t d = features.cols();
  TokenSequenceSet set;
  set.metapaths = ops.names;
  set.max_hop = max_hop;
  for (const auto& a : ops.normalized) {
    if (a->cols() != n) {
      throw ShapeError("build_tokens: operator is " + std::to_string(a->rows()) + "x" + std::to_string(a->cols()) +
                       " but features have " + std::to_string(n) + " rows");
    }
    Tensor seq({n, max_hop + 1, d});
    Tensor hop = features;
    for (std::size_t k = 0; k <= max_hop; ++k) {
      if (k > 0) hop = multiply(*a, hop);
      for (std::size_t i = 0; i < n; ++i) {
        std::copy_n(hop.data() + i * d, d, seq.data() + (i * (max_hop + 1) + k) * d);
      }
    }
    set.tokens.push_back(std::move(seq));
  }
  return set;
}

std::vector<ad::Var> build_tokens(const MetapathOperators& ops, const ad::Var& features, std::size_t max_hop) {
  std::vector<ad::Var> out;
  for (const auto& a : ops.normalized) {
    if (a->cols() != features.rows()) throw ShapeError("build_tokens: operator and feature rows disagree");
    std::vector<ad::Var> hops{features};
    for (std::size_t k = 1; k <= max_hop; ++k) hops.push_back(ad::spmm(a, hops.back()));
    out.push_back(ad::stack_middle(hops));
  }
  return out;
}

TokenSequenceSet batch_tokens(const TokenSequenceSet& set, std::span<const std::size_t> ids) {
  TokenSequenceSet out;
  out.metapaths = set.metapaths;
  out.max_hop = set.max_hop;
  const std::size_t n = set.node_count();
  for (std::size_t id : ids) {
    if (id >= n) throw ArgumentError("batch_tokens: node id " + std::to_string(id) + " out of range (n=" + std::to_string(n) + ")");
  }
  for (const auto& t : set.tokens) {
    const std::size_t stride = t.dim(1) * t.dim(2);
    Tensor b({ids.size(), t.dim(1), t.dim(2)});
    for (std::size_t r = 0; r < ids.size(); ++r) std::copy_n(t.data() + ids[r] * stride, stride, b.data() + r * stride);
    out.tokens.push_back(std::move(b));
  }
  return out;
}

}  // namespace gtc::tokens
