#pragma once

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "gtc/sparse.hpp"
#include "gtc/tensor.hpp"

namespace gtc {

struct NodeType {
  std::string name;
  std::size_t count = 0;
  Tensor features;  // count x raw feature dim
};

// Directed typed relation; adjacency is (src count x dst count) with 0/1 values.
struct Relation {
  std::string name;
  std::string src;
  std::string dst;
  SparseMatrix adjacency;
};

// A typed relation sequence whose endpoints are the target type, e.g. PAP = [PA, AP].
struct Metapath {
  std::string name;
  std::vector<std::string> steps;
};

/// Immutable heterogeneous graph. The constructor checks every structural
/// invariant (matrix dims vs type counts, feature rows, metapath chaining).
class HeteroGraph {
 public:
  HeteroGraph(std::vector<NodeType> node_types, std::vector<Relation> relations,
              std::vector<Metapath> metapaths, std::string target_type);

  const std::vector<NodeType>& node_types() const { return node_types_; }
  const std::vector<Relation>& relations() const { return relations_; }
  const std::vector<Metapath>& metapaths() const { return metapaths_; }
  const std::string& target_type() const { return target_type_; }

  const NodeType& node_type(const std::string& name) const;
  std::size_t type_index(const std::string& name) const;
  bool has_type(const std::string& name) const;
  const Relation& relation(const std::string& name) const;
  std::size_t relation_index(const std::string& name) const;
  const NodeType& target() const { return node_types_[type_index(target_type_)]; }
  std::size_t target_count() const { return target().count; }

  // Throws ShapeError naming the first step that does not chain.
  void check_metapath(const Metapath& path) const;

 private:
  std::vector<NodeType> node_types_;
  std::vector<Relation> relations_;
  std::vector<Metapath> metapaths_;
  std::string target_type_;
};

enum class CountMode { binary, counts };

CountMode parse_count_mode(const std::string& s);
const char* to_string(CountMode m);

// Product of the step adjacencies (target x target). `counts` keeps the
// number of path instances; `binary` clamps every nonzero to 1.
SparseMatrix compose_metapath_adjacency(const HeteroGraph& graph, const Metapath& path, CountMode mode);

// Per target node i: positives P_i = {i} U {j : C_i(j) >= theta}, negatives
// are every other target node. C = sum over metapaths of A_phi.
class ContrastiveSets {
 public:
  ContrastiveSets(SparseMatrix counts, SparseMatrix positives);

  std::size_t size() const { return positives_->rows(); }
  const SparseMatrix& counts() const { return counts_; }
  // 0/1 pattern matrix; row i lists P_i in ascending order.
  const SparseMatrix& positive_mask() const { return *positives_; }
  std::shared_ptr<const SparseMatrix> shared_positive_mask() const { return positives_; }
  std::span<const std::size_t> positives(std::size_t i) const { return positives_->row_cols(i); }
  std::vector<std::size_t> negatives(std::size_t i) const;
  bool is_positive(std::size_t i, std::size_t j) const { return positives_->contains(i, j); }
  std::size_t negative_count(std::size_t i) const { return size() - positives_->row_nnz(i); }

  // Sets over the sub-population `ids` (re-indexed 0..ids.size()-1).
  ContrastiveSets restricted(std::span<const std::size_t> ids) const;

 private:
  SparseMatrix counts_;
  std::shared_ptr<const SparseMatrix> positives_;
};

ContrastiveSets mine_contrastive_sets(const HeteroGraph& graph, int theta_pos, CountMode mode);
// Same mining rule from precomputed per-metapath adjacencies.
ContrastiveSets mine_contrastive_sets(std::span<const SparseMatrix> metapath_adjacency, int theta_pos);

}  // namespace gtc
