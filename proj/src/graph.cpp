#include "gtc/graph.hpp"

#include <algorithm>
#include <set>

#include "gtc/error.hpp"

namespace gtc {

HeteroGraph::HeteroGraph(std::vector<NodeType> node_types, std::vector<Relation> relations,
                         std::vector<Metapath> metapaths, std::string target_type)
    : node_types_(std::move(node_types)),
      relations_(std::move(relations)),
      metapaths_(std::move(metapaths)),
      target_type_(std::move(target_type)) {
  std::set<std::string> seen;
  for (const auto& t : node_types_) {
    if (!seen.insert(t.name).second) throw ArgumentError("graph: duplicate node type '" + t.name + "'");
    if (t.features.rank() != 2 || t.features.rows() != t.count) {
      throw ShapeError("graph: features of type '" + t.name + "' have shape " + shape_str(t.features.shape()) +
                       ", expected " + std::to_string(t.count) + " rows");
    }
    if (!t.features.all_finite()) throw NumericError("graph: non-finite feature in type '" + t.name + "'");
  }
  if (!has_type(target_type_)) throw ArgumentError("graph: unknown target type '" + target_type_ + "'");
  seen.clear();
  for (const auto& r : relations_) {
    if (!seen.insert(r.name).second) throw ArgumentError("graph: duplicate relation '" + r.name + "'");
    const auto& src = node_type(r.src);
    const auto& dst = node_type(r.dst);
    if (r.adjacency.rows() != src.count || r.adjacency.cols() != dst.count) {
      throw ShapeError("graph: relation '" + r.name + "' is " + std::to_string(r.adjacency.rows()) + "x" +
                       std::to_string(r.adjacency.cols()) + ", expected " + std::to_string(src.count) + "x" +
                       std::to_string(dst.count));
    }
  }
  for (const auto& m : metapaths_) check_metapath(m);
}

const NodeType& HeteroGraph::node_type(const std::string& name) const { return node_types_[type_index(name)]; }

std::size_t HeteroGraph::type_index(const std::string& name) const {
  for (std::size_t i = 0; i < node_types_.size(); ++i) {
    if (node_types_[i].name == name) return i;
  }
  throw ArgumentError("graph: unknown node type '" + name + "'");
}

bool HeteroGraph::has_type(const std::string& name) const {
  return std::any_of(node_types_.begin(), node_types_.end(), [&](const NodeType& t) { return t.name == name; });
}

const Relation& HeteroGraph::relation(const std::string& name) const { return relations_[relation_index(name)]; }

std::size_t HeteroGraph::relation_index(const std::string& name) const {
  for (std::size_t i = 0; i < relations_.size(); ++i) {
    if (relations_[i].name == name) return i;
  }
  throw ArgumentError("graph: unknown relation '" + name + "'");
}

void HeteroGraph::check_metapath(const Metapath& path) const {
  if (path.steps.empty()) throw ShapeError("metapath '" + path.name + "': no steps");
  std::string at = target_type_;
  for (std::size_t s = 0; s < path.steps.size(); ++s) {
    const auto it = std::find_if(relations_.begin(), relations_.end(),
                                 [&](const Relation& r) { return r.name == path.steps[s]; });
    if (it == relations_.end()) {
      throw ShapeError("metapath '" + path.name + "': step " + std::to_string(s) + " names unknown relation '" +
                       path.steps[s] + "'");
    }
    if (it->src != at) {
      throw ShapeError("metapath '" + path.name + "': step " + std::to_string(s) + " ('" + it->name + "') starts at '" +
                       it->src + "' but the previous step ends at '" + at + "'");
    }
    at = it->dst;
  }
  if (at != target_type_) {
    throw ShapeError("metapath '" + path.name + "': last step '" + path.steps.back() + "' ends at '" + at +
                     "', expected target type '" + target_type_ + "'");
  }
}

CountMode parse_count_mode(const std::string& s) {
  if (s == "binary") return CountMode::binary;
  if (s == "counts") return CountMode::counts;
  throw ArgumentError("unknown count mode '" + s + "' (expected binary or counts)");
}

const char* to_string(CountMode m) { return m == CountMode::binary ? "binary" : "counts"; }

SparseMatrix compose_metapath_adjacency(const HeteroGraph& graph, const Metapath& path, CountMode mode) {
  graph.check_metapath(path);
  SparseMatrix acc = graph.relation(path.steps.front()).adjacency;
  for (std::size_t s = 1; s < path.steps.size(); ++s) {
    acc = multiply(acc, graph.relation(path.steps[s]).adjacency);
  }
  return mode == CountMode::binary ? acc.binarized() : acc;
}

ContrastiveSets::ContrastiveSets(SparseMatrix counts, SparseMatrix positives)
    : counts_(std::move(counts)), positives_(std::make_shared<const SparseMatrix>(std::move(positives))) {
  if (!positives_->square() || counts_.rows() != positives_->rows() || counts_.cols() != positives_->cols()) {
    throw ShapeError("contrastive sets: count and positive matrices disagree");
  }
  for (std::size_t i = 0; i < positives_->rows(); ++i) {
    if (!positives_->contains(i, i)) throw ArgumentError("contrastive sets: node " + std::to_string(i) + " missing from its own positive set");
  }
}

std::vector<std::size_t> ContrastiveSets::negatives(std::size_t i) const {
  std::vector<std::size_t> out;
  out.reserve(negative_count(i));
  const auto pos = positives(i);
  std::size_t p = 0;
  for (std::size_t j = 0; j < size(); ++j) {
    if (p < pos.size() && pos[p] == j) {
      ++p;
    } else {
      out.push_back(j);
    }
  }
  return out;
}

ContrastiveSets ContrastiveSets::restricted(std::span<const std::size_t> ids) const {
  std::vector<std::size_t> remap(size(), size());
  for (std::size_t k = 0; k < ids.size(); ++k) {
    if (ids[k] >= size()) throw ArgumentError("contrastive sets: node id " + std::to_string(ids[k]) + " out of range");
    if (remap[ids[k]] != size()) throw ArgumentError("contrastive sets: duplicate node id " + std::to_string(ids[k]));
    remap[ids[k]] = k;
  }
  auto sub = [&](const SparseMatrix& m) {
    std::vector<Triplet> t;
    for (std::size_t k = 0; k < ids.size(); ++k) {
      const auto cols = m.row_cols(ids[k]);
      const auto vals = m.row_values(ids[k]);
      for (std::size_t p = 0; p < cols.size(); ++p) {
        if (remap[cols[p]] != size()) t.push_back({k, remap[cols[p]], vals[p]});
      }
    }
    return SparseMatrix::from_triplets(ids.size(), ids.size(), std::move(t));
  };
  return ContrastiveSets(sub(counts_), sub(*positives_));
}

ContrastiveSets mine_contrastive_sets(std::span<const SparseMatrix> metapath_adjacency, int theta_pos) {
  if (theta_pos < 1) throw ArgumentError("mine_contrastive_sets: theta_pos must be >= 1, got " + std::to_string(theta_pos));
  if (metapath_adjacency.empty()) throw ArgumentError("mine_contrastive_sets: no metapaths");
  const std::size_t n = metapath_adjacency.front().rows();
  SparseMatrix counts(n, n);
  for (const auto& a : metapath_adjacency) counts = add(counts, a);
  std::vector<Triplet> pos;
  for (std::size_t i = 0; i < n; ++i) {
    pos.push_back({i, i, 1.0});
    const auto cols = counts.row_cols(i);
    const auto vals = counts.row_values(i);
    for (std::size_t p = 0; p < cols.size(); ++p) {
      if (vals[p] >= static_cast<double>(theta_pos)) pos.push_back({i, cols[p], 1.0});
    }
  }
  return ContrastiveSets(std::move(counts), SparseMatrix::from_triplets(n, n, std::move(pos), Duplicates::keep_one));
}

ContrastiveSets mine_contrastive_sets(const HeteroGraph& graph, int theta_pos, CountMode mode) {
  if (theta_pos < 1) throw ArgumentError("mine_contrastive_sets: theta_pos must be >= 1, got " + std::to_string(theta_pos));
  std::vector<SparseMatrix> adj;
  for (const auto& m : graph.metapaths()) adj.push_back(compose_metapath_adjacency(graph, m, mode));
  return mine_contrastive_sets(adj, theta_pos);
}

}  // namespace gtc
