#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "gtc/evaluator.hpp"
#include "gtc/graph.hpp"
#include "gtc/tensor.hpp"

namespace gtc::io {

/// "key: value" text with optional [section] headers and '#' comments. Used
/// for dataset manifests and training config files.
struct KvEntry {
  std::string key;
  std::string value;
  std::size_t line = 0;
};

struct KvDocument {
  std::string source;                                   // file name for diagnostics
  std::vector<KvEntry> top;                             // entries before any section
  std::map<std::string, std::vector<KvEntry>> sections;

  const KvEntry* find(const std::string& key) const;  // top level only
};

KvDocument parse_kv(const std::string& text, const std::string& source);
KvDocument read_kv_file(const std::filesystem::path& path);

// "a=1 b=x" -> {{"a","1"},{"b","x"}}; throws LoadError on a token without '='.
std::map<std::string, std::string> parse_attributes(const KvEntry& entry, const std::string& source);

struct Dataset {
  std::string name;
  HeteroGraph graph;
  eval::Labels labels;  // per target node, -1 when unlabeled; empty when no label file
};

// Manifest layout (paths relative to the manifest's directory):
//
//   name: acm
//   target: paper
//   [node_types]
//   paper: count=4019 features=p.csv labels=labels.tsv
//   author: count=7167 features=a.csv
//   [relations]
//   PA: src=paper dst=author edges=pa.tsv
//   AP: reverse=PA
//   [metapaths]
//   PAP: PA AP
//
// A node type without features gets a single all-ones column. `path` may be
// the manifest file or a directory holding "manifest.txt".
Dataset load_dataset(const std::filesystem::path& path);

// Writes `manifest.txt` plus one file per table into `dir`.
void save_dataset(const Dataset& data, const std::filesystem::path& dir);

Tensor read_features_csv(const std::filesystem::path& path, std::size_t expected_rows);
std::vector<std::pair<std::size_t, std::size_t>> read_edges_tsv(const std::filesystem::path& path, std::size_t src_count,
                                                                std::size_t dst_count);
eval::Labels read_labels_tsv(const std::filesystem::path& path, std::size_t count);

struct SyntheticSpec {
  std::size_t classes = 3;
  std::size_t per_class = 100;
  std::vector<std::size_t> aux_sizes = {150, 150};
  double p_in = 0.2;
  double p_out = 0.02;
  std::size_t feature_dim = 16;
  double separation = 1.0;  // distance between any two class means
  double noise = 1.0;       // per-coordinate feature standard deviation
  std::uint64_t seed = 7;
};

// Stochastic-block heterogeneous graph. Target type "T" holds classes *
// per_class nodes (node i has class i / per_class); aux type "A<k>" node j
// has class j % classes. Each (target, aux) pair is linked with p_in when
// the classes agree, else p_out. Relations "T-A<k>" and "A<k>-T", metapaths
// "T-A<k>-T".
Dataset generate_synthetic(const SyntheticSpec& spec);

enum class EmbeddingFormat { binary, csv };

EmbeddingFormat parse_embedding_format(const std::string& s);

// binary: checkpoint layout with the single entry "Z"; csv: one row per
// node, shortest round-trip decimal form with at least one fractional digit.
void export_embeddings(const Tensor& z, const std::filesystem::path& path, EmbeddingFormat format);
Tensor import_embeddings(const std::filesystem::path& path);

std::string format_real(double v);

}  // namespace gtc::io
