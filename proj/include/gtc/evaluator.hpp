#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "gtc/tensor.hpp"

namespace gtc::eval {

// Class id per target node; negative means unlabeled.
using Labels = std::vector<int>;

struct SplitSpec {
  std::size_t train_per_class = 20;
  std::size_t val_per_class = 1000;
  std::size_t test_per_class = 1000;
  std::uint64_t seed = 0;
};

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> val;
  std::vector<std::size_t> test;
};

// Per class: a seeded shuffle, the first train_per_class nodes go to train;
// of the remaining r nodes, min(val_per_class, r/2) go to validation and
// min(test_per_class, rest) to test. Throws SplitError when a class ends up
// with no training node, and ArgumentError for fewer than two classes.
Split make_split(const Labels& labels, const SplitSpec& spec);

int class_count(const Labels& labels);

struct Scores {
  double mi_f1 = 0.0;
  double ma_f1 = 0.0;
  double auc = 0.0;
};

double micro_f1(std::span<const int> truth, std::span<const int> pred);
// Unweighted mean of per-class F1 over classes present in truth or pred.
double macro_f1(std::span<const int> truth, std::span<const int> pred);
// Macro one-vs-rest ROC AUC over classes with both positive and negative
// samples in `truth`; `scores` is (n x classes). NaN when no class qualifies.
double macro_auc(std::span<const int> truth, const Tensor& scores);
Scores score(std::span<const int> truth, const Tensor& probabilities);

struct ProbeConfig {
  std::size_t steps = 500;
  double lr = 0.05;
  double weight_decay = 1e-4;
  bool standardize = true;
};

struct ProbeResult {
  Scores val;
  Scores test;
};

// Multinomial logistic regression on frozen embeddings, trained by
// full-batch gradient descent from zero weights on the split's train rows.
ProbeResult linear_probe(const Tensor& z, const Labels& labels, const Split& split, const ProbeConfig& cfg = {});

struct Clustering {
  std::vector<int> assignment;
  double inertia = 0.0;
};

// k-means on L2-normalized rows; k-means++ seeding, best of `restarts`.
Clustering kmeans(const Tensor& z, std::size_t k, std::uint64_t seed, std::size_t restarts = 10, std::size_t max_iter = 300);

// Arithmetic-mean normalization; 1 when both partitions are trivial.
double nmi(std::span<const int> a, std::span<const int> b);
double ari(std::span<const int> a, std::span<const int> b);

struct ClusterScores {
  double nmi = 0.0;
  double ari = 0.0;
};

// Clusters the labeled rows of z into k groups and compares with labels.
ClusterScores cluster_eval(const Tensor& z, const Labels& labels, std::size_t k, std::uint64_t seed);

struct MetricSummary {
  std::vector<double> runs;

  double mean() const;
  double stddev() const;  // population standard deviation
};

struct MetricsReport {
  std::map<std::string, MetricSummary> metrics;

  void add(const std::string& name, double value) { metrics[name].runs.push_back(value); }
  // {"Mi-F1": {"mean": .., "std": .., "runs": [..]}, ...}
  nlohmann::json to_json() const;
};

struct EvalSpec {
  std::vector<std::size_t> train_per_class = {20, 40, 60};
  std::size_t runs = 10;
  std::uint64_t seed = 0;
  std::size_t clusters = 0;  // 0 = number of classes
  ProbeConfig probe;
};

// Probe metrics per training size (keys "Mi-F1@20" ...) over `runs` seeded
// splits, plus NMI and ARI over `runs` k-means seeds.
MetricsReport evaluate_embeddings(const Tensor& z, const Labels& labels, const EvalSpec& spec);

}  // namespace gtc::eval
