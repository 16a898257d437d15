#include <gtest/gtest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "gtc/data_io.hpp"
#include "gtc/error.hpp"
#include "gtc/evaluator.hpp"
#include "gtc/sweep.hpp"
#include "support.hpp"

using namespace gtc;
using namespace gtc::eval;

namespace {

// Fraction of (positive, negative) pairs ranked correctly, ties count half.
double pairwise_auc(const std::vector<int>& truth, const Tensor& scores, int c) {
  double good = 0.0, pairs = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] != c) continue;
    for (std::size_t j = 0; j < truth.size(); ++j) {
      if (truth[j] == c) continue;
      const double a = scores.at(i, static_cast<std::size_t>(c)), b = scores.at(j, static_cast<std::size_t>(c));
      good += a > b ? 1.0 : (a == b ? 0.5 : 0.0);
      pairs += 1.0;
    }
  }
  return good / pairs;
}

double entropy(const std::map<int, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [_, c] : counts) h -= c / n * std::log(c / n);
  return h;
}

double nmi_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  const double n = static_cast<double>(a.size());
  std::map<int, double> ca, cb;
  std::map<std::pair<int, int>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) ca[a[i]] += 1, cb[b[i]] += 1, joint[{a[i], b[i]}] += 1;
  double mi = 0.0;
  for (const auto& [k, c] : joint) mi += c / n * std::log(c * n / (ca[k.first] * cb[k.second]));
  const double ha = entropy(ca, n), hb = entropy(cb, n);
  if (ha + hb == 0.0) return 1.0;
  return mi / (0.5 * (ha + hb));
}

// Pair-counting definition over all unordered pairs.
double ari_oracle(const std::vector<int>& a, const std::vector<int>& b) {
  double both = 0, in_a = 0, in_b = 0, pairs = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = i + 1; j < a.size(); ++j) {
      const bool sa = a[i] == a[j], sb = b[i] == b[j];
      both += sa && sb;
      in_a += sa;
      in_b += sb;
      pairs += 1;
    }
  const double expected = in_a * in_b / pairs;
  const double max_index = 0.5 * (in_a + in_b);
  if (max_index == expected) return 1.0;
  return (both - expected) / (max_index - expected);
}

struct Blobs {
  Tensor z;
  Labels labels;
};

Blobs gaussian_blobs(std::size_t classes, std::size_t per_class, std::size_t dim, double spread, double noise, std::mt19937_64& rng) {
  std::normal_distribution<double> g(0.0, 1.0);
  std::vector<std::vector<double>> centers(classes, std::vector<double>(dim));
  for (auto& c : centers)
    for (auto& v : c) v = spread * g(rng);
  Blobs b{Tensor({classes * per_class, dim}), {}};
  for (std::size_t i = 0; i < classes * per_class; ++i) {
    const std::size_t c = i / per_class;
    b.labels.push_back(static_cast<int>(c));
    for (std::size_t d = 0; d < dim; ++d) b.z.at(i, d) = centers[c][d] + noise * g(rng);
  }
  return b;
}

}  // namespace

TEST(Split, PerClassCountsAndDisjointness) {
  Labels labels;
  for (int c = 0; c < 3; ++c)
    for (int i = 0; i < 50; ++i) labels.push_back(c);
  labels.push_back(-1);
  const auto s = make_split(labels, {.train_per_class = 10, .val_per_class = 1000, .test_per_class = 1000, .seed = 3});
  std::map<int, int> per_class;
  for (auto i : s.train) per_class[labels[i]]++;
  for (int c = 0; c < 3; ++c) EXPECT_EQ(per_class[c], 10);
  // 40 left per class: 20 validation, 20 test after clamping
  EXPECT_EQ(s.val.size(), 60u);
  EXPECT_EQ(s.test.size(), 60u);
  std::set<std::size_t> all;
  for (const auto* part : {&s.train, &s.val, &s.test})
    for (auto i : *part) {
      EXPECT_TRUE(all.insert(i).second) << "node " << i << " in two parts";
      EXPECT_GE(labels[i], 0);
    }
  EXPECT_EQ(make_split(labels, {.train_per_class = 10, .seed = 3}).train, s.train);
  EXPECT_NE(make_split(labels, {.train_per_class = 10, .seed = 4}).train, s.train);
}

TEST(Split, SmallClassesClampToPopulation) {
  const Labels labels{0, 0, 0, 1, 1};
  const auto s = make_split(labels, {.train_per_class = 20});
  EXPECT_EQ(s.train.size(), 5u);
  EXPECT_TRUE(s.val.empty());
  EXPECT_TRUE(s.test.empty());
}

TEST(Split, Errors) {
  EXPECT_THROW(make_split({0, 0, 0}, {}), ArgumentError);
  EXPECT_THROW(make_split({0, 0, 2, 2}, {}), SplitError);
  EXPECT_THROW(make_split({0, 1}, {.train_per_class = 0}), SplitError);
}

TEST(Metrics, F1HandExamples) {
  const std::vector<int> truth{0, 0, 1, 1, 2}, pred{0, 1, 1, 1, 0};
  EXPECT_DOUBLE_EQ(micro_f1(truth, pred), 3.0 / 5.0);
  // class F1: 0 -> 2*1*(1/2)/(1/2+1/2)=0.5; 1 -> p=2/3 r=1 -> 0.8; 2 -> 0
  EXPECT_NEAR(macro_f1(truth, pred), (0.5 + 0.8 + 0.0) / 3.0, 1e-15);
}

TEST(Metrics, AucMatchesPairwiseOracle) {
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> cls(0, 2), tick(0, 4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> truth(30);
    for (auto& t : truth) t = cls(rng);
    Tensor s({30, 3});
    for (auto& v : s.values()) v = 0.25 * tick(rng);  // frequent ties
    double expect = 0.0;
    int used = 0;
    for (int c = 0; c < 3; ++c) {
      const auto pos = std::count(truth.begin(), truth.end(), c);
      if (pos == 0 || pos == 30) continue;
      expect += pairwise_auc(truth, s, c);
      ++used;
    }
    EXPECT_NEAR(macro_auc(truth, s), expect / used, 1e-12);
  }
}

TEST(Metrics, AucUndefinedWithoutBothClasses) {
  const std::vector<int> truth{1, 1};
  EXPECT_TRUE(std::isnan(macro_auc(truth, Tensor({2, 2}, 0.5))));
}

TEST(Metrics, NmiAriMatchOracles) {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<int> a4(0, 3), b3(0, 2);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> a(40), b(40);
    for (auto& v : a) v = a4(rng);
    for (std::size_t i = 0; i < b.size(); ++i) b[i] = trial % 2 ? a[i] % 3 : b3(rng);
    EXPECT_NEAR(nmi(a, b), nmi_oracle(a, b), 1e-12);
    EXPECT_NEAR(ari(a, b), ari_oracle(a, b), 1e-12);
    EXPECT_NEAR(nmi(a, b), nmi(b, a), 1e-12);
    EXPECT_NEAR(ari(a, b), ari(b, a), 1e-12);
  }
}

TEST(Metrics, PerfectAndDegeneratePartitions) {
  const std::vector<int> labels{0, 0, 1, 1, 2, 2};
  const std::vector<int> renamed{2, 2, 0, 0, 1, 1};
  const std::vector<int> one(6, 0);
  EXPECT_DOUBLE_EQ(nmi(labels, renamed), 1.0);
  EXPECT_DOUBLE_EQ(ari(labels, renamed), 1.0);
  EXPECT_NEAR(nmi(labels, one), 0.0, 1e-15);
  EXPECT_NEAR(ari(labels, one), 0.0, 1e-15);
  EXPECT_DOUBLE_EQ(nmi(one, one), 1.0);
  EXPECT_DOUBLE_EQ(ari(one, one), 1.0);
}

TEST(Probe, SeparableTwoClassEmbeddings) {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> noise(0.0, 0.1);
  Tensor z({200, 4});
  Labels labels;
  for (std::size_t i = 0; i < 200; ++i) {
    const int c = i < 100 ? 0 : 1;
    labels.push_back(c);
    for (std::size_t d = 0; d < 4; ++d) z.at(i, d) = (c ? 2.5 : -2.5) + noise(rng);
  }
  const auto split = make_split(labels, {.train_per_class = 20, .seed = 1});
  const auto r = linear_probe(z, labels, split);
  EXPECT_GE(r.test.mi_f1, 0.99);
  EXPECT_GE(r.test.ma_f1, 0.99);
  EXPECT_GE(r.test.auc, 0.99);
}

TEST(Probe, PermutationNullIsNearChance) {
  std::mt19937_64 rng(4);
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Tensor z = gtc::testing::random_tensor({300, 8}, rng);
    Labels labels(300);
    for (std::size_t i = 0; i < 300; ++i) labels[i] = static_cast<int>(i % 3);
    std::shuffle(labels.begin(), labels.end(), rng);
    total += linear_probe(z, labels, make_split(labels, {.train_per_class = 20, .seed = seed})).test.mi_f1;
  }
  EXPECT_NEAR(total / 10.0, 1.0 / 3.0, 0.1);
}

TEST(Probe, SingleCorrectTestSample) {
  const Tensor z = Tensor::matrix({{-3}, {-2.5}, {2}, {3}, {2.6}});
  const Labels labels{0, 0, 1, 1, 1};
  const Split split{{0, 1, 2, 3}, {}, {4}};
  const auto r = linear_probe(z, labels, split);
  EXPECT_EQ(r.test.mi_f1, 1.0);
  EXPECT_EQ(r.test.ma_f1, 1.0);
}

TEST(Probe, DeterministicAndBounded) {
  std::mt19937_64 rng(5);
  auto blobs = gaussian_blobs(3, 60, 5, 1.0, 1.0, rng);
  const auto split = make_split(blobs.labels, {.train_per_class = 10, .seed = 2});
  const auto a = linear_probe(blobs.z, blobs.labels, split), b = linear_probe(blobs.z, blobs.labels, split);
  EXPECT_EQ(a.test.mi_f1, b.test.mi_f1);
  EXPECT_EQ(a.test.auc, b.test.auc);
  for (double v : {a.test.mi_f1, a.test.ma_f1, a.test.auc, a.val.mi_f1}) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
}

TEST(Probe, ClassMissingFromTrainIsSplitError) {
  const Tensor z({4, 2}, 1.0);
  const Labels labels{0, 0, 1, 1};
  EXPECT_THROW(linear_probe(z, labels, Split{{0, 1}, {}, {2}}), SplitError);
}

TEST(Clustering, WellSeparatedBlobs) {
  std::mt19937_64 rng(6);
  const auto blobs = gaussian_blobs(3, 50, 6, 10.0, 0.3, rng);
  const auto s = cluster_eval(blobs.z, blobs.labels, 3, 1);
  EXPECT_GE(s.nmi, 0.95);
  EXPECT_GE(s.ari, 0.9);
}

TEST(Clustering, Errors) {
  const Tensor z({3, 2}, 1.0);
  EXPECT_THROW(kmeans(z, 4, 0), ArgumentError);
  EXPECT_THROW(cluster_eval(z, {0, 1, 0}, 1, 0), ArgumentError);
}

TEST(Clustering, InvariantUnderPositiveRowScaling) {
  std::mt19937_64 rng(7);
  const auto blobs = gaussian_blobs(3, 30, 4, 3.0, 1.0, rng);
  Tensor scaled = blobs.z;
  std::uniform_real_distribution<double> s(0.1, 10.0);
  for (std::size_t i = 0; i < scaled.rows(); ++i) {
    const double f = s(rng);
    for (auto& v : scaled.row(i)) v *= f;
  }
  const auto a = kmeans(blobs.z, 3, 9), b = kmeans(scaled, 3, 9);
  EXPECT_EQ(a.assignment, b.assignment);
}

TEST(Report, PopulationStdAndJson) {
  MetricsReport r;
  r.add("Mi-F1@20", 0.5);
  r.add("Mi-F1@20", 1.0);
  EXPECT_DOUBLE_EQ(r.metrics["Mi-F1@20"].mean(), 0.75);
  EXPECT_DOUBLE_EQ(r.metrics["Mi-F1@20"].stddev(), 0.25);
  const auto j = r.to_json();
  EXPECT_DOUBLE_EQ(j["Mi-F1@20"]["mean"].get<double>(), 0.75);
  EXPECT_EQ(j["Mi-F1@20"]["runs"].size(), 2u);
}

TEST(Report, EvaluateEmbeddingsKeys) {
  std::mt19937_64 rng(8);
  const auto blobs = gaussian_blobs(3, 80, 4, 4.0, 0.5, rng);
  EvalSpec spec;
  spec.runs = 2;
  const auto r = evaluate_embeddings(blobs.z, blobs.labels, spec);
  for (const char* k : {"Mi-F1@20", "Ma-F1@40", "AUC@60", "NMI", "ARI"}) {
    ASSERT_TRUE(r.metrics.count(k)) << k;
    EXPECT_EQ(r.metrics.at(k).runs.size(), 2u);
    EXPECT_GE(r.metrics.at(k).stddev(), 0.0);
  }
}

TEST(Sweep, MetapathUnionIsBinary) {
  std::mt19937_64 rng(9);
  const auto g = gtc::testing::random_three_type_graph(rng);
  const auto u = metapath_union(g);
  for (std::size_t i = 0; i < u.rows(); ++i)
    for (std::size_t j = 0; j < u.cols(); ++j) {
      bool any = false;
      for (const auto& mp : g.metapaths()) any = any || compose_metapath_adjacency(g, mp, CountMode::counts).get(i, j) > 0;
      EXPECT_EQ(u.get(i, j), any ? 1.0 : 0.0);
    }
}

TEST(Sweep, OneRowPerMethodAndCsv) {
  io::SyntheticSpec spec;
  spec.per_class = 20;
  spec.aux_sizes = {30, 30};
  spec.feature_dim = 8;
  const auto data = io::generate_synthetic(spec);
  TrainConfig base;
  base.dim = base.model_dim = base.head_dim = 16;
  base.heads = 2;
  base.epochs = 3;
  SweepSpec s;
  s.depths = {2};
  s.train_per_class = 5;
  s.baseline.dim = 16;
  s.baseline.epochs = 5;
  const auto rows = oversmoothing_sweep(data.graph, data.labels, base, s);
  ASSERT_EQ(rows.size(), 3u);
  std::set<std::string> methods;
  for (const auto& r : rows) {
    methods.insert(r.method);
    EXPECT_EQ(r.depth, 2u);
    EXPECT_GE(r.mi_f1, 0.0);
    EXPECT_LE(r.mi_f1, 1.0);
  }
  EXPECT_EQ(methods, (std::set<std::string>{"gtc", "rgcn", "gcn"}));
  const std::string csv = sweep_csv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "depth,method,mi_f1,ma_f1");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 4);
  EXPECT_EQ(sweep_csv(oversmoothing_sweep(data.graph, data.labels, base, s)), csv);
}

TEST(Sweep, InvalidSpecsRejected) {
  io::SyntheticSpec spec;
  spec.per_class = 10;
  spec.aux_sizes = {10};
  const auto data = io::generate_synthetic(spec);
  SweepSpec s;
  EXPECT_THROW(oversmoothing_sweep(data.graph, data.labels, {}, s), ArgumentError);
  s.depths = {0};
  EXPECT_THROW(oversmoothing_sweep(data.graph, data.labels, {}, s), ArgumentError);
  s.depths = {2};
  s.methods = {"mlp"};
  EXPECT_THROW(oversmoothing_sweep(data.graph, data.labels, {}, s), ArgumentError);
}

TEST(Sweep, BaselinesLearnSeparableGraph) {
  const auto data = io::generate_synthetic({});
  const auto split = make_split(data.labels, {.train_per_class = 20, .seed = 1});
  BaselineConfig cfg;
  cfg.epochs = 60;
  EXPECT_GE(train_baseline(data.graph, data.labels, split, Baseline::rgcn, 2, cfg).mi_f1, 0.8);
  EXPECT_GE(train_baseline(data.graph, data.labels, split, Baseline::gcn, 2, cfg).mi_f1, 0.8);
}
