#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include <unistd.h>

#include "gtc/checkpoint.hpp"
#include "gtc/data_io.hpp"
#include "gtc/error.hpp"
#include "support.hpp"

using namespace gtc;
namespace fs = std::filesystem;

namespace {

const fs::path kFixtures = GTC_FIXTURE_DIR;

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("gtc_io_" + std::to_string(::getpid()) + "_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p);
  return {std::istreambuf_iterator<char>(is), {}};
}

std::set<std::pair<std::size_t, std::size_t>> edge_set(const SparseMatrix& a) {
  std::set<std::pair<std::size_t, std::size_t>> s;
  for (std::size_t r = 0; r < a.rows(); ++r)
    for (std::size_t c : a.row_cols(r)) s.insert({r, c});
  return s;
}

}  // namespace

TEST(KvParser, SectionsCommentsAndLines) {
  const auto doc = io::parse_kv("# header\nname: x\n\n[a]\nk: v w\n[b]\nz: 1\n", "mem");
  ASSERT_NE(doc.find("name"), nullptr);
  EXPECT_EQ(doc.find("name")->value, "x");
  ASSERT_EQ(doc.sections.at("a").size(), 1u);
  EXPECT_EQ(doc.sections.at("a")[0].value, "v w");
  EXPECT_EQ(doc.sections.at("a")[0].line, 5u);
  EXPECT_THROW(io::parse_kv("no colon here\n", "mem"), LoadError);
}

TEST(KvParser, Attributes) {
  const io::KvEntry e{"paper", "count=3 features=p.csv", 1};
  const auto attrs = io::parse_attributes(e, "mem");
  EXPECT_EQ(attrs.at("count"), "3");
  EXPECT_EQ(attrs.at("features"), "p.csv");
  EXPECT_THROW(io::parse_attributes({"x", "count 3", 2}, "mem"), LoadError);
}

TEST(LoadDataset, FixtureLoadsWithDeclaredCounts) {
  const auto d = io::load_dataset(kFixtures / "tiny");
  EXPECT_EQ(d.name, "tiny");
  EXPECT_EQ(d.graph.target_type(), "paper");
  EXPECT_EQ(d.graph.node_type("paper").count, 6u);
  EXPECT_EQ(d.graph.node_type("author").count, 3u);
  EXPECT_EQ(d.graph.node_type("paper").features.shape(), (Shape{6, 2}));
  EXPECT_EQ(d.graph.node_type("author").features, Tensor({3, 1}, 1.0));
  // the duplicated line "2 0" is stored once
  EXPECT_EQ(d.graph.relation("PA").adjacency.nnz(), 8u);
  EXPECT_EQ(edge_set(d.graph.relation("AP").adjacency), edge_set(d.graph.relation("PA").adjacency.transpose()));
  EXPECT_EQ(d.labels, (eval::Labels{0, 0, 0, 1, 1, 1}));
  ASSERT_EQ(d.graph.metapaths().size(), 1u);
  EXPECT_EQ(d.graph.metapaths()[0].steps, (std::vector<std::string>{"PA", "AP"}));
  EXPECT_EQ(io::load_dataset(kFixtures / "tiny" / "manifest.txt").graph.target_count(), 6u);
}

TEST(LoadDataset, OutOfRangeEdgeNamesFileAndLine) {
  try {
    io::load_dataset(kFixtures / "bad_edge");
    FAIL();
  } catch (const LoadError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("pa.tsv:3"), std::string::npos) << msg;
  }
}

TEST(LoadDataset, MissingDirectoryNamesPath) {
  try {
    io::load_dataset("/nonexistent/gtc_dataset");
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("/nonexistent/gtc_dataset"), std::string::npos);
  }
}

TEST(LoadDataset, FeatureRowCountMismatch) {
  const auto dir = scratch("rows");
  fs::copy(kFixtures / "tiny", dir);
  std::ofstream(dir / "paper.csv") << "1,2\n3,4\n";
  try {
    io::load_dataset(dir);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("paper.csv"), std::string::npos);
  }
  std::ofstream(dir / "paper.csv") << "1,2\n3,x\n1,1\n1,1\n1,1\n1,1\n";
  try {
    io::load_dataset(dir);
    FAIL();
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("paper.csv:2"), std::string::npos) << e.what();
  }
  fs::remove_all(dir);
}

TEST(SaveDataset, RoundTripsCountsEdgesAndLabels) {
  std::mt19937_64 rng(1);
  const auto g = gtc::testing::random_three_type_graph(rng);
  io::Dataset d{"rt", g, eval::Labels(g.target_count(), -1)};
  for (std::size_t i = 0; i < d.labels.size(); i += 2) d.labels[i] = static_cast<int>(i % 3);
  const auto dir = scratch("save");
  io::save_dataset(d, dir);
  const auto back = io::load_dataset(dir);
  EXPECT_EQ(back.name, "rt");
  EXPECT_EQ(back.labels, d.labels);
  ASSERT_EQ(back.graph.node_types().size(), g.node_types().size());
  for (std::size_t t = 0; t < g.node_types().size(); ++t) {
    EXPECT_EQ(back.graph.node_types()[t].count, g.node_types()[t].count);
    EXPECT_EQ(back.graph.node_types()[t].features, g.node_types()[t].features);
  }
  for (const auto& r : g.relations()) EXPECT_EQ(edge_set(back.graph.relation(r.name).adjacency), edge_set(r.adjacency));
  ASSERT_EQ(back.graph.metapaths().size(), g.metapaths().size());
  for (std::size_t p = 0; p < g.metapaths().size(); ++p) EXPECT_EQ(back.graph.metapaths()[p].steps, g.metapaths()[p].steps);
  fs::remove_all(dir);
}

TEST(Synthetic, BitDeterministicPerSeed) {
  const auto a = io::generate_synthetic({}), b = io::generate_synthetic({});
  EXPECT_EQ(a.graph.target().features, b.graph.target().features);
  for (std::size_t r = 0; r < a.graph.relations().size(); ++r) {
    EXPECT_EQ(edge_set(a.graph.relations()[r].adjacency), edge_set(b.graph.relations()[r].adjacency));
  }
  io::SyntheticSpec other;
  other.seed = 8;
  EXPECT_NE(io::generate_synthetic(other).graph.target().features, a.graph.target().features);
}

TEST(Synthetic, DefaultShapeAndClassMeanSeparation) {
  const auto d = io::generate_synthetic({});
  EXPECT_EQ(d.graph.target_count(), 300u);
  EXPECT_EQ(d.graph.node_type("A0").count, 150u);
  EXPECT_EQ(d.graph.metapaths().size(), 2u);
  const Tensor& x = d.graph.target().features;
  std::vector<std::vector<double>> mean(3, std::vector<double>(x.cols(), 0.0));
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t c = 0; c < x.cols(); ++c) mean[static_cast<std::size_t>(d.labels[i])][c] += x.at(i, c) / 100.0;
  // Sample means carry noise of about sqrt(2 * 16 / 100) ~ 0.57 in distance.
  for (int a = 0; a < 3; ++a)
    for (int b = a + 1; b < 3; ++b) {
      double dist = 0.0;
      for (std::size_t c = 0; c < x.cols(); ++c) dist += std::pow(mean[a][c] - mean[b][c], 2);
      EXPECT_NEAR(std::sqrt(dist), 1.0, 0.75) << a << " vs " << b;
    }
}

TEST(Synthetic, ZeroCrossProbabilityKeepsPositivesInClass) {
  io::SyntheticSpec spec;
  spec.per_class = 30;
  spec.aux_sizes = {40, 40};
  spec.p_out = 0.0;
  const auto d = io::generate_synthetic(spec);
  for (int theta : {1, 2}) {
    const auto sets = mine_contrastive_sets(d.graph, theta, CountMode::binary);
    for (std::size_t i = 0; i < sets.size(); ++i)
      for (std::size_t j : sets.positives(i)) EXPECT_EQ(d.labels[i], d.labels[j]);
  }
}

TEST(Synthetic, EqualProbabilitiesCarryNoDegreeSignal) {
  io::SyntheticSpec spec;
  spec.p_in = spec.p_out = 0.1;
  const auto d = io::generate_synthetic(spec);
  // Metapath degree as the only feature: the probe should sit near chance.
  const SparseMatrix a = compose_metapath_adjacency(d.graph, d.graph.metapaths()[0], CountMode::counts);
  Tensor deg({a.rows(), 1});
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (double v : a.row_values(i)) deg.at(i, 0) += v;
  double total = 0.0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    total += eval::linear_probe(deg, d.labels, eval::make_split(d.labels, {.train_per_class = 20, .seed = seed})).test.mi_f1;
  }
  EXPECT_LT(total / 5.0, 0.45);
}

TEST(Synthetic, InfeasibleSpecRejected) {
  io::SyntheticSpec spec;
  spec.classes = 1;
  EXPECT_THROW(io::generate_synthetic(spec), ArgumentError);
  spec = {};
  spec.p_in = 1.5;
  EXPECT_THROW(io::generate_synthetic(spec), ArgumentError);
  spec = {};
  spec.aux_sizes = {};
  EXPECT_THROW(io::generate_synthetic(spec), ArgumentError);
}

TEST(Embeddings, CsvLineFormat) {
  const auto p = scratch("z.csv");
  io::export_embeddings(Tensor::matrix({{1.5, -2.0}}), p, io::EmbeddingFormat::csv);
  EXPECT_EQ(slurp(p), "1.5,-2.0\n");
  fs::remove(p);
}

TEST(Embeddings, BinaryRoundTripIsBitExact) {
  std::mt19937_64 rng(2);
  const Tensor z = gtc::testing::random_tensor({7, 3}, rng, -1e6, 1e6);
  const auto p = scratch("z.gtck");
  io::export_embeddings(z, p, io::EmbeddingFormat::binary);
  EXPECT_EQ(io::import_embeddings(p), z);
  const auto entries = read_checkpoint(p);
  ASSERT_EQ(entries.size(), 1u);
  EXPECT_EQ(entries[0].name, "Z");
  fs::remove(p);
}

TEST(Embeddings, CsvRoundTripIsExactAndHasOneRowPerNode) {
  std::mt19937_64 rng(3);
  const Tensor z = gtc::testing::random_tensor({100, 64}, rng);
  const auto p = scratch("big.csv");
  io::export_embeddings(z, p, io::EmbeddingFormat::csv);
  const std::string text = slurp(p);
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 100);
  EXPECT_EQ(io::import_embeddings(p), z);
  fs::remove(p);
}

TEST(Embeddings, UnwritablePathIsIoError) {
  EXPECT_THROW(io::export_embeddings(Tensor({1, 1}), "/nonexistent/dir/z.csv", io::EmbeddingFormat::csv), IoError);
  EXPECT_THROW(io::parse_embedding_format("yaml"), ArgumentError);
}

TEST(Embeddings, FormatReal) {
  EXPECT_EQ(io::format_real(1.5), "1.5");
  EXPECT_EQ(io::format_real(-2.0), "-2.0");
  EXPECT_EQ(io::format_real(0.1), "0.1");
  EXPECT_EQ(std::stod(io::format_real(1.0 / 3.0)), 1.0 / 3.0);
}
