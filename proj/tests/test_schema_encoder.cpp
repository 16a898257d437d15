#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "gtc/error.hpp"
#include "gtc/schema_encoder.hpp"
#include "gtc/sparse.hpp"
#include "support.hpp"

using namespace gtc;
using namespace gtc::testing;

namespace {

double elu(double x) { return x > 0 ? x : std::expm1(x); }

Dense matvec_rows(const Dense& h, const Tensor& w) {
  // h W^T with W stored (out x in)
  Dense out(h.size(), std::vector<double>(w.rows(), 0.0));
  for (std::size_t i = 0; i < h.size(); ++i)
    for (std::size_t o = 0; o < w.rows(); ++o)
      for (std::size_t c = 0; c < w.cols(); ++c) out[i][o] += w.at(o, c) * h[i][c];
  return out;
}

// Per-node, per-edge evaluation of the relational layer stack.
std::vector<Dense> rgcn_oracle(const HeteroGraph& g, std::vector<Dense> h, const schema::RgcnParams& p) {
  for (const auto& layer : p.layers) {
    std::vector<Dense> next;
    for (std::size_t t = 0; t < g.node_types().size(); ++t) {
      const std::string& type = g.node_types()[t].name;
      Dense acc = matvec_rows(h[t], layer.self_weight);
      for (std::size_t r = 0; r < g.relations().size(); ++r) {
        const Relation& rel = g.relations()[r];
        if (rel.src != type) continue;
        const Dense& src = h[g.type_index(rel.dst)];
        for (std::size_t i = 0; i < acc.size(); ++i) {
          std::vector<std::size_t> nbrs;
          for (std::size_t j = 0; j < rel.adjacency.cols(); ++j)
            if (rel.adjacency.get(i, j) != 0.0) nbrs.push_back(j);
          for (std::size_t j : nbrs) {
            const Dense msg = matvec_rows(Dense{src[j]}, layer.relation_weights[r]);
            for (std::size_t c = 0; c < msg[0].size(); ++c) acc[i][c] += msg[0][c] / static_cast<double>(nbrs.size());
          }
        }
      }
      for (auto& row : acc)
        for (auto& v : row) v = p.activation == ad::Activation::elu ? elu(v) : v;
      next.push_back(std::move(acc));
    }
    h = std::move(next);
  }
  return h;
}

std::vector<ad::Var> constants(ad::Tape& tape, const std::vector<Tensor>& xs) {
  std::vector<ad::Var> out;
  for (const auto& x : xs) out.push_back(tape.constant(x));
  return out;
}

HeteroGraph single_type_graph(Tensor features, SparseMatrix self) {
  const std::size_t n = features.rows();
  return HeteroGraph({{"T", n, std::move(features)}}, {{"TT", "T", "T", std::move(self)}}, {{"TT", {"TT"}}}, "T");
}

std::vector<std::pair<std::string, Tensor*>> collect(const std::function<void(const ParamVisitor&)>& visit) {
  std::vector<std::pair<std::string, Tensor*>> out;
  visit([&](const std::string& name, Tensor& t) { out.emplace_back(name, &t); });
  return out;
}

}  // namespace

TEST(Projection, IdentityWeightsReturnFeatures) {
  std::mt19937_64 rng(1);
  const Tensor x = random_tensor({4, 3}, rng);
  const auto g = single_type_graph(x, SparseMatrix::from_triplets(4, 4, {}));
  Rng init(1);
  auto p = schema::init_projection(g, 3, init, ad::Activation::identity);
  p.maps[0].weight = Tensor::identity(3);
  p.maps[0].bias = Tensor({1, 3}, 0.0);
  ad::Tape tape;
  EXPECT_EQ(schema::project_features(tape, g, p)[0].value(), x);
}

TEST(Projection, ZeroFeaturesGiveActivationOfZero) {
  const auto g = single_type_graph(Tensor({3, 2}, 0.0), SparseMatrix::from_triplets(3, 3, {}));
  Rng init(2);
  auto p = schema::init_projection(g, 4, init, ad::Activation::sigmoid);
  p.maps[0].bias = Tensor({1, 4}, 0.0);
  ad::Tape tape;
  for (double v : schema::project_features(tape, g, p)[0].value().values()) EXPECT_DOUBLE_EQ(v, 0.5);
}

TEST(Projection, HandMatrixVectorProduct) {
  const auto g = single_type_graph(Tensor::matrix({{1, 2}}), SparseMatrix::from_triplets(1, 1, {}));
  Rng init(3);
  auto p = schema::init_projection(g, 3, init, ad::Activation::identity);
  p.maps[0].weight = Tensor::matrix({{1, 0}, {0, 1}, {1, 1}});
  p.maps[0].bias = Tensor({1, 3}, 0.0);
  ad::Tape tape;
  EXPECT_EQ(schema::project_features(tape, g, p)[0].value(), Tensor::matrix({{1, 2, 3}}));
}

TEST(Projection, MissingTypeIsConfigError) {
  std::mt19937_64 rng(4);
  const auto g = random_three_type_graph(rng);
  Rng init(4);
  auto p = schema::init_projection(g, 4, init);
  p.types.pop_back();
  p.maps.pop_back();
  ad::Tape tape;
  EXPECT_THROW(schema::project_features(tape, g, p), ConfigError);
}

TEST(Projection, WrongInputDimIsShapeError) {
  std::mt19937_64 rng(5);
  const auto g = random_three_type_graph(rng);
  Rng init(5);
  auto p = schema::init_projection(g, 4, init);
  p.maps[0].weight = Tensor({4, 99});
  ad::Tape tape;
  EXPECT_THROW(schema::project_features(tape, g, p), ShapeError);
}

TEST(Rgcn, ZeroLayersIsConfigError) {
  std::mt19937_64 rng(6);
  const auto g = random_three_type_graph(rng);
  Rng init(6);
  EXPECT_THROW(schema::init_rgcn(g, 4, 0, init), ConfigError);
  schema::RgcnParams empty;
  ad::Tape tape;
  std::vector<ad::Var> h;
  for (const auto& t : g.node_types()) h.push_back(tape.constant(Tensor({t.count, 4})));
  EXPECT_THROW(schema::rgcn_forward(tape, g, schema::build_rgcn_adjacency(g), h, empty), ConfigError);
}

TEST(Rgcn, IsolatedNodeGetsSelfTermOnly) {
  const Tensor x = Tensor::matrix({{1, -1}, {2, 0.5}, {0.3, 0.7}});
  const auto g = single_type_graph(x, SparseMatrix::from_triplets(3, 3, {{0, 1, 1}, {1, 0, 1}}));
  Rng init(7);
  auto p = schema::init_rgcn(g, 2, 1, init);
  ad::Tape tape;
  const Tensor out = schema::rgcn_forward(tape, g, schema::build_rgcn_adjacency(g), constants(tape, {x}), p).value();
  const Dense self = matvec_rows(Dense{{0.3, 0.7}}, p.layers[0].self_weight);
  for (std::size_t c = 0; c < 2; ++c) EXPECT_NEAR(out.at(2, c), elu(self[0][c]), 1e-15);
}

TEST(Rgcn, ZeroRelationWeightsIdentitySelfReturnsTargetRows) {
  std::mt19937_64 rng(8);
  const auto g = random_three_type_graph(rng);
  Rng init(8);
  auto p = schema::init_rgcn(g, 4, 1, init, ad::Activation::identity);
  for (auto& w : p.layers[0].relation_weights) w.fill(0.0);
  p.layers[0].self_weight = Tensor::identity(4);
  std::vector<Tensor> h;
  for (const auto& t : g.node_types()) h.push_back(random_tensor({t.count, 4}, rng));
  ad::Tape tape;
  const Tensor out = schema::rgcn_forward(tape, g, schema::build_rgcn_adjacency(g), constants(tape, h), p).value();
  EXPECT_EQ(out, h[0]);
}

TEST(Rgcn, MatchesPerEdgeLoopOracle) {
  // 3-node single relation toy with hand-set weights.
  const Tensor x = Tensor::matrix({{1, 0}, {0, 1}, {1, 1}});
  const auto toy = single_type_graph(x, SparseMatrix::from_triplets(3, 3, {{0, 1, 1}, {0, 2, 1}, {1, 0, 1}, {2, 2, 1}}));
  schema::RgcnParams hand;
  hand.layers.push_back({{Tensor::matrix({{0.5, -0.25}, {0.1, 0.2}})}, Tensor::matrix({{1, 0.5}, {-0.5, 1}})});
  {
    ad::Tape tape;
    const Tensor out = schema::rgcn_forward(tape, toy, schema::build_rgcn_adjacency(toy), constants(tape, {x}), hand).value();
    EXPECT_LT(max_diff(dense_of(out), rgcn_oracle(toy, {dense_of(x)}, hand)[0]), 1e-6);
  }
  // Random multi-type graphs, two layers.
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = random_three_type_graph(rng);
    Rng init(static_cast<std::uint64_t>(trial));
    const auto p = schema::init_rgcn(g, 3, 2, init);
    std::vector<Tensor> h;
    std::vector<Dense> hd;
    for (const auto& t : g.node_types()) {
      h.push_back(random_tensor({t.count, 3}, rng));
      hd.push_back(dense_of(h.back()));
    }
    ad::Tape tape;
    const auto all = schema::rgcn_forward_all(tape, g, schema::build_rgcn_adjacency(g), constants(tape, h), p);
    const auto expect = rgcn_oracle(g, hd, p);
    for (std::size_t t = 0; t < all.size(); ++t) EXPECT_LT(max_diff(dense_of(all[t].value()), expect[t]), 1e-6);
  }
}

TEST(Rgcn, PermutationEquivariant) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 5; ++trial) {
    const auto g = random_three_type_graph(rng, 8);
    const std::size_t n = g.target_count();
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    // new node k is old node perm[k]
    auto permute_rows = [&](const SparseMatrix& a) {
      std::vector<Triplet> t;
      for (std::size_t k = 0; k < n; ++k)
        for (std::size_t j = 0; j < a.cols(); ++j)
          if (a.get(perm[k], j) != 0.0) t.push_back({k, j, 1.0});
      return SparseMatrix::from_triplets(n, a.cols(), t);
    };
    std::vector<NodeType> types = g.node_types();
    Tensor xt(types[0].features.shape());
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t c = 0; c < xt.cols(); ++c) xt.at(k, c) = types[0].features.at(perm[k], c);
    types[0].features = xt;
    const SparseMatrix ta = permute_rows(g.relation("TA").adjacency), tb = permute_rows(g.relation("TB").adjacency);
    const HeteroGraph pg(types, {{"TA", "T", "A", ta}, {"AT", "A", "T", ta.transpose()}, {"TB", "T", "B", tb}, {"BT", "B", "T", tb.transpose()}},
                         g.metapaths(), "T");
    Rng a(1);
    const auto proj = schema::init_projection(g, 4, a);
    const auto params = schema::init_rgcn(g, 4, 2, a);
    ad::Tape t1, t2;
    const Tensor z = schema::rgcn_forward(t1, g, schema::build_rgcn_adjacency(g), schema::project_features(t1, g, proj), params).value();
    const Tensor pz = schema::rgcn_forward(t2, pg, schema::build_rgcn_adjacency(pg), schema::project_features(t2, pg, proj), params).value();
    for (std::size_t k = 0; k < n; ++k)
      for (std::size_t c = 0; c < 4; ++c) EXPECT_NEAR(pz.at(k, c), z.at(perm[k], c), 1e-12);
  }
}

TEST(Rgcn, EmptyRelationContributesNothing) {
  std::mt19937_64 rng(11);
  const auto g = random_three_type_graph(rng);
  std::vector<Relation> rels = g.relations();
  rels.push_back({"TX", "T", "A", SparseMatrix::from_triplets(g.target_count(), g.node_type("A").count, {})});
  const HeteroGraph with_empty(g.node_types(), rels, g.metapaths(), "T");
  Rng a(3), b(3);
  auto p = schema::init_rgcn(g, 3, 2, a);
  auto q = schema::init_rgcn(with_empty, 3, 2, b);
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    for (std::size_t r = 0; r < p.layers[l].relation_weights.size(); ++r) q.layers[l].relation_weights[r] = p.layers[l].relation_weights[r];
    q.layers[l].self_weight = p.layers[l].self_weight;
  }
  std::vector<Tensor> h;
  for (const auto& t : g.node_types()) h.push_back(random_tensor({t.count, 3}, rng));
  ad::Tape t1, t2;
  EXPECT_EQ(schema::rgcn_forward(t1, g, schema::build_rgcn_adjacency(g), constants(t1, h), p).value(),
            schema::rgcn_forward(t2, with_empty, schema::build_rgcn_adjacency(with_empty), constants(t2, h), q).value());
}

TEST(Rgcn, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(12);
  const auto g = random_three_type_graph(rng, 5, 2);
  Rng init(12);
  auto proj = schema::init_projection(g, 3, init);
  auto params = schema::init_rgcn(g, 3, 2, init);
  std::vector<std::string> rel_names;
  for (const auto& r : g.relations()) rel_names.push_back(r.name);
  const auto adj = schema::build_rgcn_adjacency(g);
  auto ps = collect([&](const ParamVisitor& fn) {
    proj.visit(fn);
    params.visit(rel_names, fn);
  });
  const Tensor weights = random_tensor({g.target_count(), 3}, rng);
  auto res = check_gradients(ps, [&](ad::Tape& tape) {
    const auto z = schema::rgcn_forward(tape, g, adj, schema::project_features(tape, g, proj), params);
    return ad::sum(ad::mul(ad::tanh(z), tape.constant(weights)));
  }, 1e-5, 1e-8);
  EXPECT_LT(res.max_rel, 1e-4) << res.worst;
}

TEST(Gcn, NoEdgesIdentityWeightReturnsInput) {
  std::mt19937_64 rng(13);
  const Tensor h = random_tensor({5, 3}, rng);
  auto p = std::make_shared<const SparseMatrix>(gcn_normalize(SparseMatrix::from_triplets(5, 5, {})));
  Rng init(13);
  auto params = schema::init_gcn(3, 1, init, ad::Activation::identity);
  params.weights[0] = Tensor::identity(3);
  ad::Tape tape;
  EXPECT_LT(max_abs_diff(schema::gcn_forward(tape, p, tape.constant(h), params).value(), h), 1e-15);
}

TEST(Gcn, TwoNodeCliqueConstantInputGivesEqualRows) {
  auto p = std::make_shared<const SparseMatrix>(gcn_normalize(SparseMatrix::from_triplets(2, 2, {{0, 1, 1}, {1, 0, 1}})));
  Rng init(14);
  auto params = schema::init_gcn(3, 2, init);
  ad::Tape tape;
  const Tensor out = schema::gcn_forward(tape, p, tape.constant(Tensor({2, 3}, 0.7)), params).value();
  for (std::size_t c = 0; c < 3; ++c) EXPECT_EQ(out.at(0, c), out.at(1, c));
}

TEST(Gcn, MatchesDensePropagationOracle) {
  std::mt19937_64 rng(15);
  const SparseMatrix a = random_symmetric_binary(8, 0.35, rng);
  auto p = std::make_shared<const SparseMatrix>(gcn_normalize(a));
  Dense ai = dense_of(a);
  for (std::size_t i = 0; i < 8; ++i) ai[i][i] += 1.0;
  const Dense prop = dense_sym_normalize(ai);
  Rng init(15);
  auto params = schema::init_gcn(4, 2, init);
  const Tensor h = random_tensor({8, 4}, rng);
  Dense expect = dense_of(h);
  for (const auto& w : params.weights) {
    expect = dense_mul(prop, dense_mul(expect, dense_of(w)));
    for (auto& row : expect)
      for (auto& v : row) v = elu(v);
  }
  ad::Tape tape;
  EXPECT_LT(max_diff(dense_of(schema::gcn_forward(tape, p, tape.constant(h), params).value()), expect), 1e-6);
}

TEST(Gcn, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(16);
  auto p = std::make_shared<const SparseMatrix>(gcn_normalize(random_symmetric_binary(6, 0.4, rng)));
  Rng init(16);
  auto params = schema::init_gcn(3, 2, init);
  Tensor h = random_tensor({6, 3}, rng);
  auto ps = collect([&](const ParamVisitor& fn) {
    params.visit(fn);
    fn("h", h);
  });
  auto res = check_gradients(ps, [&](ad::Tape& tape) {
    return ad::sum(ad::tanh(schema::gcn_forward(tape, p, tape.param(h), params)));
  }, 1e-5, 1e-8);
  EXPECT_LT(res.max_rel, 1e-4) << res.worst;
}
