#pragma once

// Independent reference implementations used as test oracles. Nothing here
// calls into the sparse kernels or the tape except where a test compares
// against them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "gtc/autodiff.hpp"
#include "gtc/graph.hpp"
#include "gtc/tensor.hpp"

namespace gtc::testing {

using Dense = std::vector<std::vector<double>>;

inline Dense dense_of(const Tensor& t) {
  Dense d(t.rows(), std::vector<double>(t.cols()));
  for (std::size_t r = 0; r < t.rows(); ++r)
    for (std::size_t c = 0; c < t.cols(); ++c) d[r][c] = t.at(r, c);
  return d;
}

inline Dense dense_of(const SparseMatrix& s) {
  Dense d(s.rows(), std::vector<double>(s.cols(), 0.0));
  for (std::size_t r = 0; r < s.rows(); ++r) {
    const auto cols = s.row_cols(r);
    const auto vals = s.row_values(r);
    for (std::size_t k = 0; k < cols.size(); ++k) d[r][cols[k]] += vals[k];
  }
  return d;
}

inline Dense dense_mul(const Dense& a, const Dense& b) {
  const std::size_t m = a.size(), k = b.size(), n = b.empty() ? 0 : b[0].size();
  Dense c(m, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < k; ++t) s += a[i][t] * b[t][j];
      c[i][j] = s;
    }
  return c;
}

inline Dense dense_identity(std::size_t n) {
  Dense d(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i) d[i][i] = 1.0;
  return d;
}

// D^{-1/2} A D^{-1/2} straight from the definition.
inline Dense dense_sym_normalize(const Dense& a) {
  const std::size_t n = a.size();
  std::vector<double> deg(n, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (double v : a[i]) deg[i] += v;
  Dense out(n, std::vector<double>(n, 0.0));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (deg[i] > 0 && deg[j] > 0) out[i][j] = a[i][j] / std::sqrt(deg[i] * deg[j]);
  return out;
}

inline double max_diff(const Dense& a, const Dense& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < a[i].size(); ++j) m = std::max(m, std::abs(a[i][j] - b[i][j]));
  return m;
}

inline Tensor random_tensor(const Shape& shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(shape);
  for (auto& v : t.values()) v = u(rng);
  return t;
}

inline SparseMatrix random_binary(std::size_t rows, std::size_t cols, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Triplet> trip;
  for (std::size_t i = 0; i < rows; ++i)
    for (std::size_t j = 0; j < cols; ++j)
      if (coin(rng)) trip.push_back({i, j, 1.0});
  return SparseMatrix::from_triplets(rows, cols, std::move(trip));
}

inline SparseMatrix random_symmetric_binary(std::size_t n, double p, std::mt19937_64& rng) {
  std::bernoulli_distribution coin(p);
  std::vector<Triplet> trip;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (coin(rng)) {
        trip.push_back({i, j, 1.0});
        trip.push_back({j, i, 1.0});
      }
  return SparseMatrix::from_triplets(n, n, std::move(trip));
}

// Random target/aux1/aux2 graph with relations in both directions and the
// metapaths T-A-T, T-B-T and T-A-T-B-T.
inline HeteroGraph random_three_type_graph(std::mt19937_64& rng, std::size_t max_nodes = 10, std::size_t feat = 3) {
  std::uniform_int_distribution<std::size_t> count(1, max_nodes);
  std::uniform_real_distribution<double> dens(0.1, 0.6);
  const std::size_t nt = count(rng), na = count(rng), nb = count(rng);
  const SparseMatrix ta = random_binary(nt, na, dens(rng), rng);
  const SparseMatrix tb = random_binary(nt, nb, dens(rng), rng);
  std::vector<NodeType> types{{"T", nt, random_tensor({nt, feat}, rng)},
                              {"A", na, random_tensor({na, feat + 1}, rng)},
                              {"B", nb, random_tensor({nb, feat + 2}, rng)}};
  std::vector<Relation> rels{{"TA", "T", "A", ta}, {"AT", "A", "T", ta.transpose()}, {"TB", "T", "B", tb}, {"BT", "B", "T", tb.transpose()}};
  std::vector<Metapath> paths{{"TAT", {"TA", "AT"}}, {"TBT", {"TB", "BT"}}, {"TATBT", {"TA", "AT", "TB", "BT"}}};
  return HeteroGraph(std::move(types), std::move(rels), std::move(paths), "T");
}

// Counts walks along the metapath's relation sequence by explicit
// depth-first enumeration over edge lists.
inline Dense enumerate_paths(const HeteroGraph& g, const Metapath& mp) {
  const std::size_t n = g.target_count();
  Dense out(n, std::vector<double>(n, 0.0));
  std::function<void(std::size_t, std::size_t, std::size_t)> walk = [&](std::size_t start, std::size_t step, std::size_t node) {
    if (step == mp.steps.size()) {
      out[start][node] += 1.0;
      return;
    }
    const SparseMatrix& a = g.relation(mp.steps[step]).adjacency;
    for (std::size_t j = 0; j < a.cols(); ++j) {
      if (a.get(node, j) != 0.0) walk(start, step + 1, j);
    }
  };
  for (std::size_t i = 0; i < n; ++i) walk(i, 0, i);
  return out;
}

struct GradCheckResult {
  double max_rel = 0.0;
  std::string worst;
  std::size_t checked = 0;
};

// Central differences on every entry of every parameter against the tape
// gradient. rel = |analytic - numeric| / max(|analytic|, |numeric|, floor).
inline GradCheckResult check_gradients(const std::vector<std::pair<std::string, Tensor*>>& params,
                                       const std::function<ad::Var(ad::Tape&)>& loss_fn, double h = 1e-3, double floor = 1e-6) {
  std::vector<Tensor> analytic;
  {
    ad::Tape tape(ad::Mode::eval);
    const ad::Var loss = loss_fn(tape);
    tape.backward(loss);
    for (const auto& [_, p] : params) analytic.push_back(tape.grad(*p));
  }
  auto eval = [&]() {
    ad::Tape tape(ad::Mode::eval);
    return loss_fn(tape).value().item();
  };
  GradCheckResult res;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k].second;
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double orig = p[i];
      p[i] = orig + h;
      const double up = eval();
      p[i] = orig - h;
      const double down = eval();
      p[i] = orig;
      const double numeric = (up - down) / (2.0 * h);
      const double a = analytic[k][i];
      const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      ++res.checked;
      if (rel > res.max_rel) {
        res.max_rel = rel;
        res.worst = params[k].first + "[" + std::to_string(i) + "] analytic=" + std::to_string(a) + " numeric=" + std::to_string(numeric);
      }
    }
  }
  return res;
}

}  // namespace gtc::testing
