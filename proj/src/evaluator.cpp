#include "gtc/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>

#include "gtc/error.hpp"
#include "gtc/layers.hpp"

namespace gtc::eval {

int class_count(const Labels& labels) {
  int c = 0;
  for (int y : labels) c = std::max(c, y + 1);
  return c;
}

Split make_split(const Labels& labels, const SplitSpec& spec) {
  const int classes = class_count(labels);
  std::vector<std::vector<std::size_t>> members(static_cast<std::size_t>(std::max(classes, 0)));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) members[static_cast<std::size_t>(labels[i])].push_back(i);
  }
  std::size_t present = 0;
  for (const auto& m : members) present += !m.empty();
  if (present < 2) throw ArgumentError("make_split: labels cover fewer than two classes");
  if (spec.train_per_class == 0) throw SplitError("make_split: train_per_class must be positive");

  Rng rng(spec.seed);
  Split s;
  for (std::size_t c = 0; c < members.size(); ++c) {
    auto ids = members[c];
    if (ids.empty()) throw SplitError("make_split: class " + std::to_string(c) + " has no labeled node");
    for (std::size_t i = ids.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i));
      std::swap(ids[i - 1], ids[std::min(j, i - 1)]);
    }
    const std::size_t n_train = std::min(spec.train_per_class, ids.size());
    const std::size_t rest = ids.size() - n_train;
    const std::size_t n_val = std::min(spec.val_per_class, rest / 2);
    const std::size_t n_test = std::min(spec.test_per_class, rest - n_val);
    s.train.insert(s.train.end(), ids.begin(), ids.begin() + n_train);
    s.val.insert(s.val.end(), ids.begin() + n_train, ids.begin() + n_train + n_val);
    s.test.insert(s.test.end(), ids.begin() + n_train + n_val, ids.begin() + n_train + n_val + n_test);
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

double micro_f1(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw ShapeError("micro_f1: length mismatch");
  if (truth.empty()) throw ArgumentError("micro_f1: no samples");
  std::size_t hit = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) hit += truth[i] == pred[i];
  return static_cast<double>(hit) / static_cast<double>(truth.size());
}

double macro_f1(std::span<const int> truth, std::span<const int> pred) {
  if (truth.size() != pred.size()) throw ShapeError("macro_f1: length mismatch");
  if (truth.empty()) throw ArgumentError("macro_f1: no samples");
  std::set<int> classes(truth.begin(), truth.end());
  classes.insert(pred.begin(), pred.end());
  double total = 0.0;
  for (int c : classes) {
    std::size_t tp = 0, fp = 0, fn = 0;
    for (std::size_t i = 0; i < truth.size(); ++i) {
      if (pred[i] == c && truth[i] == c) ++tp;
      else if (pred[i] == c) ++fp;
      else if (truth[i] == c) ++fn;
    }
    total += 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
  }
  return total / static_cast<double>(classes.size());
}

double macro_auc(std::span<const int> truth, const Tensor& scores) {
  const std::size_t n = truth.size();
  if (scores.rows() != n) throw ShapeError("macro_auc: score rows do not match labels");
  const std::size_t classes = scores.cols();
  std::vector<std::size_t> order(n);
  std::vector<double> rank(n);
  double sum = 0.0;
  std::size_t counted = 0;
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t pos = 0;
    for (int y : truth) pos += y == static_cast<int>(c);
    if (pos == 0 || pos == n) continue;
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores.at(a, c) < scores.at(b, c); });
    for (std::size_t i = 0; i < n;) {
      std::size_t j = i;
      while (j + 1 < n && scores.at(order[j + 1], c) == scores.at(order[i], c)) ++j;
      const double r = 0.5 * static_cast<double>(i + j) + 1.0;
      for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
      i = j + 1;
    }
    double rank_pos = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (truth[i] == static_cast<int>(c)) rank_pos += rank[i];
    }
    const double p = static_cast<double>(pos), q = static_cast<double>(n - pos);
    sum += (rank_pos - p * (p + 1.0) / 2.0) / (p * q);
    ++counted;
  }
  return counted ? sum / static_cast<double>(counted) : std::numeric_limits<double>::quiet_NaN();
}

Scores score(std::span<const int> truth, const Tensor& prob) {
  std::vector<int> pred(truth.size());
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto r = prob.row(i);
    pred[i] = static_cast<int>(std::max_element(r.begin(), r.end()) - r.begin());
  }
  return {micro_f1(truth, pred), macro_f1(truth, pred), macro_auc(truth, prob)};
}

namespace {

struct Logistic {
  std::size_t classes;
  std::vector<double> mean, inv_std;
  Tensor w;  // (dim x classes)
  std::vector<double> b;

  Tensor probabilities(const Tensor& z, std::span<const std::size_t> ids) const {
    const std::size_t dim = z.cols();
    Tensor p({ids.size(), classes});
    std::vector<double> x(dim);
    for (std::size_t r = 0; r < ids.size(); ++r) {
      for (std::size_t j = 0; j < dim; ++j) x[j] = (z.at(ids[r], j) - mean[j]) * inv_std[j];
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < classes; ++c) {
        double s = b[c];
        for (std::size_t j = 0; j < dim; ++j) s += x[j] * w.at(j, c);
        p.at(r, c) = s;
        mx = std::max(mx, s);
      }
      double tot = 0.0;
      for (std::size_t c = 0; c < classes; ++c) tot += (p.at(r, c) = std::exp(p.at(r, c) - mx));
      for (std::size_t c = 0; c < classes; ++c) p.at(r, c) /= tot;
    }
    return p;
  }
};

std::vector<int> pick(const Labels& labels, std::span<const std::size_t> ids) {
  std::vector<int> out;
  out.reserve(ids.size());
  for (auto i : ids) out.push_back(labels[i]);
  return out;
}

}  // namespace

ProbeResult linear_probe(const Tensor& z, const Labels& labels, const Split& split, const ProbeConfig& cfg) {
  if (z.rank() != 2 || z.rows() != labels.size()) throw ShapeError("linear_probe: embeddings and labels disagree in length");
  if (!z.all_finite()) throw NumericError("linear_probe: embeddings contain non-finite values");
  if (split.train.empty() || split.test.empty()) throw SplitError("linear_probe: empty train or test split");
  const std::size_t classes = static_cast<std::size_t>(class_count(labels));
  std::vector<bool> seen(classes, false);
  for (auto i : split.train) {
    if (labels.at(i) < 0) throw SplitError("linear_probe: unlabeled node " + std::to_string(i) + " in train split");
    seen[static_cast<std::size_t>(labels[i])] = true;
  }
  std::set<int> needed;
  for (auto i : split.test) needed.insert(labels.at(i));
  for (auto i : split.val) needed.insert(labels.at(i));
  for (int c : needed) {
    if (c < 0 || !seen[static_cast<std::size_t>(c)]) throw SplitError("linear_probe: class " + std::to_string(c) + " is absent from the train split");
  }

  const std::size_t dim = z.cols();
  const std::size_t n = split.train.size();
  Logistic m{classes, std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0), Tensor({dim, classes}), std::vector<double>(classes, 0.0)};
  if (cfg.standardize) {
    for (std::size_t j = 0; j < dim; ++j) {
      double mu = 0.0;
      for (auto i : split.train) mu += z.at(i, j);
      mu /= static_cast<double>(n);
      double var = 0.0;
      for (auto i : split.train) var += (z.at(i, j) - mu) * (z.at(i, j) - mu);
      var /= static_cast<double>(n);
      m.mean[j] = mu;
      m.inv_std[j] = var > 1e-24 ? 1.0 / std::sqrt(var) : 1.0;
    }
  }
  Tensor x({n, dim});
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t j = 0; j < dim; ++j) x.at(r, j) = (z.at(split.train[r], j) - m.mean[j]) * m.inv_std[j];
  const std::vector<int> y = pick(labels, split.train);

  std::vector<std::size_t> train_rows(n);
  std::iota(train_rows.begin(), train_rows.end(), 0);
  Logistic inner = m;
  inner.mean.assign(dim, 0.0);
  inner.inv_std.assign(dim, 1.0);
  Tensor gw({dim, classes});
  std::vector<double> gb(classes);
  for (std::size_t step = 0; step < cfg.steps; ++step) {
    const Tensor p = inner.probabilities(x, train_rows);
    gw.fill(0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double d = (p.at(r, c) - (y[r] == static_cast<int>(c) ? 1.0 : 0.0)) / static_cast<double>(n);
        gb[c] += d;
        for (std::size_t j = 0; j < dim; ++j) gw.at(j, c) += d * x.at(r, j);
      }
    }
    for (std::size_t i = 0; i < gw.size(); ++i) inner.w[i] -= cfg.lr * (gw[i] + cfg.weight_decay * inner.w[i]);
    for (std::size_t c = 0; c < classes; ++c) inner.b[c] -= cfg.lr * gb[c];
  }
  m.w = inner.w;
  m.b = inner.b;

  ProbeResult out;
  out.test = score(pick(labels, split.test), m.probabilities(z, split.test));
  if (!split.val.empty()) out.val = score(pick(labels, split.val), m.probabilities(z, split.val));
  return out;
}

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
  return s;
}

Clustering lloyd(const Tensor& x, std::size_t k, Rng& rng, std::size_t max_iter) {
  const std::size_t n = x.rows(), d = x.cols();
  Tensor centers({k, d});
  std::vector<double> best(n, std::numeric_limits<double>::infinity());
  std::size_t first = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
  std::copy_n(x.data() + first * d, d, centers.data());
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      best[i] = std::min(best[i], sq_dist(x.data() + i * d, centers.data() + (c - 1) * d, d));
      total += best[i];
    }
    std::size_t chosen = n - 1;
    if (total > 0.0) {
      double u = uniform01(rng) * total;
      for (std::size_t i = 0; i < n; ++i) {
        u -= best[i];
        if (u < 0.0) {
          chosen = i;
          break;
        }
      }
    } else {
      chosen = std::min(n - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)));
    }
    std::copy_n(x.data() + chosen * d, d, centers.data() + c * d);
  }

  Clustering out;
  out.assignment.assign(n, -1);
  std::vector<double> dist(n);
  for (std::size_t it = 0; it < max_iter; ++it) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int arg = 0;
      double bd = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double v = sq_dist(x.data() + i * d, centers.data() + c * d, d);
        if (v < bd) {
          bd = v;
          arg = static_cast<int>(c);
        }
      }
      dist[i] = bd;
      if (out.assignment[i] != arg) {
        out.assignment[i] = arg;
        changed = true;
      }
    }
    if (!changed && it > 0) break;
    centers.fill(0.0);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(out.assignment[i]);
      ++count[c];
      for (std::size_t j = 0; j < d; ++j) centers.at(c, j) += x.at(i, j);
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (count[c] == 0) {
        // Reseed an empty cluster at the point farthest from its center.
        const auto far = static_cast<std::size_t>(std::max_element(dist.begin(), dist.end()) - dist.begin());
        std::copy_n(x.data() + far * d, d, centers.data() + c * d);
        dist[far] = 0.0;
        continue;
      }
      for (std::size_t j = 0; j < d; ++j) centers.at(c, j) /= static_cast<double>(count[c]);
    }
  }
  out.inertia = std::accumulate(dist.begin(), dist.end(), 0.0);
  return out;
}

}  // namespace

Clustering kmeans(const Tensor& z, std::size_t k, std::uint64_t seed, std::size_t restarts, std::size_t max_iter) {
  if (z.rank() != 2) throw ShapeError("kmeans: expected a matrix");
  const std::size_t n = z.rows();
  if (k == 0) throw ArgumentError("kmeans: k must be >= 1");
  if (k > n) throw ArgumentError("kmeans: k = " + std::to_string(k) + " exceeds the " + std::to_string(n) + " points");
  Tensor x = z;
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (double v : x.row(i)) s += v * v;
    if (s > 0.0) {
      const double inv = 1.0 / std::sqrt(s);
      for (double& v : x.row(i)) v *= inv;
    }
  }
  Rng rng(seed);
  Clustering best;
  best.inertia = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < std::max<std::size_t>(restarts, 1); ++r) {
    Clustering c = lloyd(x, k, rng, max_iter);
    if (c.inertia < best.inertia) best = std::move(c);
  }
  return best;
}

namespace {

struct Contingency {
  std::map<std::pair<int, int>, double> joint;
  std::map<int, double> a, b;
  double n = 0.0;
};

Contingency contingency(std::span<const int> x, std::span<const int> y) {
  if (x.size() != y.size()) throw ShapeError("partition comparison: length mismatch");
  if (x.empty()) throw ArgumentError("partition comparison: no samples");
  Contingency c;
  for (std::size_t i = 0; i < x.size(); ++i) {
    c.joint[{x[i], y[i]}] += 1.0;
    c.a[x[i]] += 1.0;
    c.b[y[i]] += 1.0;
  }
  c.n = static_cast<double>(x.size());
  return c;
}

double entropy(const std::map<int, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [_, v] : counts) h -= (v / n) * std::log(v / n);
  return h;
}

double comb2(double v) { return v * (v - 1.0) / 2.0; }

}  // namespace

double nmi(std::span<const int> x, std::span<const int> y) {
  const Contingency c = contingency(x, y);
  const double ha = entropy(c.a, c.n), hb = entropy(c.b, c.n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  double mi = 0.0;
  for (const auto& [key, v] : c.joint) mi += (v / c.n) * std::log(c.n * v / (c.a.at(key.first) * c.b.at(key.second)));
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

double ari(std::span<const int> x, std::span<const int> y) {
  const Contingency c = contingency(x, y);
  double index = 0.0, sa = 0.0, sb = 0.0;
  for (const auto& [_, v] : c.joint) index += comb2(v);
  for (const auto& [_, v] : c.a) sa += comb2(v);
  for (const auto& [_, v] : c.b) sb += comb2(v);
  const double total = comb2(c.n);
  const double expected = total > 0.0 ? sa * sb / total : 0.0;
  const double max_index = 0.5 * (sa + sb);
  if (max_index == expected) return 1.0;
  return (index - expected) / (max_index - expected);
}

ClusterScores cluster_eval(const Tensor& z, const Labels& labels, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw ArgumentError("cluster_eval: k must be >= 2");
  if (z.rows() != labels.size()) throw ShapeError("cluster_eval: embeddings and labels disagree in length");
  std::vector<std::size_t> ids;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) ids.push_back(i);
  }
  Tensor sub({ids.size(), z.cols()});
  std::vector<int> truth;
  for (std::size_t r = 0; r < ids.size(); ++r) {
    std::copy_n(z.data() + ids[r] * z.cols(), z.cols(), sub.data() + r * z.cols());
    truth.push_back(labels[ids[r]]);
  }
  const Clustering c = kmeans(sub, k, seed);
  return {nmi(truth, c.assignment), ari(truth, c.assignment)};
}

double MetricSummary::mean() const {
  if (runs.empty()) return std::numeric_limits<double>::quiet_NaN();
  return std::accumulate(runs.begin(), runs.end(), 0.0) / static_cast<double>(runs.size());
}

double MetricSummary::stddev() const {
  if (runs.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double mu = mean();
  double s = 0.0;
  for (double v : runs) s += (v - mu) * (v - mu);
  return std::sqrt(s / static_cast<double>(runs.size()));
}

nlohmann::json MetricsReport::to_json() const {
  nlohmann::json out = nlohmann::json::object();
  for (const auto& [name, m] : metrics) out[name] = {{"mean", m.mean()}, {"std", m.stddev()}, {"runs", m.runs}};
  return out;
}

MetricsReport evaluate_embeddings(const Tensor& z, const Labels& labels, const EvalSpec& spec) {
  MetricsReport report;
  for (std::size_t per_class : spec.train_per_class) {
    const std::string suffix = "@" + std::to_string(per_class);
    for (std::size_t r = 0; r < spec.runs; ++r) {
      SplitSpec ss;
      ss.train_per_class = per_class;
      ss.seed = spec.seed + r;
      const ProbeResult pr = linear_probe(z, labels, make_split(labels, ss), spec.probe);
      report.add("Ma-F1" + suffix, pr.test.ma_f1);
      report.add("Mi-F1" + suffix, pr.test.mi_f1);
      report.add("AUC" + suffix, pr.test.auc);
    }
  }
  const std::size_t k = spec.clusters ? spec.clusters : static_cast<std::size_t>(class_count(labels));
  for (std::size_t r = 0; r < spec.runs; ++r) {
    const ClusterScores cs = cluster_eval(z, labels, k, spec.seed + r);
    report.add("NMI", cs.nmi);
    report.add("ARI", cs.ari);
  }
  return report;
}

}  // namespace gtc::eval
