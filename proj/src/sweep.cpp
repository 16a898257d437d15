#include "gtc/sweep.hpp"

#include <charconv>
#include <memory>

#include "gtc/error.hpp"
#include "gtc/layers.hpp"
#include "gtc/optim.hpp"
#include "gtc/schema_encoder.hpp"
#include "gtc/trainer.hpp"

namespace gtc::eval {

SparseMatrix metapath_union(const HeteroGraph& graph) {
  const std::size_t n = graph.target_count();
  SparseMatrix acc(n, n);
  for (const auto& mp : graph.metapaths()) acc = add(acc, compose_metapath_adjacency(graph, mp, CountMode::binary));
  return acc.binarized();
}

namespace {

class BaselineNet {
 public:
  BaselineNet(const HeteroGraph& graph, Baseline kind, std::size_t layers, std::size_t classes, const BaselineConfig& cfg)
      : graph_(graph), kind_(kind) {
    Rng rng(cfg.seed);
    if (kind == Baseline::rgcn) {
      projection_ = schema::init_projection(graph, cfg.dim, rng, cfg.activation);
      rgcn_ = schema::init_rgcn(graph, cfg.dim, layers, rng, cfg.activation);
      adjacency_ = schema::build_rgcn_adjacency(graph);
    } else {
      input_ = Affine::init(graph.target().features.cols(), cfg.dim, rng);
      gcn_ = schema::init_gcn(cfg.dim, layers, rng, cfg.activation);
      propagation_ = std::make_shared<const SparseMatrix>(gcn_normalize(metapath_union(graph)));
    }
    activation_ = cfg.activation;
    classifier_ = Affine::init(cfg.dim, classes, rng);
  }

  ad::Var logits(ad::Tape& tape) const {
    ad::Var h;
    if (kind_ == Baseline::rgcn) {
      h = schema::rgcn_forward(tape, graph_, adjacency_, schema::project_features(tape, graph_, projection_), rgcn_);
    } else {
      const ad::Var x = ad::activate(apply(tape, input_, tape.constant(graph_.target().features)), activation_);
      h = schema::gcn_forward(tape, propagation_, x, gcn_);
    }
    return apply(tape, classifier_, h);
  }

  std::vector<Tensor*> parameters() {
    std::vector<Tensor*> out;
    const ParamVisitor fn = [&](const std::string&, Tensor& t) { out.push_back(&t); };
    if (kind_ == Baseline::rgcn) {
      projection_.visit(fn);
      std::vector<std::string> names;
      for (const auto& r : graph_.relations()) names.push_back(r.name);
      rgcn_.visit(names, fn);
    } else {
      input_.visit("input", fn);
      gcn_.visit(fn);
    }
    classifier_.visit("classifier", fn);
    return out;
  }

 private:
  const HeteroGraph& graph_;
  Baseline kind_;
  ad::Activation activation_ = ad::Activation::elu;
  schema::ProjectionParams projection_;
  schema::RgcnParams rgcn_;
  schema::RgcnAdjacency adjacency_;
  Affine input_;
  schema::GcnParams gcn_;
  std::shared_ptr<const SparseMatrix> propagation_;
  Affine classifier_;
};

Tensor softmax_rows(const Tensor& logits, std::span<const std::size_t> ids) {
  Tensor p({ids.size(), logits.cols()});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    const auto row = logits.row(ids[r]);
    double mx = row[0];
    for (double v : row) mx = std::max(mx, v);
    double s = 0.0;
    for (std::size_t c = 0; c < row.size(); ++c) s += (p.at(r, c) = std::exp(row[c] - mx));
    for (std::size_t c = 0; c < row.size(); ++c) p.at(r, c) /= s;
  }
  return p;
}

std::vector<int> pick(const Labels& labels, std::span<const std::size_t> ids) {
  std::vector<int> out;
  for (auto i : ids) out.push_back(labels[i]);
  return out;
}

}  // namespace

Scores train_baseline(const HeteroGraph& graph, const Labels& labels, const Split& split, Baseline kind, std::size_t layers,
                      const BaselineConfig& cfg) {
  if (labels.size() != graph.target_count()) throw ShapeError("train_baseline: one label per target node expected");
  if (split.train.empty() || split.test.empty()) throw SplitError("train_baseline: empty train or test split");
  const auto classes = static_cast<std::size_t>(class_count(labels));
  BaselineNet net(graph, kind, layers, classes, cfg);
  auto params = net.parameters();
  AdamState adam;
  adam.config.lr = cfg.lr;
  adam.config.weight_decay = cfg.weight_decay;

  Tensor onehot({split.train.size(), classes});
  for (std::size_t r = 0; r < split.train.size(); ++r) onehot.at(r, static_cast<std::size_t>(labels[split.train[r]])) = 1.0;
  const std::vector<int> val_truth = pick(labels, split.val);
  const std::vector<int> test_truth = pick(labels, split.test);
  const std::span<const std::size_t> monitor = split.val.empty() ? std::span<const std::size_t>(split.train) : split.val;
  const std::vector<int> monitor_truth = pick(labels, monitor);

  Scores best_test;
  double best_val = -1.0;
  std::size_t since_best = 0;
  std::vector<Tensor> grads(params.size());
  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    ad::Tape tape(ad::Mode::train, cfg.seed, epoch);
    const ad::Var logits = net.logits(tape);
    const Tensor& lv = logits.value();
    if (!lv.all_finite()) {
      throw NumericError("baseline epoch " + std::to_string(epoch + 1) + ": non-finite logits (first non-finite tensor: " +
                         tape.first_non_finite().value_or("none recorded") + ")");
    }
    const double val = score(monitor_truth, softmax_rows(lv, monitor)).mi_f1;
    if (val > best_val) {
      best_val = val;
      best_test = score(test_truth, softmax_rows(lv, split.test));
      since_best = 0;
    } else if (++since_best >= cfg.patience) {
      break;
    }
    const ad::Var picked = ad::gather_rows(logits, split.train);
    const ad::Var target = ad::sum(ad::mul(picked, tape.constant(onehot)));
    const ad::Var lse = ad::sum(ad::row_logsumexp(picked));
    const ad::Var loss = ad::scale(ad::sub(lse, target), 1.0 / static_cast<double>(split.train.size()));
    tape.backward(loss);
    for (std::size_t i = 0; i < params.size(); ++i) grads[i] = tape.grad(*params[i]);
    adam_step(params, grads, adam);
  }
  return best_test;
}

std::vector<SweepRow> oversmoothing_sweep(const HeteroGraph& graph, const Labels& labels, const TrainConfig& base,
                                          const SweepSpec& spec) {
  if (spec.depths.empty()) throw ArgumentError("oversmoothing_sweep: empty depth list");
  if (spec.methods.empty()) throw ArgumentError("oversmoothing_sweep: no methods selected");
  if (spec.runs == 0) throw ArgumentError("oversmoothing_sweep: runs must be >= 1");
  for (auto d : spec.depths) {
    if (d == 0) throw ArgumentError("oversmoothing_sweep: depths must be >= 1");
  }
  for (const auto& m : spec.methods) {
    if (m != "gtc" && m != "rgcn" && m != "gcn") throw ArgumentError("oversmoothing_sweep: unknown method '" + m + "'");
  }

  std::vector<SweepRow> rows;
  for (std::size_t depth : spec.depths) {
    for (const auto& method : spec.methods) {
      SweepRow row{depth, method, 0.0, 0.0};
      for (std::size_t r = 0; r < spec.runs; ++r) {
        SplitSpec ss;
        ss.train_per_class = spec.train_per_class;
        ss.seed = spec.seed + r;
        const Split split = make_split(labels, ss);
        Scores s;
        if (method == "gtc") {
          TrainConfig cfg = base;
          cfg.max_hop = depth;
          cfg.extended_ranges = true;
          cfg.seed = spec.seed + r;
          s = linear_probe(train(graph, cfg).embeddings, labels, split).test;
        } else {
          BaselineConfig bc = spec.baseline;
          bc.seed = spec.seed + r;
          s = train_baseline(graph, labels, split, method == "rgcn" ? Baseline::rgcn : Baseline::gcn, depth, bc);
        }
        row.mi_f1 += s.mi_f1 / static_cast<double>(spec.runs);
        row.ma_f1 += s.ma_f1 / static_cast<double>(spec.runs);
      }
      rows.push_back(row);
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  auto num = [](double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  std::string out = "depth,method,mi_f1,ma_f1\n";
  for (const auto& r : rows) out += std::to_string(r.depth) + "," + r.method + "," + num(r.mi_f1) + "," + num(r.ma_f1) + "\n";
  return out;
}

}  // namespace gtc::eval
