#include "gtc/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>
#include <sstream>

#include "gtc/error.hpp"
#include "gtc/optim.hpp"

namespace gtc {

namespace {

double run_epoch(GtcModel& model, AdamState& adam, const std::vector<Tensor*>& params, std::size_t epoch, std::size_t& step,
                 std::size_t& degenerate) {
  const TrainConfig& cfg = model.config();
  const std::size_t n = model.graph().target_count();
  std::vector<std::vector<std::size_t>> batches;
  if (cfg.batch_size == 0 || cfg.batch_size >= n) {
    batches.emplace_back();
  } else {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(cfg.seed ^ (0x9e3779b97f4a7c15ULL * (epoch + 1)));
    for (std::size_t i = n; i > 1; --i) {
      const auto j = std::min(i - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)));
      std::swap(order[i - 1], order[j]);
    }
    for (std::size_t s = 0; s < n; s += cfg.batch_size) {
      batches.emplace_back(order.begin() + s, order.begin() + std::min(n, s + cfg.batch_size));
      std::sort(batches.back().begin(), batches.back().end());
    }
  }

  double total = 0.0;
  std::vector<Tensor> grads(params.size());
  for (const auto& batch : batches) {
    ad::Tape tape(ad::Mode::train, cfg.seed, step++);
    auto diverged = [&](const std::string& what) {
      return NumericError("epoch " + std::to_string(epoch) + ": " + what + " (first non-finite tensor: " +
                          tape.first_non_finite().value_or("none recorded") + ")");
    };
    GtcModel::Forward fwd;
    try {
      fwd = model.forward(tape, batch);
    } catch (const NumericError& e) {
      throw diverged(e.what());
    }
    const double loss = fwd.loss.total.value().item();
    if (!std::isfinite(loss)) throw diverged("loss is not finite");
    degenerate = std::max(degenerate, fwd.loss.degenerate);
    tape.backward(fwd.loss.total);
    for (std::size_t i = 0; i < params.size(); ++i) grads[i] = tape.grad(*params[i]);
    adam_step(params, grads, adam);
    total += loss * static_cast<double>(batch.empty() ? n : batch.size());
  }
  return total / static_cast<double>(n);
}

}  // namespace

TrainResult train(const HeteroGraph& graph, const TrainConfig& config, const EpochCallback& on_epoch) {
  const auto start = std::chrono::steady_clock::now();
  GtcModel model(graph, config);
  const std::vector<Tensor*> params = model.parameters();
  AdamState adam;
  adam.config.lr = config.lr;
  adam.config.weight_decay = config.weight_decay;

  TrainReport report;
  report.best_loss = std::numeric_limits<double>::infinity();
  report.stop_reason = "max_epochs";
  std::vector<Tensor> best = model.snapshot();
  std::size_t since_best = 0;
  std::size_t step = 0;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    // An epoch's loss is measured with the parameters it starts from.
    std::vector<Tensor> before = model.snapshot();
    const double loss = run_epoch(model, adam, params, epoch, step, report.degenerate_nodes);
    report.losses.push_back(loss);
    if (on_epoch) on_epoch(epoch, loss);
    if (loss < report.best_loss) {
      report.best_loss = loss;
      report.best_epoch = epoch;
      best = std::move(before);
      since_best = 0;
    } else if (++since_best >= config.patience) {
      report.stop_reason = "patience";
      break;
    }
  }
  model.assign(best);
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  Tensor z = model.embed();
  return TrainResult{std::move(model), std::move(z), std::move(report)};
}

std::size_t GridSpec::size() const {
  if (axes.empty()) return 0;
  std::size_t n = 1;
  for (const auto& [_, values] : axes) n *= values.size();
  return n;
}

std::vector<std::pair<std::string, std::string>> GridSpec::point(std::size_t index) const {
  if (index >= size()) throw ArgumentError("grid point " + std::to_string(index) + " out of range");
  std::vector<std::pair<std::string, std::string>> out(axes.size());
  for (std::size_t a = axes.size(); a-- > 0;) {
    const auto& values = axes[a].second;
    out[a] = {axes[a].first, values[index % values.size()]};
    index /= values.size();
  }
  return out;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

std::vector<std::string> split_on(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) out.push_back(trim(item));
  return out;
}

}  // namespace

GridSpec parse_grid(const std::string& text) {
  GridSpec g;
  for (const auto& axis : split_on(text, ';')) {
    if (axis.empty()) continue;
    const auto eq = axis.find('=');
    if (eq == std::string::npos) throw ArgumentError("grid axis '" + axis + "' is missing '='");
    const std::string key = trim(axis.substr(0, eq));
    auto values = split_on(axis.substr(eq + 1), ',');
    values.erase(std::remove(values.begin(), values.end(), std::string()), values.end());
    if (key.empty() || values.empty()) throw ArgumentError("grid axis '" + axis + "' needs a key and at least one value");
    g.axes.emplace_back(key, std::move(values));
  }
  return g;
}

GridResult grid_search(const HeteroGraph& graph, const TrainConfig& base, const GridSpec& grid, const GridOptions& opts) {
  const std::size_t total = grid.size();
  if (total == 0) throw ArgumentError("grid_search: the grid is empty");

  std::vector<std::size_t> chosen(total);
  std::iota(chosen.begin(), chosen.end(), 0);
  if (opts.budget > 0 && opts.budget < total) {
    Rng rng(base.seed ^ 0x5eedULL);
    for (std::size_t i = total; i > 1; --i) {
      const auto j = std::min(i - 1, static_cast<std::size_t>(uniform01(rng) * static_cast<double>(i)));
      std::swap(chosen[i - 1], chosen[j]);
    }
    chosen.resize(opts.budget);
    std::sort(chosen.begin(), chosen.end());
  }

  GridResult result;
  result.objective = opts.labels ? "val_mi_f1" : "neg_loss";
  std::optional<eval::Split> split;
  if (opts.labels) split = eval::make_split(*opts.labels, opts.split);

  for (std::size_t idx : chosen) {
    Trial t;
    t.point = grid.point(idx);
    t.config = base;
    for (const auto& [k, v] : t.point) t.config.set(k, v);
    t.config.validate();
    result.trials.push_back(std::move(t));
  }

  const Trial* best = nullptr;
  for (auto& t : result.trials) {
    try {
      TrainResult r = train(graph, t.config);
      if (opts.labels) {
        t.objective = eval::linear_probe(r.embeddings, *opts.labels, *split).val.mi_f1;
      } else {
        t.objective = -r.report.best_loss;
      }
      t.ok = std::isfinite(t.objective);
      if (!t.ok) t.error = "objective is not finite";
    } catch (const NumericError& e) {
      t.ok = false;
      t.error = e.what();
    }
    if (t.ok && (!best || t.objective > best->objective)) best = &t;
  }
  if (!best) throw NumericError("grid_search: every trial diverged");
  result.best = best->config;
  result.best_objective = best->objective;
  return result;
}

}  // namespace gtc
