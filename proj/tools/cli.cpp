#include "cli.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "gtc/checkpoint.hpp"
#include "gtc/config.hpp"
#include "gtc/data_io.hpp"
#include "gtc/error.hpp"
#include "gtc/hop2token.hpp"
#include "gtc/sweep.hpp"
#include "gtc/trainer.hpp"

namespace fs = std::filesystem;

namespace gtc::cli {

namespace {

struct DataOptions {
  std::string data;
  std::string synthetic;
};

struct ConfigOptions {
  std::string config_file;
  std::map<std::string, std::string> overrides;
};

std::vector<std::string> split_list(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::size_t to_size(const std::string& what, const std::string& s) {
  std::size_t pos = 0;
  unsigned long long v = 0;
  try {
    v = std::stoull(s, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != s.size() || s.front() == '-') throw ArgumentError(what + ": expected a non-negative integer, got '" + s + "'");
  return static_cast<std::size_t>(v);
}

io::SyntheticSpec parse_synthetic(const std::string& text) {
  io::SyntheticSpec spec;
  if (text == "default") return spec;
  for (const auto& item : split_list(text, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ArgumentError("--synthetic: expected key=value, got '" + item + "'");
    const std::string k = item.substr(0, eq), v = item.substr(eq + 1);
    if (k == "classes") spec.classes = to_size(k, v);
    else if (k == "per_class") spec.per_class = to_size(k, v);
    else if (k == "aux") {
      spec.aux_sizes.clear();
      for (const auto& a : split_list(v, ':')) spec.aux_sizes.push_back(to_size(k, a));
    } else if (k == "p_in") spec.p_in = std::stod(v);
    else if (k == "p_out") spec.p_out = std::stod(v);
    else if (k == "dim") spec.feature_dim = to_size(k, v);
    else if (k == "separation") spec.separation = std::stod(v);
    else if (k == "noise") spec.noise = std::stod(v);
    else if (k == "seed") spec.seed = to_size(k, v);
    else throw ArgumentError("--synthetic: unknown key '" + k + "'");
  }
  return spec;
}

io::Dataset load_data(const DataOptions& d) {
  if (!d.data.empty() && !d.synthetic.empty()) throw ArgumentError("use either --data or --synthetic, not both");
  if (!d.data.empty()) return io::load_dataset(d.data);
  if (!d.synthetic.empty()) return io::generate_synthetic(parse_synthetic(d.synthetic));
  throw ArgumentError("a dataset is required: pass --data <dir> or --synthetic default");
}

TrainConfig build_config(const ConfigOptions& c) {
  TrainConfig cfg;
  if (!c.config_file.empty()) {
    const io::KvDocument doc = io::read_kv_file(c.config_file);
    if (!doc.sections.empty()) throw ConfigError(c.config_file + ": config files take top-level 'key: value' lines only");
    for (const auto& e : doc.top) {
      try {
        cfg.set(e.key, e.value);
      } catch (const ConfigError& err) {
        throw ConfigError(c.config_file + ":" + std::to_string(e.line) + ": " + err.what());
      }
    }
  }
  for (const auto& [k, v] : c.overrides) cfg.set(k, v);
  cfg.validate();
  return cfg;
}

void add_data_options(CLI::App* app, DataOptions& d) {
  app->add_option("--data", d.data, "Dataset directory or manifest file");
  app->add_option("--synthetic", d.synthetic, "Synthetic graph: 'default' or k=v list (classes, per_class, aux=150:150, p_in, p_out, dim, separation, noise, seed)");
}

void add_config_options(CLI::App* app, ConfigOptions& c) {
  app->add_option("--config", c.config_file, "Config file of 'key: value' lines");
  for (const auto& key : config_keys()) {
    app->add_option_function<std::string>("--" + key, [&c, key](const std::string& v) { c.overrides[key] = v; },
                                          "Override config '" + key + "'");
  }
}

fs::path prepare_out(const std::string& out) {
  if (out.empty()) throw ArgumentError("--out is required");
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create output directory '" + out + "': " + ec.message());
  return fs::path(out);
}

void write_file(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write '" + path.string() + "'");
  f << text;
  if (!f) throw IoError("write failed for '" + path.string() + "'");
}

std::string config_echo(const TrainConfig& cfg) {
  std::string s;
  for (const auto& [k, v] : cfg.entries()) s += k + ": " + v + "\n";
  return s;
}

std::string labels_tsv(const eval::Labels& labels) {
  std::string s;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= 0) s += std::to_string(i) + "\t" + std::to_string(labels[i]) + "\n";
  }
  return s;
}

int cmd_train(const DataOptions& d, const ConfigOptions& c, const std::string& out_dir, const std::string& format, bool verbose,
              std::ostream& out) {
  const io::EmbeddingFormat fmt = io::parse_embedding_format(format);
  const TrainConfig cfg = build_config(c);
  const io::Dataset data = load_data(d);
  const fs::path dir = prepare_out(out_dir);
  EpochCallback cb;
  if (verbose) cb = [&out](std::size_t e, double l) { out << "epoch " << e << " loss " << io::format_real(l) << "\n"; };
  const TrainResult result = train(data.graph, cfg, cb);

  std::string loss = "epoch,loss\n";
  for (std::size_t e = 0; e < result.report.losses.size(); ++e) loss += std::to_string(e + 1) + "," + io::format_real(result.report.losses[e]) + "\n";
  write_file(dir / "loss.csv", loss);
  const auto params = result.model.named_parameters();
  write_checkpoint(dir / "checkpoint.gtck", params);
  const fs::path emb = dir / (fmt == io::EmbeddingFormat::binary ? "embeddings.gtck" : "embeddings.csv");
  io::export_embeddings(result.embeddings, emb, fmt);
  if (!data.labels.empty()) write_file(dir / "labels.tsv", labels_tsv(data.labels));

  std::string manifest = "dataset: " + data.name + "\n" + config_echo(cfg);
  manifest += "\n[run]\nepochs_run: " + std::to_string(result.report.losses.size()) + "\nbest_epoch: " +
              std::to_string(result.report.best_epoch) + "\nbest_loss: " + io::format_real(result.report.best_loss) +
              "\nstop_reason: " + result.report.stop_reason + "\nparameters: " + std::to_string(result.model.parameter_count()) +
              "\nloss_csv: loss.csv\nembeddings: " + emb.filename().string() + "\n";
  write_file(dir / "run_manifest.txt", manifest);
  if (result.report.degenerate_nodes) {
    out << "warning: " << result.report.degenerate_nodes << " node(s) have no negatives and contribute zero loss\n";
  }
  out << "trained " << result.report.losses.size() << " epochs (best " << result.report.best_epoch << ", loss "
      << io::format_real(result.report.best_loss) << ", " << result.report.stop_reason << ") in " << result.report.seconds
      << " s; outputs in " << dir.string() << "\n";
  return kOk;
}

int cmd_eval(const std::string& emb_path, const std::string& labels_path, const std::string& per_class, std::size_t runs,
             std::uint64_t seed, std::size_t clusters, const std::string& out_dir, std::ostream& out) {
  if (emb_path.empty() || labels_path.empty()) throw ArgumentError("eval needs --embeddings and --labels");
  const Tensor z = io::import_embeddings(emb_path);
  const eval::Labels labels = io::read_labels_tsv(labels_path, z.rows());
  eval::EvalSpec spec;
  spec.train_per_class.clear();
  for (const auto& s : split_list(per_class, ',')) spec.train_per_class.push_back(to_size("--train-per-class", s));
  if (spec.train_per_class.empty()) throw ArgumentError("--train-per-class is empty");
  if (runs == 0) throw ArgumentError("--runs must be >= 1");
  spec.runs = runs;
  spec.seed = seed;
  spec.clusters = clusters;
  const fs::path dir = prepare_out(out_dir);
  const auto report = eval::evaluate_embeddings(z, labels, spec);
  write_file(dir / "metrics.json", report.to_json().dump(2) + "\n");
  for (const auto& [name, m] : report.metrics) out << name << ": " << m.mean() << " +- " << m.stddev() << "\n";
  return kOk;
}

int cmd_sweep(const DataOptions& d, const ConfigOptions& c, const std::optional<std::string>& depths,
              const std::string& methods, std::size_t runs, std::size_t per_class, const std::optional<std::string>& grid,
              std::size_t budget, const std::string& out_dir, std::ostream& out) {
  if (!depths && !grid) throw ArgumentError("sweep needs --depths and/or --grid");
  TrainConfig cfg = build_config(c);
  eval::SweepSpec spec;
  if (depths) {
    for (const auto& s : split_list(*depths, ',')) spec.depths.push_back(to_size("--depths", s));
    if (spec.depths.empty()) throw ArgumentError("--depths is empty");
    spec.methods = split_list(methods, ',');
    if (spec.methods.empty()) throw ArgumentError("--methods is empty");
    for (const auto& m : spec.methods) {
      if (m != "gtc" && m != "rgcn" && m != "gcn") throw ArgumentError("unknown method '" + m + "'");
    }
  }
  GridSpec gspec;
  if (grid) {
    gspec = parse_grid(*grid);
    if (gspec.size() == 0) throw ArgumentError("--grid is empty");
  }
  const io::Dataset data = load_data(d);
  const fs::path dir = prepare_out(out_dir);
  if (depths) {
    if (data.labels.empty()) throw ArgumentError("the depth sweep needs a labeled dataset");
    spec.runs = runs;
    spec.train_per_class = per_class;
    spec.seed = cfg.seed;
    spec.baseline.dim = cfg.dim;
    spec.baseline.lr = cfg.lr;
    spec.baseline.epochs = cfg.epochs;
    spec.baseline.patience = cfg.patience;
    spec.baseline.activation = cfg.activation;
    const auto rows = eval::oversmoothing_sweep(data.graph, data.labels, cfg, spec);
    write_file(dir / "sweep.csv", eval::sweep_csv(rows));
    out << eval::sweep_csv(rows);
  }
  if (grid) {
    GridOptions opts;
    opts.budget = budget;
    if (!data.labels.empty()) opts.labels = &data.labels;
    opts.split.train_per_class = per_class;
    opts.split.seed = cfg.seed;
    const GridResult r = grid_search(data.graph, cfg, gspec, opts);
    std::string csv;
    for (const auto& [k, _] : gspec.axes) csv += k + ",";
    csv += "ok," + r.objective + "\n";
    for (const auto& t : r.trials) {
      for (const auto& [_, v] : t.point) csv += v + ",";
      csv += std::string(t.ok ? "true," : "false,") + (t.ok ? io::format_real(t.objective) : std::string("nan")) + "\n";
    }
    write_file(dir / "grid.csv", csv);
    write_file(dir / "best_config.txt", config_echo(r.best));
    out << "best " << r.objective << " " << io::format_real(r.best_objective) << "\n";
  }
  return kOk;
}

int cmd_tokens(const DataOptions& d, const ConfigOptions& c, bool raw, const std::string& out_dir, std::ostream& out) {
  const TrainConfig cfg = build_config(c);
  const io::Dataset data = load_data(d);
  const fs::path dir = prepare_out(out_dir);
  GtcModel model(data.graph, cfg);
  const Tensor h = raw ? data.graph.target().features : model.projected_target();
  const auto set = tokens::build_tokens(model.operators(), h, cfg.max_hop);
  std::vector<NamedTensor> entries;
  for (std::size_t p = 0; p < set.tokens.size(); ++p) entries.push_back({set.metapaths[p], set.tokens[p]});
  write_checkpoint(dir / "tokens.gtck", entries);
  out << "wrote " << entries.size() << " token arrays of shape " << shape_str(set.tokens.front().shape()) << " to "
      << (dir / "tokens.gtck").string() << "\n";
  return kOk;
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"GNN-Transformer co-contrastive learning for heterogeneous graphs", "gtc"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  DataOptions data;
  ConfigOptions config;
  std::string out_dir;
  bool verbose = false;

  auto* train_cmd = app.add_subcommand("train", "Train GTC and export Z^hv embeddings");
  add_data_options(train_cmd, data);
  add_config_options(train_cmd, config);
  std::string format = "binary";
  train_cmd->add_option("--format", format, "Embedding format: binary or csv")->capture_default_str();
  train_cmd->add_option("--out", out_dir, "Output directory")->required();
  train_cmd->add_flag("-v,--verbose", verbose, "Print the loss of every epoch");

  auto* eval_cmd = app.add_subcommand("eval", "Linear-probe and clustering metrics for exported embeddings");
  std::string emb_path, labels_path, per_class = "20,40,60";
  std::size_t runs = 10, clusters = 0;
  std::uint64_t seed = 0;
  eval_cmd->add_option("--embeddings", emb_path, "Embedding file (binary or csv)")->required();
  eval_cmd->add_option("--labels", labels_path, "Label TSV (id, class)")->required();
  eval_cmd->add_option("--train-per-class", per_class, "Comma-separated labeled nodes per class")->capture_default_str();
  eval_cmd->add_option("--runs", runs, "Random splits per setting")->capture_default_str();
  eval_cmd->add_option("--seed", seed, "Base seed")->capture_default_str();
  eval_cmd->add_option("--clusters", clusters, "k for k-means (0 = number of classes)")->capture_default_str();
  eval_cmd->add_option("--out", out_dir, "Output directory")->required();

  auto* sweep_cmd = app.add_subcommand("sweep", "Depth sweep (GTC vs RGCN/GCN) and/or hyperparameter grid search");
  add_data_options(sweep_cmd, data);
  add_config_options(sweep_cmd, config);
  std::optional<std::string> depths, grid;
  std::string methods = "gtc,rgcn,gcn";
  std::size_t sweep_runs = 1, sweep_per_class = 20, budget = 0;
  sweep_cmd->add_option("--depths", depths, "Comma-separated depths (K for GTC, layers for baselines)");
  sweep_cmd->add_option("--methods", methods, "Comma-separated subset of gtc,rgcn,gcn")->capture_default_str();
  sweep_cmd->add_option("--runs", sweep_runs, "Seeds averaged per cell")->capture_default_str();
  sweep_cmd->add_option("--train-per-class", sweep_per_class, "Labeled nodes per class")->capture_default_str();
  sweep_cmd->add_option("--grid", grid, "Grid such as 'lr=0.001,0.005;tau=0.5,0.6'");
  sweep_cmd->add_option("--budget", budget, "Evaluate at most this many grid points (0 = all)")->capture_default_str();
  sweep_cmd->add_option("--out", out_dir, "Output directory")->required();

  auto* tokens_cmd = app.add_subcommand("tokens", "Dump Hop2Token sequences for inspection");
  add_data_options(tokens_cmd, data);
  add_config_options(tokens_cmd, config);
  bool raw = false;
  tokens_cmd->add_flag("--raw", raw, "Tokenize raw target features instead of the projected ones");
  tokens_cmd->add_option("--out", out_dir, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  }

  try {
    if (*train_cmd) return cmd_train(data, config, out_dir, format, verbose, out);
    if (*eval_cmd) return cmd_eval(emb_path, labels_path, per_class, runs, seed, clusters, out_dir, out);
    if (*sweep_cmd) return cmd_sweep(data, config, depths, methods, sweep_runs, sweep_per_class, grid, budget, out_dir, out);
    if (*tokens_cmd) return cmd_tokens(data, config, raw, out_dir, out);
  } catch (const NumericError& e) {
    err << "numeric error: " << e.what() << "\n";
    return kNumericError;
  } catch (const ArgumentError& e) {
    err << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kUsage;
  } catch (const Error& e) {
    err << "data error: " << e.what() << "\n";
    return kDataError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kDataError;
  }
  return kUsage;
}

}  // namespace gtc::cli
