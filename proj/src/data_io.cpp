#include "gtc/data_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "gtc/checkpoint.hpp"
#include "gtc/error.hpp"
#include "gtc/layers.hpp"

namespace fs = std::filesystem;

namespace gtc::io {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

template <typename Fn>
void for_each_line(const fs::path& path, Fn&& fn) {
  std::ifstream in(path);
  if (!in) throw LoadError(path.string(), 0, "cannot open file");
  std::string line;
  std::size_t no = 0;
  while (std::getline(in, line)) {
    ++no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    fn(t, no);
  }
}

bool parse_size(std::string_view s, std::size_t& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

bool parse_double(std::string_view s, double& out) {
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size() && std::isfinite(out);
}

std::vector<std::string> fields(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream ss(line);
  std::string tok;
  while (ss >> tok) out.push_back(tok);
  return out;
}

}  // namespace

const KvEntry* KvDocument::find(const std::string& key) const {
  for (const auto& e : top) {
    if (e.key == key) return &e;
  }
  return nullptr;
}

KvDocument parse_kv(const std::string& text, const std::string& source) {
  KvDocument doc;
  doc.source = source;
  std::istringstream in(text);
  std::string raw;
  std::size_t no = 0;
  std::vector<KvEntry>* current = &doc.top;
  while (std::getline(in, raw)) {
    ++no;
    const std::string line = trim(raw);
    if (line.empty() || line.front() == '#') continue;
    if (line.front() == '[') {
      if (line.back() != ']' || line.size() < 3) throw LoadError(source, no, "malformed section header '" + line + "'");
      const std::string name = trim(std::string_view(line).substr(1, line.size() - 2));
      if (doc.sections.count(name)) throw LoadError(source, no, "duplicate section [" + name + "]");
      current = &doc.sections[name];
      continue;
    }
    const auto colon = line.find(':');
    if (colon == std::string::npos) throw LoadError(source, no, "expected 'key: value', got '" + line + "'");
    KvEntry e{trim(std::string_view(line).substr(0, colon)), trim(std::string_view(line).substr(colon + 1)), no};
    if (e.key.empty()) throw LoadError(source, no, "empty key");
    for (const auto& prev : *current) {
      if (prev.key == e.key) throw LoadError(source, no, "duplicate key '" + e.key + "'");
    }
    current->push_back(std::move(e));
  }
  return doc;
}

KvDocument read_kv_file(const fs::path& path) {
  std::ifstream probe(path);
  if (!probe) throw LoadError(path.string(), 0, "cannot open file");
  return parse_kv(read_text(path), path.string());
}

std::map<std::string, std::string> parse_attributes(const KvEntry& entry, const std::string& source) {
  std::map<std::string, std::string> out;
  for (const auto& tok : fields(entry.value)) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos || eq == 0) throw LoadError(source, entry.line, "expected name=value, got '" + tok + "'");
    out[tok.substr(0, eq)] = tok.substr(eq + 1);
  }
  return out;
}

Tensor read_features_csv(const fs::path& path, std::size_t expected_rows) {
  std::vector<double> values;
  std::size_t cols = 0, rows = 0;
  for_each_line(path, [&](const std::string& line, std::size_t no) {
    std::size_t c = 0;
    std::size_t start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const std::string cell = trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      double v = 0.0;
      if (!parse_double(cell, v)) throw LoadError(path.string(), no, "unparseable feature value '" + cell + "'");
      values.push_back(v);
      ++c;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (rows == 0) cols = c;
    if (c != cols) throw LoadError(path.string(), no, "row has " + std::to_string(c) + " values, expected " + std::to_string(cols));
    ++rows;
  });
  if (rows != expected_rows) {
    throw LoadError(path.string(), 0, "has " + std::to_string(rows) + " rows but the node type declares " + std::to_string(expected_rows));
  }
  return Tensor({rows, cols}, std::move(values));
}

std::vector<std::pair<std::size_t, std::size_t>> read_edges_tsv(const fs::path& path, std::size_t src_count, std::size_t dst_count) {
  std::set<std::pair<std::size_t, std::size_t>> seen;
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for_each_line(path, [&](const std::string& line, std::size_t no) {
    const auto f = fields(line);
    std::size_t a = 0, b = 0;
    if (f.size() != 2 || !parse_size(f[0], a) || !parse_size(f[1], b)) {
      throw LoadError(path.string(), no, "expected two non-negative integer ids, got '" + line + "'");
    }
    if (a >= src_count) throw LoadError(path.string(), no, "source id " + std::to_string(a) + " >= type count " + std::to_string(src_count));
    if (b >= dst_count) throw LoadError(path.string(), no, "target id " + std::to_string(b) + " >= type count " + std::to_string(dst_count));
    if (seen.insert({a, b}).second) out.emplace_back(a, b);
  });
  return out;
}

eval::Labels read_labels_tsv(const fs::path& path, std::size_t count) {
  eval::Labels labels(count, -1);
  for_each_line(path, [&](const std::string& line, std::size_t no) {
    const auto f = fields(line);
    std::size_t id = 0, cls = 0;
    if (f.size() != 2 || !parse_size(f[0], id) || !parse_size(f[1], cls)) {
      throw LoadError(path.string(), no, "expected 'id class' with non-negative integers, got '" + line + "'");
    }
    if (id >= count) throw LoadError(path.string(), no, "node id " + std::to_string(id) + " >= type count " + std::to_string(count));
    if (labels[id] >= 0 && labels[id] != static_cast<int>(cls)) throw LoadError(path.string(), no, "conflicting label for node " + std::to_string(id));
    labels[id] = static_cast<int>(cls);
  });
  return labels;
}

Dataset load_dataset(const fs::path& path) {
  fs::path manifest = path;
  if (fs::is_directory(path)) manifest = path / "manifest.txt";
  if (!fs::exists(manifest)) throw LoadError(manifest.string(), 0, "dataset manifest not found");
  const KvDocument doc = read_kv_file(manifest);
  const std::string src = manifest.string();
  const fs::path base = manifest.parent_path();

  const KvEntry* target = doc.find("target");
  if (!target) throw LoadError(src, 0, "missing 'target:' entry");
  const KvEntry* name = doc.find("name");
  for (const char* section : {"node_types", "relations", "metapaths"}) {
    if (!doc.sections.count(section)) throw LoadError(src, 0, std::string("missing [") + section + "] section");
  }

  std::vector<NodeType> types;
  fs::path label_file;
  std::string label_type;
  std::size_t label_line = 0;
  for (const auto& e : doc.sections.at("node_types")) {
    const auto attrs = parse_attributes(e, src);
    for (const auto& [k, _] : attrs) {
      if (k != "count" && k != "features" && k != "labels") throw LoadError(src, e.line, "unknown node type attribute '" + k + "'");
    }
    std::size_t count = 0;
    if (!attrs.count("count") || !parse_size(attrs.at("count"), count)) throw LoadError(src, e.line, "node type '" + e.key + "' needs count=<n>");
    Tensor features = attrs.count("features") ? read_features_csv(base / attrs.at("features"), count) : Tensor({count, 1}, 1.0);
    if (attrs.count("labels")) {
      if (!label_file.empty()) throw LoadError(src, e.line, "only one node type may carry labels");
      label_file = base / attrs.at("labels");
      label_type = e.key;
      label_line = e.line;
    }
    types.push_back({e.key, count, std::move(features)});
  }
  auto count_of = [&](const std::string& type, std::size_t line) -> std::size_t {
    for (const auto& t : types) {
      if (t.name == type) return t.count;
    }
    throw LoadError(src, line, "unknown node type '" + type + "'");
  };

  std::vector<Relation> relations;
  for (const auto& e : doc.sections.at("relations")) {
    const auto attrs = parse_attributes(e, src);
    if (attrs.count("reverse")) {
      const std::string& of = attrs.at("reverse");
      const Relation* fwd = nullptr;
      for (const auto& r : relations) {
        if (r.name == of) fwd = &r;
      }
      if (!fwd) throw LoadError(src, e.line, "reverse of undeclared relation '" + of + "'");
      relations.push_back({e.key, fwd->dst, fwd->src, fwd->adjacency.transpose()});
      continue;
    }
    if (!attrs.count("src") || !attrs.count("dst") || !attrs.count("edges")) {
      throw LoadError(src, e.line, "relation '" + e.key + "' needs src=, dst= and edges= (or reverse=)");
    }
    const std::size_t ns = count_of(attrs.at("src"), e.line), nd = count_of(attrs.at("dst"), e.line);
    std::vector<Triplet> trip;
    for (const auto& [a, b] : read_edges_tsv(base / attrs.at("edges"), ns, nd)) trip.push_back({a, b, 1.0});
    relations.push_back({e.key, attrs.at("src"), attrs.at("dst"), SparseMatrix::from_triplets(ns, nd, std::move(trip), Duplicates::keep_one)});
  }

  std::vector<Metapath> metapaths;
  for (const auto& e : doc.sections.at("metapaths")) {
    Metapath mp{e.key, fields(e.value)};
    if (mp.steps.empty()) throw LoadError(src, e.line, "metapath '" + e.key + "' has no steps");
    metapaths.push_back(std::move(mp));
  }

  Dataset out{name ? name->value : manifest.parent_path().filename().string(),
              [&]() {
                try {
                  return HeteroGraph(std::move(types), std::move(relations), std::move(metapaths), target->value);
                } catch (const LoadError&) {
                  throw;
                } catch (const Error& err) {
                  throw LoadError(src, 0, err.what());
                }
              }(),
              {}};
  if (!label_file.empty()) {
    if (label_type != out.graph.target_type()) throw LoadError(src, label_line, "labels must belong to the target type");
    out.labels = read_labels_tsv(label_file, out.graph.target_count());
  }
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string csv_rows(const Tensor& z) {
  std::string out;
  for (std::size_t r = 0; r < z.rows(); ++r) {
    for (std::size_t c = 0; c < z.cols(); ++c) {
      if (c) out += ',';
      out += format_real(z.at(r, c));
    }
    out += '\n';
  }
  return out;
}

}  // namespace

void save_dataset(const Dataset& data, const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
  const HeteroGraph& g = data.graph;
  std::string m = "name: " + data.name + "\ntarget: " + g.target_type() + "\n\n[node_types]\n";
  for (const auto& t : g.node_types()) {
    m += t.name + ": count=" + std::to_string(t.count) + " features=" + t.name + ".features.csv";
    if (!data.labels.empty() && t.name == g.target_type()) m += " labels=labels.tsv";
    m += "\n";
    write_text(dir / (t.name + ".features.csv"), csv_rows(t.features));
  }
  m += "\n[relations]\n";
  for (const auto& r : g.relations()) {
    m += r.name + ": src=" + r.src + " dst=" + r.dst + " edges=" + r.name + ".edges.tsv\n";
    std::string edges;
    for (std::size_t i = 0; i < r.adjacency.rows(); ++i) {
      for (auto j : r.adjacency.row_cols(i)) edges += std::to_string(i) + "\t" + std::to_string(j) + "\n";
    }
    write_text(dir / (r.name + ".edges.tsv"), edges);
  }
  m += "\n[metapaths]\n";
  for (const auto& mp : g.metapaths()) {
    m += mp.name + ":";
    for (const auto& s : mp.steps) m += " " + s;
    m += "\n";
  }
  write_text(dir / "manifest.txt", m);
  if (!data.labels.empty()) {
    std::string lab;
    for (std::size_t i = 0; i < data.labels.size(); ++i) {
      if (data.labels[i] >= 0) lab += std::to_string(i) + "\t" + std::to_string(data.labels[i]) + "\n";
    }
    write_text(dir / "labels.tsv", lab);
  }
}

Dataset generate_synthetic(const SyntheticSpec& spec) {
  if (spec.classes < 2) throw ArgumentError("generate_synthetic: at least two classes are required");
  if (spec.per_class == 0) throw ArgumentError("generate_synthetic: per_class must be positive");
  if (spec.aux_sizes.empty()) throw ArgumentError("generate_synthetic: at least one auxiliary type is required");
  for (auto s : spec.aux_sizes) {
    if (s == 0) throw ArgumentError("generate_synthetic: auxiliary types must be non-empty");
  }
  if (!(spec.p_in >= 0.0 && spec.p_in <= 1.0 && spec.p_out >= 0.0 && spec.p_out <= 1.0)) {
    throw ArgumentError("generate_synthetic: probabilities must lie in [0, 1]");
  }
  if (spec.feature_dim < spec.classes) {
    throw ArgumentError("generate_synthetic: feature_dim " + std::to_string(spec.feature_dim) + " < classes " + std::to_string(spec.classes));
  }
  if (!(spec.separation >= 0.0) || !(spec.noise >= 0.0)) throw ArgumentError("generate_synthetic: separation and noise must be >= 0");

  Rng rng(spec.seed);
  const std::size_t n = spec.classes * spec.per_class;
  const std::size_t dim = spec.feature_dim;
  const double offset = spec.separation / std::sqrt(2.0);
  eval::Labels labels(n);
  Tensor xt({n, dim});
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = static_cast<int>(i / spec.per_class);
    for (std::size_t j = 0; j < dim; ++j) xt.at(i, j) = spec.noise * standard_normal(rng);
    xt.at(i, static_cast<std::size_t>(labels[i])) += offset;
  }
  std::vector<NodeType> types{{"T", n, std::move(xt)}};
  std::vector<Relation> rels;
  std::vector<Metapath> paths;
  for (std::size_t a = 0; a < spec.aux_sizes.size(); ++a) {
    const std::string name = "A" + std::to_string(a);
    const std::size_t m = spec.aux_sizes[a];
    Tensor xa({m, dim});
    for (auto& v : xa.values()) v = spec.noise * standard_normal(rng);
    std::vector<Triplet> trip;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t k = 0; k < m; ++k) {
        const bool same = static_cast<std::size_t>(labels[i]) == k % spec.classes;
        if (uniform01(rng) < (same ? spec.p_in : spec.p_out)) trip.push_back({i, k, 1.0});
      }
    }
    SparseMatrix adj = SparseMatrix::from_triplets(n, m, std::move(trip));
    SparseMatrix rev = adj.transpose();
    types.push_back({name, m, std::move(xa)});
    rels.push_back({"T-" + name, "T", name, std::move(adj)});
    rels.push_back({name + "-T", name, "T", std::move(rev)});
    paths.push_back({"T-" + name + "-T", {"T-" + name, name + "-T"}});
  }
  return Dataset{"synthetic", HeteroGraph(std::move(types), std::move(rels), std::move(paths), "T"), std::move(labels)};
}

EmbeddingFormat parse_embedding_format(const std::string& s) {
  if (s == "binary") return EmbeddingFormat::binary;
  if (s == "csv") return EmbeddingFormat::csv;
  throw ArgumentError("unknown embedding format '" + s + "' (expected binary or csv)");
}

std::string format_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  std::string s(buf, res.ptr);
  if (s.find_first_of(".eEn") == std::string::npos) s += ".0";
  return s;
}

void export_embeddings(const Tensor& z, const fs::path& path, EmbeddingFormat format) {
  if (z.rank() != 2) throw ShapeError("export_embeddings: expected a matrix, got " + shape_str(z.shape()));
  if (!z.all_finite()) throw NumericError("export_embeddings: embeddings contain non-finite values");
  if (format == EmbeddingFormat::binary) {
    const NamedTensor entry{"Z", z};
    write_checkpoint(path, std::span<const NamedTensor>(&entry, 1));
  } else {
    write_text(path, csv_rows(z));
  }
}

Tensor import_embeddings(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path.string() + "'");
  char magic[4] = {};
  in.read(magic, 4);
  if (in.gcount() == 4 && std::string(magic, 4) == "GTCK") {
    for (auto& e : read_checkpoint(path)) {
      if (e.name == "Z") return std::move(e.value);
    }
    throw LoadError(path.string(), 0, "checkpoint has no entry named 'Z'");
  }
  std::vector<double> values;
  std::size_t rows = 0, cols = 0;
  for_each_line(path, [&](const std::string& line, std::size_t no) {
    std::size_t c = 0, start = 0;
    while (true) {
      const auto comma = line.find(',', start);
      const std::string cell = trim(std::string_view(line).substr(start, comma == std::string::npos ? std::string::npos : comma - start));
      double v = 0.0;
      if (!parse_double(cell, v)) throw LoadError(path.string(), no, "unparseable value '" + cell + "'");
      values.push_back(v);
      ++c;
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (rows == 0) cols = c;
    if (c != cols) throw LoadError(path.string(), no, "ragged row");
    ++rows;
  });
  return Tensor({rows, cols}, std::move(values));
}

}  // namespace gtc::io
