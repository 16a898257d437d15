#include "gtc/config.hpp"

#include <charconv>
#include <cmath>
#include <functional>

#include "gtc/error.hpp"

namespace gtc {

TokenMode parse_token_mode(const std::string& s) {
  if (s == "recorded") return TokenMode::recorded;
  if (s == "frozen") return TokenMode::frozen;
  throw ConfigError("unknown token mode '" + s + "' (expected recorded or frozen)");
}

const char* to_string(TokenMode m) { return m == TokenMode::recorded ? "recorded" : "frozen"; }

namespace {

template <typename T>
T parse_int(const std::string& key, const std::string& v) {
  T out{};
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) throw ConfigError("config '" + key + "': expected an integer, got '" + v + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || !std::isfinite(out)) throw ConfigError("config '" + key + "': expected a number, got '" + v + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("config '" + key + "': expected true or false, got '" + v + "'");
}

std::string fmt_real(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

struct Field {
  const char* key;
  std::function<void(TrainConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const TrainConfig&)> get;
};

#define GTC_SIZE(name, member)                                                                                     \
  Field {                                                                                                          \
    name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_int<std::size_t>(k, v); }, \
        [](const TrainConfig& c) { return std::to_string(c.member); }                                              \
  }
#define GTC_REAL(name, member)                                                                                 \
  Field {                                                                                                      \
    name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_real(k, v); },     \
        [](const TrainConfig& c) { return fmt_real(c.member); }                                                \
  }
#define GTC_BOOL(name, member)                                                                                 \
  Field {                                                                                                      \
    name, [](TrainConfig& c, const std::string& k, const std::string& v) { c.member = parse_bool(k, v); },     \
        [](const TrainConfig& c) { return std::string(c.member ? "true" : "false"); }                          \
  }

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      GTC_SIZE("L_g", schema_layers),
      GTC_SIZE("L_tm", encoder_blocks),
      GTC_SIZE("heads", heads),
      GTC_SIZE("K", max_hop),
      GTC_SIZE("dim", dim),
      GTC_SIZE("model_dim", model_dim),
      GTC_SIZE("attn_dim", attn_dim),
      GTC_REAL("lr", lr),
      GTC_REAL("weight_decay", weight_decay),
      GTC_REAL("tau", tau),
      GTC_REAL("lambda", lambda),
      Field{"theta_pos", [](TrainConfig& c, const std::string& k, const std::string& v) { c.theta_pos = parse_int<int>(k, v); },
            [](const TrainConfig& c) { return std::to_string(c.theta_pos); }},
      Field{"count_mode", [](TrainConfig& c, const std::string&, const std::string& v) { c.count_mode = parse_count_mode(v); },
            [](const TrainConfig& c) { return std::string(to_string(c.count_mode)); }},
      GTC_SIZE("epochs", epochs),
      GTC_SIZE("patience", patience),
      Field{"seed", [](TrainConfig& c, const std::string& k, const std::string& v) { c.seed = parse_int<std::uint64_t>(k, v); },
            [](const TrainConfig& c) { return std::to_string(c.seed); }},
      Field{"tokens", [](TrainConfig& c, const std::string&, const std::string& v) { c.tokens = parse_token_mode(v); },
            [](const TrainConfig& c) { return std::string(to_string(c.tokens)); }},
      GTC_SIZE("batch_size", batch_size),
      GTC_REAL("dropout", dropout),
      Field{"activation", [](TrainConfig& c, const std::string&, const std::string& v) { c.activation = ad::parse_activation(v); },
            [](const TrainConfig& c) { return std::string(ad::to_string(c.activation)); }},
      Field{"semantic_outer",
            [](TrainConfig& c, const std::string&, const std::string& v) { c.semantic_outer = ad::parse_activation(v); },
            [](const TrainConfig& c) { return std::string(ad::to_string(c.semantic_outer)); }},
      GTC_BOOL("shared_encoder", shared_encoder),
      GTC_BOOL("mean_pooled", mean_pooled),
      GTC_BOOL("head", head),
      GTC_SIZE("head_dim", head_dim),
      GTC_BOOL("extended_ranges", extended_ranges),
  };
  return table;
}

#undef GTC_SIZE
#undef GTC_REAL
#undef GTC_BOOL

const Field& field(const std::string& key) {
  for (const auto& f : fields()) {
    if (key == f.key) return f;
  }
  throw ConfigError("unknown config key '" + key + "'");
}

void check_range(const char* key, std::size_t v, std::size_t lo, std::size_t hi) {
  if (v < lo || v > hi) {
    throw ConfigError(std::string("config '") + key + "' = " + std::to_string(v) + " is outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
  }
}

}  // namespace

void TrainConfig::set(const std::string& key, const std::string& value) {
  try {
    field(key).set(*this, key, value);
  } catch (const ArgumentError& e) {
    throw ConfigError("config '" + key + "': " + e.what());
  }
}

std::string TrainConfig::get(const std::string& key) const { return field(key).get(*this); }

std::vector<std::pair<std::string, std::string>> TrainConfig::entries() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& f : fields()) out.emplace_back(f.key, f.get(*this));
  return out;
}

std::vector<std::string> config_keys() {
  std::vector<std::string> out;
  for (const auto& f : fields()) out.emplace_back(f.key);
  return out;
}

void TrainConfig::validate() const {
  if (extended_ranges) {
    check_range("L_g", schema_layers, 1, 64);
    check_range("L_tm", encoder_blocks, 1, 64);
    check_range("heads", heads, 1, 64);
    check_range("K", max_hop, 0, 64);
  } else {
    check_range("L_g", schema_layers, 1, 6);
    check_range("L_tm", encoder_blocks, 1, 9);
    check_range("heads", heads, 1, 9);
    check_range("K", max_hop, 1, 9);
  }
  if (dim == 0 || model_dim == 0) throw ConfigError("config 'dim' and 'model_dim' must be positive");
  if (model_dim % heads != 0) {
    throw ConfigError("config 'model_dim' = " + std::to_string(model_dim) + " is not divisible by heads = " + std::to_string(heads));
  }
  if (!(lr >= 0.0)) throw ConfigError("config 'lr' must be >= 0");
  if (!(weight_decay >= 0.0)) throw ConfigError("config 'weight_decay' must be >= 0");
  if (!(tau > 0.0 && tau <= 1.0)) throw ConfigError("config 'tau' must lie in (0, 1], got " + fmt_real(tau));
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("config 'lambda' must lie in [0, 1], got " + fmt_real(lambda));
  if (theta_pos < 1) throw ConfigError("config 'theta_pos' must be >= 1");
  if (epochs == 0) throw ConfigError("config 'epochs' must be >= 1");
  if (patience == 0) throw ConfigError("config 'patience' must be >= 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ConfigError("config 'dropout' must lie in [0, 1)");
  if (head && head_dim == 0) throw ConfigError("config 'head_dim' must be positive");
  if (!head && dim != model_dim) {
    throw ConfigError("config 'head' = false requires dim == model_dim (got " + std::to_string(dim) + " and " +
                      std::to_string(model_dim) + ")");
  }
}

}  // namespace gtc
