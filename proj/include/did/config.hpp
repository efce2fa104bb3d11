#pragma once

// Flat sectioned text config: `[section]`, `key = value`, `#` comments.
// TrainConfig round-trips through text so checkpoints and run manifests can
// embed an exact snapshot.

#include <did/data.hpp>
#include <did/models.hpp>

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace did {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace detail

// Order-preserving (section, key, value) triples plus keyed lookup.
struct ConfigText {
  struct Entry {
    std::string section, key, value;
  };
  std::vector<Entry> entries;

  const std::string* find(const std::string& section, const std::string& key) const {
    for (const auto& e : entries)
      if (e.section == section && e.key == key) return &e.value;
    return nullptr;
  }
  std::vector<const Entry*> section_entries(const std::string& section) const {
    std::vector<const Entry*> out;
    for (const auto& e : entries)
      if (e.section == section) out.push_back(&e);
    return out;
  }
};

inline ConfigText parse_config_text(const std::string& text) {
  ConfigText cfg;
  std::istringstream in(text);
  std::string line, section;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("config line " + std::to_string(lineno) + ": unterminated section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      if (section.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty section name");
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    const auto key = detail::trim(line.substr(0, eq));
    const auto value = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw ConfigError("config line " + std::to_string(lineno) + ": empty key");
    if (cfg.find(section, key))
      throw ConfigError("config line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    cfg.entries.push_back({section, key, value});
  }
  return cfg;
}

inline ConfigText load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open: " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_config_text(text);
}

namespace detail {

inline double parse_double(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("config: " + what + ": not a number: '" + s + "'");
  }
}

inline long long parse_int(const std::string& s, const std::string& what) {
  try {
    std::size_t pos = 0;
    const long long v = std::stoll(s, &pos);
    if (pos != s.size()) throw std::invalid_argument("");
    return v;
  } catch (...) {
    throw ConfigError("config: " + what + ": not an integer: '" + s + "'");
  }
}

inline bool parse_bool(const std::string& s, const std::string& what) {
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  throw ConfigError("config: " + what + ": expected true/false: '" + s + "'");
}

inline std::vector<std::size_t> parse_size_list(const std::string& s, const std::string& what) {
  std::vector<std::size_t> out;
  std::istringstream in(s);
  std::string tok;
  while (std::getline(in, tok, ',')) {
    tok = trim(tok);
    const long long v = parse_int(tok, what);
    if (v < 1) throw ConfigError("config: " + what + ": values must be >= 1");
    out.push_back(static_cast<std::size_t>(v));
  }
  // an empty value is a valid hidden-layer list: the network is a single layer
  return out;
}

inline std::string join_sizes(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(v[i]);
  }
  return out;
}

inline std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

struct TrainConfig {
  ModelSizes sizes;  // [model]: n, diff_dim, hidden widths, pixels

  // [train]
  std::size_t steps = 20000;
  std::size_t batch = 128;
  std::size_t n_critic = 5;
  std::size_t k_compare = 2;
  double lambda = 10.0;
  double lr_g = 1e-4;
  double lr_d = 1e-4;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  double rmsprop_rho = 0.9;
  double delta_min = 0.3;
  double delta_max = 0.8;
  double w_h = 1.0;
  double w_enc = 1.0;
  bool normalize_diff = true;
  std::size_t eval_every = 500;
  std::uint64_t seed = 1;

  // [eval]
  int bins = 20;

  void validate() const {
    if (sizes.latent_dim < 2) throw ConfigError("config: n must be >= 2");
    if (k_compare > sizes.latent_dim) throw ConfigError("config: k_compare must be <= n");
    if (batch < 2) throw ConfigError("config: batch must be >= 2");
    if (lr_g <= 0.0 || lr_d <= 0.0) throw ConfigError("config: learning rates must be positive");
    if (n_critic < 1) throw ConfigError("config: n_critic must be >= 1");
    if (eval_every < 1) throw ConfigError("config: eval_every must be >= 1");
    if (delta_min <= 0.0 || delta_max < delta_min)
      throw ConfigError("config: require 0 < delta_min <= delta_max");
    if (delta_max > 2.0) throw ConfigError("config: delta_max must be <= 2");
    if (bins < 2) throw ConfigError("config: bins must be >= 2");
    if (lambda < 0.0) throw ConfigError("config: lambda must be >= 0");
  }

  static TrainConfig from_text(const ConfigText& cfg) {
    TrainConfig c;
    auto get = [&](const char* sec, const char* key, auto setter) {
      if (const auto* v = cfg.find(sec, key)) setter(*v);
    };
    using detail::parse_bool;
    using detail::parse_double;
    using detail::parse_int;
    using detail::parse_size_list;

    get("model", "n", [&](const std::string& v) { c.sizes.latent_dim = static_cast<std::size_t>(parse_int(v, "model.n")); });
    get("model", "diff_dim", [&](const std::string& v) { c.sizes.diff_dim = static_cast<std::size_t>(parse_int(v, "model.diff_dim")); });
    get("model", "pixels", [&](const std::string& v) { c.sizes.pixels = static_cast<std::size_t>(parse_int(v, "model.pixels")); });
    get("model", "g_hidden", [&](const std::string& v) { c.sizes.g_hidden = parse_size_list(v, "model.g_hidden"); });
    get("model", "d_hidden", [&](const std::string& v) { c.sizes.d_hidden = parse_size_list(v, "model.d_hidden"); });
    get("model", "e_hidden", [&](const std::string& v) { c.sizes.e_hidden = parse_size_list(v, "model.e_hidden"); });
    get("model", "h_hidden", [&](const std::string& v) { c.sizes.h_hidden = parse_size_list(v, "model.h_hidden"); });

    get("train", "steps", [&](const std::string& v) { c.steps = static_cast<std::size_t>(parse_int(v, "train.steps")); });
    get("train", "batch", [&](const std::string& v) { c.batch = static_cast<std::size_t>(parse_int(v, "train.batch")); });
    get("train", "n_critic", [&](const std::string& v) { c.n_critic = static_cast<std::size_t>(parse_int(v, "train.n_critic")); });
    get("train", "k_compare", [&](const std::string& v) { c.k_compare = static_cast<std::size_t>(parse_int(v, "train.k_compare")); });
    get("train", "lambda", [&](const std::string& v) { c.lambda = parse_double(v, "train.lambda"); });
    get("train", "lr_g", [&](const std::string& v) { c.lr_g = parse_double(v, "train.lr_g"); });
    get("train", "lr_d", [&](const std::string& v) { c.lr_d = parse_double(v, "train.lr_d"); });
    get("train", "adam_beta1", [&](const std::string& v) { c.adam_beta1 = parse_double(v, "train.adam_beta1"); });
    get("train", "adam_beta2", [&](const std::string& v) { c.adam_beta2 = parse_double(v, "train.adam_beta2"); });
    get("train", "rmsprop_rho", [&](const std::string& v) { c.rmsprop_rho = parse_double(v, "train.rmsprop_rho"); });
    get("train", "delta_min", [&](const std::string& v) { c.delta_min = parse_double(v, "train.delta_min"); });
    get("train", "delta_max", [&](const std::string& v) { c.delta_max = parse_double(v, "train.delta_max"); });
    get("train", "w_h", [&](const std::string& v) { c.w_h = parse_double(v, "train.w_h"); });
    get("train", "w_enc", [&](const std::string& v) { c.w_enc = parse_double(v, "train.w_enc"); });
    get("train", "normalize_diff", [&](const std::string& v) { c.normalize_diff = parse_bool(v, "train.normalize_diff"); });
    get("train", "eval_every", [&](const std::string& v) { c.eval_every = static_cast<std::size_t>(parse_int(v, "train.eval_every")); });
    get("train", "seed", [&](const std::string& v) { c.seed = static_cast<std::uint64_t>(parse_int(v, "train.seed")); });

    get("eval", "bins", [&](const std::string& v) { c.bins = static_cast<int>(parse_int(v, "eval.bins")); });

    // reject typos: every key must be one we understand
    static const std::map<std::string, std::vector<std::string>> known = {
        {"model", {"n", "diff_dim", "pixels", "g_hidden", "d_hidden", "e_hidden", "h_hidden"}},
        {"train", {"steps", "batch", "n_critic", "k_compare", "lambda", "lr_g", "lr_d",
                   "adam_beta1", "adam_beta2", "rmsprop_rho", "delta_min", "delta_max", "w_h",
                   "w_enc", "normalize_diff", "eval_every", "seed"}},
        {"eval", {"bins"}}};
    for (const auto& e : cfg.entries) {
      const auto it = known.find(e.section);
      if (it == known.end()) throw ConfigError("config: unknown section [" + e.section + "]");
      bool ok = false;
      for (const auto& k : it->second) ok = ok || k == e.key;
      if (!ok) throw ConfigError("config: unknown key '" + e.key + "' in [" + e.section + "]");
    }
    c.validate();
    return c;
  }

  std::string to_text() const {
    using detail::fmt_double;
    using detail::join_sizes;
    std::ostringstream os;
    os << "[model]\n"
       << "n = " << sizes.latent_dim << "\n"
       << "diff_dim = " << sizes.diff_dim << "\n"
       << "pixels = " << sizes.pixels << "\n"
       << "g_hidden = " << join_sizes(sizes.g_hidden) << "\n"
       << "d_hidden = " << join_sizes(sizes.d_hidden) << "\n"
       << "e_hidden = " << join_sizes(sizes.e_hidden) << "\n"
       << "h_hidden = " << join_sizes(sizes.h_hidden) << "\n\n"
       << "[train]\n"
       << "steps = " << steps << "\n"
       << "batch = " << batch << "\n"
       << "n_critic = " << n_critic << "\n"
       << "k_compare = " << k_compare << "\n"
       << "lambda = " << fmt_double(lambda) << "\n"
       << "lr_g = " << fmt_double(lr_g) << "\n"
       << "lr_d = " << fmt_double(lr_d) << "\n"
       << "adam_beta1 = " << fmt_double(adam_beta1) << "\n"
       << "adam_beta2 = " << fmt_double(adam_beta2) << "\n"
       << "rmsprop_rho = " << fmt_double(rmsprop_rho) << "\n"
       << "delta_min = " << fmt_double(delta_min) << "\n"
       << "delta_max = " << fmt_double(delta_max) << "\n"
       << "w_h = " << fmt_double(w_h) << "\n"
       << "w_enc = " << fmt_double(w_enc) << "\n"
       << "normalize_diff = " << (normalize_diff ? "true" : "false") << "\n"
       << "eval_every = " << eval_every << "\n"
       << "seed = " << seed << "\n\n"
       << "[eval]\n"
       << "bins = " << bins << "\n";
    return os.str();
  }
};

// Dataset spec file: [image] height/width/channels plus ordered [factors]
// name = cardinality lines.
inline FactorSpec factor_spec_from_text(const ConfigText& cfg) {
  FactorSpec s;
  s.factors.clear();
  if (const auto* v = cfg.find("image", "height"))
    s.height = static_cast<std::uint32_t>(detail::parse_int(*v, "image.height"));
  if (const auto* v = cfg.find("image", "width"))
    s.width = static_cast<std::uint32_t>(detail::parse_int(*v, "image.width"));
  if (const auto* v = cfg.find("image", "channels"))
    s.channels = static_cast<std::uint32_t>(detail::parse_int(*v, "image.channels"));
  for (const auto* e : cfg.section_entries("factors")) {
    const long long card = detail::parse_int(e->value, "factors." + e->key);
    if (card < 1 || card > 0xffff)
      throw ConfigError("config: factor cardinality out of range: " + e->key);
    s.factors.push_back({e->key, static_cast<std::uint32_t>(card)});
  }
  if (s.factors.empty()) throw ConfigError("config: dataset spec needs a [factors] section");
  s.validate();
  return s;
}

}  // namespace did
