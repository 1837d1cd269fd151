#include "sesame/config.hpp"

#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "sesame/errors.hpp"

namespace sesame {

namespace {

std::string trim(const std::string& text) {
  std::size_t first = text.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  std::size_t last = text.find_last_not_of(" \t\r");
  return text.substr(first, last - first + 1);
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" +
                    value + "'");
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const unsigned long long v = std::stoull(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return static_cast<std::size_t>(v);
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key +
                      "': expected a non-negative integer, got '" + value +
                      "'");
  }
}

double parse_double(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return v;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': expected a number, got '" +
                      value + "'");
  }
}

}  // namespace

RunConfig RunConfig::parse(std::istream& in, std::ostream& notices) {
  RunConfig cfg;
  bool se_ratio_given = false;

  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"batch_size", [&](const std::string& k, const std::string& v) {
         cfg.train.batch_size = parse_size(k, v); }},
      {"learning_rate", [&](const std::string& k, const std::string& v) {
         cfg.train.learning_rate = parse_double(k, v); }},
      {"epochs", [&](const std::string& k, const std::string& v) {
         cfg.train.epochs = parse_size(k, v); }},
      {"seed", [&](const std::string& k, const std::string& v) {
         cfg.train.seed = parse_size(k, v); }},
      {"vocab", [&](const std::string& k, const std::string& v) {
         cfg.train.model.vocab = parse_size(k, v); }},
      {"l_max", [&](const std::string& k, const std::string& v) {
         cfg.train.model.l_max = parse_size(k, v); }},
      {"d", [&](const std::string& k, const std::string& v) {
         cfg.train.model.d = parse_size(k, v); }},
      {"heads", [&](const std::string& k, const std::string& v) {
         cfg.train.model.h = parse_size(k, v); }},
      {"layers", [&](const std::string& k, const std::string& v) {
         cfg.train.model.n_layers = parse_size(k, v); }},
      {"classes", [&](const std::string& k, const std::string& v) {
         cfg.train.model.classes = parse_size(k, v); }},
      {"blur_mode", [&](const std::string&, const std::string& v) {
         cfg.train.model.blur_mode = parse_blur_mode(v); }},
      {"kernel_k", [&](const std::string& k, const std::string& v) {
         cfg.train.model.k = parse_size(k, v); }},
      {"sigma", [&](const std::string& k, const std::string& v) {
         cfg.train.model.sigma = parse_double(k, v); }},
      {"normalize_kernel", [&](const std::string& k, const std::string& v) {
         cfg.train.model.normalize_kernel = parse_bool(k, v); }},
      {"se_enabled", [&](const std::string& k, const std::string& v) {
         cfg.train.model.se_enabled = parse_bool(k, v); }},
      {"se_ratio", [&](const std::string& k, const std::string& v) {
         cfg.train.model.se_ratio = parse_size(k, v);
         se_ratio_given = true; }},
      {"se_bias", [&](const std::string& k, const std::string& v) {
         cfg.train.model.se_bias = parse_bool(k, v); }},
      {"pooling", [&](const std::string&, const std::string& v) {
         cfg.train.model.pooling = parse_pool_strategy(v); }},
      {"mean_pool", [&](const std::string& k, const std::string& v) {
         cfg.train.model.mean_pool = parse_bool(k, v); }},
      {"train_data", [&](const std::string&, const std::string& v) {
         cfg.train_data = v; }},
      {"dev_data", [&](const std::string&, const std::string& v) {
         cfg.dev_data = v; }},
      {"eval_data", [&](const std::string&, const std::string& v) {
         cfg.eval_data = v; }},
      {"out_dir", [&](const std::string&, const std::string& v) {
         cfg.out_dir = v; }},
  };

  std::map<std::string, bool> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const std::string text = trim(line);
    if (text.empty()) continue;
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected 'key = value', got '" + text + "'");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key");
    }
    const auto setter = setters.find(key);
    if (setter == setters.end()) {
      throw ConfigError("unknown config key '" + key + "'");
    }
    if (seen[key]) {
      throw ConfigError("duplicate config key '" + key + "'");
    }
    seen[key] = true;
    setter->second(key, value);
  }

  if (!se_ratio_given) {
    // First of 4, 2, 1 that divides the layer count.
    const std::size_t n = cfg.train.model.n_layers;
    cfg.train.model.se_ratio = (n > 0 && n % 4 == 0) ? 4
                               : (n > 0 && n % 2 == 0) ? 2
                                                       : 1;
  }
  for (const auto& [key, setter] : setters) {
    if (!seen[key]) {
      notices << "note: config key '" << key << "' defaulted\n";
    }
  }
  return cfg;
}

RunConfig RunConfig::load(const std::filesystem::path& path,
                          std::ostream& notices) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path.string());
  return parse(in, notices);
}

void RunConfig::validate() const {
  if (train.batch_size == 0) {
    throw ConfigError("config: batch_size must be >= 1");
  }
  if (!(train.learning_rate > 0.0)) {
    throw ConfigError("config: learning_rate must be > 0");
  }
  if (train.epochs == 0) throw ConfigError("config: epochs must be >= 1");
  train.model.validate();
}

nlohmann::json RunConfig::to_json() const {
  nlohmann::json j = train.to_json();
  j["train_data"] = train_data;
  j["dev_data"] = dev_data;
  j["eval_data"] = eval_data;
  j["out_dir"] = out_dir;
  return j;
}

}  // namespace sesame
