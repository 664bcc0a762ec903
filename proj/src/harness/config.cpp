#include "hpm/harness/config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "hpm/errors.hpp"
#include "hpm/prompt/pattern.hpp"

namespace hpm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string join(const std::vector<std::string>& items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += items[i];
  }
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace

const std::vector<std::string>& known_config_keys() {
  static const std::vector<std::string> keys = {
      "data.path",         "data.features",       "data.split_seed",
      "labels",            "verbalizer",          "pattern",
      "pattern.file",      "prompt.ablation_mode", "prompt.max_soft",
      "prompt.waive",      "prompt.pseudo_slots", "multimodal",
      "model.d_t",         "model.encoder_layers", "model.heads",
      "model.ffn_dim",     "model.max_len",       "model.fusion_strategy",
      "vision.tokens",     "vision.feature_dim",  "iu.hidden_size",
      "iu.lstm_layers",    "iu.m",                "iu.reduced_dim",
      "iu.heads",          "iu.dropout",          "iu.fusion_mode",
      "iu.enable_biaffine", "iu.enable_sdpa",     "iu.gated",
      "train.lr",          "train.beta1",         "train.beta2",
      "train.adam_eps",    "train.batch_size",    "train.epochs",
      "train.max_steps",   "train.seed",          "train.few_shot",
      "train.few_shot_rate", "eval.seeds",
  };
  return keys;
}

ConfigFile ConfigFile::parse(const std::string& text) {
  ConfigFile cfg;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  const auto& keys = known_config_keys();
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) throw FormatError("expected key = value", lineno);
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw FormatError("unknown config key '" + key + "'", lineno);
    }
    cfg.values_[key] = value;
  }
  return cfg;
}

ConfigFile ConfigFile::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config file " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse(ss.str());
}

std::string ConfigFile::get(const std::string& key, const std::string& fallback) const {
  auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

double ConfigFile::get_double(const std::string& key, double fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  try {
    std::size_t used = 0;
    double v = std::stod(it->second, &used);
    if (used != it->second.size()) throw std::invalid_argument("trailing");
    return v;
  } catch (const std::exception&) {
    throw ContractError("config key " + key + " expects a number, got '" + it->second + "'");
  }
}

std::int64_t ConfigFile::get_int(const std::string& key, std::int64_t fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  std::int64_t v = 0;
  const auto& s = it->second;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    throw ContractError("config key " + key + " expects an integer, got '" + s + "'");
  }
  return v;
}

bool ConfigFile::get_bool(const std::string& key, bool fallback) const {
  auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  const auto& s = it->second;
  if (s == "true" || s == "1" || s == "yes") return true;
  if (s == "false" || s == "0" || s == "no") return false;
  throw ContractError("config key " + key + " expects a boolean, got '" + s + "'");
}

std::string ConfigFile::to_text() const {
  std::string out;
  for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
  return out;
}

ExperimentConfig ExperimentConfig::from(const ConfigFile& f) {
  ExperimentConfig c;
  auto size = [&](const std::string& key, std::size_t fallback) {
    const auto v = f.get_int(key, static_cast<std::int64_t>(fallback));
    if (v < 0) throw ContractError("config key " + key + " must be non-negative");
    return static_cast<std::size_t>(v);
  };
  c.data_path = f.get("data.path", "");
  c.features_path = f.get("data.features", "");
  c.split_seed = size("data.split_seed", c.split_seed);
  if (f.has("labels")) c.labels = split_list(f.get("labels", ""));
  c.verbalizer = f.get("verbalizer", c.verbalizer);
  c.ablation_mode = f.get_bool("prompt.ablation_mode", false);
  c.max_soft_length = static_cast<int>(f.get_int("prompt.max_soft", c.max_soft_length));
  if (f.has("prompt.waive")) c.waived_rules = split_list(f.get("prompt.waive", ""));
  c.pseudo_slots = size("prompt.pseudo_slots", c.pseudo_slots);
  if (f.has("pattern")) {
    c.pattern = f.get("pattern", "");
  } else if (f.has("pattern.file")) {
    ParseOptions opts;
    opts.ablation_mode = c.ablation_mode;
    opts.max_soft_length = c.max_soft_length;
    c.pattern = render_pattern(load_pattern_file(f.get("pattern.file", ""), opts));
  }
  c.multimodal = f.get_bool("multimodal", true);

  auto& m = c.model;
  m.d_t = size("model.d_t", m.d_t);
  m.encoder_layers = size("model.encoder_layers", m.encoder_layers);
  m.heads = size("model.heads", m.heads);
  m.ffn_dim = size("model.ffn_dim", m.ffn_dim);
  m.max_len = size("model.max_len", m.max_len);
  m.fusion_strategy = parse_fusion_strategy(f.get("model.fusion_strategy", "sum"));
  m.visual_tokens = size("vision.tokens", c.multimodal ? m.visual_tokens : 0);
  if (!c.multimodal) m.visual_tokens = 0;
  m.feature_dim = size("vision.feature_dim", m.feature_dim);

  auto& iu = m.iu;
  iu.hidden_size = size("iu.hidden_size", iu.hidden_size);
  iu.lstm_layers = size("iu.lstm_layers", iu.lstm_layers);
  iu.m = size("iu.m", iu.m);
  iu.reduced_dim = size("iu.reduced_dim", iu.reduced_dim);
  iu.sdpa_heads = size("iu.heads", iu.sdpa_heads);
  iu.dropout = f.get_double("iu.dropout", iu.dropout);
  iu.fusion_mode = parse_fusion_mode(f.get("iu.fusion_mode", "biaffine_sdpa"));
  iu.enable_biaffine = f.get_bool("iu.enable_biaffine", true);
  iu.enable_sdpa = f.get_bool("iu.enable_sdpa", true);
  iu.gated_combination = f.get_bool("iu.gated", false);

  auto& t = c.train;
  t.lr = f.get_double("train.lr", t.lr);
  t.beta1 = f.get_double("train.beta1", t.beta1);
  t.beta2 = f.get_double("train.beta2", t.beta2);
  t.adam_eps = f.get_double("train.adam_eps", t.adam_eps);
  t.batch_size = size("train.batch_size", t.batch_size);
  t.epochs = size("train.epochs", t.epochs);
  t.max_steps = size("train.max_steps", t.max_steps);
  t.seed = size("train.seed", t.seed);
  t.few_shot = size("train.few_shot", t.few_shot);
  t.few_shot_rate = f.get_double("train.few_shot_rate", t.few_shot_rate);

  if (f.has("eval.seeds")) {
    c.seeds.clear();
    for (const auto& s : split_list(f.get("eval.seeds", ""))) {
      try {
        c.seeds.push_back(std::stoull(s));
      } catch (const std::exception&) {
        throw ContractError("eval.seeds expects integers, got '" + s + "'");
      }
    }
  }
  if (t.batch_size == 0) throw ContractError("train.batch_size must be positive");
  m.validate();
  return c;
}

ConfigFile ExperimentConfig::to_file() const {
  ConfigFile f;
  auto num = [](auto v) { return std::to_string(v); };
  auto flag = [](bool b) { return std::string(b ? "true" : "false"); };
  if (!data_path.empty()) f.set("data.path", data_path);
  if (!features_path.empty()) f.set("data.features", features_path);
  f.set("data.split_seed", num(split_seed));
  f.set("labels", join(labels));
  f.set("verbalizer", verbalizer);
  f.set("pattern", pattern);
  f.set("prompt.ablation_mode", flag(ablation_mode));
  f.set("prompt.max_soft", num(max_soft_length));
  if (!waived_rules.empty()) f.set("prompt.waive", join(waived_rules));
  f.set("prompt.pseudo_slots", num(pseudo_slots));
  f.set("multimodal", flag(multimodal));
  f.set("model.d_t", num(model.d_t));
  f.set("model.encoder_layers", num(model.encoder_layers));
  f.set("model.heads", num(model.heads));
  f.set("model.ffn_dim", num(model.ffn_dim));
  f.set("model.max_len", num(model.max_len));
  f.set("model.fusion_strategy", std::string(to_string(model.fusion_strategy)));
  f.set("vision.tokens", num(model.visual_tokens));
  f.set("vision.feature_dim", num(model.feature_dim));
  f.set("iu.hidden_size", num(model.iu.hidden_size));
  f.set("iu.lstm_layers", num(model.iu.lstm_layers));
  f.set("iu.m", num(model.iu.m));
  f.set("iu.reduced_dim", num(model.iu.reduced_dim));
  f.set("iu.heads", num(model.iu.sdpa_heads));
  f.set("iu.dropout", fmt_double(model.iu.dropout));
  f.set("iu.fusion_mode", std::string(to_string(model.iu.fusion_mode)));
  f.set("iu.enable_biaffine", flag(model.iu.enable_biaffine));
  f.set("iu.enable_sdpa", flag(model.iu.enable_sdpa));
  f.set("iu.gated", flag(model.iu.gated_combination));
  f.set("train.lr", fmt_double(train.lr));
  f.set("train.beta1", fmt_double(train.beta1));
  f.set("train.beta2", fmt_double(train.beta2));
  f.set("train.adam_eps", fmt_double(train.adam_eps));
  f.set("train.batch_size", num(train.batch_size));
  f.set("train.epochs", num(train.epochs));
  f.set("train.max_steps", num(train.max_steps));
  f.set("train.seed", num(train.seed));
  f.set("train.few_shot", num(train.few_shot));
  f.set("train.few_shot_rate", fmt_double(train.few_shot_rate));
  std::vector<std::string> s;
  for (auto v : seeds) s.push_back(num(v));
  f.set("eval.seeds", join(s));
  return f;
}

}  // namespace hpm
