#include "hpm/harness/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <set>

#include <json.hpp>

#include "hpm/errors.hpp"
#include "hpm/prompt/vocabulary.hpp"

namespace hpm {

namespace {

std::string join_tokens(const std::vector<std::string>& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

}  // namespace

std::vector<Sample> read_jsonl(std::istream& in) {
  std::vector<Sample> out;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(std::string("invalid JSON: ") + e.what(), lineno);
    }
    auto field = [&](const char* key) -> std::string {
      if (!j.contains(key) || !j[key].is_string()) {
        throw FormatError(std::string("missing string field '") + key + "'", lineno);
      }
      return j[key].get<std::string>();
    };
    Sample s;
    s.id = field("id");
    s.text = tokenize(field("text"));
    s.label = field("label");
    if (j.contains("aspect") && !j["aspect"].is_null()) s.aspect = tokenize(field("aspect"));
    if (j.contains("feature_id") && !j["feature_id"].is_null()) s.feature_id = field("feature_id");
    if (!ids.insert(s.id).second) throw FormatError("duplicate sample id '" + s.id + "'", lineno);
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<Sample> load_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset " + path);
  return read_jsonl(in);
}

void write_jsonl(std::ostream& out, const std::vector<Sample>& samples) {
  for (const auto& s : samples) {
    nlohmann::json j;
    j["id"] = s.id;
    j["text"] = join_tokens(s.text);
    if (s.aspect) j["aspect"] = join_tokens(*s.aspect);
    j["label"] = s.label;
    if (s.feature_id) j["feature_id"] = *s.feature_id;
    out << j.dump() << '\n';
  }
}

void save_jsonl(const std::string& path, const std::vector<Sample>& samples) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open " + path + " for writing");
  write_jsonl(out, samples);
}

DatasetSplit split_dataset(const std::vector<Sample>& samples, std::uint64_t seed) {
  if (samples.size() < 10) {
    throw ContractError("split_dataset needs at least 10 samples, got " +
                        std::to_string(samples.size()));
  }
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t held = samples.size() / 10;
  const std::size_t n_train = samples.size() - 2 * held;
  DatasetSplit split;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const Sample& s = samples[order[i]];
    if (i < n_train) {
      split.train.push_back(s);
    } else if (i < n_train + held) {
      split.val.push_back(s);
    } else {
      split.test.push_back(s);
    }
  }
  return split;
}

std::vector<std::size_t> class_quotas(std::size_t target, std::size_t classes) {
  if (classes == 0) throw ContractError("class_quotas: no classes");
  const auto base = static_cast<std::size_t>(
      std::llround(static_cast<double>(target) / static_cast<double>(classes)));
  std::vector<std::size_t> q(classes, base);
  std::size_t total = base * classes;
  for (std::size_t i = 0; total < target; ++i, ++total) ++q[i % classes];
  for (std::size_t i = classes; total > target; --total) {
    i = i == 0 ? classes - 1 : i - 1;
    --q[i];
  }
  return q;
}

std::vector<Sample> sample_few_shot(const std::vector<Sample>& train, std::size_t target,
                                    const std::vector<std::string>& labels, std::uint64_t seed) {
  if (target < labels.size()) {
    throw ContractError("few-shot target " + std::to_string(target) + " is below the " +
                        std::to_string(labels.size()) + " classes");
  }
  if (target > train.size()) throw ContractError("few-shot target exceeds the training set");
  std::map<std::string, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < train.size(); ++i) {
    if (std::find(labels.begin(), labels.end(), train[i].label) == labels.end()) {
      throw ContractError("sample '" + train[i].id + "' has label '" + train[i].label +
                          "' outside the label space");
    }
    by_label[train[i].label].push_back(i);
  }
  if (target == train.size()) return train;

  const auto quotas = class_quotas(target, labels.size());
  std::mt19937_64 rng(seed);
  std::vector<Sample> out;
  for (std::size_t c = 0; c < labels.size(); ++c) {
    auto& pool = by_label[labels[c]];
    if (pool.size() < quotas[c]) {
      throw ContractError("class '" + labels[c] + "' has " + std::to_string(pool.size()) +
                          " samples, quota is " + std::to_string(quotas[c]));
    }
    std::shuffle(pool.begin(), pool.end(), rng);
    for (std::size_t k = 0; k < quotas[c]; ++k) out.push_back(train[pool[k]]);
  }
  std::shuffle(out.begin(), out.end(), rng);
  return out;
}

std::vector<Sample> sample_few_shot_rate(const std::vector<Sample>& train, double rate,
                                         const std::vector<std::string>& labels,
                                         std::uint64_t seed) {
  if (!(rate > 0.0 && rate <= 1.0)) throw ContractError("sampling rate must be in (0, 1]");
  const auto target =
      static_cast<std::size_t>(std::llround(rate * static_cast<double>(train.size())));
  return sample_few_shot(train, target, labels, seed);
}

}  // namespace hpm
