#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "hpm/model/model.hpp"

namespace hpm {

// Flat `key = value` configuration text. '#' starts a comment line.
class ConfigFile {
 public:
  static ConfigFile parse(const std::string& text);
  static ConfigFile load(const std::string& path);

  bool has(const std::string& key) const { return values_.count(key) > 0; }
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& values() const { return values_; }

  std::string get(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  std::string to_text() const;

 private:
  std::map<std::string, std::string> values_;
};

const std::vector<std::string>& known_config_keys();

struct TrainingConfig {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::size_t batch_size = 8;
  std::size_t epochs = 10;
  std::size_t max_steps = 0;  // 0: no cap
  std::uint64_t seed = 1;
  std::size_t few_shot = 36;
  double few_shot_rate = 0.0;  // used when few_shot is 0
};

// Everything needed to build, train, and evaluate one configuration.
struct ExperimentConfig {
  std::string data_path;
  std::string features_path;
  std::uint64_t split_seed = 13;
  std::vector<std::string> labels = {"negative", "neutral", "positive"};
  std::string verbalizer = "negative:bad,neutral:okay,positive:good";
  std::string pattern;
  bool ablation_mode = false;
  int max_soft_length = 3;
  std::vector<std::string> waived_rules;
  bool multimodal = true;
  std::size_t pseudo_slots = 16;
  ModelConfig model;
  TrainingConfig train;
  std::vector<std::uint64_t> seeds = {1, 2, 3};

  static ExperimentConfig from(const ConfigFile& file);
  ConfigFile to_file() const;
};

}  // namespace hpm
