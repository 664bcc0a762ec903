#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <tuple>
#include <vector>

namespace hpm {

struct Sample {
  std::string id;
  std::vector<std::string> text;
  std::optional<std::vector<std::string>> aspect;
  std::string label;
  std::optional<std::string> feature_id;
};

// JSON lines: {"id", "text", "aspect"?, "label", "feature_id"?}; text and
// aspect are whitespace-tokenized strings.
std::vector<Sample> read_jsonl(std::istream& in);
std::vector<Sample> load_jsonl(const std::string& path);
void write_jsonl(std::ostream& out, const std::vector<Sample>& samples);
void save_jsonl(const std::string& path, const std::vector<Sample>& samples);

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

// Seeded shuffle, then 8:1:1 with val = test = floor(n / 10) and the
// remainder in train. Needs at least 10 samples.
DatasetSplit split_dataset(const std::vector<Sample>& samples, std::uint64_t seed);

struct FewShotSplit {
  std::vector<Sample> train_few;
  std::vector<Sample> val;
  std::vector<Sample> test;
  std::uint64_t seed = 0;
  double sampling_rate = 0.0;
};

// Per-class quotas for `target` samples over `classes` labels: round(target /
// classes) each, then +1 on the first classes or -1 on the last ones until the
// quotas sum to target.
std::vector<std::size_t> class_quotas(std::size_t target, std::size_t classes);

// Class-balanced sample without replacement. `labels` fixes the class order.
// A target equal to |train| returns the whole training set.
std::vector<Sample> sample_few_shot(const std::vector<Sample>& train, std::size_t target,
                                    const std::vector<std::string>& labels, std::uint64_t seed);
// Target = round(rate * |train|).
std::vector<Sample> sample_few_shot_rate(const std::vector<Sample>& train, double rate,
                                         const std::vector<std::string>& labels,
                                         std::uint64_t seed);

}  // namespace hpm
