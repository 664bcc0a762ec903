#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hpm/harness/trainer.hpp"

namespace hpm {

struct SeedRun {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::size_t train_size = 0;
  TrainResult training;
  Metrics test;
};

struct MultiSeedReport {
  std::string name;
  std::vector<SeedRun> runs;
  MeanStd accuracy, macro_f1, weighted_f1;  // over successful runs
  bool incomplete = false;
};

// One seed: few-shot sample of split.train, train with that seed, evaluate on
// split.test. Errors are captured in the returned run.
SeedRun run_seed(const ExperimentConfig& config, const DatasetSplit& split,
                 const std::vector<Sample>& all_samples,
                 std::shared_ptr<const FeatureMap> features, std::uint64_t seed);

// Needs at least two seeds. Failed seeds mark the report incomplete.
MultiSeedReport multi_seed_eval(const ExperimentConfig& config, const std::vector<Sample>& samples,
                                std::shared_ptr<const FeatureMap> features,
                                const std::vector<std::uint64_t>& seeds,
                                const std::string& name = "run");

enum class AblationVariant { Full, NoBa, NoSdpa, NoDp, NoLp };

std::string_view to_string(AblationVariant v);
AblationVariant parse_ablation_variant(std::string_view text);
const std::vector<AblationVariant>& all_ablation_variants();

// Config for one variant; everything not named by the variant is untouched.
ExperimentConfig apply_variant(const ExperimentConfig& config, AblationVariant variant);

std::vector<MultiSeedReport> run_ablation(const ExperimentConfig& config,
                                          const std::vector<Sample>& samples,
                                          std::shared_ptr<const FeatureMap> features,
                                          const std::vector<AblationVariant>& variants);

// Aligned table: one row per report with mean±std of Acc, Mac-F1, W-F1.
std::string format_table(const std::vector<MultiSeedReport>& reports);
// One JSON object per line per report.
std::string format_json_lines(const std::vector<MultiSeedReport>& reports);
std::string format_metrics(const Metrics& m, const std::vector<std::string>& labels);

}  // namespace hpm
