#pragma once

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "hpm/harness/config.hpp"
#include "hpm/harness/dataset.hpp"
#include "hpm/harness/metrics.hpp"
#include "hpm/model/model.hpp"
#include "hpm/prompt/pattern.hpp"

namespace hpm {

struct EpochLog {
  std::size_t epoch = 0;
  std::size_t steps = 0;  // cumulative optimizer steps
  double train_loss = 0.0;
  double train_accuracy = 0.0;
  double val_accuracy = 0.0;
  double val_macro_f1 = 0.0;
};

struct TrainResult {
  std::vector<EpochLog> epochs;
  std::vector<double> step_losses;
  std::size_t steps = 0;
  std::size_t best_epoch = 0;  // 0: the initial parameters were kept
  double best_val_accuracy = 0.0;
  std::optional<std::size_t> selected_mask;
};

// Text-only view of a pattern: the {vision} slot is dropped.
PromptPattern without_visual_slot(const PromptPattern& pattern);

// Word vocabulary covering the pattern, the verbalizer, and every sample.
Vocabulary build_vocabulary(const ExperimentConfig& config, const PromptPattern& pattern,
                            const std::vector<Sample>& samples);

// Parses config.pattern and checks it; violations not listed in
// config.waived_rules raise ContractError.
PromptPattern prepare_pattern(const ExperimentConfig& config);

// Model, vocabulary, and pattern for one configuration plus the training and
// evaluation loops around them.
class Experiment {
 public:
  static Experiment create(const ExperimentConfig& config, const std::vector<Sample>& samples,
                           std::shared_ptr<const FeatureMap> features);

  ModelInput compile(const Sample& sample) const;

  // Adam over train, one validation pass per epoch; the best-validation
  // parameters are restored at the end. DivergenceError on a non-finite loss.
  TrainResult train(const std::vector<Sample>& train, const std::vector<Sample>& val);

  // Per-mask class distributions (eval mode, no graph).
  MaskDistribution distributions(const Sample& sample);
  FusedPrediction predict(const Sample& sample);
  Metrics evaluate(const std::vector<Sample>& samples, std::vector<std::size_t>* predictions = nullptr);

  void save(const std::string& dir) const;
  static Experiment load(const std::string& dir, std::shared_ptr<const FeatureMap> features);

  const ExperimentConfig& config() const { return config_; }
  const Vocabulary& vocabulary() const { return vocab_; }
  const PromptPattern& pattern() const { return pattern_; }
  PromptModel& model() { return model_; }
  std::optional<std::size_t> selected_mask() const { return selected_mask_; }

 private:
  ExperimentConfig config_;
  Vocabulary vocab_;
  PromptPattern pattern_;
  PromptModel model_;
  std::shared_ptr<const FeatureMap> features_;
  std::optional<std::size_t> selected_mask_;
};

}  // namespace hpm
