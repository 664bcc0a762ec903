#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "hpm/inference/inference_unit.hpp"
#include "hpm/model/encoder.hpp"
#include "hpm/numerics/checkpoint.hpp"
#include "hpm/prompt/compile.hpp"
#include "hpm/prompt/vocabulary.hpp"
#include "hpm/vision/projector.hpp"

namespace hpm {

// Injective label -> vocabulary-word map. Labels keep their given order, which
// is also the tie-breaking order for predictions.
class Verbalizer {
 public:
  Verbalizer() = default;
  Verbalizer(std::vector<std::string> labels, std::vector<std::string> words,
             const Vocabulary& vocab);

  // Parses "positive:good,neutral:okay,negative:bad".
  static Verbalizer parse(std::string_view spec, const Vocabulary& vocab);
  std::string to_string() const;

  std::size_t size() const { return labels_.size(); }
  const std::vector<std::string>& labels() const { return labels_; }
  const std::vector<std::string>& words() const { return words_; }
  const std::vector<TokenId>& token_ids() const { return ids_; }
  std::size_t label_index(const std::string& label) const;  // ContractError if absent

 private:
  std::vector<std::string> labels_;
  std::vector<std::string> words_;
  std::vector<TokenId> ids_;
};

enum class FusionStrategy { Sum, SelectBest };

std::string_view to_string(FusionStrategy s);
FusionStrategy parse_fusion_strategy(std::string_view text);

struct ModelConfig {
  std::size_t d_t = 16;
  std::size_t encoder_layers = 2;
  std::size_t heads = 2;
  std::size_t ffn_dim = 32;
  std::size_t max_len = 64;
  FusionStrategy fusion_strategy = FusionStrategy::Sum;
  InferenceUnitConfig iu;
  std::size_t visual_tokens = 1;  // N_i; 0 disables the visual path
  std::size_t feature_dim = 8;    // d_v

  void validate() const;
};

// Per-mask class distributions, rows ordered by mask index.
struct MaskDistribution {
  std::vector<int> mask_indices;
  std::vector<std::vector<double>> probs;
};

struct FusedPrediction {
  std::vector<double> distribution;
  std::size_t label = 0;
};

// A compiled sample ready for the model.
struct ModelInput {
  HybridInput input;
  const FeatureSource* features = nullptr;
  std::size_t gold = 0;  // index into the verbalizer's labels
};

class PromptModel {
 public:
  static PromptModel create(const ModelConfig& config, const Vocabulary& vocab,
                            const Verbalizer& verbalizer, std::uint64_t seed);

  // Token embeddings with visual placeholders replaced by projected image
  // tokens: the inference unit's input. [n, d_t]
  Tensor input_embeddings(const HybridInput& input, const FeatureSource* features);
  // Encoder input: the above with pseudo positions replaced by the inference
  // unit output, plus positional embeddings. [n, d_t]
  Tensor sequence_embeddings(const HybridInput& input, const FeatureSource* features);
  // Final hidden states for every position. [n, d_t]
  Tensor hidden_states(const HybridInput& input, const FeatureSource* features);

  // Vocabulary logits at the mask positions only. [|masks|, vocab]
  Tensor forward(const HybridInput& input, const FeatureSource* features);
  // Output head over every position; oracle for the mask-only path. [n, vocab]
  Tensor forward_full(const HybridInput& input, const FeatureSource* features);
  // MLM head applied to hidden rows; logits use the tied token embeddings.
  Tensor head(const Tensor& hidden) const;

  void set_training(bool on);
  void reseed_dropout(std::uint64_t seed) { iu_.reseed(seed); }

  NamedTensors parameters() const;
  const ModelConfig& config() const { return config_; }
  const Verbalizer& verbalizer() const { return verbalizer_; }
  std::size_t vocab_size() const { return vocab_size_; }
  InferenceUnit& inference_unit() { return iu_; }
  VisualProjector& projector() { return projector_; }

 private:
  ModelConfig config_;
  Verbalizer verbalizer_;
  std::size_t vocab_size_ = 0;
  Tensor token_embeddings_;     // [vocab, d_t], tied with the output head
  Tensor position_embeddings_;  // [max_len, d_t]
  VisualProjector projector_;
  InferenceUnit iu_;
  TransformerEncoder encoder_;
  Dense head_transform_;
  LayerNormParams head_norm_;
  Tensor head_bias_;  // [vocab]
};

// Softmax over the verbalizer-selected logits, per mask. [|masks|, |Y|]
Tensor class_probability_tensor(const Tensor& mask_logits, const Verbalizer& verbalizer);
MaskDistribution class_probabilities(const Tensor& mask_logits, const Verbalizer& verbalizer,
                                     const std::vector<int>& mask_indices = {});

// SUM: elementwise sum, renormalized. SELECT_BEST: the row at dev_selection
// (required when there is more than one mask). Ties in argmax resolve to the
// lowest label index.
FusedPrediction fuse_masks(const MaskDistribution& dist, FusionStrategy strategy,
                           std::optional<std::size_t> dev_selection = std::nullopt);

// Mean over the batch of -log p(gold) under SUM-fused class probabilities.
Tensor loss(PromptModel& model, const std::vector<ModelInput>& batch);

}  // namespace hpm
