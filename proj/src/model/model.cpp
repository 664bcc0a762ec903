#include "hpm/model/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

#include "hpm/errors.hpp"
#include "hpm/numerics/init.hpp"
#include "hpm/numerics/ops.hpp"

namespace hpm {

Verbalizer::Verbalizer(std::vector<std::string> labels, std::vector<std::string> words,
                       const Vocabulary& vocab)
    : labels_(std::move(labels)), words_(std::move(words)) {
  if (labels_.empty()) throw ContractError("verbalizer needs at least one label");
  if (labels_.size() != words_.size()) throw ContractError("verbalizer label/word count mismatch");
  std::set<std::string> seen_labels, seen_words;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (!seen_labels.insert(labels_[i]).second) {
      throw ContractError("duplicate verbalizer label '" + labels_[i] + "'");
    }
    if (!seen_words.insert(words_[i]).second) {
      throw ContractError("verbalizer is not injective: '" + words_[i] + "' used twice");
    }
    if (!vocab.contains(words_[i])) {
      throw ContractError("verbalizer word '" + words_[i] + "' is not in the vocabulary");
    }
    ids_.push_back(vocab.id(words_[i]));
  }
}

Verbalizer Verbalizer::parse(std::string_view spec, const Vocabulary& vocab) {
  std::vector<std::string> labels, words;
  std::size_t start = 0;
  while (start <= spec.size()) {
    auto end = spec.find(',', start);
    if (end == std::string_view::npos) end = spec.size();
    std::string_view item = spec.substr(start, end - start);
    const auto colon = item.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon + 1 == item.size()) {
      throw ContractError("verbalizer entry must be label:word, got '" + std::string(item) + "'");
    }
    labels.emplace_back(item.substr(0, colon));
    words.emplace_back(item.substr(colon + 1));
    start = end + 1;
  }
  return Verbalizer(std::move(labels), std::move(words), vocab);
}

std::string Verbalizer::to_string() const {
  std::string out;
  for (std::size_t i = 0; i < labels_.size(); ++i) {
    if (i) out += ',';
    out += labels_[i] + ':' + words_[i];
  }
  return out;
}

std::size_t Verbalizer::label_index(const std::string& label) const {
  auto it = std::find(labels_.begin(), labels_.end(), label);
  if (it == labels_.end()) throw ContractError("label '" + label + "' is outside the label space");
  return static_cast<std::size_t>(it - labels_.begin());
}

std::string_view to_string(FusionStrategy s) {
  return s == FusionStrategy::Sum ? "sum" : "select_best";
}

FusionStrategy parse_fusion_strategy(std::string_view text) {
  if (text == "sum" || text == "SUM") return FusionStrategy::Sum;
  if (text == "select_best" || text == "SELECT_BEST") return FusionStrategy::SelectBest;
  throw ContractError("unknown fusion strategy '" + std::string(text) + "'");
}

void ModelConfig::validate() const {
  if (d_t == 0 || heads == 0 || d_t % heads != 0) {
    throw ContractError("model.d_t must be divisible by model.heads");
  }
  if (max_len == 0) throw ContractError("model.max_len must be positive");
  if (visual_tokens > kMaxVisualTokens) throw ContractError("vision.tokens must be in [0, 5]");
  if (visual_tokens > 0 && feature_dim == 0) throw ContractError("vision.feature_dim must be > 0");
  iu.validate();
}

PromptModel PromptModel::create(const ModelConfig& config, const Vocabulary& vocab,
                                const Verbalizer& verbalizer, std::uint64_t seed) {
  config.validate();
  if (config.visual_tokens > vocab.visual_slots()) {
    throw ContractError("vocabulary reserves fewer visual ids than vision.tokens");
  }
  std::mt19937_64 rng(seed);
  PromptModel m;
  m.config_ = config;
  m.verbalizer_ = verbalizer;
  m.vocab_size_ = vocab.size();
  const std::size_t d = config.d_t;
  m.token_embeddings_ = init::normal({vocab.size(), d}, 0.5, rng);
  m.position_embeddings_ = init::normal({config.max_len, d}, 0.1, rng);
  if (config.visual_tokens > 0) {
    m.projector_ = VisualProjector::create(config.visual_tokens, d, config.feature_dim, rng);
  }
  m.iu_ = InferenceUnit::create(d, config.iu, rng);
  m.iu_.reseed(seed ^ 0x9e3779b97f4a7c15ULL);
  m.encoder_ = TransformerEncoder::create(d, config.heads, config.ffn_dim, config.encoder_layers, rng);
  m.head_transform_ = Dense::create(d, d, rng);
  m.head_norm_ = LayerNormParams::create(d);
  m.head_bias_ = Tensor::zeros({vocab.size()}, true);
  return m;
}

namespace {

// Rows of `base` with rows listed in `positions` replaced by rows of `rows`.
Tensor overwrite_rows(const Tensor& base, const std::vector<std::size_t>& positions,
                      const Tensor& rows) {
  if (positions.empty()) return base;
  const std::size_t n = base.dim(0);
  std::vector<std::size_t> index(n);
  std::iota(index.begin(), index.end(), 0);
  for (std::size_t k = 0; k < positions.size(); ++k) index[positions[k]] = n + k;
  return gather(concat({base, rows}, 0), 0, index);
}

}  // namespace

Tensor PromptModel::input_embeddings(const HybridInput& input, const FeatureSource* features) {
  const bool visual = !input.visual_positions.empty();
  if (visual && !features) throw ContractError("multimodal input requires image features");
  if (!visual && features) throw ContractError("image features given for a text-only input");
  if (input.n > config_.max_len) throw LengthError("input longer than model.max_len");
  Tensor tokens = embedding(token_embeddings_, input.token_ids);
  if (!visual) return tokens;
  if (config_.visual_tokens == 0 || input.visual_positions.size() != config_.visual_tokens) {
    throw ContractError("input has " + std::to_string(input.visual_positions.size()) +
                        " visual positions, model expects " +
                        std::to_string(config_.visual_tokens));
  }
  return overwrite_rows(tokens, input.visual_positions, project(*features, projector_).tokens);
}

Tensor PromptModel::sequence_embeddings(const HybridInput& input, const FeatureSource* features) {
  Tensor emb = input_embeddings(input, features);
  Tensor replaced = overwrite_rows(emb, input.pseudo_positions,
                                   iu_.encode_pseudo_tokens(input, emb));
  return add(replaced, slice(position_embeddings_, 0, 0, input.n));
}

Tensor PromptModel::hidden_states(const HybridInput& input, const FeatureSource* features) {
  return encoder_(sequence_embeddings(input, features));
}

Tensor PromptModel::head(const Tensor& hidden) const {
  Tensor h = head_norm_(gelu(head_transform_.linear(hidden)));
  return add(matmul(h, transpose(token_embeddings_)), head_bias_);
}

Tensor PromptModel::forward(const HybridInput& input, const FeatureSource* features) {
  if (input.mask_positions.empty()) throw ContractError("input has no mask positions");
  Tensor hidden = hidden_states(input, features);
  return head(gather(hidden, 0, input.mask_position_list()));
}

Tensor PromptModel::forward_full(const HybridInput& input, const FeatureSource* features) {
  return head(hidden_states(input, features));
}

void PromptModel::set_training(bool on) { iu_.set_training(on); }

NamedTensors PromptModel::parameters() const {
  NamedTensors out;
  auto append = [&](NamedTensors more) {
    for (auto& p : more) out.push_back(std::move(p));
  };
  out.push_back({"embed.tokens", token_embeddings_});
  out.push_back({"embed.positions", position_embeddings_});
  if (config_.visual_tokens > 0) append(projector_.parameters("vision."));
  append(iu_.parameters("iu."));
  append(encoder_.parameters("encoder."));
  append(head_transform_.parameters("head.transform."));
  append(head_norm_.parameters("head.norm."));
  out.push_back({"head.bias", head_bias_});
  return out;
}

Tensor class_probability_tensor(const Tensor& mask_logits, const Verbalizer& verbalizer) {
  for (auto id : verbalizer.token_ids()) {
    if (id >= mask_logits.dim(1)) throw ContractError("verbalizer token outside the vocabulary");
  }
  return softmax(gather(mask_logits, 1, verbalizer.token_ids()), 1);
}

MaskDistribution class_probabilities(const Tensor& mask_logits, const Verbalizer& verbalizer,
                                     const std::vector<int>& mask_indices) {
  Tensor probs = class_probability_tensor(mask_logits, verbalizer);
  const std::size_t rows = probs.dim(0), cols = probs.dim(1);
  MaskDistribution dist;
  for (std::size_t r = 0; r < rows; ++r) {
    auto d = probs.data().subspan(r * cols, cols);
    dist.probs.emplace_back(d.begin(), d.end());
    dist.mask_indices.push_back(r < mask_indices.size() ? mask_indices[r]
                                                        : static_cast<int>(r + 1));
  }
  return dist;
}

FusedPrediction fuse_masks(const MaskDistribution& dist, FusionStrategy strategy,
                           std::optional<std::size_t> dev_selection) {
  if (dist.probs.empty()) throw ContractError("fuse_masks needs at least one mask");
  FusedPrediction out;
  if (strategy == FusionStrategy::SelectBest) {
    std::size_t pick = 0;
    if (dist.probs.size() > 1) {
      if (!dev_selection) throw ContractError("SELECT_BEST needs a dev-selected mask");
      pick = *dev_selection;
    } else if (dev_selection) {
      pick = *dev_selection;
    }
    if (pick >= dist.probs.size()) {
      throw ContractError("dev_selection " + std::to_string(pick) + " out of range");
    }
    out.distribution = dist.probs[pick];
  } else {
    out.distribution.assign(dist.probs[0].size(), 0.0);
    for (const auto& row : dist.probs) {
      for (std::size_t c = 0; c < row.size(); ++c) out.distribution[c] += row[c];
    }
    const double total =
        std::accumulate(out.distribution.begin(), out.distribution.end(), 0.0);
    for (auto& v : out.distribution) v /= total;
  }
  // max_element returns the first maximum: lowest label index wins ties.
  out.label = static_cast<std::size_t>(
      std::max_element(out.distribution.begin(), out.distribution.end()) -
      out.distribution.begin());
  return out;
}

Tensor loss(PromptModel& model, const std::vector<ModelInput>& batch) {
  if (batch.empty()) throw ContractError("loss needs a non-empty batch");
  const auto& verbalizer = model.verbalizer();
  std::vector<Tensor> per_sample;
  per_sample.reserve(batch.size());
  for (const auto& s : batch) {
    if (s.gold >= verbalizer.size()) throw ContractError("gold label outside the label space");
    Tensor logits = model.forward(s.input, s.features);
    Tensor selected = gather(logits, 1, verbalizer.token_ids());  // [M, |Y|]
    const std::size_t masks = selected.dim(0);
    const std::size_t gold[] = {s.gold};
    if (masks == 1) {
      per_sample.push_back(cross_entropy(reshape(selected, {verbalizer.size()}), gold));
    } else {
      Tensor probs = softmax(selected, 1);
      Tensor fused = scale(matmul(Tensor::full({1, masks}, 1.0), probs), 1.0 / masks);
      per_sample.push_back(scale(log(reshape(gather(fused, 1, gold), {})), -1.0));
    }
  }
  Tensor total = per_sample[0];
  for (std::size_t i = 1; i < per_sample.size(); ++i) total = add(total, per_sample[i]);
  return scale(total, 1.0 / static_cast<double>(batch.size()));
}

}  // namespace hpm
