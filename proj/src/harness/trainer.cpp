#include "hpm/harness/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "hpm/errors.hpp"
#include "hpm/numerics/ops.hpp"

namespace hpm {

PromptPattern without_visual_slot(const PromptPattern& pattern) {
  PromptPattern out = pattern;
  out.segments.clear();
  for (const auto& seg : pattern.segments) {
    if (!std::holds_alternative<VisualSlot>(seg)) out.segments.push_back(seg);
  }
  return out;
}

Vocabulary build_vocabulary(const ExperimentConfig& config, const PromptPattern& pattern,
                            const std::vector<Sample>& samples) {
  Vocabulary vocab(config.pseudo_slots, kMaxVisualTokens);
  for (const auto& seg : pattern.segments) {
    if (const auto* h = std::get_if<HardText>(&seg)) vocab.add_all(h->tokens);
  }
  // Words of "label:word,..." in order.
  std::size_t start = 0;
  const std::string& v = config.verbalizer;
  while (start < v.size()) {
    auto end = v.find(',', start);
    if (end == std::string::npos) end = v.size();
    const std::string item = v.substr(start, end - start);
    const auto colon = item.find(':');
    if (colon != std::string::npos) vocab.add(item.substr(colon + 1));
    start = end + 1;
  }
  for (const auto& s : samples) {
    vocab.add_all(s.text);
    if (s.aspect) vocab.add_all(*s.aspect);
  }
  return vocab;
}

PromptPattern prepare_pattern(const ExperimentConfig& config) {
  if (config.pattern.empty()) throw ContractError("config has no pattern");
  ParseOptions opts;
  opts.ablation_mode = config.ablation_mode;
  opts.max_soft_length = config.max_soft_length;
  PromptPattern p = parse_pattern(config.pattern, opts);
  if (!config.multimodal) p = without_visual_slot(p);
  const ValidityReport report = validate_pattern(p, config.multimodal);
  std::string blocking;
  for (const auto& v : report.violations) {
    const auto& w = config.waived_rules;
    if (std::find(w.begin(), w.end(), v.rule) == w.end()) blocking += v.rule + ": " + v.message + "\n";
  }
  if (!blocking.empty()) throw ContractError("invalid pattern:\n" + blocking);
  if (p.soft_token_count() > config.pseudo_slots) {
    throw ContractError("pattern needs more pseudo tokens than prompt.pseudo_slots");
  }
  return p;
}

Experiment Experiment::create(const ExperimentConfig& config, const std::vector<Sample>& samples,
                              std::shared_ptr<const FeatureMap> features) {
  Experiment e;
  e.config_ = config;
  e.pattern_ = prepare_pattern(config);
  e.vocab_ = build_vocabulary(config, e.pattern_, samples);
  if (config.multimodal && !features) throw ContractError("multimodal experiment needs features");
  e.features_ = config.multimodal ? std::move(features) : nullptr;
  const Verbalizer verbalizer = Verbalizer::parse(config.verbalizer, e.vocab_);
  if (verbalizer.labels() != config.labels) {
    throw ContractError("verbalizer labels must match the configured label space in order");
  }
  e.model_ = PromptModel::create(config.model, e.vocab_, verbalizer, config.train.seed);
  return e;
}

ModelInput Experiment::compile(const Sample& sample) const {
  ModelInput mi;
  const bool visual = pattern_.has_visual_slot();
  mi.input = compile_input(pattern_, vocab_, sample.text,
                           pattern_.level == TaskLevel::Aspect ? sample.aspect : std::nullopt,
                           visual ? config_.model.visual_tokens : 0, config_.model.max_len);
  if (visual) {
    if (!sample.feature_id) throw ContractError("sample '" + sample.id + "' has no feature_id");
    auto it = features_->find(*sample.feature_id);
    if (it == features_->end()) {
      throw ContractError("feature '" + *sample.feature_id + "' for sample '" + sample.id +
                          "' is missing");
    }
    mi.features = &it->second;
  }
  mi.gold = model_.verbalizer().label_index(sample.label);
  return mi;
}

namespace {

struct Adam {
  double lr, beta1, beta2, eps;
  std::size_t t = 0;
  std::vector<std::vector<double>> m, v;

  void step(NamedTensors& params) {
    if (m.empty()) {
      for (auto& [name, p] : params) {
        m.emplace_back(p.size(), 0.0);
        v.emplace_back(p.size(), 0.0);
      }
    }
    ++t;
    const double c1 = 1.0 - std::pow(beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
      Tensor& p = params[i].second;
      if (!p.has_grad()) continue;
      auto g = p.grad();
      auto w = p.mutable_data();
      for (std::size_t k = 0; k < w.size(); ++k) {
        m[i][k] = beta1 * m[i][k] + (1.0 - beta1) * g[k];
        v[i][k] = beta2 * v[i][k] + (1.0 - beta2) * g[k] * g[k];
        w[k] -= lr * (m[i][k] / c1) / (std::sqrt(v[i][k] / c2) + eps);
      }
    }
  }
};

std::vector<std::vector<double>> snapshot(const NamedTensors& params) {
  std::vector<std::vector<double>> out;
  for (const auto& [name, p] : params) out.emplace_back(p.data().begin(), p.data().end());
  return out;
}

void restore(NamedTensors& params, const std::vector<std::vector<double>>& snap) {
  for (std::size_t i = 0; i < params.size(); ++i) {
    std::copy(snap[i].begin(), snap[i].end(), params[i].second.mutable_data().begin());
  }
}

std::size_t argmax(const std::vector<double>& v) {
  return static_cast<std::size_t>(std::max_element(v.begin(), v.end()) - v.begin());
}

}  // namespace

MaskDistribution Experiment::distributions(const Sample& sample) {
  const ModelInput mi = compile(sample);
  model_.set_training(false);
  NoGradGuard guard;
  Tensor logits = model_.forward(mi.input, mi.features);
  std::vector<int> idx;
  for (const auto& [k, pos] : mi.input.mask_positions) idx.push_back(k);
  return class_probabilities(logits, model_.verbalizer(), idx);
}

FusedPrediction Experiment::predict(const Sample& sample) {
  return fuse_masks(distributions(sample), config_.model.fusion_strategy, selected_mask_);
}

Metrics Experiment::evaluate(const std::vector<Sample>& samples,
                             std::vector<std::size_t>* predictions) {
  std::vector<std::size_t> gold, pred;
  for (const auto& s : samples) {
    gold.push_back(model_.verbalizer().label_index(s.label));
    pred.push_back(predict(s).label);
  }
  if (predictions) *predictions = pred;
  return compute_metrics(gold, pred, model_.verbalizer().size());
}

TrainResult Experiment::train(const std::vector<Sample>& train, const std::vector<Sample>& val) {
  if (train.empty()) throw ContractError("training set is empty");
  const auto& tc = config_.train;
  const std::size_t classes = model_.verbalizer().size();
  const std::size_t masks = pattern_.mask_count();
  const bool select_best = config_.model.fusion_strategy == FusionStrategy::SelectBest && masks > 1;

  std::vector<ModelInput> train_inputs;
  for (const auto& s : train) train_inputs.push_back(compile(s));

  NamedTensors params = model_.parameters();
  Adam adam{tc.lr, tc.beta1, tc.beta2, tc.adam_eps, 0, {}, {}};
  std::mt19937_64 order_rng(tc.seed * 0x9e3779b97f4a7c15ULL + 1);
  model_.reseed_dropout(tc.seed ^ 0xd1b54a32d192ed03ULL);

  // Accuracy of the fused prediction, or of the best single mask under
  // SELECT_BEST; per-mask accuracies go to `per_mask`.
  auto score = [&](const std::vector<Sample>& set, std::vector<double>& per_mask, double& macro) {
    std::vector<std::size_t> gold;
    std::vector<std::vector<std::size_t>> by_mask(masks);
    std::vector<std::size_t> fused;
    for (const auto& s : set) {
      const MaskDistribution d = distributions(s);
      gold.push_back(model_.verbalizer().label_index(s.label));
      for (std::size_t k = 0; k < masks; ++k) by_mask[k].push_back(argmax(d.probs[k]));
      fused.push_back(fuse_masks(d, FusionStrategy::Sum).label);
    }
    per_mask.clear();
    for (std::size_t k = 0; k < masks; ++k) {
      per_mask.push_back(compute_metrics(gold, by_mask[k], classes).accuracy);
    }
    if (select_best) {
      const std::size_t best = argmax(per_mask);
      const Metrics m = compute_metrics(gold, by_mask[best], classes);
      macro = m.macro_f1;
      return m.accuracy;
    }
    const Metrics m = compute_metrics(gold, fused, classes);
    macro = m.macro_f1;
    return m.accuracy;
  };

  TrainResult result;
  std::vector<double> per_mask;
  double macro = 0.0;
  const auto& selection_set = val.empty() ? train : val;
  result.best_val_accuracy = score(selection_set, per_mask, macro);
  std::vector<double> best_per_mask = per_mask;
  auto best = snapshot(params);

  std::vector<std::size_t> order(train_inputs.size());
  std::iota(order.begin(), order.end(), 0);
  bool done = tc.max_steps > 0 && result.steps >= tc.max_steps;
  for (std::size_t epoch = 1; epoch <= tc.epochs && !done; ++epoch) {
    std::shuffle(order.begin(), order.end(), order_rng);
    double loss_sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < order.size(); b += tc.batch_size) {
      std::vector<ModelInput> batch;
      for (std::size_t k = b; k < std::min(order.size(), b + tc.batch_size); ++k) {
        batch.push_back(train_inputs[order[k]]);
      }
      model_.set_training(true);
      double value = 0.0;
      try {
        Tensor l = loss(model_, batch);
        value = l.item();
        if (!std::isfinite(value)) throw NumericDomainError("non-finite loss");
        for (auto& [name, p] : params) p.zero_grad();
        l.backward();
      } catch (const NumericDomainError& e) {
        throw DivergenceError("training diverged at step " + std::to_string(result.steps + 1) +
                              " (epoch " + std::to_string(epoch) + "): " + e.what());
      }
      adam.step(params);
      ++result.steps;
      result.step_losses.push_back(value);
      loss_sum += value;
      ++batches;
      if (tc.max_steps > 0 && result.steps >= tc.max_steps) {
        done = true;
        break;
      }
    }
    model_.set_training(false);
    EpochLog log;
    log.epoch = epoch;
    log.steps = result.steps;
    log.train_loss = loss_sum / static_cast<double>(batches);
    std::vector<double> unused;
    double train_macro = 0.0;
    log.train_accuracy = score(train, unused, train_macro);
    log.val_accuracy = val.empty() ? log.train_accuracy : score(val, per_mask, macro);
    log.val_macro_f1 = val.empty() ? train_macro : macro;
    if (val.empty()) per_mask = unused;
    if (log.val_accuracy > result.best_val_accuracy) {
      result.best_val_accuracy = log.val_accuracy;
      result.best_epoch = epoch;
      best = snapshot(params);
      best_per_mask = per_mask;
    }
    result.epochs.push_back(log);
  }
  restore(params, best);
  if (masks > 1 && config_.model.fusion_strategy == FusionStrategy::SelectBest) {
    selected_mask_ = argmax(best_per_mask);
  }
  result.selected_mask = selected_mask_;
  model_.set_training(false);
  return result;
}

void Experiment::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  save_checkpoint((std::filesystem::path(dir) / "checkpoint.bin").string(), model_.parameters());
  nlohmann::json j;
  j["format"] = "hpm-experiment";
  j["version"] = 1;
  j["config"] = config_.to_file().values();
  j["vocabulary"] = vocab_.tokens();
  j["pattern"] = render_pattern(pattern_);
  j["verbalizer"] = model_.verbalizer().to_string();
  if (selected_mask_) j["selected_mask"] = *selected_mask_;
  std::ofstream out(std::filesystem::path(dir) / "manifest.json");
  if (!out) throw std::runtime_error("cannot write manifest in " + dir);
  out << j.dump(2) << '\n';
}

Experiment Experiment::load(const std::string& dir, std::shared_ptr<const FeatureMap> features) {
  std::ifstream in(std::filesystem::path(dir) / "manifest.json");
  if (!in) throw std::runtime_error("no manifest.json in " + dir);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("bad manifest: ") + e.what(), 0);
  }
  ConfigFile file;
  for (const auto& [k, v] : j.at("config").items()) file.set(k, v.get<std::string>());
  Experiment e;
  e.config_ = ExperimentConfig::from(file);
  e.pattern_ = prepare_pattern(e.config_);
  e.vocab_ = Vocabulary::from_tokens(j.at("vocabulary").get<std::vector<std::string>>(),
                                     e.config_.pseudo_slots, kMaxVisualTokens);
  if (e.config_.multimodal && !features) throw ContractError("multimodal checkpoint needs features");
  e.features_ = e.config_.multimodal ? std::move(features) : nullptr;
  const Verbalizer verbalizer = Verbalizer::parse(e.config_.verbalizer, e.vocab_);
  e.model_ = PromptModel::create(e.config_.model, e.vocab_, verbalizer, e.config_.train.seed);
  NamedTensors params = e.model_.parameters();
  assign_parameters(params, load_checkpoint((std::filesystem::path(dir) / "checkpoint.bin").string()));
  if (j.contains("selected_mask")) e.selected_mask_ = j["selected_mask"].get<std::size_t>();
  return e;
}

}  // namespace hpm
