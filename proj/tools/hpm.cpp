#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>

#include <CLI11.hpp>

#include "hpm/errors.hpp"
#include "hpm/harness/config.hpp"
#include "hpm/harness/dataset.hpp"
#include "hpm/harness/experiments.hpp"
#include "hpm/harness/synthetic.hpp"
#include "hpm/harness/trainer.hpp"
#include "hpm/prompt/pattern.hpp"

namespace fs = std::filesystem;
using namespace hpm;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out;
};

ExperimentConfig load_config(const Common& c) {
  if (c.config.empty()) throw ContractError("--config is required");
  ExperimentConfig cfg = ExperimentConfig::from(ConfigFile::load(c.config));
  if (c.seed_set) cfg.train.seed = c.seed;
  return cfg;
}

std::shared_ptr<const FeatureMap> load_feature_map(const ExperimentConfig& cfg) {
  if (!cfg.multimodal) return nullptr;
  if (cfg.features_path.empty()) throw ContractError("multimodal config needs data.features");
  return std::make_shared<const FeatureMap>(load_features(cfg.features_path));
}

std::vector<Sample> load_samples(const ExperimentConfig& cfg) {
  if (cfg.data_path.empty()) throw ContractError("config needs data.path");
  return load_jsonl(cfg.data_path);
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

int cmd_train(const Common& c) {
  const ExperimentConfig cfg = load_config(c);
  const auto samples = load_samples(cfg);
  const auto features = load_feature_map(cfg);
  const DatasetSplit split = split_dataset(samples, cfg.split_seed);
  std::vector<Sample> few = split.train;
  if (cfg.train.few_shot > 0) {
    few = sample_few_shot(split.train, cfg.train.few_shot, cfg.labels, cfg.train.seed);
  } else if (cfg.train.few_shot_rate > 0.0) {
    few = sample_few_shot_rate(split.train, cfg.train.few_shot_rate, cfg.labels, cfg.train.seed);
  }
  Experiment e = Experiment::create(cfg, samples, features);
  const TrainResult r = e.train(few, split.val);
  std::printf("train=%zu val=%zu test=%zu steps=%zu best_epoch=%zu\n", few.size(),
              split.val.size(), split.test.size(), r.steps, r.best_epoch);
  std::printf("%-6s %-7s %-10s %-9s %-9s %s\n", "epoch", "steps", "loss", "train_acc", "val_acc",
              "val_mf1");
  for (const auto& ep : r.epochs) {
    std::printf("%-6zu %-7zu %-10.5f %-9.4f %-9.4f %.4f\n", ep.epoch, ep.steps, ep.train_loss,
                ep.train_accuracy, ep.val_accuracy, ep.val_macro_f1);
  }
  if (r.selected_mask) std::printf("selected mask: %zu\n", *r.selected_mask);
  const Metrics m = e.evaluate(split.test);
  std::printf("test: %s", format_metrics(m, cfg.labels).c_str());
  if (!c.out.empty()) {
    e.save(c.out);
    std::printf("saved %s\n", c.out.c_str());
  }
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& data, const std::string& feats) {
  std::shared_ptr<const FeatureMap> features;
  if (!feats.empty()) features = std::make_shared<const FeatureMap>(load_features(feats));
  Experiment e = Experiment::load(checkpoint, features);
  const auto samples = load_jsonl(data);
  if (samples.empty()) throw ContractError("no samples to evaluate");
  std::cout << format_metrics(e.evaluate(samples), e.config().labels);
  return 0;
}

int report(const std::vector<MultiSeedReport>& reports, const Common& c, const std::string& stem) {
  const std::string table = format_table(reports);
  std::cout << table;
  for (const auto& r : reports) {
    for (const auto& run : r.runs) {
      if (!run.ok) std::cerr << r.name << " seed " << run.seed << " failed: " << run.error << "\n";
    }
  }
  if (!c.out.empty()) {
    fs::create_directories(c.out);
    write_text(fs::path(c.out) / (stem + ".txt"), table);
    write_text(fs::path(c.out) / (stem + ".jsonl"), format_json_lines(reports));
  }
  for (const auto& r : reports) {
    if (r.incomplete) return 3;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hybrid prompt model toolkit"};
  app.require_subcommand(1);
  Common common;

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", common.config, "flat key = value config file");
    sub->add_option("--seed", common.seed, "seed")->each([&](const std::string&) {
      common.seed_set = true;
    });
    sub->add_option("--out", common.out, "output directory or file");
  };

  std::string data, features_path, checkpoint, pattern_file, labels_csv, mode = "multimodal";
  std::size_t count = 300, dim = 8, target = 0;
  double rate = 0.0;
  bool multimodal = false, aspect = false;
  std::vector<std::string> variants;
  std::vector<std::uint64_t> seeds;

  auto* split = app.add_subcommand("split", "8:1:1 split of a JSONL dataset");
  add_common(split);
  split->add_option("--data", data, "dataset JSONL")->required();

  auto* few = app.add_subcommand("sample-few-shot", "class-balanced few-shot sample");
  add_common(few);
  few->add_option("--data", data, "training JSONL")->required();
  few->add_option("--count", target, "target size");
  few->add_option("--rate", rate, "target as a fraction of the input");
  few->add_option("--labels", labels_csv, "comma-separated label space")
      ->default_val("negative,neutral,positive");

  auto* train = app.add_subcommand("train", "train one configuration");
  add_common(train);

  auto* eval = app.add_subcommand("eval", "evaluate a saved experiment");
  add_common(eval);
  eval->add_option("--checkpoint", checkpoint, "experiment directory")->required();
  eval->add_option("--data", data, "samples JSONL")->required();
  eval->add_option("--features", features_path, "feature file");

  auto* ablate = app.add_subcommand("ablate", "ablation variants over eval.seeds");
  add_common(ablate);
  ablate->add_option("--variants", variants, "subset of FULL NO_BA NO_SDPA NO_DP NO_LP");

  auto* multi = app.add_subcommand("multi-seed", "mean and stddev over seeds");
  add_common(multi);
  multi->add_option("--seeds", seeds, "overrides eval.seeds")->delimiter(',');

  auto* validate = app.add_subcommand("validate-pattern", "check a prompt pattern");
  validate->add_option("--pattern", pattern_file, "pattern file")->required();
  validate->add_flag("--multimodal", multimodal, "check the visual rules");

  auto* gen_feat = app.add_subcommand("gen-synth-features", "random feature file");
  add_common(gen_feat);
  gen_feat->add_option("--count", count, "records");
  gen_feat->add_option("--dim", dim, "dimension");

  auto* gen_data = app.add_subcommand("gen-synth-dataset", "synthetic dataset and features");
  add_common(gen_data);
  gen_data->add_option("--count", count, "samples");
  gen_data->add_option("--dim", dim, "feature dimension");
  gen_data->add_option("--mode", mode, "multimodal or separable");
  gen_data->add_flag("--aspect", aspect, "add an aspect to every sample");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*split) {
      const auto samples = load_jsonl(data);
      const DatasetSplit s = split_dataset(samples, common.seed_set ? common.seed : 13);
      const fs::path dir = common.out.empty() ? "." : common.out;
      fs::create_directories(dir);
      save_jsonl((dir / "train.jsonl").string(), s.train);
      save_jsonl((dir / "val.jsonl").string(), s.val);
      save_jsonl((dir / "test.jsonl").string(), s.test);
      std::printf("train=%zu val=%zu test=%zu\n", s.train.size(), s.val.size(), s.test.size());
      return 0;
    }
    if (*few) {
      const auto samples = load_jsonl(data);
      std::vector<std::string> labels;
      std::stringstream ss(labels_csv);
      for (std::string l; std::getline(ss, l, ',');) labels.push_back(l);
      const std::uint64_t seed = common.seed_set ? common.seed : 1;
      const auto picked = target > 0 ? sample_few_shot(samples, target, labels, seed)
                                     : sample_few_shot_rate(samples, rate, labels, seed);
      if (common.out.empty()) {
        write_jsonl(std::cout, picked);
      } else {
        save_jsonl(common.out, picked);
      }
      return 0;
    }
    if (*train) return cmd_train(common);
    if (*eval) return cmd_eval(checkpoint, data, features_path);
    if (*ablate) {
      const ExperimentConfig cfg = load_config(common);
      std::vector<AblationVariant> vs;
      for (const auto& v : variants) vs.push_back(parse_ablation_variant(v));
      if (vs.empty()) vs = all_ablation_variants();
      return report(run_ablation(cfg, load_samples(cfg), load_feature_map(cfg), vs), common,
                    "ablation");
    }
    if (*multi) {
      ExperimentConfig cfg = load_config(common);
      if (!seeds.empty()) cfg.seeds = seeds;
      return report({multi_seed_eval(cfg, load_samples(cfg), load_feature_map(cfg), cfg.seeds,
                                     "hybrid")},
                    common, "multi_seed");
    }
    if (*validate) {
      ParseOptions opts;
      opts.ablation_mode = true;
      const PromptPattern p = load_pattern_file(pattern_file, opts);
      const ValidityReport r = validate_pattern(p, multimodal);
      std::cout << render_pattern(p) << "\n" << r.to_text();
      return r.valid ? 0 : 1;
    }
    if (*gen_feat) {
      const FeatureMap f = synthetic_features(count, dim, common.seed_set ? common.seed : 7);
      if (common.out.empty()) {
        write_features(std::cout, f);
      } else {
        std::ofstream out(common.out);
        if (!out) throw std::runtime_error("cannot write " + common.out);
        write_features(out, f);
      }
      return 0;
    }
    if (*gen_data) {
      SyntheticOptions o;
      o.count = count;
      o.feature_dim = dim;
      o.seed = common.seed_set ? common.seed : 7;
      o.mode = parse_synthetic_mode(mode);
      o.aspect = aspect;
      const SyntheticData d = generate_synthetic(o);
      const fs::path dir = common.out.empty() ? "." : common.out;
      fs::create_directories(dir);
      save_jsonl((dir / "data.jsonl").string(), d.samples);
      std::ofstream out(dir / "features.tsv");
      if (!out) throw std::runtime_error("cannot write features.tsv");
      write_features(out, d.features);
      std::printf("wrote %zu samples to %s\n", d.samples.size(), dir.string().c_str());
      return 0;
    }
  } catch (const ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const FormatError& e) {
    std::cerr << "format error: " << e.what() << "\n";
    return 2;
  } catch (const DivergenceError& e) {
    std::cerr << "diverged: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
