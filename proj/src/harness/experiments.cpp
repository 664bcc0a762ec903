#include "hpm/harness/experiments.hpp"

#include <cstdio>
#include <sstream>

#include <json.hpp>

#include "hpm/errors.hpp"

namespace hpm {

SeedRun run_seed(const ExperimentConfig& config, const DatasetSplit& split,
                 const std::vector<Sample>& all_samples,
                 std::shared_ptr<const FeatureMap> features, std::uint64_t seed) {
  SeedRun run;
  run.seed = seed;
  try {
    ExperimentConfig c = config;
    c.train.seed = seed;
    std::vector<Sample> few;
    if (c.train.few_shot > 0) {
      few = sample_few_shot(split.train, c.train.few_shot, c.labels, seed);
    } else if (c.train.few_shot_rate > 0.0) {
      few = sample_few_shot_rate(split.train, c.train.few_shot_rate, c.labels, seed);
    } else {
      few = split.train;
    }
    run.train_size = few.size();
    Experiment e = Experiment::create(c, all_samples, features);
    run.training = e.train(few, split.val);
    run.test = e.evaluate(split.test);
    run.ok = true;
  } catch (const std::exception& ex) {
    run.error = ex.what();
  }
  return run;
}

MultiSeedReport multi_seed_eval(const ExperimentConfig& config, const std::vector<Sample>& samples,
                                std::shared_ptr<const FeatureMap> features,
                                const std::vector<std::uint64_t>& seeds, const std::string& name) {
  if (seeds.size() < 2) throw ContractError("multi-seed evaluation needs at least two seeds");
  const DatasetSplit split = split_dataset(samples, config.split_seed);
  MultiSeedReport report;
  report.name = name;
  std::vector<double> acc, mac, wf;
  for (auto seed : seeds) {
    SeedRun run = run_seed(config, split, samples, features, seed);
    if (run.ok) {
      acc.push_back(run.test.accuracy);
      mac.push_back(run.test.macro_f1);
      wf.push_back(run.test.weighted_f1);
    } else {
      report.incomplete = true;
    }
    report.runs.push_back(std::move(run));
  }
  report.accuracy = mean_std(acc);
  report.macro_f1 = mean_std(mac);
  report.weighted_f1 = mean_std(wf);
  return report;
}

std::string_view to_string(AblationVariant v) {
  switch (v) {
    case AblationVariant::Full: return "FULL";
    case AblationVariant::NoBa: return "NO_BA";
    case AblationVariant::NoSdpa: return "NO_SDPA";
    case AblationVariant::NoDp: return "NO_DP";
    case AblationVariant::NoLp: return "NO_LP";
  }
  return "?";
}

AblationVariant parse_ablation_variant(std::string_view text) {
  for (auto v : all_ablation_variants()) {
    if (text == to_string(v)) return v;
  }
  throw ContractError("unknown ablation variant '" + std::string(text) + "'");
}

const std::vector<AblationVariant>& all_ablation_variants() {
  static const std::vector<AblationVariant> v = {AblationVariant::Full, AblationVariant::NoBa,
                                                 AblationVariant::NoSdpa, AblationVariant::NoDp,
                                                 AblationVariant::NoLp};
  return v;
}

ExperimentConfig apply_variant(const ExperimentConfig& config, AblationVariant variant) {
  ExperimentConfig c = config;
  ParseOptions opts;
  opts.ablation_mode = config.ablation_mode;
  opts.max_soft_length = config.max_soft_length;
  switch (variant) {
    case AblationVariant::Full:
      break;
    case AblationVariant::NoBa:
      c.model.iu.enable_biaffine = false;
      break;
    case AblationVariant::NoSdpa:
      c.model.iu.enable_biaffine = false;
      c.model.iu.enable_sdpa = false;
      break;
    case AblationVariant::NoDp: {
      const PromptPattern p = parse_pattern(config.pattern, opts);
      if (p.mask_count() < 2) {
        throw ContractError("NO_DP needs a pattern with two hard templates");
      }
      c.pattern = render_pattern(without_last_template(p));
      break;
    }
    case AblationVariant::NoLp: {
      c.pattern = render_pattern(with_soft_length(parse_pattern(config.pattern, opts), 0));
      c.ablation_mode = true;
      // With every soft run empty the visual slot cannot follow a soft run.
      c.waived_rules.push_back(std::string(kRuleVisionZ));
      break;
    }
  }
  return c;
}

std::vector<MultiSeedReport> run_ablation(const ExperimentConfig& config,
                                          const std::vector<Sample>& samples,
                                          std::shared_ptr<const FeatureMap> features,
                                          const std::vector<AblationVariant>& variants) {
  std::vector<MultiSeedReport> out;
  for (auto v : variants) {
    const ExperimentConfig c = apply_variant(config, v);
    out.push_back(multi_seed_eval(c, samples, features, config.seeds, std::string(to_string(v))));
  }
  return out;
}

namespace {

std::string cell(const MeanStd& m) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.4f ± %.4f", m.mean, m.stddev);
  return buf;
}

std::string pad(const std::string& s, std::size_t width) {
  // "±" is two bytes but one column.
  std::size_t cols = 0;
  for (unsigned char ch : s) cols += (ch & 0xC0) != 0x80;
  return s + std::string(width > cols ? width - cols : 0, ' ');
}

}  // namespace

std::string format_table(const std::vector<MultiSeedReport>& reports) {
  std::ostringstream os;
  std::size_t seeds = reports.empty() ? 0 : reports.front().runs.size();
  os << "# mean ± population stddev over " << seeds << " seeds\n";
  std::size_t w = 7;
  for (const auto& r : reports) w = std::max(w, r.name.size() + 2);
  os << pad("Model", w) << pad("Acc", 19) << pad("Mac-F1", 19) << "W-F1\n";
  for (const auto& r : reports) {
    os << pad(r.name, w) << pad(cell(r.accuracy), 19) << pad(cell(r.macro_f1), 19)
       << cell(r.weighted_f1);
    if (r.incomplete) {
      std::size_t ok = 0;
      for (const auto& run : r.runs) ok += run.ok;
      os << "  (incomplete: " << ok << "/" << r.runs.size() << " seeds)";
    }
    os << '\n';
  }
  return os.str();
}

std::string format_json_lines(const std::vector<MultiSeedReport>& reports) {
  std::string out;
  for (const auto& r : reports) {
    nlohmann::json j;
    j["name"] = r.name;
    j["stddev"] = "population";
    j["accuracy"] = {{"mean", r.accuracy.mean}, {"std", r.accuracy.stddev}};
    j["macro_f1"] = {{"mean", r.macro_f1.mean}, {"std", r.macro_f1.stddev}};
    j["weighted_f1"] = {{"mean", r.weighted_f1.mean}, {"std", r.weighted_f1.stddev}};
    j["incomplete"] = r.incomplete;
    auto runs = nlohmann::json::array();
    for (const auto& run : r.runs) {
      nlohmann::json rj;
      rj["seed"] = run.seed;
      rj["ok"] = run.ok;
      if (run.ok) {
        rj["accuracy"] = run.test.accuracy;
        rj["macro_f1"] = run.test.macro_f1;
        rj["weighted_f1"] = run.test.weighted_f1;
        rj["steps"] = run.training.steps;
        rj["train_size"] = run.train_size;
      } else {
        rj["error"] = run.error;
      }
      runs.push_back(rj);
    }
    j["runs"] = runs;
    out += j.dump() + "\n";
  }
  return out;
}

std::string format_metrics(const Metrics& m, const std::vector<std::string>& labels) {
  std::ostringstream os;
  char buf[160];
  std::snprintf(buf, sizeof buf, "n=%zu  accuracy=%.4f  macro_f1=%.4f  weighted_f1=%.4f\n", m.n,
                m.accuracy, m.macro_f1, m.weighted_f1);
  os << buf;
  std::size_t w = 7;
  for (const auto& l : labels) w = std::max(w, l.size() + 2);
  os << pad("class", w) << pad("P", 9) << pad("R", 9) << pad("F1", 9) << "support\n";
  for (std::size_t c = 0; c < m.per_class.size(); ++c) {
    const auto& s = m.per_class[c];
    std::snprintf(buf, sizeof buf, "%-8.4f %-8.4f %-8.4f %zu\n", s.precision, s.recall, s.f1,
                  s.support);
    os << pad(c < labels.size() ? labels[c] : std::to_string(c), w) << buf;
  }
  return os.str();
}

}  // namespace hpm
