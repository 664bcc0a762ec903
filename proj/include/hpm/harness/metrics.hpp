#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace hpm {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

struct Metrics {
  double accuracy = 0.0;
  double macro_f1 = 0.0;     // unweighted mean over all classes of the label space
  double weighted_f1 = 0.0;  // support-weighted
  std::vector<ClassScores> per_class;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][pred]
  std::size_t n = 0;
};

// gold and pred hold label indices in [0, classes).
Metrics compute_metrics(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred,
                        std::size_t classes);

struct MeanStd {
  double mean = 0.0;
  double stddev = 0.0;  // population
};

MeanStd mean_std(const std::vector<double>& values);

}  // namespace hpm
