#include "hpm/harness/metrics.hpp"

#include <cmath>

#include "hpm/errors.hpp"

namespace hpm {

Metrics compute_metrics(const std::vector<std::size_t>& gold, const std::vector<std::size_t>& pred,
                        std::size_t classes) {
  if (gold.size() != pred.size()) throw ContractError("gold/prediction length mismatch");
  if (gold.empty()) throw ContractError("metrics need at least one sample");
  if (classes == 0) throw ContractError("metrics need at least one class");
  Metrics m;
  m.n = gold.size();
  m.confusion.assign(classes, std::vector<std::size_t>(classes, 0));
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    if (gold[i] >= classes || pred[i] >= classes) throw ContractError("label index out of range");
    ++m.confusion[gold[i]][pred[i]];
    if (gold[i] == pred[i]) ++correct;
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(m.n);
  m.per_class.resize(classes);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t tp = m.confusion[c][c], predicted = 0, actual = 0;
    for (std::size_t k = 0; k < classes; ++k) {
      predicted += m.confusion[k][c];
      actual += m.confusion[c][k];
    }
    auto& s = m.per_class[c];
    s.support = actual;
    s.precision = predicted ? static_cast<double>(tp) / static_cast<double>(predicted) : 0.0;
    s.recall = actual ? static_cast<double>(tp) / static_cast<double>(actual) : 0.0;
    const double pr = s.precision + s.recall;
    s.f1 = pr > 0.0 ? 2.0 * s.precision * s.recall / pr : 0.0;
    m.macro_f1 += s.f1;
    m.weighted_f1 += s.f1 * static_cast<double>(actual);
  }
  m.macro_f1 /= static_cast<double>(classes);
  m.weighted_f1 /= static_cast<double>(m.n);
  return m;
}

MeanStd mean_std(const std::vector<double>& values) {
  MeanStd r;
  if (values.empty()) return r;
  for (double v : values) r.mean += v;
  r.mean /= static_cast<double>(values.size());
  double var = 0.0;
  for (double v : values) var += (v - r.mean) * (v - r.mean);
  r.stddev = std::sqrt(var / static_cast<double>(values.size()));
  return r;
}

}  // namespace hpm
