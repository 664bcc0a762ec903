#include "hpm/numerics/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "hpm/errors.hpp"

namespace hpm {

GradReport grad_check(const std::function<Tensor()>& f, const std::vector<Tensor>& params,
                      double epsilon, double tolerance, double floor) {
  if (!(epsilon >= 1e-7 && epsilon <= 1e-3)) {
    throw ContractError("grad_check: epsilon must lie in [1e-7, 1e-3]");
  }
  if (!(floor > 0.0)) throw ContractError("grad_check: floor must be positive");
  for (const auto& p : params) {
    if (!p.requires_grad()) throw ContractError("grad_check: parameter does not require grad");
  }

  auto params_copy = params;
  for (auto& p : params_copy) p.zero_grad();
  Tensor loss = f();
  if (loss.size() != 1) throw ContractError("grad_check: f must return a scalar");
  const double base = loss.item();
  {
    NoGradGuard guard;
    if (f().item() != base) {
      throw ContractError("grad_check: f is not deterministic (is dropout active?)");
    }
  }
  loss.backward();

  GradReport report;
  report.epsilon = epsilon;
  report.tolerance = tolerance;
  NoGradGuard guard;
  for (auto& p : params_copy) {
    std::vector<double> analytic(p.size(), 0.0);
    if (p.has_grad()) std::copy(p.grad().begin(), p.grad().end(), analytic.begin());
    auto values = p.mutable_data();
    double worst = 0.0;
    for (std::size_t i = 0; i < values.size(); ++i) {
      const double saved = values[i];
      values[i] = saved + epsilon;
      const double plus = f().item();
      values[i] = saved - epsilon;
      const double minus = f().item();
      values[i] = saved;
      const double numeric = (plus - minus) / (2.0 * epsilon);
      const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), floor});
      worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
    }
    report.max_rel_error.push_back(worst);
    report.max_error = std::max(report.max_error, worst);
  }
  report.pass = report.max_error < tolerance;
  return report;
}

}  // namespace hpm
