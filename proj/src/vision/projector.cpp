#include "hpm/vision/projector.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <optional>
#include <istream>
#include <ostream>
#include <sstream>

#include "hpm/errors.hpp"
#include "hpm/numerics/init.hpp"
#include "hpm/numerics/ops.hpp"

namespace hpm {

FeatureMap read_features(std::istream& in) {
  FeatureMap out;
  std::string line;
  std::size_t lineno = 0;
  std::optional<std::size_t> dim;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) throw FormatError("expected id<TAB>values", lineno);
    std::string id = line.substr(0, tab);
    std::vector<double> values;
    std::string_view rest(line);
    rest.remove_prefix(tab + 1);
    while (true) {
      const auto comma = rest.find(',');
      std::string_view field = rest.substr(0, comma);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      double v = 0.0;
      auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
      if (field.empty() || ec != std::errc() || ptr != field.data() + field.size()) {
        throw FormatError("malformed value '" + std::string(field) + "'", lineno);
      }
      if (!std::isfinite(v)) throw FormatError("non-finite value", lineno);
      values.push_back(v);
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    if (dim && *dim != values.size()) {
      throw FormatError("record '" + id + "' has dimension " + std::to_string(values.size()) +
                            ", expected " + std::to_string(*dim),
                        lineno);
    }
    dim = values.size();
    if (out.count(id)) throw FormatError("duplicate feature id '" + id + "'", lineno);
    out.emplace(id, FeatureSource{id, std::move(values)});
  }
  return out;
}

FeatureMap load_features(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open feature file " + path);
  return read_features(in);
}

void write_features(std::ostream& out, const FeatureMap& features) {
  out << std::setprecision(17);
  for (const auto& [id, f] : features) {
    out << id << '\t';
    for (std::size_t i = 0; i < f.vector.size(); ++i) {
      if (i) out << ',';
      out << f.vector[i];
    }
    out << '\n';
  }
}

FeatureMap synthetic_features(std::size_t count, std::size_t dim, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> dist(0.0, 1.0);
  FeatureMap out;
  for (std::size_t i = 0; i < count; ++i) {
    std::ostringstream id;
    id << "img" << std::setw(4) << std::setfill('0') << i;
    FeatureSource f{id.str(), std::vector<double>(dim)};
    for (auto& v : f.vector) v = dist(rng);
    out.emplace(f.id, std::move(f));
  }
  return out;
}

VisualProjector VisualProjector::create(std::size_t n_tokens, std::size_t d_t, std::size_t d_v,
                                        std::mt19937_64& rng) {
  if (n_tokens < 1 || n_tokens > kMaxVisualTokens) {
    throw ContractError("visual token count must be in [1, 5]");
  }
  if (d_t == 0 || d_v == 0) throw ContractError("projector dimensions must be positive");
  VisualProjector p;
  p.n_tokens = n_tokens;
  p.d_t = d_t;
  p.d_v = d_v;
  p.weight = init::fan_in_uniform({d_t * n_tokens, d_v}, d_v, rng);
  p.bias = Tensor::zeros({d_t * n_tokens}, true);
  return p;
}

NamedTensors VisualProjector::parameters(const std::string& prefix) const {
  return {{prefix + "weight", weight}, {prefix + "bias", bias}};
}

VisualTokens project(const Tensor& feature, const VisualProjector& projector) {
  if (feature.rank() != 1 || feature.dim(0) != projector.d_v) {
    throw ContractError("feature dimension " + shape_string(feature.shape()) +
                        " does not match projector d_v " + std::to_string(projector.d_v));
  }
  Tensor column = reshape(feature, {projector.d_v, 1});
  Tensor v = reshape(matmul(projector.weight, column), {projector.d_t * projector.n_tokens});
  v = add(v, projector.bias);
  return {reshape(v, {projector.n_tokens, projector.d_t})};
}

VisualTokens project(const FeatureSource& source, const VisualProjector& projector) {
  if (source.vector.size() != projector.d_v) {
    throw ContractError("feature '" + source.id + "' has dimension " +
                        std::to_string(source.vector.size()) + ", projector expects " +
                        std::to_string(projector.d_v));
  }
  return project(Tensor({source.vector.size()}, source.vector), projector);
}

}  // namespace hpm
