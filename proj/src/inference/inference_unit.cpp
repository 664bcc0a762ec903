#include "hpm/inference/inference_unit.hpp"

#include <cmath>
#include <numeric>

#include "hpm/errors.hpp"
#include "hpm/numerics/init.hpp"
#include "hpm/numerics/ops.hpp"

namespace hpm {

namespace {

void append(NamedTensors& dst, NamedTensors src) {
  for (auto& p : src) dst.push_back(std::move(p));
}

}  // namespace

std::string_view to_string(FusionMode mode) {
  return mode == FusionMode::BiaffineSdpa ? "biaffine_sdpa" : "biaffine_plus_sdpa";
}

FusionMode parse_fusion_mode(std::string_view text) {
  if (text == "biaffine_sdpa" || text == "BIAFFINE_SDPA") return FusionMode::BiaffineSdpa;
  if (text == "biaffine_plus_sdpa" || text == "BIAFFINE_PLUS_SDPA") {
    return FusionMode::BiaffinePlusSdpa;
  }
  throw ContractError("unknown fusion mode '" + std::string(text) + "'");
}

void InferenceUnitConfig::validate() const {
  if (hidden_size == 0 || hidden_size % 2 != 0) {
    throw ContractError("iu.hidden_size must be positive and even");
  }
  if (lstm_layers < 1) throw ContractError("iu.lstm_layers must be >= 1");
  if (m < 1) throw ContractError("iu.m must be >= 1");
  if (effective_reduced_dim() == 0) throw ContractError("biaffine reduced dim must be positive");
  if (sdpa_heads == 0 || hidden_size % sdpa_heads != 0) {
    throw ContractError("iu.hidden_size must be divisible by the SDPA head count");
  }
  if (!(dropout >= 0.0 && dropout < 1.0)) throw ContractError("iu.dropout must be in [0, 1)");
}

Dense Dense::create(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  return {init::fan_in_uniform({in, out}, in, rng), Tensor::zeros({out}, true)};
}

Tensor Dense::linear(const Tensor& x) const { return add(matmul(x, weight), bias); }

Tensor Dense::operator()(const Tensor& x) const { return tanh(linear(x)); }

NamedTensors Dense::parameters(const std::string& prefix) const {
  return {{prefix + "weight", weight}, {prefix + "bias", bias}};
}

BiLstm BiLstm::create(std::size_t input_dim, std::size_t hidden_size, std::size_t layers,
                      std::mt19937_64& rng) {
  if (hidden_size % 2 != 0) throw ContractError("BiLSTM hidden size must be even");
  BiLstm lstm;
  lstm.hidden_size_ = hidden_size;
  const std::size_t h = hidden_size / 2;
  auto make_dir = [&](std::size_t in) {
    LstmDirection d;
    d.w_ih = init::fan_in_uniform({in, 4 * h}, in, rng);
    d.w_hh = init::orthogonal(h, 4 * h, rng);
    std::vector<double> b(4 * h, 0.0);
    for (std::size_t k = h; k < 2 * h; ++k) b[k] = 1.0;  // forget gate
    d.bias = Tensor({4 * h}, std::move(b), true);
    return d;
  };
  for (std::size_t l = 0; l < layers; ++l) {
    const std::size_t in = l == 0 ? input_dim : hidden_size;
    auto fwd = make_dir(in);
    auto bwd = make_dir(in);
    lstm.layers_.emplace_back(std::move(fwd), std::move(bwd));
  }
  return lstm;
}

Tensor lstm_run(const Tensor& x, const LstmDirection& dir, bool reverse) {
  const std::size_t n = x.dim(0);
  const std::size_t h = dir.w_hh.dim(0);
  Tensor projected = add(matmul(x, dir.w_ih), dir.bias);  // [n, 4h]
  Tensor hs = Tensor::zeros({1, h});
  Tensor cs = Tensor::zeros({1, h});
  std::vector<Tensor> outputs(n);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    Tensor gates = add(slice(projected, 0, t, t + 1), matmul(hs, dir.w_hh));
    Tensor i = sigmoid(slice(gates, 1, 0, h));
    Tensor f = sigmoid(slice(gates, 1, h, 2 * h));
    Tensor g = tanh(slice(gates, 1, 2 * h, 3 * h));
    Tensor o = sigmoid(slice(gates, 1, 3 * h, 4 * h));
    cs = add(mul(f, cs), mul(i, g));
    hs = mul(o, tanh(cs));
    outputs[t] = hs;
  }
  return concat(outputs, 0);
}

Tensor BiLstm::encode(const Tensor& x) const {
  if (x.rank() != 2 || x.dim(0) == 0) throw ContractError("BiLSTM input must be [n>=1, d]");
  Tensor cur = x;
  for (const auto& [fwd, bwd] : layers_) {
    cur = concat({lstm_run(cur, fwd, false), lstm_run(cur, bwd, true)}, 1);
  }
  return cur;
}

NamedTensors BiLstm::parameters(const std::string& prefix) const {
  NamedTensors out;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& [fwd, bwd] = layers_[l];
    const std::string p = prefix + "l" + std::to_string(l) + ".";
    out.push_back({p + "fwd.w_ih", fwd.w_ih});
    out.push_back({p + "fwd.w_hh", fwd.w_hh});
    out.push_back({p + "fwd.bias", fwd.bias});
    out.push_back({p + "bwd.w_ih", bwd.w_ih});
    out.push_back({p + "bwd.w_hh", bwd.w_hh});
    out.push_back({p + "bwd.bias", bwd.bias});
  }
  return out;
}

SdpaParams SdpaParams::create(std::size_t h, std::size_t heads, std::mt19937_64& rng) {
  return {init::fan_in_uniform({h, h}, h, rng), init::fan_in_uniform({h, h}, h, rng),
          init::fan_in_uniform({h, h}, h, rng), heads};
}

NamedTensors SdpaParams::parameters(const std::string& prefix) const {
  return {{prefix + "wq", wq}, {prefix + "wk", wk}, {prefix + "wv", wv}};
}

namespace {

Tensor head_attention(const Tensor& q, const Tensor& k, std::size_t d_k) {
  Tensor logits = scale(matmul(q, transpose(k)), 1.0 / std::sqrt(static_cast<double>(d_k)));
  return softmax(logits, 1);
}

}  // namespace

Tensor sdpa_weights(const Tensor& h, const SdpaParams& params, std::size_t head) {
  const std::size_t dim = params.wq.dim(1);
  const std::size_t d_k = dim / params.heads;
  Tensor q = slice(matmul(h, params.wq), 1, head * d_k, (head + 1) * d_k);
  Tensor k = slice(matmul(h, params.wk), 1, head * d_k, (head + 1) * d_k);
  return head_attention(q, k, d_k);
}

Tensor sdpa(const Tensor& h, const SdpaParams& params) {
  const std::size_t dim = params.wq.dim(1);
  if (params.heads == 0 || dim % params.heads != 0) {
    throw ContractError("SDPA width must be divisible by the head count");
  }
  const std::size_t d_k = dim / params.heads;
  Tensor q = matmul(h, params.wq);
  Tensor k = matmul(h, params.wk);
  Tensor v = matmul(h, params.wv);
  if (params.heads == 1) return matmul(head_attention(q, k, d_k), v);
  std::vector<Tensor> heads;
  for (std::size_t i = 0; i < params.heads; ++i) {
    const std::size_t b = i * d_k, e = b + d_k;
    heads.push_back(
        matmul(head_attention(slice(q, 1, b, e), slice(k, 1, b, e), d_k), slice(v, 1, b, e)));
  }
  return concat(heads, 1);
}

BiaffineParams BiaffineParams::create(std::size_t hidden, std::size_t d_r, std::size_t m,
                                      std::mt19937_64& rng) {
  BiaffineParams p;
  p.mlp_f = Dense::create(hidden, d_r, rng);
  p.mlp_s = Dense::create(hidden, d_r, rng);
  p.u1 = init::fan_in_uniform({d_r, m, d_r}, d_r, rng);
  p.u2 = init::fan_in_uniform({m, 2 * d_r}, 2 * d_r, rng);
  p.bias = Tensor::zeros({m}, true);
  p.d_r = d_r;
  p.m = m;
  return p;
}

NamedTensors BiaffineParams::parameters(const std::string& prefix) const {
  NamedTensors out = mlp_f.parameters(prefix + "mlp_f.");
  append(out, mlp_s.parameters(prefix + "mlp_s."));
  out.push_back({prefix + "u1", u1});
  out.push_back({prefix + "u2", u2});
  out.push_back({prefix + "bias", bias});
  return out;
}

double RelationTensor::at(std::size_t i, std::size_t j, std::size_t k) const {
  const auto& s = scores.shape();
  return scores.data()[(i * s[1] + j) * s[2] + k];
}

RelationTensor biaffine_relations(const Tensor& h_f, const Tensor& h_s,
                                  const BiaffineParams& params, double dropout_p,
                                  std::mt19937_64* rng) {
  if (h_f.rank() != 2 || h_s.rank() != 2 || h_f.dim(0) != h_s.dim(0)) {
    throw ContractError("biaffine inputs must both be [n, h] with equal n");
  }
  const std::size_t n = h_f.dim(0);
  const std::size_t d_r = params.d_r;
  const std::size_t m = params.m;

  Tensor f = params.mlp_f(h_f);
  Tensor s = params.mlp_s(h_s);
  if (rng && dropout_p > 0.0) {
    f = dropout(f, dropout_p, *rng);
    s = dropout(s, dropout_p, *rng);
  }

  // Bilinear term, laid out [n, n, m].
  Tensor t = matmul(f, reshape(params.u1, {d_r, m * d_r}));             // [n, m*d_r]
  Tensor bil = matmul(reshape(t, {n * m, d_r}), transpose(s));          // [(i,k), j]
  bil = permute(reshape(bil, {n, m, n}), {0, 2, 1});                    // [i, j, k]

  // Linear term over the concatenation f_i ++ s_j.
  Tensor from_f = matmul(f, transpose(slice(params.u2, 1, 0, d_r)));    // [n, m]
  Tensor from_s = matmul(s, transpose(slice(params.u2, 1, d_r, 2 * d_r)));
  std::vector<std::size_t> rows_i(n * n), rows_j(n * n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      rows_i[i * n + j] = i;
      rows_j[i * n + j] = j;
    }
  }
  Tensor lin = add(gather(from_f, 0, rows_i), gather(from_s, 0, rows_j));  // [n*n, m]

  Tensor logits = add(add(bil, reshape(lin, {n, n, m})), params.bias);
  return {softmax(logits, 2)};
}

InferenceUnit InferenceUnit::create(std::size_t d_t, const InferenceUnitConfig& config,
                                    std::mt19937_64& rng) {
  config.validate();
  InferenceUnit unit;
  unit.config_ = config;
  unit.d_t_ = d_t;
  const std::size_t h = config.hidden_size;
  unit.lstm_ = BiLstm::create(d_t, h, config.lstm_layers, rng);
  unit.sdpa_ = SdpaParams::create(h, config.sdpa_heads, rng);
  unit.biaffine_ = BiaffineParams::create(h, config.effective_reduced_dim(), config.m, rng);
  unit.relation_weights_ = init::fan_in_uniform({config.m}, config.m, rng);
  unit.gate_ = Tensor::full({1}, 1.0, true);
  unit.merge_hidden_ = Dense::create(2 * h, h, rng);
  unit.merge_out_ = Dense::create(h, d_t, rng);
  return unit;
}

Tensor InferenceUnit::encode_sequence(const Tensor& embeddings) {
  if (embeddings.rank() != 2 || embeddings.dim(1) != d_t_) {
    throw ContractError("inference unit expects [n, " + std::to_string(d_t_) + "] embeddings");
  }
  const std::size_t n = embeddings.dim(0);
  const std::size_t h = config_.hidden_size;
  const bool use_sdpa = config_.enable_sdpa;
  const bool use_biaffine = config_.enable_biaffine;

  Tensor states = lstm_.encode(embeddings);
  Tensor attended = use_sdpa ? sdpa(states, sdpa_) : states;

  Tensor context;   // second half of the merge input
  Tensor relation_input;
  if (config_.fusion_mode == FusionMode::BiaffineSdpa) {
    if (use_sdpa && config_.gated_combination) {
      Tensor scaled = reshape(mul(reshape(attended, {n * h, 1}), gate_), {n, h});
      context = add(states, scaled);
    } else {
      context = use_sdpa ? add(states, attended) : states;
    }
    relation_input = context;
  } else {
    context = attended;
    relation_input = states;
  }

  Tensor syntax;
  if (use_biaffine) {
    std::mt19937_64* rng = training_ ? &rng_ : nullptr;
    RelationTensor r =
        biaffine_relations(relation_input, relation_input, biaffine_, config_.dropout, rng);
    const std::size_t m = config_.m;
    Tensor pair_weights =
        reshape(matmul(reshape(r.scores, {n * n, m}), reshape(relation_weights_, {m, 1})), {n, n});
    syntax = matmul(pair_weights, relation_input);
  } else {
    syntax = Tensor::zeros({n, h});
  }
  Tensor merged = merge_hidden_(concat({syntax, context}, 1));
  return merge_out_.linear(merged);
}

Tensor InferenceUnit::encode_pseudo_tokens(const HybridInput& input, const Tensor& embeddings) {
  if (input.pseudo_positions.empty()) return Tensor::zeros({0, d_t_});
  if (embeddings.rank() != 2 || embeddings.dim(0) != input.n) {
    throw ContractError("embedding rows do not match the compiled input length");
  }
  return gather(encode_sequence(embeddings), 0, input.pseudo_positions);
}

NamedTensors InferenceUnit::parameters(const std::string& prefix) const {
  NamedTensors out = lstm_.parameters(prefix + "lstm.");
  append(out, sdpa_.parameters(prefix + "sdpa."));
  append(out, biaffine_.parameters(prefix + "biaffine."));
  out.push_back({prefix + "relation_weights", relation_weights_});
  out.push_back({prefix + "gate", gate_});
  append(out, merge_hidden_.parameters(prefix + "merge_hidden."));
  append(out, merge_out_.parameters(prefix + "merge_out."));
  return out;
}

}  // namespace hpm
