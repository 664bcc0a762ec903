#pragma once

#include <cstddef>
#include <optional>
#include <random>
#include <string>
#include <string_view>

#include "hpm/numerics/checkpoint.hpp"
#include "hpm/numerics/tensor.hpp"
#include "hpm/prompt/compile.hpp"

namespace hpm {

enum class FusionMode {
  // Biaffine over H + SDPA(H); merge(S, H + SDPA(H)).
  BiaffineSdpa,
  // SDPA and biaffine both read H independently; merge(S, SDPA(H)).
  BiaffinePlusSdpa,
};

std::string_view to_string(FusionMode mode);
FusionMode parse_fusion_mode(std::string_view text);

struct InferenceUnitConfig {
  std::size_t hidden_size = 16;
  std::size_t lstm_layers = 1;
  std::size_t m = 3;             // relation types
  std::size_t reduced_dim = 0;   // biaffine d_r; 0 means hidden_size / 2
  std::size_t sdpa_heads = 1;
  double dropout = 0.1;          // on MLP_f / MLP_s outputs
  FusionMode fusion_mode = FusionMode::BiaffineSdpa;
  bool enable_biaffine = true;
  bool enable_sdpa = true;
  bool gated_combination = false;  // H + alpha * A with learnable alpha

  std::size_t effective_reduced_dim() const {
    return reduced_dim ? reduced_dim : hidden_size / 2;
  }
  void validate() const;
};

// y = x W + b, optionally followed by tanh.
struct Dense {
  Tensor weight;  // [in, out]
  Tensor bias;    // [out]

  static Dense create(std::size_t in, std::size_t out, std::mt19937_64& rng);
  Tensor linear(const Tensor& x) const;
  Tensor operator()(const Tensor& x) const;  // tanh(linear(x))
  NamedTensors parameters(const std::string& prefix) const;
};

struct LstmDirection {
  Tensor w_ih;  // [input, 4h], gate blocks i|f|g|o
  Tensor w_hh;  // [h, 4h]
  Tensor bias;  // [4h]
};

class BiLstm {
 public:
  // Input weights fan-in uniform, recurrent weights orthogonal, forget bias 1.
  static BiLstm create(std::size_t input_dim, std::size_t hidden_size, std::size_t layers,
                       std::mt19937_64& rng);

  // [n, input_dim] -> [n, hidden_size]; forward states in the first half.
  Tensor encode(const Tensor& x) const;
  NamedTensors parameters(const std::string& prefix) const;

  std::size_t hidden_size() const { return hidden_size_; }
  std::vector<std::pair<LstmDirection, LstmDirection>>& layers() { return layers_; }

 private:
  std::size_t hidden_size_ = 0;
  std::vector<std::pair<LstmDirection, LstmDirection>> layers_;
};

// Runs one LSTM direction over the rows of x, returning [n, h] in input order.
Tensor lstm_run(const Tensor& x, const LstmDirection& dir, bool reverse);

struct SdpaParams {
  Tensor wq, wk, wv;  // [h, h]
  std::size_t heads = 1;

  static SdpaParams create(std::size_t h, std::size_t heads, std::mt19937_64& rng);
  NamedTensors parameters(const std::string& prefix) const;
};

// softmax(Q K^T / sqrt(d_k)) V per head, heads concatenated.
Tensor sdpa(const Tensor& h, const SdpaParams& params);
// Attention matrix [n, n] of one head.
Tensor sdpa_weights(const Tensor& h, const SdpaParams& params, std::size_t head = 0);

struct BiaffineParams {
  Dense mlp_f;  // hidden -> d_r, tanh
  Dense mlp_s;
  Tensor u1;    // [d_r, m, d_r]
  Tensor u2;    // [m, 2 d_r]
  Tensor bias;  // [m]
  std::size_t d_r = 0;
  std::size_t m = 0;

  static BiaffineParams create(std::size_t hidden, std::size_t d_r, std::size_t m,
                               std::mt19937_64& rng);
  NamedTensors parameters(const std::string& prefix) const;
};

// scores[i, j, k]: probability of relation type k for the pair (i, j).
struct RelationTensor {
  Tensor scores;  // [n, n, m]
  double at(std::size_t i, std::size_t j, std::size_t k) const;
};

// g_ijk = f_i^T U1[:,k,:] s_j + U2[k] . (f_i ++ s_j) + b_k, softmax over k,
// where f = MLP_f(H_f), s = MLP_s(H_s). Dropout (if rng given and p > 0)
// applies to f and s.
RelationTensor biaffine_relations(const Tensor& h_f, const Tensor& h_s,
                                  const BiaffineParams& params, double dropout = 0.0,
                                  std::mt19937_64* rng = nullptr);

// Prompt encoder whose outputs replace the pseudo-token embeddings.
class InferenceUnit {
 public:
  static InferenceUnit create(std::size_t d_t, const InferenceUnitConfig& config,
                              std::mt19937_64& rng);

  // Replacement vectors [|pseudo_positions|, d_t] for the compiled input.
  Tensor encode_pseudo_tokens(const HybridInput& input, const Tensor& embeddings);
  // Same pipeline evaluated at every position: [n, d_t].
  Tensor encode_sequence(const Tensor& embeddings);

  // Dropout is active only in training mode.
  void set_training(bool on) { training_ = on; }
  bool training() const { return training_; }
  void reseed(std::uint64_t seed) { rng_.seed(seed); }

  const InferenceUnitConfig& config() const { return config_; }
  InferenceUnitConfig& mutable_config() { return config_; }
  BiaffineParams& biaffine() { return biaffine_; }
  BiLstm& lstm() { return lstm_; }
  SdpaParams& sdpa_params() { return sdpa_; }
  NamedTensors parameters(const std::string& prefix) const;

 private:
  InferenceUnitConfig config_;
  std::size_t d_t_ = 0;
  BiLstm lstm_;
  SdpaParams sdpa_;
  BiaffineParams biaffine_;
  Tensor relation_weights_;  // [m], collapses R to an n x n attention map
  Tensor gate_;              // [1], used when gated_combination
  Dense merge_hidden_;       // [2h -> h], tanh
  Dense merge_out_;          // [h -> d_t], linear
  bool training_ = false;
  std::mt19937_64 rng_{0};
};

}  // namespace hpm
