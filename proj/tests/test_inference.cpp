#include <gtest/gtest.h>

#include <cmath>

#include "hpm/errors.hpp"
#include "hpm/inference/inference_unit.hpp"
#include "hpm/numerics/grad_check.hpp"
#include "hpm/numerics/ops.hpp"
#include "test_util.hpp"

using namespace hpm;
using testutil::random_tensor;
using testutil::to_vector;

namespace {

using Mat = std::vector<std::vector<double>>;

Mat rows(const Tensor& t) {
  Mat out(t.dim(0), std::vector<double>(t.dim(1)));
  for (std::size_t i = 0; i < t.dim(0); ++i) {
    for (std::size_t j = 0; j < t.dim(1); ++j) out[i][j] = t.at(i, j);
  }
  return out;
}

double sig(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Scalar-loop LSTM, gate blocks i|f|g|o.
Mat lstm_oracle(const Mat& x, const LstmDirection& d, bool reverse) {
  const Mat wih = rows(d.w_ih), whh = rows(d.w_hh);
  const auto b = to_vector(d.bias);
  const std::size_t n = x.size(), h = whh.size();
  std::vector<double> hs(h, 0.0), cs(h, 0.0);
  Mat out(n);
  for (std::size_t step = 0; step < n; ++step) {
    const std::size_t t = reverse ? n - 1 - step : step;
    std::vector<double> z(4 * h);
    for (std::size_t k = 0; k < 4 * h; ++k) {
      z[k] = b[k];
      for (std::size_t a = 0; a < x[t].size(); ++a) z[k] += x[t][a] * wih[a][k];
      for (std::size_t a = 0; a < h; ++a) z[k] += hs[a] * whh[a][k];
    }
    for (std::size_t k = 0; k < h; ++k) {
      const double i = sig(z[k]), f = sig(z[h + k]), g = std::tanh(z[2 * h + k]),
                   o = sig(z[3 * h + k]);
      cs[k] = f * cs[k] + i * g;
      hs[k] = o * std::tanh(cs[k]);
    }
    out[t] = hs;
  }
  return out;
}

Mat matmul_m(const Mat& a, const Mat& b) {
  Mat out(a.size(), std::vector<double>(b[0].size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < b.size(); ++k)
      for (std::size_t j = 0; j < b[0].size(); ++j) out[i][j] += a[i][k] * b[k][j];
  return out;
}

Mat sdpa_oracle(const Mat& h, const SdpaParams& p) {
  const Mat q = matmul_m(h, rows(p.wq)), k = matmul_m(h, rows(p.wk)), v = matmul_m(h, rows(p.wv));
  const std::size_t n = h.size(), dim = q[0].size(), dk = dim / p.heads;
  Mat out(n, std::vector<double>(dim, 0.0));
  for (std::size_t head = 0; head < p.heads; ++head) {
    const std::size_t off = head * dk;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<double> s(n);
      for (std::size_t j = 0; j < n; ++j) {
        double dot = 0;
        for (std::size_t c = 0; c < dk; ++c) dot += q[i][off + c] * k[j][off + c];
        s[j] = dot / std::sqrt(static_cast<double>(dk));
      }
      const auto w = testutil::softmax_oracle(s);
      for (std::size_t j = 0; j < n; ++j)
        for (std::size_t c = 0; c < dk; ++c) out[i][off + c] += w[j] * v[j][off + c];
    }
  }
  return out;
}

// g_ijk from scalar loops, softmax over k.
std::vector<double> biaffine_oracle(const Mat& hf, const Mat& hs, const BiaffineParams& p) {
  auto mlp = [](const Mat& x, const Dense& d) {
    Mat y = matmul_m(x, rows(d.weight));
    const auto b = to_vector(d.bias);
    for (auto& r : y)
      for (std::size_t j = 0; j < r.size(); ++j) r[j] = std::tanh(r[j] + b[j]);
    return y;
  };
  const Mat f = mlp(hf, p.mlp_f), s = mlp(hs, p.mlp_s);
  const auto u1 = to_vector(p.u1), u2 = to_vector(p.u2), bias = to_vector(p.bias);
  const std::size_t n = hf.size(), r = p.d_r, m = p.m;
  std::vector<double> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      std::vector<double> g(m);
      for (std::size_t k = 0; k < m; ++k) {
        double v = bias[k];
        for (std::size_t a = 0; a < r; ++a)
          for (std::size_t c = 0; c < r; ++c) v += f[i][a] * u1[(a * m + k) * r + c] * s[j][c];
        for (std::size_t a = 0; a < r; ++a) v += u2[k * 2 * r + a] * f[i][a];
        for (std::size_t c = 0; c < r; ++c) v += u2[k * 2 * r + r + c] * s[j][c];
        g[k] = v;
      }
      for (double x : testutil::softmax_oracle(g)) out.push_back(x);
    }
  }
  return out;
}

void zero_all(const NamedTensors& params) {
  for (auto [name, t] : params) {
    for (auto& v : t.mutable_data()) v = 0.0;
  }
}

}  // namespace

TEST(Lstm, HandCaseSingleUnit) {
  // One unit, input weights all 1, recurrent 0, bias 0; x = [1].
  LstmDirection d{Tensor({1, 4}, {1, 1, 1, 1}, true), Tensor({1, 4}, {0, 0, 0, 0}, true),
                  Tensor({4}, {0, 0, 0, 0}, true)};
  const Tensor out = lstm_run(Tensor({1, 1}, {1.0}), d, false);
  const double c = sig(1.0) * std::tanh(1.0);
  EXPECT_NEAR(out.item(), sig(1.0) * std::tanh(c), 1e-15);
}

TEST(Lstm, MatchesScalarOracleBothDirections) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 1 + seed % 6, in = 2 + seed % 3, h = 2 + seed % 4;
    BiLstm lstm = BiLstm::create(in, 2 * h, 1, rng);
    const Tensor x = random_tensor({n, in}, rng, 1.0, false);
    const auto& [fwd, bwd] = lstm.layers()[0];
    for (bool rev : {false, true}) {
      const Mat want = lstm_oracle(rows(x), rev ? bwd : fwd, rev);
      const Mat got = rows(lstm_run(x, rev ? bwd : fwd, rev));
      for (std::size_t t = 0; t < n; ++t)
        for (std::size_t k = 0; k < h; ++k) EXPECT_NEAR(got[t][k], want[t][k], 1e-13);
    }
    const Mat both = rows(lstm.encode(x));
    const Mat f = lstm_oracle(rows(x), fwd, false), b = lstm_oracle(rows(x), bwd, true);
    for (std::size_t t = 0; t < n; ++t) {
      EXPECT_NEAR(both[t][0], f[t][0], 1e-13);
      EXPECT_NEAR(both[t][h], b[t][0], 1e-13);
    }
  }
}

TEST(Lstm, InitForgetBiasAndOrthogonalRecurrence) {
  std::mt19937_64 rng(1);
  BiLstm lstm = BiLstm::create(3, 8, 1, rng);
  const auto b = to_vector(lstm.layers()[0].first.bias);
  for (std::size_t k = 0; k < 16; ++k) EXPECT_EQ(b[k], (k >= 4 && k < 8) ? 1.0 : 0.0);
  const Tensor w = lstm.layers()[0].first.w_hh;  // [4, 16], orthonormal rows
  const Tensor wwt = matmul(w, transpose(w));
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(wwt.at(i, j), i == j ? 1.0 : 0.0, 1e-12);
  EXPECT_THROW(BiLstm::create(3, 7, 1, rng), ContractError);
}

TEST(Sdpa, HandCaseIdentityWeights) {
  SdpaParams p{Tensor({2, 2}, {1, 0, 0, 1}), Tensor({2, 2}, {1, 0, 0, 1}),
               Tensor({2, 2}, {1, 0, 0, 1}), 1};
  const Tensor h({2, 2}, {1, 0, 0, 1});
  const double a = std::exp(1 / std::sqrt(2.0)) / (std::exp(1 / std::sqrt(2.0)) + 1.0);
  EXPECT_EQ(rows(sdpa(h, p)), (Mat{{a, 1 - a}, {1 - a, a}}));
  const Tensor w = sdpa_weights(h, p);
  EXPECT_NEAR(w.at(0, 0), a, 1e-15);
}

TEST(Sdpa, UniformWhenQueriesVanish) {
  std::mt19937_64 rng(2);
  SdpaParams p = SdpaParams::create(4, 2, rng);
  zero_all({{"wq", p.wq}});
  const Tensor h = random_tensor({5, 4}, rng, 1.0, false);
  const Tensor w = sdpa_weights(h, p, 1);
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 5; ++j) EXPECT_NEAR(w.at(i, j), 0.2, 1e-15);
}

TEST(Sdpa, MatchesOracleMultiHead) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t heads = 1 + seed % 2, dim = 4 * heads, n = 1 + seed % 6;
    SdpaParams p = SdpaParams::create(dim, heads, rng);
    const Tensor h = random_tensor({n, dim}, rng, 1.0, false);
    const Mat want = sdpa_oracle(rows(h), p), got = rows(sdpa(h, p));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < dim; ++c) EXPECT_NEAR(got[i][c], want[i][c], 1e-13);
  }
}

TEST(Biaffine, HandCaseTwoByTwoByTwo) {
  std::mt19937_64 rng(0);
  BiaffineParams p = BiaffineParams::create(2, 2, 2, rng);
  // Identity MLP weights; U1 has (a=0,k=0,c=0) and (a=1,k=1,c=0) set; U2 row 1 picks s_j[0].
  std::vector<double> eye = {1, 0, 0, 1};
  std::copy(eye.begin(), eye.end(), p.mlp_f.weight.mutable_data().begin());
  std::copy(eye.begin(), eye.end(), p.mlp_s.weight.mutable_data().begin());
  std::vector<double> u1 = {1, 0, 0, 0,  0, 0, 1, 0};  // [a, k, c]
  std::copy(u1.begin(), u1.end(), p.u1.mutable_data().begin());
  std::vector<double> u2 = {0, 0, 0, 0,  0, 0, 1, 0};
  std::copy(u2.begin(), u2.end(), p.u2.mutable_data().begin());
  const Tensor h({2, 2}, {1, 0, 0, 1});
  const RelationTensor r = biaffine_relations(h, h, p);
  const double t = std::tanh(1.0);
  // g0 = f[0]s[0], g1 = f[1]s[0] + s[0]
  const double g0 = t * t, g1 = t;
  EXPECT_NEAR(r.at(0, 0, 0), std::exp(g0) / (std::exp(g0) + std::exp(g1)), 1e-15);
  EXPECT_NEAR(r.at(0, 1, 0), 0.5, 1e-15);
  EXPECT_NEAR(r.at(1, 0, 1), 1.0 / (1.0 + std::exp(-(t * t + t))), 1e-15);
  EXPECT_NEAR(r.at(1, 1, 0), 0.5, 1e-15);
}

TEST(Biaffine, MatchesScalarOracle) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 1 + seed % 6, h = 2 + seed % 7, dr = 1 + seed % 4, m = 1 + seed % 3;
    BiaffineParams p = BiaffineParams::create(h, dr, m, rng);
    auto brng = std::mt19937_64(seed + 50);
    Tensor b = random_tensor({m}, brng, 1.0, false);
    std::copy(b.data().begin(), b.data().end(), p.bias.mutable_data().begin());
    const Tensor hf = random_tensor({n, h}, rng, 1.0, false);
    const Tensor hs = random_tensor({n, h}, rng, 1.0, false);
    const auto want = biaffine_oracle(rows(hf), rows(hs), p);
    const auto got = to_vector(biaffine_relations(hf, hs, p).scores);
    ASSERT_EQ(got.size(), n * n * m);
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-13);
  }
}

TEST(Biaffine, NormalizedOverRelationTypes) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 1 + seed % 6, m = 1 + seed % 3;
    BiaffineParams p = BiaffineParams::create(6, 3, m, rng);
    const Tensor h = random_tensor({n, 6}, rng, 3.0, false);
    const RelationTensor r = biaffine_relations(h, h, p);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        double s = 0;
        for (std::size_t k = 0; k < m; ++k) s += r.at(i, j, k);
        EXPECT_NEAR(s, 1.0, 1e-12);
      }
    }
  }
}

TEST(Biaffine, ZeroParametersGiveUniform) {
  std::mt19937_64 rng(4);
  for (std::size_t m : {1u, 2u, 3u}) {
    BiaffineParams p = BiaffineParams::create(4, 2, m, rng);
    zero_all(p.parameters(""));
    const RelationTensor r = biaffine_relations(random_tensor({3, 4}, rng, 1.0, false),
                                                random_tensor({3, 4}, rng, 1.0, false), p);
    for (double v : r.scores.data()) EXPECT_NEAR(v, 1.0 / static_cast<double>(m), 1e-12);
  }
}

TEST(Biaffine, BiasOnlyGivesSoftmaxOfBias) {
  std::mt19937_64 rng(5);
  BiaffineParams p = BiaffineParams::create(4, 2, 3, rng);
  zero_all(p.parameters(""));
  std::vector<double> b = {0.5, -1.0, 2.0};
  std::copy(b.begin(), b.end(), p.bias.mutable_data().begin());
  const auto want = testutil::softmax_oracle(b);
  const RelationTensor r = biaffine_relations(random_tensor({2, 4}, rng, 1.0, false),
                                              random_tensor({2, 4}, rng, 1.0, false), p);
  for (std::size_t i = 0; i < 2; ++i)
    for (std::size_t j = 0; j < 2; ++j)
      for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(r.at(i, j, k), want[k], 1e-15);
}

TEST(GradCheck, LstmSdpaBiaffineTenSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    const std::size_t n = 1 + seed % 6, half = 1 + seed % 4, hidden = 2 * half, m = 1 + seed % 3;
    const Tensor x = random_tensor({n, 3}, rng);
    BiLstm lstm = BiLstm::create(3, hidden, 1, rng);
    const auto& [fwd, bwd] = lstm.layers()[0];
    Tensor w = random_tensor({n, hidden}, rng, 1.0, false);
    auto lstm_f = [&] { return sum(mul(lstm.encode(x), w)); };
    EXPECT_TRUE(grad_check(lstm_f, {x, fwd.w_ih, fwd.w_hh, fwd.bias, bwd.w_ih, bwd.bias}).pass)
        << "lstm seed " << seed;

    const std::size_t heads = hidden % 2 == 0 && seed % 2 ? 2 : 1;
    SdpaParams sp = SdpaParams::create(hidden, heads, rng);
    const Tensor hh = random_tensor({n, hidden}, rng);
    auto sdpa_f = [&] { return sum(mul(sdpa(hh, sp), w)); };
    EXPECT_TRUE(grad_check(sdpa_f, {hh, sp.wq, sp.wk, sp.wv}).pass) << "sdpa seed " << seed;

    BiaffineParams bp = BiaffineParams::create(hidden, std::max<std::size_t>(1, half), m, rng);
    const Tensor hf = random_tensor({n, hidden}, rng), hs = random_tensor({n, hidden}, rng);
    Tensor wr = random_tensor({n, n, m}, rng, 1.0, false);
    auto bia_f = [&] { return sum(mul(biaffine_relations(hf, hs, bp).scores, wr)); };
    const GradReport r = grad_check(bia_f, {hf, hs, bp.mlp_f.weight, bp.mlp_f.bias,
                                            bp.mlp_s.weight, bp.mlp_s.bias, bp.u1, bp.u2, bp.bias});
    EXPECT_TRUE(r.pass) << "biaffine seed " << seed << " err " << r.max_error;
  }
}

TEST(GradCheck, EncodePseudoTokensTenSeeds) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    InferenceUnitConfig cfg;
    cfg.hidden_size = 2 * (1 + seed % 4);
    cfg.m = 1 + seed % 3;
    cfg.fusion_mode = seed % 2 ? FusionMode::BiaffinePlusSdpa : FusionMode::BiaffineSdpa;
    cfg.gated_combination = seed % 3 == 0;
    const std::size_t d = 4, n = 2 + seed % 5;
    InferenceUnit iu = InferenceUnit::create(d, cfg, rng);
    iu.set_training(seed % 2 == 0);  // dropout masks replay after reseed
    HybridInput in;
    in.n = n;
    in.pseudo_positions = {0, n - 1};
    const Tensor emb = random_tensor({n, d}, rng);
    Tensor w = random_tensor({2, d}, rng, 1.0, false);
    auto f = [&] {
      iu.reseed(seed);
      return sum(mul(iu.encode_pseudo_tokens(in, emb), w));
    };
    std::vector<Tensor> params = {emb};
    for (const auto& [name, t] : iu.parameters("")) {
      if (name != "gate" || cfg.gated_combination) params.push_back(t);
    }
    const GradReport r = grad_check(f, params);
    EXPECT_TRUE(r.pass) << "seed " << seed << " err " << r.max_error;
  }
}

TEST(InferenceUnit, PseudoRowsAreSequenceRows) {
  std::mt19937_64 rng(3);
  InferenceUnit iu = InferenceUnit::create(6, InferenceUnitConfig{}, rng);
  const Tensor emb = random_tensor({5, 6}, rng, 1.0, false);
  HybridInput in;
  in.n = 5;
  in.pseudo_positions = {1, 3};
  const Mat all = rows(iu.encode_sequence(emb)), picked = rows(iu.encode_pseudo_tokens(in, emb));
  EXPECT_EQ(picked[0], all[1]);
  EXPECT_EQ(picked[1], all[3]);
  in.pseudo_positions.clear();
  EXPECT_EQ(iu.encode_pseudo_tokens(in, emb).shape(), (Shape{0, 6}));
}

TEST(InferenceUnit, NoBiaffineIgnoresBiaffineParams) {
  std::mt19937_64 rng(6);
  InferenceUnitConfig cfg;
  cfg.enable_biaffine = false;
  InferenceUnit iu = InferenceUnit::create(6, cfg, rng);
  const Tensor emb = random_tensor({4, 6}, rng, 1.0, false);
  const auto before = to_vector(iu.encode_sequence(emb));
  for (auto [name, t] : iu.biaffine().parameters("")) {
    for (auto& v : t.mutable_data()) v += 0.75;
  }
  EXPECT_EQ(to_vector(iu.encode_sequence(emb)), before);
  iu.mutable_config().enable_biaffine = true;
  EXPECT_NE(to_vector(iu.encode_sequence(emb)), before);
}

TEST(InferenceUnit, FusionModesAndSdpaSwitchChangeOutput) {
  std::mt19937_64 rng(7);
  InferenceUnit iu = InferenceUnit::create(6, InferenceUnitConfig{}, rng);
  const Tensor emb = random_tensor({4, 6}, rng, 1.0, false);
  const auto base = to_vector(iu.encode_sequence(emb));
  iu.mutable_config().fusion_mode = FusionMode::BiaffinePlusSdpa;
  EXPECT_NE(to_vector(iu.encode_sequence(emb)), base);
  iu.mutable_config().fusion_mode = FusionMode::BiaffineSdpa;
  iu.mutable_config().enable_sdpa = false;
  EXPECT_NE(to_vector(iu.encode_sequence(emb)), base);
  iu.mutable_config().enable_sdpa = true;
  EXPECT_EQ(to_vector(iu.encode_sequence(emb)), base);
}

TEST(InferenceUnit, DropoutOnlyInTraining) {
  std::mt19937_64 rng(8);
  InferenceUnitConfig cfg;
  cfg.dropout = 0.5;
  InferenceUnit iu = InferenceUnit::create(6, cfg, rng);
  const Tensor emb = random_tensor({4, 6}, rng, 1.0, false);
  const auto eval1 = to_vector(iu.encode_sequence(emb));
  EXPECT_EQ(to_vector(iu.encode_sequence(emb)), eval1);
  iu.set_training(true);
  iu.reseed(1);
  const auto t1 = to_vector(iu.encode_sequence(emb));
  iu.reseed(1);
  EXPECT_EQ(to_vector(iu.encode_sequence(emb)), t1);
  EXPECT_NE(t1, eval1);
}

TEST(InferenceUnit, ConfigValidation) {
  InferenceUnitConfig c;
  c.hidden_size = 7;
  EXPECT_THROW(c.validate(), ContractError);
  c = {};
  c.sdpa_heads = 3;
  EXPECT_THROW(c.validate(), ContractError);
  c = {};
  c.dropout = 1.0;
  EXPECT_THROW(c.validate(), ContractError);
  EXPECT_EQ(parse_fusion_mode("BIAFFINE_PLUS_SDPA"), FusionMode::BiaffinePlusSdpa);
  EXPECT_THROW(parse_fusion_mode("mean"), ContractError);
}
