#include "hpm/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "hpm/errors.hpp"

namespace hpm {

namespace {

using detail::Node;
using NodePtr = std::shared_ptr<Node>;

void check_finite(const std::vector<double>& v, const char* op) {
  for (double x : v) {
    if (!std::isfinite(x)) throw NumericDomainError(std::string(op) + ": non-finite value");
  }
}

// Builds the output node. The graph is recorded only when some parent needs
// gradients and grad mode is on.
Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                   std::function<void(Node&)> backward, const char* op) {
  if (debug_checks_enabled()) check_finite(data, op);
  auto node = std::make_shared<Node>();
  node->shape = std::move(shape);
  node->data = std::move(data);
  bool needs = false;
  if (grad_mode_enabled()) {
    for (const auto& p : parents) needs = needs || p.requires_grad();
  }
  if (needs) {
    node->requires_grad = true;
    for (auto& p : parents) node->parents.push_back(p.node());
    node->backward_fn = std::move(backward);
  }
  return Tensor(std::move(node));
}

bool wants(const NodePtr& p) { return p->requires_grad; }

void require(bool cond, const std::string& msg) {
  if (!cond) throw ContractError(msg);
}

bool is_suffix(const Shape& small, const Shape& big) {
  if (small.size() > big.size()) return false;
  return std::equal(small.rbegin(), small.rend(), big.rbegin());
}

std::vector<std::size_t> strides_of(const Shape& s) {
  std::vector<std::size_t> st(s.size(), 1);
  for (std::size_t i = s.size(); i-- > 1;) st[i - 1] = st[i] * s[i];
  return st;
}

enum class Binary { Add, Sub, Mul };

Tensor binary(const Tensor& a, const Tensor& b, Binary kind, const char* name) {
  const Shape& sa = a.shape();
  const Shape& sb = b.shape();
  require(is_suffix(sb, sa), std::string(name) + ": shape " + shape_string(sb) +
                                 " does not broadcast to " + shape_string(sa));
  const std::size_t n = a.size();
  const std::size_t m = b.size();
  auto da = a.data();
  auto db = b.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double x = da[i], y = db[i % m];
    out[i] = kind == Binary::Add ? x + y : kind == Binary::Sub ? x - y : x * y;
  }
  return make_result(
      sa, std::move(out), {a, b},
      [kind, n, m](Node& self) {
        const NodePtr& pa = self.parents[0];
        const NodePtr& pb = self.parents[1];
        const auto& g = self.grad;
        if (wants(pa)) {
          auto& ga = pa->grad_buffer();
          if (kind == Binary::Mul) {
            for (std::size_t i = 0; i < n; ++i) ga[i] += g[i] * pb->data[i % m];
          } else {
            for (std::size_t i = 0; i < n; ++i) ga[i] += g[i];
          }
        }
        if (wants(pb)) {
          auto& gb = pb->grad_buffer();
          for (std::size_t i = 0; i < n; ++i) {
            double d = kind == Binary::Add   ? g[i]
                       : kind == Binary::Sub ? -g[i]
                                             : g[i] * pa->data[i];
            gb[i % m] += d;
          }
        }
      },
      name);
}

// Elementwise unary op whose derivative is expressed via input x and output y.
template <typename F, typename D>
Tensor unary(const Tensor& a, F f, D deriv, const char* name) {
  auto da = a.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = f(da[i]);
  return make_result(
      a.shape(), std::move(out), {a},
      [deriv](Node& self) {
        const NodePtr& p = self.parents[0];
        auto& gp = p->grad_buffer();
        for (std::size_t i = 0; i < gp.size(); ++i) {
          gp[i] += self.grad[i] * deriv(p->data[i], self.data[i]);
        }
      },
      name);
}

}  // namespace

Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul: incompatible shapes " + shape_string(a.shape()) + " x " +
              shape_string(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  auto A = a.data();
  auto B = b.data();
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t p = 0; p < k; ++p) {
      const double av = A[i * k + p];
      const double* brow = &B[p * n];
      double* orow = &out[i * n];
      for (std::size_t j = 0; j < n; ++j) orow[j] += av * brow[j];
    }
  }
  return make_result(
      {m, n}, std::move(out), {a, b},
      [m, k, n](Node& self) {
        const NodePtr& pa = self.parents[0];
        const NodePtr& pb = self.parents[1];
        const auto& g = self.grad;
        if (wants(pa)) {
          // dA = G * B^T
          auto& ga = pa->grad_buffer();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              double s = 0.0;
              for (std::size_t j = 0; j < n; ++j) s += g[i * n + j] * pb->data[p * n + j];
              ga[i * k + p] += s;
            }
          }
        }
        if (wants(pb)) {
          // dB = A^T * G
          auto& gb = pb->grad_buffer();
          for (std::size_t i = 0; i < m; ++i) {
            for (std::size_t p = 0; p < k; ++p) {
              const double av = pa->data[i * k + p];
              for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
            }
          }
        }
      },
      "matmul");
}

Tensor add(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Add, "add"); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Sub, "sub"); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(a, b, Binary::Mul, "mul"); }

Tensor scale(const Tensor& a, double factor) {
  return unary(
      a, [factor](double x) { return x * factor; }, [factor](double, double) { return factor; },
      "scale");
}

Tensor add_scalar(const Tensor& a, double value) {
  return unary(
      a, [value](double x) { return x + value; }, [](double, double) { return 1.0; },
      "add_scalar");
}

Tensor tanh(const Tensor& a) {
  return unary(
      a, [](double x) { return std::tanh(x); }, [](double, double y) { return 1.0 - y * y; },
      "tanh");
}

Tensor sigmoid(const Tensor& a) {
  return unary(
      a,
      [](double x) {
        if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
        const double e = std::exp(x);
        return e / (1.0 + e);
      },
      [](double, double y) { return y * (1.0 - y); }, "sigmoid");
}

Tensor relu(const Tensor& a) {
  return unary(
      a, [](double x) { return x > 0 ? x : 0.0; },
      [](double x, double) { return x > 0 ? 1.0 : 0.0; }, "relu");
}

Tensor log(const Tensor& a) {
  for (double x : a.data()) {
    if (!(x > 0)) throw NumericDomainError("log: non-positive input");
  }
  return unary(
      a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; }, "log");
}

Tensor gelu(const Tensor& x) {
  constexpr double kC = 0.7978845608028654;  // sqrt(2/pi)
  Tensor cube = x * x * x;
  Tensor inner = scale(x + scale(cube, 0.044715), kC);
  return scale(x * add_scalar(tanh(inner), 1.0), 0.5);
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  require(!parts.empty(), "concat: no inputs");
  const Shape& s0 = parts[0].shape();
  require(axis < s0.size(), "concat: axis out of range");
  Shape out_shape = s0;
  out_shape[axis] = 0;
  for (const auto& p : parts) {
    const Shape& s = p.shape();
    require(s.size() == s0.size(), "concat: rank mismatch");
    for (std::size_t d = 0; d < s.size(); ++d) {
      require(d == axis || s[d] == s0[d], "concat: shape mismatch on non-concat axis");
    }
    out_shape[axis] += s[axis];
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s0[d];
  for (std::size_t d = axis + 1; d < s0.size(); ++d) inner *= s0[d];
  const std::size_t out_row = out_shape[axis] * inner;

  std::vector<double> out(shape_size(out_shape));
  std::vector<std::size_t> offsets;
  std::size_t off = 0;
  for (const auto& p : parts) {
    offsets.push_back(off);
    const std::size_t row = p.shape()[axis] * inner;
    auto d = p.data();
    for (std::size_t o = 0; o < outer; ++o) {
      std::copy_n(d.begin() + o * row, row, out.begin() + o * out_row + off);
    }
    off += row;
  }
  return make_result(
      out_shape, std::move(out), parts,
      [outer, out_row, offsets](Node& self) {
        for (std::size_t i = 0; i < self.parents.size(); ++i) {
          const NodePtr& p = self.parents[i];
          if (!wants(p)) continue;
          auto& gp = p->grad_buffer();
          const std::size_t row = gp.size() / outer;
          for (std::size_t o = 0; o < outer; ++o) {
            for (std::size_t r = 0; r < row; ++r) {
              gp[o * row + r] += self.grad[o * out_row + offsets[i] + r];
            }
          }
        }
      },
      "concat");
}

Tensor slice(const Tensor& a, std::size_t axis, std::size_t begin, std::size_t end) {
  require(axis < a.rank(), "slice: axis out of range");
  require(begin <= end && end <= a.dim(axis), "slice: range out of bounds");
  std::vector<std::size_t> idx(end - begin);
  std::iota(idx.begin(), idx.end(), begin);
  return gather(a, axis, idx);
}

Tensor gather(const Tensor& a, std::size_t axis, std::span<const std::size_t> indices) {
  const Shape& s = a.shape();
  require(axis < s.size(), "gather: axis out of range");
  for (auto i : indices) require(i < s[axis], "gather: index out of range");
  std::size_t outer = 1, inner = 1;
  for (std::size_t d = 0; d < axis; ++d) outer *= s[d];
  for (std::size_t d = axis + 1; d < s.size(); ++d) inner *= s[d];
  const std::size_t in_axis = s[axis];
  Shape out_shape = s;
  out_shape[axis] = indices.size();
  std::vector<std::size_t> idx(indices.begin(), indices.end());
  auto d = a.data();
  std::vector<double> out(shape_size(out_shape));
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t k = 0; k < idx.size(); ++k) {
      std::copy_n(d.begin() + (o * in_axis + idx[k]) * inner, inner,
                  out.begin() + (o * idx.size() + k) * inner);
    }
  }
  return make_result(
      out_shape, std::move(out), {a},
      [outer, inner, in_axis, idx](Node& self) {
        auto& gp = self.parents[0]->grad_buffer();
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t k = 0; k < idx.size(); ++k) {
            const std::size_t src = (o * idx.size() + k) * inner;
            const std::size_t dst = (o * in_axis + idx[k]) * inner;
            for (std::size_t r = 0; r < inner; ++r) gp[dst + r] += self.grad[src + r];
          }
        }
      },
      "gather");
}

Tensor embedding(const Tensor& table, std::span<const std::size_t> ids) {
  require(table.rank() == 2, "embedding: table must be 2-D");
  return gather(table, 0, ids);
}

Tensor reshape(const Tensor& a, const Shape& shape) {
  require(shape_size(shape) == a.size(),
          "reshape: " + shape_string(a.shape()) + " -> " + shape_string(shape));
  return make_result(
      shape, std::vector<double>(a.data().begin(), a.data().end()), {a},
      [](Node& self) { self.parents[0]->accumulate(self.grad); }, "reshape");
}

Tensor transpose(const Tensor& a) {
  require(a.rank() == 2, "transpose: expects a 2-D tensor");
  return permute(a, {1, 0});
}

Tensor permute(const Tensor& a, const std::vector<std::size_t>& axes) {
  const Shape& s = a.shape();
  require(axes.size() == s.size(), "permute: axes rank mismatch");
  std::vector<bool> seen(s.size(), false);
  for (auto ax : axes) {
    require(ax < s.size() && !seen[ax], "permute: invalid axes");
    seen[ax] = true;
  }
  Shape out_shape(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) out_shape[i] = s[axes[i]];
  const auto in_strides = strides_of(s);
  // src[i] = flat input offset of the i-th output element.
  const std::size_t n = a.size();
  std::vector<std::size_t> src(n);
  std::vector<std::size_t> counter(s.size(), 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t off = 0;
    for (std::size_t d = 0; d < s.size(); ++d) off += counter[d] * in_strides[axes[d]];
    src[i] = off;
    for (std::size_t d = s.size(); d-- > 0;) {
      if (++counter[d] < out_shape[d]) break;
      counter[d] = 0;
    }
  }
  auto da = a.data();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = da[src[i]];
  return make_result(
      out_shape, std::move(out), {a},
      [src = std::move(src)](Node& self) {
        auto& gp = self.parents[0]->grad_buffer();
        for (std::size_t i = 0; i < src.size(); ++i) gp[src[i]] += self.grad[i];
      },
      "permute");
}

Tensor softmax(const Tensor& logits, std::size_t axis) {
  const Shape& s = logits.shape();
  require(axis < s.size(), "softmax: axis out of range");
  auto d = logits.data();
  for (double x : d) {
    if (!std::isfinite(x)) throw NumericDomainError("softmax: non-finite logit");
  }
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= s[i];
  for (std::size_t i = axis + 1; i < s.size(); ++i) inner *= s[i];
  const std::size_t len = s[axis];
  std::vector<double> out(d.size());
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t r = 0; r < inner; ++r) {
      const std::size_t base = o * len * inner + r;
      double mx = d[base];
      for (std::size_t k = 1; k < len; ++k) mx = std::max(mx, d[base + k * inner]);
      double z = 0.0;
      for (std::size_t k = 0; k < len; ++k) {
        const double e = std::exp(d[base + k * inner] - mx);
        out[base + k * inner] = e;
        z += e;
      }
      for (std::size_t k = 0; k < len; ++k) out[base + k * inner] /= z;
    }
  }
  return make_result(
      s, std::move(out), {logits},
      [outer, inner, len](Node& self) {
        auto& gp = self.parents[0]->grad_buffer();
        const auto& y = self.data;
        const auto& g = self.grad;
        for (std::size_t o = 0; o < outer; ++o) {
          for (std::size_t r = 0; r < inner; ++r) {
            const std::size_t base = o * len * inner + r;
            double dot = 0.0;
            for (std::size_t k = 0; k < len; ++k) dot += g[base + k * inner] * y[base + k * inner];
            for (std::size_t k = 0; k < len; ++k) {
              const std::size_t i = base + k * inner;
              gp[i] += y[i] * (g[i] - dot);
            }
          }
        }
      },
      "softmax");
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double x : a.data()) s += x;
  return make_result(
      {}, {s}, {a},
      [](Node& self) {
        auto& gp = self.parents[0]->grad_buffer();
        for (auto& v : gp) v += self.grad[0];
      },
      "sum");
}

Tensor mean(const Tensor& a) {
  require(a.size() > 0, "mean: empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor cross_entropy(const Tensor& logits, std::span<const std::size_t> targets) {
  const Shape& s = logits.shape();
  require(s.size() == 1 || s.size() == 2, "cross_entropy: logits must be 1-D or 2-D");
  const std::size_t rows = s.size() == 1 ? 1 : s[0];
  const std::size_t classes = s.back();
  require(targets.size() == rows, "cross_entropy: one target per row required");
  for (auto t : targets) require(t < classes, "cross_entropy: target out of range");
  auto d = logits.data();
  for (double x : d) {
    if (!std::isfinite(x)) throw NumericDomainError("cross_entropy: non-finite logit");
  }
  std::vector<double> probs(d.size());
  double loss = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = &d[r * classes];
    double mx = *std::max_element(row, row + classes);
    double z = 0.0;
    for (std::size_t c = 0; c < classes; ++c) z += std::exp(row[c] - mx);
    const double lse = mx + std::log(z);
    for (std::size_t c = 0; c < classes; ++c) probs[r * classes + c] = std::exp(row[c] - lse);
    loss += lse - row[targets[r]];
  }
  loss /= static_cast<double>(rows);
  std::vector<std::size_t> tg(targets.begin(), targets.end());
  return make_result(
      {}, {loss}, {logits},
      [probs = std::move(probs), tg = std::move(tg), rows, classes](Node& self) {
        auto& gp = self.parents[0]->grad_buffer();
        const double g = self.grad[0] / static_cast<double>(rows);
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t c = 0; c < classes; ++c) {
            const std::size_t i = r * classes + c;
            gp[i] += g * (probs[i] - (c == tg[r] ? 1.0 : 0.0));
          }
        }
      },
      "cross_entropy");
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  const Shape& s = x.shape();
  require(!s.empty(), "layer_norm: scalar input");
  const std::size_t d = s.back();
  require(gamma.shape() == Shape{d} && beta.shape() == Shape{d},
          "layer_norm: gamma/beta must have shape [" + std::to_string(d) + "]");
  const std::size_t rows = x.size() / d;
  auto xd = x.data();
  auto gd = gamma.data();
  auto bd = beta.data();
  std::vector<double> xhat(x.size()), out(x.size()), inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* row = &xd[r * d];
    double mu = 0.0;
    for (std::size_t i = 0; i < d; ++i) mu += row[i];
    mu /= static_cast<double>(d);
    double var = 0.0;
    for (std::size_t i = 0; i < d; ++i) var += (row[i] - mu) * (row[i] - mu);
    var /= static_cast<double>(d);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t i = 0; i < d; ++i) {
      const std::size_t k = r * d + i;
      xhat[k] = (row[i] - mu) * inv_std[r];
      out[k] = xhat[k] * gd[i] + bd[i];
    }
  }
  return make_result(
      s, std::move(out), {x, gamma, beta},
      [xhat = std::move(xhat), inv_std = std::move(inv_std), rows, d](Node& self) {
        const NodePtr& px = self.parents[0];
        const NodePtr& pg = self.parents[1];
        const NodePtr& pb = self.parents[2];
        const auto& g = self.grad;
        if (wants(pg)) {
          auto& gg = pg->grad_buffer();
          for (std::size_t k = 0; k < g.size(); ++k) gg[k % d] += g[k] * xhat[k];
        }
        if (wants(pb)) {
          auto& gb = pb->grad_buffer();
          for (std::size_t k = 0; k < g.size(); ++k) gb[k % d] += g[k];
        }
        if (wants(px)) {
          auto& gx = px->grad_buffer();
          const double inv_d = 1.0 / static_cast<double>(d);
          for (std::size_t r = 0; r < rows; ++r) {
            double sum_dy = 0.0, sum_dy_xhat = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
              const std::size_t k = r * d + i;
              const double dy = g[k] * pg->data[i];
              sum_dy += dy;
              sum_dy_xhat += dy * xhat[k];
            }
            for (std::size_t i = 0; i < d; ++i) {
              const std::size_t k = r * d + i;
              const double dy = g[k] * pg->data[i];
              gx[k] += inv_std[r] * (dy - inv_d * sum_dy - xhat[k] * inv_d * sum_dy_xhat);
            }
          }
        }
      },
      "layer_norm");
}

Tensor dropout(const Tensor& x, double p, std::mt19937_64& rng) {
  require(p >= 0.0 && p < 1.0, "dropout: p must be in [0,1)");
  if (p == 0.0) return x;
  std::bernoulli_distribution keep(1.0 - p);
  std::vector<double> mask(x.size());
  const double s = 1.0 / (1.0 - p);
  for (auto& m : mask) m = keep(rng) ? s : 0.0;
  return mul(x, Tensor(x.shape(), std::move(mask)));
}

}  // namespace hpm
