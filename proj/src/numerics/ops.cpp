// Copyright 2026 The mgct Authors
// SPDX-License-Identifier: Apache-2.0

#include "mgct/numerics/ops.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mgct/errors.hpp"
#include "mgct/numerics/kernels.hpp"

namespace mgct::ops {

using detail::make_node;
using detail::Node;

namespace {

template <typename F>
Tensor finish(std::shared_ptr<Node> n, F&& backward) {
  if (n->requires_grad) n->backward = std::forward<F>(backward);
  return Tensor(std::move(n));
}

void expect_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  MGCT_EXPECT(a.shape() == b.shape(), std::string(op) + ": shape mismatch " +
                                          shape_str(a.shape()) + " vs " +
                                          shape_str(b.shape()));
}

void check_offsets(std::span<const std::size_t> offsets, std::size_t rows, const char* op) {
  MGCT_EXPECT(offsets.size() >= 2 && offsets.front() == 0 && offsets.back() == rows,
              std::string(op) + ": offsets must span [0, rows]");
  for (std::size_t i = 1; i < offsets.size(); ++i)
    MGCT_EXPECT(offsets[i] >= offsets[i - 1], std::string(op) + ": offsets must be sorted");
}

template <typename Fwd, typename Dfdx>
Tensor unary(const Tensor& x, const char* op, Fwd f, Dfdx dfdx) {
  auto n = make_node(x.shape(), op, {x});
  const auto xv = x.data();
  for (std::size_t i = 0; i < xv.size(); ++i) n->value[i] = f(xv[i]);
  Node* xn = x.node();
  return finish(std::move(n), [xn, dfdx](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i)
      xn->grad[i] += self.grad[i] * dfdx(xn->value[i], self.value[i]);
  });
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "add");
  auto n = make_node(a.shape(), "add", {a, b});
  for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.data()[i] + b.data()[i];
  Node* an = a.node();
  Node* bn = b.node();
  return finish(std::move(n), [an, bn](Node& self) {
    for (Node* in : {an, bn}) {
      if (!in->requires_grad) continue;
      for (std::size_t i = 0; i < self.grad.size(); ++i) in->grad[i] += self.grad[i];
    }
  });
}

Tensor sub(const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "sub");
  auto n = make_node(a.shape(), "sub", {a, b});
  for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.data()[i] - b.data()[i];
  Node* an = a.node();
  Node* bn = b.node();
  return finish(std::move(n), [an, bn](Node& self) {
    if (an->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i];
    if (bn->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] -= self.grad[i];
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  expect_same_shape(a, b, "mul");
  auto n = make_node(a.shape(), "mul", {a, b});
  for (std::size_t i = 0; i < n->value.size(); ++i) n->value[i] = a.data()[i] * b.data()[i];
  Node* an = a.node();
  Node* bn = b.node();
  return finish(std::move(n), [an, bn](Node& self) {
    if (an->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) an->grad[i] += self.grad[i] * bn->value[i];
    if (bn->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) bn->grad[i] += self.grad[i] * an->value[i];
  });
}

Tensor scale(const Tensor& a, float s) {
  return unary(a, "scale", [s](float x) { return s * x; }, [s](float, float) { return s; });
}

Tensor add_scalar(const Tensor& a, float s) {
  return unary(a, "add_scalar", [s](float x) { return x + s; }, [](float, float) { return 1.0f; });
}

Tensor add_row(const Tensor& x, const Tensor& row) {
  const std::size_t r = x.rows();
  const std::size_t c = x.cols();
  MGCT_EXPECT(row.numel() == c, "add_row: row length " + std::to_string(row.numel()) +
                                    " does not match " + std::to_string(c) + " columns");
  auto n = make_node(x.shape(), "add_row", {x, row});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) n->value[i * c + j] = x.data()[i * c + j] + row.data()[j];
  Node* xn = x.node();
  Node* rn = row.node();
  return finish(std::move(n), [xn, rn, r, c](Node& self) {
    if (xn->requires_grad)
      for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[i] += self.grad[i];
    if (rn->requires_grad)
      for (std::size_t i = 0; i < r; ++i)
        for (std::size_t j = 0; j < c; ++j) rn->grad[j] += self.grad[i * c + j];
  });
}

Tensor matmul(const Tensor& a, const Tensor& b) { return linear(a, b, {}); }

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  const std::size_t m = x.rows();
  const std::size_t k = x.cols();
  MGCT_EXPECT(w.rank() == 2 && w.rows() == k,
              "linear: input " + shape_str(x.shape()) + " incompatible with weight " +
                  shape_str(w.shape()));
  const std::size_t nn = w.cols();
  if (b.defined()) MGCT_EXPECT(b.numel() == nn, "linear: bias length mismatch");
  auto n = b.defined() ? make_node({m, nn}, "linear", {x, w, b})
                       : make_node({m, nn}, "linear", {x, w});
  kernels::gemm_nn(x.data(), w.data(), n->value, {m, k, nn});
  if (b.defined()) {
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < nn; ++j) n->value[i * nn + j] += b.data()[j];
  }
  Node* xn = x.node();
  Node* wn = w.node();
  Node* bn = b.defined() ? b.node() : nullptr;
  return finish(std::move(n), [xn, wn, bn, m, k, nn](Node& self) {
    if (xn->requires_grad)  // dX[M,K] += dY[M,N] W[K,N]^T
      kernels::gemm_nt(self.grad, wn->value, xn->grad, {m, nn, k}, true);
    if (wn->requires_grad)  // dW[K,N] += X[M,K]^T dY[M,N]
      kernels::gemm_tn(xn->value, self.grad, wn->grad, {k, m, nn}, true);
    if (bn && bn->requires_grad)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < nn; ++j) bn->grad[j] += self.grad[i * nn + j];
  });
}

Tensor silu(const Tensor& x) {
  return unary(
      x, "silu", [](float v) { return v / (1.0f + std::exp(-v)); },
      [](float v, float) {
        const float s = 1.0f / (1.0f + std::exp(-v));
        return s * (1.0f + v * (1.0f - s));
      });
}

Tensor gelu(const Tensor& x) {
  constexpr float kC = 0.7978845608028654f;  // sqrt(2/pi)
  constexpr float kA = 0.044715f;
  return unary(
      x, "gelu",
      [](float v) { return 0.5f * v * (1.0f + std::tanh(kC * (v + kA * v * v * v))); },
      [](float v, float) {
        const float u = kC * (v + kA * v * v * v);
        const float th = std::tanh(u);
        const float du = kC * (1.0f + 3.0f * kA * v * v);
        return 0.5f * (1.0f + th) + 0.5f * v * (1.0f - th * th) * du;
      });
}

Tensor exp(const Tensor& x) {
  return unary(x, "exp", [](float v) { return std::exp(v); }, [](float, float y) { return y; });
}

Tensor square(const Tensor& x) {
  return unary(x, "square", [](float v) { return v * v; }, [](float v, float) { return 2.0f * v; });
}

Tensor abs(const Tensor& x) {
  return unary(
      x, "abs", [](float v) { return std::fabs(v); },
      [](float v, float) { return v > 0.0f ? 1.0f : (v < 0.0f ? -1.0f : 0.0f); });
}

Tensor sum(const Tensor& x) {
  auto n = make_node({1}, "sum", {x});
  double acc = 0.0;
  for (float v : x.data()) acc += v;
  n->value[0] = static_cast<float>(acc);
  Node* xn = x.node();
  return finish(std::move(n), [xn](Node& self) {
    for (float& g : xn->grad) g += self.grad[0];
  });
}

Tensor mean(const Tensor& x) {
  MGCT_EXPECT(x.numel() > 0, "mean: empty tensor");
  return scale(sum(x), 1.0f / static_cast<float>(x.numel()));
}

Tensor rms_norm(const Tensor& x, float eps) {
  const std::size_t r = x.rows();
  const std::size_t c = x.cols();
  auto n = make_node(x.shape(), "rms_norm", {x});
  std::vector<float> inv(r);
  for (std::size_t i = 0; i < r; ++i) {
    const float* xi = x.data().data() + i * c;
    double ms = 0.0;
    for (std::size_t j = 0; j < c; ++j) ms += static_cast<double>(xi[j]) * xi[j];
    ms /= static_cast<double>(c);
    inv[i] = static_cast<float>(1.0 / std::sqrt(ms + eps));
    for (std::size_t j = 0; j < c; ++j) n->value[i * c + j] = xi[j] * inv[i];
  }
  Node* xn = x.node();
  return finish(std::move(n), [xn, r, c, inv = std::move(inv)](Node& self) {
    for (std::size_t i = 0; i < r; ++i) {
      const float* y = self.value.data() + i * c;
      const float* dy = self.grad.data() + i * c;
      double dot = 0.0;
      for (std::size_t j = 0; j < c; ++j) dot += static_cast<double>(dy[j]) * y[j];
      const float proj = static_cast<float>(dot / static_cast<double>(c));
      for (std::size_t j = 0; j < c; ++j) xn->grad[i * c + j] += inv[i] * (dy[j] - y[j] * proj);
    }
  });
}

Tensor expand_rows(const Tensor& x, std::span<const std::size_t> offsets) {
  const std::size_t b = x.rows();
  const std::size_t c = x.cols();
  MGCT_EXPECT(offsets.size() == b + 1, "expand_rows: need one offset range per row");
  check_offsets(offsets, offsets.back(), "expand_rows");
  auto n = make_node({offsets.back(), c}, "expand_rows", {x});
  for (std::size_t s = 0; s < b; ++s)
    for (std::size_t i = offsets[s]; i < offsets[s + 1]; ++i)
      std::copy_n(x.data().data() + s * c, c, n->value.data() + i * c);
  Node* xn = x.node();
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return finish(std::move(n), [xn, off = std::move(off), b, c](Node& self) {
    for (std::size_t s = 0; s < b; ++s)
      for (std::size_t i = off[s]; i < off[s + 1]; ++i)
        for (std::size_t j = 0; j < c; ++j) xn->grad[s * c + j] += self.grad[i * c + j];
  });
}

Tensor embedding(const Tensor& table, std::span<const std::int32_t> ids) {
  const std::size_t v = table.rows();
  const std::size_t c = table.cols();
  for (auto id : ids)
    MGCT_EXPECT(id >= 0 && static_cast<std::size_t>(id) < v,
                "embedding: id " + std::to_string(id) + " outside table of " +
                    std::to_string(v) + " rows");
  auto n = make_node({ids.size(), c}, "embedding", {table});
  for (std::size_t i = 0; i < ids.size(); ++i)
    std::copy_n(table.data().data() + static_cast<std::size_t>(ids[i]) * c, c,
                n->value.data() + i * c);
  Node* tn = table.node();
  std::vector<std::int32_t> idv(ids.begin(), ids.end());
  return finish(std::move(n), [tn, idv = std::move(idv), c](Node& self) {
    for (std::size_t i = 0; i < idv.size(); ++i) {
      float* dst = tn->grad.data() + static_cast<std::size_t>(idv[i]) * c;
      for (std::size_t j = 0; j < c; ++j) dst[j] += self.grad[i * c + j];
    }
  });
}

Tensor slice_rows(const Tensor& x, std::size_t begin, std::size_t end) {
  const std::size_t c = x.cols();
  MGCT_EXPECT(begin <= end && end <= x.rows(), "slice_rows: range out of bounds");
  auto n = make_node({end - begin, c}, "slice_rows", {x});
  std::copy(x.data().begin() + static_cast<std::ptrdiff_t>(begin * c),
            x.data().begin() + static_cast<std::ptrdiff_t>(end * c), n->value.begin());
  Node* xn = x.node();
  return finish(std::move(n), [xn, begin, c](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) xn->grad[begin * c + i] += self.grad[i];
  });
}

Tensor gather_rows(const Tensor& x, std::span<const std::size_t> rows) {
  const std::size_t c = x.cols();
  for (auto r : rows) MGCT_EXPECT(r < x.rows(), "gather_rows: row out of bounds");
  auto n = make_node({rows.size(), c}, "gather_rows", {x});
  for (std::size_t i = 0; i < rows.size(); ++i)
    std::copy_n(x.data().data() + rows[i] * c, c, n->value.data() + i * c);
  Node* xn = x.node();
  std::vector<std::size_t> rv(rows.begin(), rows.end());
  return finish(std::move(n), [xn, rv = std::move(rv), c](Node& self) {
    for (std::size_t i = 0; i < rv.size(); ++i)
      for (std::size_t j = 0; j < c; ++j) xn->grad[rv[i] * c + j] += self.grad[i * c + j];
  });
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  MGCT_EXPECT(!parts.empty(), "concat_rows: nothing to concatenate");
  const std::size_t c = parts.front().cols();
  std::size_t total = 0;
  for (const auto& p : parts) {
    MGCT_EXPECT(p.cols() == c, "concat_rows: column mismatch");
    total += p.rows();
  }
  auto n = make_node({total, c}, "concat_rows", parts);
  std::vector<Node*> ins;
  std::vector<std::size_t> starts;
  std::size_t at = 0;
  for (const auto& p : parts) {
    std::copy(p.data().begin(), p.data().end(), n->value.begin() + static_cast<std::ptrdiff_t>(at));
    ins.push_back(p.node());
    starts.push_back(at);
    at += p.numel();
  }
  return finish(std::move(n), [ins = std::move(ins), starts = std::move(starts)](Node& self) {
    for (std::size_t p = 0; p < ins.size(); ++p) {
      if (!ins[p]->requires_grad) continue;
      for (std::size_t i = 0; i < ins[p]->grad.size(); ++i)
        ins[p]->grad[i] += self.grad[starts[p] + i];
    }
  });
}

Tensor rope(const Tensor& x, std::span<const float> positions, std::size_t heads,
            double theta) {
  const std::size_t r = x.rows();
  const std::size_t d = x.cols();
  MGCT_EXPECT(heads > 0 && d % heads == 0, "rope: width not divisible by head count");
  const std::size_t dh = d / heads;
  MGCT_EXPECT(dh % 2 == 0, "rope: head dimension must be even, got " + std::to_string(dh));
  MGCT_EXPECT(positions.size() == r, "rope: one position per row required");
  const std::size_t half = dh / 2;
  std::vector<float> cs(r * half), sn(r * half);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t p = 0; p < half; ++p) {
      const double freq = std::pow(theta, -2.0 * static_cast<double>(p) / static_cast<double>(dh));
      const double ang = static_cast<double>(positions[i]) * freq;
      cs[i * half + p] = static_cast<float>(std::cos(ang));
      sn[i * half + p] = static_cast<float>(std::sin(ang));
    }
  auto n = make_node(x.shape(), "rope", {x});
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t p = 0; p < half; ++p) {
        const std::size_t j = i * d + h * dh + 2 * p;
        const float c = cs[i * half + p], s = sn[i * half + p];
        const float x0 = x.data()[j], x1 = x.data()[j + 1];
        n->value[j] = x0 * c - x1 * s;
        n->value[j + 1] = x0 * s + x1 * c;
      }
  Node* xn = x.node();
  return finish(std::move(n), [xn, r, d, heads, dh, half, cs = std::move(cs),
                               sn = std::move(sn)](Node& self) {
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t p = 0; p < half; ++p) {
          const std::size_t j = i * d + h * dh + 2 * p;
          const float c = cs[i * half + p], s = sn[i * half + p];
          const float g0 = self.grad[j], g1 = self.grad[j + 1];
          xn->grad[j] += g0 * c + g1 * s;
          xn->grad[j + 1] += -g0 * s + g1 * c;
        }
  });
}

namespace {

// Softmax(QK^T * scale) for one (sequence, head) block into probs[L*L].
void attention_block_probs(const float* q, const float* k, std::size_t d, std::size_t dh,
                           std::size_t h, std::size_t len, float scale, float* probs) {
  for (std::size_t i = 0; i < len; ++i) {
    const float* qi = q + i * d + h * dh;
    float* row = probs + i * len;
    float mx = -INFINITY;
    for (std::size_t j = 0; j < len; ++j) {
      const float* kj = k + j * d + h * dh;
      float s = 0.0f;
      for (std::size_t e = 0; e < dh; ++e) s += qi[e] * kj[e];
      row[j] = s * scale;
      mx = std::max(mx, row[j]);
    }
    double z = 0.0;
    for (std::size_t j = 0; j < len; ++j) {
      row[j] = std::exp(row[j] - mx);
      z += row[j];
    }
    const float invz = static_cast<float>(1.0 / z);
    for (std::size_t j = 0; j < len; ++j) row[j] *= invz;
  }
}

}  // namespace

Tensor attention(const Tensor& q, const Tensor& k, const Tensor& v, std::size_t heads,
                 std::span<const std::size_t> offsets) {
  expect_same_shape(q, k, "attention");
  expect_same_shape(q, v, "attention");
  const std::size_t r = q.rows();
  const std::size_t d = q.cols();
  MGCT_EXPECT(heads > 0 && d % heads == 0,
              "attention: model dim " + std::to_string(d) + " not divisible by " +
                  std::to_string(heads) + " heads");
  check_offsets(offsets, r, "attention");
  MGCT_EXPECT(r > 0, "attention: empty sequence");
  const std::size_t dh = d / heads;
  const float scale = 1.0f / std::sqrt(static_cast<float>(dh));
  const std::size_t nseq = offsets.size() - 1;

  // Probability blocks, one per (sequence, head), stored back to back.
  std::vector<std::size_t> pstart(nseq * heads + 1, 0);
  for (std::size_t s = 0; s < nseq; ++s) {
    const std::size_t len = offsets[s + 1] - offsets[s];
    for (std::size_t h = 0; h < heads; ++h)
      pstart[s * heads + h + 1] = pstart[s * heads + h] + len * len;
  }
  std::vector<float> probs(pstart.back());

  auto n = make_node(q.shape(), "attention", {q, k, v});
  const auto blocks = static_cast<std::int64_t>(nseq * heads);
  const float* qd = q.data().data();
  const float* kd = k.data().data();
  const float* vd = v.data().data();
  float* out = n->value.data();
#pragma omp parallel for schedule(static) if (r * r * d >= (1u << 16))
  for (std::int64_t blk = 0; blk < blocks; ++blk) {
    const std::size_t s = static_cast<std::size_t>(blk) / heads;
    const std::size_t h = static_cast<std::size_t>(blk) % heads;
    const std::size_t o = offsets[s];
    const std::size_t len = offsets[s + 1] - o;
    float* p = probs.data() + pstart[static_cast<std::size_t>(blk)];
    attention_block_probs(qd + o * d, kd + o * d, d, dh, h, len, scale, p);
    for (std::size_t i = 0; i < len; ++i) {
      float* oi = out + (o + i) * d + h * dh;
      for (std::size_t j = 0; j < len; ++j) {
        const float pij = p[i * len + j];
        const float* vj = vd + (o + j) * d + h * dh;
        for (std::size_t e = 0; e < dh; ++e) oi[e] += pij * vj[e];
      }
    }
  }

  Node* qn = q.node();
  Node* kn = k.node();
  Node* vn = v.node();
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return finish(std::move(n), [qn, kn, vn, heads, d, dh, scale, off = std::move(off),
                               pstart = std::move(pstart),
                               probs = std::move(probs)](Node& self) {
    const std::size_t nseq = off.size() - 1;
    const auto blocks = static_cast<std::int64_t>(nseq * heads);
    const std::size_t r = off.back();
    // Each block writes a disjoint (rows, head-columns) slab of dq/dk/dv.
#pragma omp parallel for schedule(static) if (r * r * d >= (1u << 16))
    for (std::int64_t blk = 0; blk < blocks; ++blk) {
      const std::size_t s = static_cast<std::size_t>(blk) / heads;
      const std::size_t h = static_cast<std::size_t>(blk) % heads;
      const std::size_t o = off[s];
      const std::size_t len = off[s + 1] - o;
      const float* p = probs.data() + pstart[static_cast<std::size_t>(blk)];
      std::vector<float> ds(len * len);
      for (std::size_t i = 0; i < len; ++i) {
        const float* gi = self.grad.data() + (o + i) * d + h * dh;
        double rowdot = 0.0;
        for (std::size_t j = 0; j < len; ++j) {
          const float* vj = vn->value.data() + (o + j) * d + h * dh;
          float dp = 0.0f;
          for (std::size_t e = 0; e < dh; ++e) dp += gi[e] * vj[e];
          ds[i * len + j] = dp;
          rowdot += static_cast<double>(dp) * p[i * len + j];
          if (vn->requires_grad) {
            float* dvj = vn->grad.data() + (o + j) * d + h * dh;
            const float pij = p[i * len + j];
            for (std::size_t e = 0; e < dh; ++e) dvj[e] += pij * gi[e];
          }
        }
        for (std::size_t j = 0; j < len; ++j)
          ds[i * len + j] = p[i * len + j] * (ds[i * len + j] - static_cast<float>(rowdot)) * scale;
      }
      for (std::size_t i = 0; i < len; ++i)
        for (std::size_t j = 0; j < len; ++j) {
          const float g = ds[i * len + j];
          if (g == 0.0f) continue;
          if (qn->requires_grad) {
            float* dqi = qn->grad.data() + (o + i) * d + h * dh;
            const float* kj = kn->value.data() + (o + j) * d + h * dh;
            for (std::size_t e = 0; e < dh; ++e) dqi[e] += g * kj[e];
          }
          if (kn->requires_grad) {
            float* dkj = kn->grad.data() + (o + j) * d + h * dh;
            const float* qi = qn->value.data() + (o + i) * d + h * dh;
            for (std::size_t e = 0; e < dh; ++e) dkj[e] += g * qi[e];
          }
        }
    }
  });
}

std::vector<float> attention_probs(const Tensor& q, const Tensor& k, std::size_t heads,
                                   std::size_t head) {
  expect_same_shape(q, k, "attention_probs");
  const std::size_t len = q.rows();
  const std::size_t d = q.cols();
  MGCT_EXPECT(heads > 0 && d % heads == 0 && head < heads, "attention_probs: bad head");
  const std::size_t dh = d / heads;
  std::vector<float> p(len * len);
  attention_block_probs(q.data().data(), k.data().data(), d, dh, head, len,
                        1.0f / std::sqrt(static_cast<float>(dh)), p.data());
  return p;
}

Tensor weighted_nll(const Tensor& logits, std::span<const std::int32_t> targets,
                    std::span<const float> weights, float normalizer) {
  const std::size_t r = logits.rows();
  const std::size_t v = logits.cols();
  MGCT_EXPECT(targets.size() == r && weights.size() == r,
              "weighted_nll: need one target and weight per row");
  MGCT_EXPECT(normalizer > 0.0f, "weighted_nll: normalizer must be positive");
  auto n = make_node({1}, "weighted_nll", {logits});
  std::vector<float> soft(r * v, 0.0f);
  double total = 0.0;
  for (std::size_t i = 0; i < r; ++i) {
    if (weights[i] == 0.0f) continue;
    MGCT_EXPECT(targets[i] >= 0 && static_cast<std::size_t>(targets[i]) < v,
                "weighted_nll: target outside vocabulary");
    const float* li = logits.data().data() + i * v;
    float mx = -INFINITY;
    for (std::size_t j = 0; j < v; ++j) mx = std::max(mx, li[j]);
    double z = 0.0;
    for (std::size_t j = 0; j < v; ++j) z += std::exp(static_cast<double>(li[j] - mx));
    const double lse = static_cast<double>(mx) + std::log(z);
    for (std::size_t j = 0; j < v; ++j)
      soft[i * v + j] = static_cast<float>(std::exp(static_cast<double>(li[j]) - lse));
    total += weights[i] * (lse - static_cast<double>(li[static_cast<std::size_t>(targets[i])]));
  }
  n->value[0] = static_cast<float>(total / normalizer);
  Node* ln = logits.node();
  std::vector<std::int32_t> tv(targets.begin(), targets.end());
  std::vector<float> wv(weights.begin(), weights.end());
  return finish(std::move(n), [ln, v, normalizer, soft = std::move(soft), tv = std::move(tv),
                               wv = std::move(wv)](Node& self) {
    const float g = self.grad[0] / normalizer;
    for (std::size_t i = 0; i < wv.size(); ++i) {
      if (wv[i] == 0.0f) continue;
      const float gi = g * wv[i];
      for (std::size_t j = 0; j < v; ++j) ln->grad[i * v + j] += gi * soft[i * v + j];
      ln->grad[i * v + static_cast<std::size_t>(tv[i])] -= gi;
    }
  });
}

Tensor detach(const Tensor& x) { return x.clone(); }

Tensor straight_through(const Tensor& value, const Tensor& route) {
  expect_same_shape(value, route, "straight_through");
  auto n = make_node(value.shape(), "straight_through", {route});
  std::copy(value.data().begin(), value.data().end(), n->value.begin());
  Node* rn = route.node();
  return finish(std::move(n), [rn](Node& self) {
    for (std::size_t i = 0; i < self.grad.size(); ++i) rn->grad[i] += self.grad[i];
  });
}

Tensor depthwise_conv1d(const Tensor& x, const Tensor& w, const Tensor& b,
                        std::span<const std::size_t> offsets) {
  const std::size_t t = x.rows();
  const std::size_t c = x.cols();
  MGCT_EXPECT(w.rank() == 2 && w.cols() == c && w.rows() % 2 == 1,
              "depthwise_conv1d: kernel must be [odd K, channels]");
  MGCT_EXPECT(b.numel() == c, "depthwise_conv1d: bias length mismatch");
  check_offsets(offsets, t, "depthwise_conv1d");
  const std::size_t kk = w.rows();
  const auto half = static_cast<std::ptrdiff_t>(kk / 2);
  auto n = make_node(x.shape(), "depthwise_conv1d", {x, w, b});
  const float* xd = x.data().data();
  const float* wd = w.data().data();
  for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
    const auto lo = static_cast<std::ptrdiff_t>(offsets[s]);
    const auto hi = static_cast<std::ptrdiff_t>(offsets[s + 1]);
    for (std::ptrdiff_t i = lo; i < hi; ++i) {
      float* yi = n->value.data() + static_cast<std::size_t>(i) * c;
      for (std::size_t ch = 0; ch < c; ++ch) yi[ch] = b.data()[ch];
      for (std::size_t k = 0; k < kk; ++k) {
        const std::ptrdiff_t src = i + static_cast<std::ptrdiff_t>(k) - half;
        if (src < lo || src >= hi) continue;
        const float* xs = xd + static_cast<std::size_t>(src) * c;
        const float* wk = wd + k * c;
        for (std::size_t ch = 0; ch < c; ++ch) yi[ch] += wk[ch] * xs[ch];
      }
    }
  }
  Node* xn = x.node();
  Node* wn = w.node();
  Node* bn = b.node();
  std::vector<std::size_t> off(offsets.begin(), offsets.end());
  return finish(std::move(n), [xn, wn, bn, c, kk, half, off = std::move(off)](Node& self) {
    for (std::size_t s = 0; s + 1 < off.size(); ++s) {
      const auto lo = static_cast<std::ptrdiff_t>(off[s]);
      const auto hi = static_cast<std::ptrdiff_t>(off[s + 1]);
      for (std::ptrdiff_t i = lo; i < hi; ++i) {
        const float* gy = self.grad.data() + static_cast<std::size_t>(i) * c;
        if (bn->requires_grad)
          for (std::size_t ch = 0; ch < c; ++ch) bn->grad[ch] += gy[ch];
        for (std::size_t k = 0; k < kk; ++k) {
          const std::ptrdiff_t src = i + static_cast<std::ptrdiff_t>(k) - half;
          if (src < lo || src >= hi) continue;
          const std::size_t so = static_cast<std::size_t>(src) * c;
          if (xn->requires_grad)
            for (std::size_t ch = 0; ch < c; ++ch) xn->grad[so + ch] += wn->value[k * c + ch] * gy[ch];
          if (wn->requires_grad)
            for (std::size_t ch = 0; ch < c; ++ch) wn->grad[k * c + ch] += xn->value[so + ch] * gy[ch];
        }
      }
    }
  });
}

Tensor avg_pool_rows(const Tensor& x, std::size_t window) {
  MGCT_EXPECT(window >= 1, "avg_pool_rows: window must be positive");
  const std::size_t t = x.rows();
  const std::size_t c = x.cols();
  const std::size_t out_rows = (t + window - 1) / window;
  auto n = make_node({out_rows, c}, "avg_pool_rows", {x});
  for (std::size_t o = 0; o < out_rows; ++o) {
    const std::size_t lo = o * window;
    const std::size_t hi = std::min(t, lo + window);
    const float inv = 1.0f / static_cast<float>(hi - lo);
    for (std::size_t i = lo; i < hi; ++i)
      for (std::size_t ch = 0; ch < c; ++ch) n->value[o * c + ch] += x.data()[i * c + ch];
    for (std::size_t ch = 0; ch < c; ++ch) n->value[o * c + ch] *= inv;
  }
  Node* xn = x.node();
  return finish(std::move(n), [xn, t, c, window, out_rows](Node& self) {
    for (std::size_t o = 0; o < out_rows; ++o) {
      const std::size_t lo = o * window;
      const std::size_t hi = std::min(t, lo + window);
      const float inv = 1.0f / static_cast<float>(hi - lo);
      for (std::size_t i = lo; i < hi; ++i)
        for (std::size_t ch = 0; ch < c; ++ch) xn->grad[i * c + ch] += self.grad[o * c + ch] * inv;
    }
  });
}

}  // namespace mgct::ops
