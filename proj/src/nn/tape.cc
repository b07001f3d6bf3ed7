// Copyright 2026 The cassnat Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "cassnat/nn/tape.h"

#include <algorithm>
#include <cmath>

#include "cassnat/common/error.h"

namespace cassnat::nn {

namespace {

void CheckSame(const Tensor& a, const Tensor& b, const char* op) {
  CASSNAT_CHECK(a.shape() == b.shape(), ErrorKind::kShape,
                std::string(op) + ": shape mismatch " + ShapeString(a.shape()) +
                    " vs " + ShapeString(b.shape()));
}

}  // namespace

Var Tape::Push(Tensor value, bool requires_grad,
               std::function<void()> backward) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = grad_enabled_ && requires_grad;
  if (n.requires_grad) n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

bool Tape::AnyNeeds(std::initializer_list<Var> vs) const {
  for (Var v : vs)
    if (v.valid() && nodes_[v.id].requires_grad) return true;
  return false;
}

Tensor& Tape::G(std::size_t id) {
  Node& n = nodes_[id];
  if (n.grad.empty() && !n.value.empty()) n.grad = Tensor(n.value.shape());
  return n.grad;
}

const Tensor& Tape::grad(Var v) { return G(v.id); }

Var Tape::Constant(Tensor value) { return Push(std::move(value), false, {}); }

Var Tape::Leaf(Parameter& p) {
  auto it = leaves_.find(&p);
  if (it != leaves_.end()) return Var{it->second};
  Var v = Push(p.value, true, {});
  nodes_[v.id].param = &p;
  leaves_.emplace(&p, v.id);
  return v;
}

Var Tape::MatMul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  const std::size_t n = A.rows(), k = A.cols(), m = B.cols();
  CASSNAT_CHECK(B.rows() == k, ErrorKind::kShape,
                "MatMul: inner dimensions differ " + ShapeString(A.shape()) +
                    " * " + ShapeString(B.shape()));
  Tensor C = Tensor::Zeros(n, m);
  for (std::size_t i = 0; i < n; ++i) {
    double* c = C.data() + i * m;
    for (std::size_t p = 0; p < k; ++p) {
      const double aip = A.at(i, p);
      const double* brow = B.data() + p * m;
      for (std::size_t j = 0; j < m; ++j) c[j] += aip * brow[j];
    }
  }
  const std::size_t out = nodes_.size();
  return Push(std::move(C), AnyNeeds({a, b}), [this, a, b, out, n, k, m] {
    const Tensor& dC = nodes_[out].grad;
    if (Needs(a)) {
      Tensor& dA = G(a.id);
      const Tensor& Bv = nodes_[b.id].value;
      for (std::size_t i = 0; i < n; ++i) {
        const double* dc = dC.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double* brow = Bv.data() + p * m;
          double s = 0.0;
          for (std::size_t j = 0; j < m; ++j) s += dc[j] * brow[j];
          dA.at(i, p) += s;
        }
      }
    }
    if (Needs(b)) {
      Tensor& dB = G(b.id);
      const Tensor& Av = nodes_[a.id].value;
      for (std::size_t i = 0; i < n; ++i) {
        const double* dc = dC.data() + i * m;
        for (std::size_t p = 0; p < k; ++p) {
          const double aip = Av.at(i, p);
          double* db = dB.data() + p * m;
          for (std::size_t j = 0; j < m; ++j) db[j] += aip * dc[j];
        }
      }
    }
  });
}

Var Tape::Linear(Var x, Var w, Var b) {
  Var y = MatMul(x, w);
  if (!b.valid()) return y;
  const Tensor& Y = value(y);
  const Tensor& B = value(b);
  const std::size_t n = Y.rows(), m = Y.cols();
  CASSNAT_CHECK(B.size() == m, ErrorKind::kShape, "Linear: bias size mismatch");
  Tensor out = Y;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) out.at(i, j) += B[j];
  const std::size_t id = nodes_.size();
  return Push(std::move(out), AnyNeeds({y, b}), [this, y, b, id, n, m] {
    const Tensor& d = nodes_[id].grad;
    if (Needs(y)) {
      Tensor& dy = G(y.id);
      for (std::size_t i = 0; i < d.size(); ++i) dy[i] += d[i];
    }
    if (Needs(b)) {
      Tensor& db = G(b.id);
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j) db[j] += d.at(i, j);
    }
  });
}

Var Tape::Add(Var a, Var b) { return AddScaled(a, b, 1.0); }

Var Tape::AddScaled(Var a, Var b, double s) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  CheckSame(A, B, "Add");
  Tensor out = A;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += s * B[i];
  const std::size_t id = nodes_.size();
  return Push(std::move(out), AnyNeeds({a, b}), [this, a, b, s, id] {
    const Tensor& d = nodes_[id].grad;
    if (Needs(a)) {
      Tensor& da = G(a.id);
      for (std::size_t i = 0; i < d.size(); ++i) da[i] += d[i];
    }
    if (Needs(b)) {
      Tensor& db = G(b.id);
      for (std::size_t i = 0; i < d.size(); ++i) db[i] += s * d[i];
    }
  });
}

Var Tape::Scale(Var a, double s) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= s;
  const std::size_t id = nodes_.size();
  return Push(std::move(out), Needs(a), [this, a, s, id] {
    const Tensor& d = nodes_[id].grad;
    Tensor& da = G(a.id);
    for (std::size_t i = 0; i < d.size(); ++i) da[i] += s * d[i];
  });
}

Var Tape::Relu(Var a) {
  Tensor out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::max(0.0, out[i]);
  const std::size_t id = nodes_.size();
  return Push(std::move(out), Needs(a), [this, a, id] {
    const Tensor& d = nodes_[id].grad;
    const Tensor& x = nodes_[a.id].value;
    Tensor& da = G(a.id);
    for (std::size_t i = 0; i < d.size(); ++i)
      if (x[i] > 0.0) da[i] += d[i];
  });
}

Var Tape::Softmax(Var a) {
  Tensor out = SoftmaxRows(value(a));
  const std::size_t id = nodes_.size();
  return Push(std::move(out), Needs(a), [this, a, id] {
    const Tensor& d = nodes_[id].grad;
    const Tensor& y = nodes_[id].value;
    Tensor& da = G(a.id);
    for (std::size_t i = 0; i < y.rows(); ++i) {
      double dot = 0.0;
      for (std::size_t j = 0; j < y.cols(); ++j) dot += d.at(i, j) * y.at(i, j);
      for (std::size_t j = 0; j < y.cols(); ++j)
        da.at(i, j) += y.at(i, j) * (d.at(i, j) - dot);
    }
  });
}

Var Tape::LayerNorm(Var x, Var gamma, Var beta, double eps) {
  const Tensor& X = value(x);
  const Tensor& Gm = value(gamma);
  const Tensor& Bt = value(beta);
  const std::size_t n = X.rows(), d = X.cols();
  CASSNAT_CHECK(Gm.size() == d && Bt.size() == d, ErrorKind::kShape,
                "LayerNorm: affine size mismatch");
  Tensor out = Tensor::Zeros(n, d);
  std::vector<double> xhat(n * d), inv_std(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = X.row(i);
    double mean = 0.0;
    for (double v : r) mean += v;
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (double v : r) var += (v - mean) * (v - mean);
    var /= static_cast<double>(d);
    inv_std[i] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < d; ++j) {
      xhat[i * d + j] = (r[j] - mean) * inv_std[i];
      out.at(i, j) = xhat[i * d + j] * Gm[j] + Bt[j];
    }
  }
  const std::size_t id = nodes_.size();
  return Push(std::move(out), AnyNeeds({x, gamma, beta}),
              [this, x, gamma, beta, id, n, d, xhat = std::move(xhat),
               inv_std = std::move(inv_std)] {
                const Tensor& dy = nodes_[id].grad;
                const Tensor& g = nodes_[gamma.id].value;
                if (Needs(gamma) || Needs(beta)) {
                  Tensor* dg = Needs(gamma) ? &G(gamma.id) : nullptr;
                  Tensor* db = Needs(beta) ? &G(beta.id) : nullptr;
                  for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < d; ++j) {
                      if (dg) (*dg)[j] += dy.at(i, j) * xhat[i * d + j];
                      if (db) (*db)[j] += dy.at(i, j);
                    }
                }
                if (Needs(x)) {
                  Tensor& dx = G(x.id);
                  std::vector<double> dxhat(d);
                  for (std::size_t i = 0; i < n; ++i) {
                    double m1 = 0.0, m2 = 0.0;
                    for (std::size_t j = 0; j < d; ++j) {
                      dxhat[j] = dy.at(i, j) * g[j];
                      m1 += dxhat[j];
                      m2 += dxhat[j] * xhat[i * d + j];
                    }
                    m1 /= static_cast<double>(d);
                    m2 /= static_cast<double>(d);
                    for (std::size_t j = 0; j < d; ++j)
                      dx.at(i, j) +=
                          inv_std[i] * (dxhat[j] - m1 - xhat[i * d + j] * m2);
                  }
                }
              });
}

Var Tape::MaskedAttention(Var q, Var k, Var v, const AttentionMask& mask,
                          MaskMode mode) {
  const Tensor& Q = value(q);
  const Tensor& K = value(k);
  const Tensor& V = value(v);
  const std::size_t nq = Q.rows(), nk = K.rows(), dk = Q.cols(), dv = V.cols();
  CASSNAT_CHECK(K.cols() == dk, ErrorKind::kShape,
                "attention: query/key widths differ");
  CASSNAT_CHECK(V.rows() == nk, ErrorKind::kShape,
                "attention: key/value counts differ");
  CASSNAT_CHECK(mask.rows() == nq && mask.cols() == nk, ErrorKind::kShape,
                "attention: mask is " + std::to_string(mask.rows()) + "x" +
                    std::to_string(mask.cols()) + ", expected " +
                    std::to_string(nq) + "x" + std::to_string(nk));
  mask.CheckNoEmptyRow();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));
  const bool literal = mode == MaskMode::kLiteral;

  // probs: normalised attention (over permitted keys, or over all keys in
  // literal mode). weights: what multiplies V.
  Tensor probs = Tensor::Zeros(nq, nk);
  for (std::size_t i = 0; i < nq; ++i) {
    const double* qi = Q.data() + i * dk;
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < nk; ++j) {
      if (!literal && !mask.get(i, j)) continue;
      const double* kj = K.data() + j * dk;
      double s = 0.0;
      for (std::size_t c = 0; c < dk; ++c) s += qi[c] * kj[c];
      s *= scale;
      probs.at(i, j) = s;
      mx = std::max(mx, s);
    }
    double sum = 0.0;
    for (std::size_t j = 0; j < nk; ++j) {
      if (!literal && !mask.get(i, j)) continue;
      const double e = std::exp(probs.at(i, j) - mx);
      probs.at(i, j) = e;
      sum += e;
    }
    for (std::size_t j = 0; j < nk; ++j) {
      if (!literal && !mask.get(i, j)) continue;
      probs.at(i, j) /= sum;
    }
  }
  Tensor out = Tensor::Zeros(nq, dv);
  for (std::size_t i = 0; i < nq; ++i) {
    double* o = out.data() + i * dv;
    for (std::size_t j = 0; j < nk; ++j) {
      if (!mask.get(i, j)) continue;
      const double w = probs.at(i, j);
      const double* vj = V.data() + j * dv;
      for (std::size_t c = 0; c < dv; ++c) o[c] += w * vj[c];
    }
  }
  const std::size_t id = nodes_.size();
  return Push(
      std::move(out), AnyNeeds({q, k, v}),
      [this, q, k, v, id, nq, nk, dk, dv, scale, literal, mask,
       probs = std::move(probs)] {
        const Tensor& dO = nodes_[id].grad;
        const Tensor& Qv = nodes_[q.id].value;
        const Tensor& Kv = nodes_[k.id].value;
        const Tensor& Vv = nodes_[v.id].value;
        Tensor* dQ = Needs(q) ? &G(q.id) : nullptr;
        Tensor* dK = Needs(k) ? &G(k.id) : nullptr;
        Tensor* dV = Needs(v) ? &G(v.id) : nullptr;
        std::vector<double> dp(nk), ds(nk);
        for (std::size_t i = 0; i < nq; ++i) {
          const double* doi = dO.data() + i * dv;
          // d(loss)/d(probs): only entries that reach V carry gradient.
          for (std::size_t j = 0; j < nk; ++j) {
            dp[j] = 0.0;
            if (!mask.get(i, j)) continue;
            const double* vj = Vv.data() + j * dv;
            double s = 0.0;
            for (std::size_t c = 0; c < dv; ++c) s += doi[c] * vj[c];
            dp[j] = s;
            if (dV) {
              const double w = probs.at(i, j);
              double* dvj = dV->data() + j * dv;
              for (std::size_t c = 0; c < dv; ++c) dvj[c] += w * doi[c];
            }
          }
          double dot = 0.0;
          for (std::size_t j = 0; j < nk; ++j) {
            if (!literal && !mask.get(i, j)) continue;
            dot += probs.at(i, j) * dp[j];
          }
          for (std::size_t j = 0; j < nk; ++j) {
            if (!literal && !mask.get(i, j)) {
              ds[j] = 0.0;
              continue;
            }
            ds[j] = probs.at(i, j) * (dp[j] - dot) * scale;
          }
          const double* qi = Qv.data() + i * dk;
          for (std::size_t j = 0; j < nk; ++j) {
            if (ds[j] == 0.0) continue;
            const double* kj = Kv.data() + j * dk;
            if (dQ) {
              double* dqi = dQ->data() + i * dk;
              for (std::size_t c = 0; c < dk; ++c) dqi[c] += ds[j] * kj[c];
            }
            if (dK) {
              double* dkj = dK->data() + j * dk;
              for (std::size_t c = 0; c < dk; ++c) dkj[c] += ds[j] * qi[c];
            }
          }
        }
      });
}

Var Tape::SliceCols(Var x, std::size_t begin, std::size_t width) {
  const Tensor& X = value(x);
  const std::size_t n = X.rows(), m = X.cols();
  CASSNAT_CHECK(begin + width <= m, ErrorKind::kShape,
                "SliceCols: range out of bounds");
  Tensor out = Tensor::Zeros(n, width);
  for (std::size_t i = 0; i < n; ++i)
    std::copy_n(X.data() + i * m + begin, width, out.data() + i * width);
  const std::size_t id = nodes_.size();
  return Push(std::move(out), Needs(x), [this, x, id, n, m, begin, width] {
    const Tensor& d = nodes_[id].grad;
    Tensor& dx = G(x.id);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < width; ++j)
        dx[i * m + begin + j] += d[i * width + j];
  });
}

Var Tape::ConcatCols(std::span<const Var> parts) {
  CASSNAT_CHECK(!parts.empty(), ErrorKind::kShape, "ConcatCols: no inputs");
  const std::size_t n = value(parts[0]).rows();
  std::vector<std::size_t> widths;
  std::size_t total = 0;
  bool needs = false;
  for (Var p : parts) {
    CASSNAT_CHECK(value(p).rows() == n, ErrorKind::kShape,
                  "ConcatCols: row counts differ");
    widths.push_back(value(p).cols());
    total += widths.back();
    needs = needs || Needs(p);
  }
  Tensor out = Tensor::Zeros(n, total);
  std::size_t off = 0;
  for (std::size_t t = 0; t < parts.size(); ++t) {
    const Tensor& P = value(parts[t]);
    for (std::size_t i = 0; i < n; ++i)
      std::copy_n(P.data() + i * widths[t], widths[t],
                  out.data() + i * total + off);
    off += widths[t];
  }
  const std::size_t id = nodes_.size();
  std::vector<Var> ps(parts.begin(), parts.end());
  return Push(std::move(out), needs, [this, ps, widths, id, n, total] {
    const Tensor& d = nodes_[id].grad;
    std::size_t off = 0;
    for (std::size_t t = 0; t < ps.size(); ++t) {
      if (Needs(ps[t])) {
        Tensor& dp = G(ps[t].id);
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < widths[t]; ++j)
            dp[i * widths[t] + j] += d[i * total + off + j];
      }
      off += widths[t];
    }
  });
}

Var Tape::Gather(Var table, std::span<const int> ids) {
  const Tensor& T = value(table);
  const std::size_t rows = T.rows(), d = T.cols();
  Tensor out = Tensor::Zeros(ids.size(), d);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    CASSNAT_CHECK(ids[i] >= 0 && static_cast<std::size_t>(ids[i]) < rows,
                  ErrorKind::kShape,
                  "Gather: id " + std::to_string(ids[i]) + " out of range");
    std::copy_n(T.data() + static_cast<std::size_t>(ids[i]) * d, d,
                out.data() + i * d);
  }
  const std::size_t id = nodes_.size();
  std::vector<int> idv(ids.begin(), ids.end());
  return Push(std::move(out), Needs(table), [this, table, id, d, idv] {
    const Tensor& g = nodes_[id].grad;
    Tensor& dt = G(table.id);
    for (std::size_t i = 0; i < idv.size(); ++i)
      for (std::size_t j = 0; j < d; ++j)
        dt[static_cast<std::size_t>(idv[i]) * d + j] += g[i * d + j];
  });
}

Var Tape::Reshape(Var x, std::vector<std::size_t> shape) {
  Tensor out = value(x).Reshaped(std::move(shape));
  const std::size_t id = nodes_.size();
  return Push(std::move(out), Needs(x), [this, x, id] {
    const Tensor& d = nodes_[id].grad;
    Tensor& dx = G(x.id);
    for (std::size_t i = 0; i < d.size(); ++i) dx[i] += d[i];
  });
}

Var Tape::PadRows(Var x, std::size_t rows) {
  const Tensor& X = value(x);
  CASSNAT_CHECK(X.ndim() == 2 && rows >= X.rows(), ErrorKind::kShape,
                "PadRows: cannot pad " + std::to_string(X.rows()) + " rows to " +
                    std::to_string(rows));
  if (rows == X.rows()) return x;
  Tensor out = Tensor::Zeros(rows, X.cols());
  std::copy_n(X.data(), X.size(), out.data());
  const std::size_t id = nodes_.size(), n = X.size();
  return Push(std::move(out), Needs(x), [this, x, id, n] {
    const Tensor& d = nodes_[id].grad;
    Tensor& dx = G(x.id);
    for (std::size_t i = 0; i < n; ++i) dx[i] += d[i];
  });
}

Var Tape::Dropout(Var x, double rate, Rng& rng) {
  if (rate <= 0.0) return x;
  CASSNAT_CHECK(rate < 1.0, ErrorKind::kUsage, "dropout rate must be < 1");
  const Tensor& X = value(x);
  std::vector<double> keep(X.size());
  const double scale = 1.0 / (1.0 - rate);
  Tensor out = X;
  for (std::size_t i = 0; i < X.size(); ++i) {
    keep[i] = rng.Uniform() < rate ? 0.0 : scale;
    out[i] *= keep[i];
  }
  const std::size_t id = nodes_.size();
  return Push(std::move(out), Needs(x), [this, x, id, keep = std::move(keep)] {
    const Tensor& d = nodes_[id].grad;
    Tensor& dx = G(x.id);
    for (std::size_t i = 0; i < d.size(); ++i) dx[i] += keep[i] * d[i];
  });
}

Var Tape::Sum(Var x) {
  const Tensor& X = value(x);
  double s = 0.0;
  for (std::size_t i = 0; i < X.size(); ++i) s += X[i];
  const std::size_t id = nodes_.size();
  return Push(Tensor::Scalar(s), Needs(x), [this, x, id] {
    const double d = nodes_[id].grad[0];
    Tensor& dx = G(x.id);
    for (std::size_t i = 0; i < dx.size(); ++i) dx[i] += d;
  });
}

Var Tape::CrossEntropy(Var logits, std::span<const int> targets, double eps,
                       Reduction reduction) {
  const Tensor& L = value(logits);
  const std::size_t n = L.rows(), c = L.cols();
  CASSNAT_CHECK(targets.size() == n, ErrorKind::kShape,
                "CrossEntropy: target count does not match rows");
  CASSNAT_CHECK(n > 0, ErrorKind::kShape, "CrossEntropy: no positions");
  const double norm = reduction == Reduction::kMean ? 1.0 / static_cast<double>(n) : 1.0;
  const double off = eps / static_cast<double>(c);
  Tensor dx = Tensor::Zeros(n, c);
  double loss = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const int t = targets[i];
    CASSNAT_CHECK(t >= 0 && static_cast<std::size_t>(t) < c, ErrorKind::kShape,
                  "CrossEntropy: target " + std::to_string(t) + " out of range");
    auto r = L.row(i);
    const double mx = *std::max_element(r.begin(), r.end());
    double z = 0.0;
    for (double v : r) z += std::exp(v - mx);
    const double lse = mx + std::log(z);
    double row_loss = 0.0;
    for (std::size_t j = 0; j < c; ++j) {
      const double logp = r[j] - lse;
      const double target_mass =
          off + (static_cast<std::size_t>(t) == j ? 1.0 - eps : 0.0);
      row_loss -= target_mass * logp;
      dx.at(i, j) = (std::exp(logp) - target_mass) * norm;
    }
    loss += row_loss;
  }
  loss *= norm;
  const std::size_t id = nodes_.size();
  return Push(Tensor::Scalar(loss), Needs(logits),
              [this, logits, id, dx = std::move(dx)] {
                const double d = nodes_[id].grad[0];
                Tensor& g = G(logits.id);
                for (std::size_t i = 0; i < g.size(); ++i) g[i] += d * dx[i];
              });
}

Var Tape::CustomLoss(Var x, const LossFn& fn) {
  Tensor dx(value(x).shape());
  const double loss = fn(value(x), dx);
  const std::size_t id = nodes_.size();
  return Push(Tensor::Scalar(loss), Needs(x), [this, x, id, dx = std::move(dx)] {
    const double d = nodes_[id].grad[0];
    Tensor& g = G(x.id);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += d * dx[i];
  });
}

Var Tape::Conv2dStride2(Var x, Var kernel, Var bias) {
  const Tensor& X = value(x);
  const Tensor& K = value(kernel);
  const Tensor& B = value(bias);
  CASSNAT_CHECK(X.ndim() == 3 && K.ndim() == 4 && K.dim(2) == 3 &&
                    K.dim(3) == 3 && K.dim(1) == X.dim(0) &&
                    B.size() == K.dim(0),
                ErrorKind::kShape, "Conv2dStride2: bad shapes");
  const std::size_t C = X.dim(0), H = X.dim(1), W = X.dim(2), O = K.dim(0);
  const std::size_t Ho = (H + 1) / 2, Wo = (W + 1) / 2;
  Tensor out({O, Ho, Wo});
  auto xat = [&](std::size_t c, long h, long w) -> double {
    if (h < 0 || w < 0 || h >= static_cast<long>(H) || w >= static_cast<long>(W))
      return 0.0;
    return X[(c * H + static_cast<std::size_t>(h)) * W + static_cast<std::size_t>(w)];
  };
  for (std::size_t o = 0; o < O; ++o)
    for (std::size_t i = 0; i < Ho; ++i)
      for (std::size_t j = 0; j < Wo; ++j) {
        double s = B[o];
        for (std::size_t c = 0; c < C; ++c)
          for (long di = 0; di < 3; ++di)
            for (long dj = 0; dj < 3; ++dj)
              s += K[((o * C + c) * 3 + di) * 3 + dj] *
                   xat(c, 2 * static_cast<long>(i) + di - 1,
                       2 * static_cast<long>(j) + dj - 1);
        out[(o * Ho + i) * Wo + j] = s;
      }
  const std::size_t id = nodes_.size();
  return Push(std::move(out), AnyNeeds({x, kernel, bias}),
              [this, x, kernel, bias, id, C, H, W, O, Ho, Wo] {
                const Tensor& d = nodes_[id].grad;
                const Tensor& Xv = nodes_[x.id].value;
                const Tensor& Kv = nodes_[kernel.id].value;
                Tensor* dX = Needs(x) ? &G(x.id) : nullptr;
                Tensor* dK = Needs(kernel) ? &G(kernel.id) : nullptr;
                Tensor* dB = Needs(bias) ? &G(bias.id) : nullptr;
                for (std::size_t o = 0; o < O; ++o)
                  for (std::size_t i = 0; i < Ho; ++i)
                    for (std::size_t j = 0; j < Wo; ++j) {
                      const double g = d[(o * Ho + i) * Wo + j];
                      if (dB) (*dB)[o] += g;
                      for (std::size_t c = 0; c < C; ++c)
                        for (long di = 0; di < 3; ++di)
                          for (long dj = 0; dj < 3; ++dj) {
                            const long h = 2 * static_cast<long>(i) + di - 1;
                            const long w = 2 * static_cast<long>(j) + dj - 1;
                            if (h < 0 || w < 0 || h >= static_cast<long>(H) ||
                                w >= static_cast<long>(W))
                              continue;
                            const std::size_t xi =
                                (c * H + static_cast<std::size_t>(h)) * W +
                                static_cast<std::size_t>(w);
                            const std::size_t ki = ((o * C + c) * 3 + di) * 3 + dj;
                            if (dK) (*dK)[ki] += g * Xv[xi];
                            if (dX) (*dX)[xi] += g * Kv[ki];
                          }
                    }
              });
}

Var Tape::ChannelsToRows(Var x) {
  const Tensor& X = value(x);
  CASSNAT_CHECK(X.ndim() == 3, ErrorKind::kShape, "ChannelsToRows: need 3-D");
  const std::size_t C = X.dim(0), H = X.dim(1), W = X.dim(2);
  Tensor out = Tensor::Zeros(H, C * W);
  for (std::size_t c = 0; c < C; ++c)
    for (std::size_t h = 0; h < H; ++h)
      for (std::size_t w = 0; w < W; ++w)
        out.at(h, c * W + w) = X[(c * H + h) * W + w];
  const std::size_t id = nodes_.size();
  return Push(std::move(out), Needs(x), [this, x, id, C, H, W] {
    const Tensor& d = nodes_[id].grad;
    Tensor& dx = G(x.id);
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t h = 0; h < H; ++h)
        for (std::size_t w = 0; w < W; ++w)
          dx[(c * H + h) * W + w] += d.at(h, c * W + w);
  });
}

void Tape::Backward(Var loss) {
  CASSNAT_CHECK(!backward_done_, ErrorKind::kState,
                "Backward called twice on the same tape");
  CASSNAT_CHECK(grad_enabled_, ErrorKind::kState,
                "Backward on a tape without gradients");
  CASSNAT_CHECK(value(loss).size() == 1, ErrorKind::kShape,
                "Backward requires a scalar loss");
  backward_done_ = true;
  if (!Needs(loss)) return;
  G(loss.id)[0] = 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& n = nodes_[i];
    if (n.backward && !n.grad.empty()) n.backward();
  }
  for (auto& n : nodes_) {
    if (n.param == nullptr || n.grad.empty()) continue;
    Tensor& pg = n.param->grad;
    for (std::size_t i = 0; i < pg.size(); ++i) pg[i] += n.grad[i];
  }
}

}  // namespace cassnat::nn
