// Copyright 2026 The TreePrompt Authors.
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

#include "treeprompt/ops.h"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>
#include <memory>

namespace treeprompt {
namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapM = Eigen::Map<Mat<T>>;
template <typename T>
using CMapM = Eigen::Map<const Mat<T>>;

template <typename T>
MapM<T> M(Tensor<T> &t) {
  return MapM<T>(t.data(), t.rows(), t.cols());
}
template <typename T>
CMapM<T> M(const Tensor<T> &t) {
  return CMapM<T>(t.data(), t.rows(), t.cols());
}

template <typename T>
void CheckMatrix(const Tensor<T> &t, const char *op) {
  if (t.rank() != 2) {
    throw ShapeMismatch(std::string(op) + " expects rank-2 operand, got " +
                        ShapeString(t.shape()));
  }
}

template <typename T>
void CheckSame(const Tensor<T> &a, const Tensor<T> &b, const char *op) {
  if (a.shape() != b.shape()) {
    throw ShapeMismatch(std::string(op) + ": " + ShapeString(a.shape()) +
                        " vs " + ShapeString(b.shape()));
  }
}

template <typename T>
bool Needs(Tape<T> &t, Var<T> v) {
  return t.requires_grad(v);
}

}  // namespace

template <typename T>
Var<T> MatMul(Var<T> a, Var<T> b) {
  const auto &A = a.value();
  const auto &B = b.value();
  CheckMatrix(A, "matmul");
  CheckMatrix(B, "matmul");
  if (A.cols() != B.rows()) {
    throw ShapeMismatch("matmul " + ShapeString(A.shape()) + " * " +
                        ShapeString(B.shape()));
  }
  Tensor<T> out = Tensor<T>::Matrix(A.rows(), B.cols());
  M(out).noalias() = M(A) * M(B);
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a) || Needs(tape, b),
                     [a, b](Tape<T> &t, Var<T> y) {
                       const auto &g = t.grad(y);
                       if (Needs(t, a)) {
                         M(t.grad(a)).noalias() += M(g) * M(b.value()).transpose();
                       }
                       if (Needs(t, b)) {
                         M(t.grad(b)).noalias() += M(a.value()).transpose() * M(g);
                       }
                     });
}

template <typename T>
Var<T> MatMulNT(Var<T> a, Var<T> b) {
  const auto &A = a.value();
  const auto &B = b.value();
  CheckMatrix(A, "matmul_nt");
  CheckMatrix(B, "matmul_nt");
  if (A.cols() != B.cols()) {
    throw ShapeMismatch("matmul_nt " + ShapeString(A.shape()) + " * " +
                        ShapeString(B.shape()) + "^T");
  }
  Tensor<T> out = Tensor<T>::Matrix(A.rows(), B.rows());
  M(out).noalias() = M(A) * M(B).transpose();
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a) || Needs(tape, b),
                     [a, b](Tape<T> &t, Var<T> y) {
                       const auto &g = t.grad(y);
                       if (Needs(t, a)) {
                         M(t.grad(a)).noalias() += M(g) * M(b.value());
                       }
                       if (Needs(t, b)) {
                         M(t.grad(b)).noalias() += M(g).transpose() * M(a.value());
                       }
                     });
}

template <typename T>
Var<T> Add(Var<T> a, Var<T> b) {
  CheckSame(a.value(), b.value(), "add");
  Tensor<T> out = a.value();
  M(out) += M(b.value());
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a) || Needs(tape, b),
                     [a, b](Tape<T> &t, Var<T> y) {
                       const auto &g = t.grad(y);
                       if (Needs(t, a)) M(t.grad(a)) += M(g);
                       if (Needs(t, b)) M(t.grad(b)) += M(g);
                     });
}

template <typename T>
Var<T> Sub(Var<T> a, Var<T> b) {
  CheckSame(a.value(), b.value(), "sub");
  Tensor<T> out = a.value();
  M(out) -= M(b.value());
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a) || Needs(tape, b),
                     [a, b](Tape<T> &t, Var<T> y) {
                       const auto &g = t.grad(y);
                       if (Needs(t, a)) M(t.grad(a)) += M(g);
                       if (Needs(t, b)) M(t.grad(b)) -= M(g);
                     });
}

template <typename T>
Var<T> Mul(Var<T> a, Var<T> b) {
  CheckSame(a.value(), b.value(), "mul");
  Tensor<T> out = a.value();
  M(out).array() *= M(b.value()).array();
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a) || Needs(tape, b),
                     [a, b](Tape<T> &t, Var<T> y) {
                       const auto &g = t.grad(y);
                       if (Needs(t, a)) {
                         M(t.grad(a)).array() += M(g).array() * M(b.value()).array();
                       }
                       if (Needs(t, b)) {
                         M(t.grad(b)).array() += M(g).array() * M(a.value()).array();
                       }
                     });
}

template <typename T>
Var<T> Scale(Var<T> a, T factor) {
  Tensor<T> out = a.value();
  M(out) *= factor;
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a),
                     [a, factor](Tape<T> &t, Var<T> y) {
                       M(t.grad(a)) += factor * M(t.grad(y));
                     });
}

template <typename T>
Var<T> AddRowBroadcast(Var<T> a, Var<T> b) {
  const auto &A = a.value();
  const auto &B = b.value();
  CheckMatrix(A, "add_row");
  if (B.size() != A.cols()) {
    throw ShapeMismatch("add_row " + ShapeString(A.shape()) + " + " +
                        ShapeString(B.shape()));
  }
  Tensor<T> out = A;
  auto bias = CMapM<T>(B.data(), 1, B.size());
  M(out).rowwise() += bias.row(0);
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a) || Needs(tape, b),
                     [a, b](Tape<T> &t, Var<T> y) {
                       const auto &g = t.grad(y);
                       if (Needs(t, a)) M(t.grad(a)) += M(g);
                       if (Needs(t, b)) {
                         Tensor<T> &gb = t.grad(b);
                         MapM<T>(gb.data(), 1, gb.size()) += M(g).colwise().sum();
                       }
                     });
}

template <typename T>
Var<T> Relu(Var<T> a) {
  Tensor<T> out = a.value();
  for (auto &v : out.storage()) v = v > T(0) ? v : T(0);
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a), [a](Tape<T> &t, Var<T> y) {
    const auto &g = t.grad(y);
    const auto &x = a.value();
    Tensor<T> &ga = t.grad(a);
    for (int64_t i = 0; i < x.size(); ++i) {
      if (x[i] > T(0)) ga[i] += g[i];
    }
  });
}

template <typename T>
Var<T> SoftmaxRows(Var<T> a) {
  CheckMatrix(a.value(), "softmax");
  Tensor<T> out = a.value();
  for (int64_t r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T total = 0;
    for (auto &v : row) {
      v = std::exp(v - mx);
      total += v;
    }
    for (auto &v : row) v /= total;
  }
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a), [a](Tape<T> &t, Var<T> y) {
    const auto &g = t.grad(y);
    const auto &s = y.value();
    Tensor<T> &ga = t.grad(a);
    for (int64_t r = 0; r < s.rows(); ++r) {
      T dot = 0;
      for (int64_t c = 0; c < s.cols(); ++c) dot += g.at(r, c) * s.at(r, c);
      for (int64_t c = 0; c < s.cols(); ++c) {
        ga.at(r, c) += s.at(r, c) * (g.at(r, c) - dot);
      }
    }
  });
}

template <typename T>
Var<T> LayerNormRows(Var<T> x, Var<T> gamma, Var<T> beta) {
  const auto &X = x.value();
  CheckMatrix(X, "layer_norm");
  const int64_t n = X.cols();
  if (gamma.value().size() != n || beta.value().size() != n) {
    throw ShapeMismatch("layer_norm affine params vs " + ShapeString(X.shape()));
  }
  auto xhat = std::make_shared<Tensor<T>>(X.shape());
  auto inv_std = std::make_shared<std::vector<T>>(X.rows());
  Tensor<T> out(X.shape());
  const auto &G = gamma.value();
  const auto &B = beta.value();
  for (int64_t r = 0; r < X.rows(); ++r) {
    auto row = X.row(r);
    T mean = 0;
    for (T v : row) mean += v;
    mean /= T(n);
    T var = 0;
    for (T v : row) var += (v - mean) * (v - mean);
    var /= T(n);
    const T inv = T(1) / std::sqrt(var + T(kLayerNormEps));
    (*inv_std)[r] = inv;
    for (int64_t c = 0; c < n; ++c) {
      const T h = (row[c] - mean) * inv;
      xhat->at(r, c) = h;
      out.at(r, c) = h * G[c] + B[c];
    }
  }
  Tape<T> &tape = *x.tape;
  const bool req = Needs(tape, x) || Needs(tape, gamma) || Needs(tape, beta);
  return tape.Record(
      std::move(out), req, [x, gamma, beta, xhat, inv_std](Tape<T> &t, Var<T> y) {
        const auto &g = t.grad(y);
        const auto &G = gamma.value();
        const int64_t n = g.cols();
        if (Needs(t, gamma) || Needs(t, beta)) {
          Tensor<T> dgamma(G.shape()), dbeta(G.shape());
          for (int64_t r = 0; r < g.rows(); ++r) {
            for (int64_t c = 0; c < n; ++c) {
              dgamma[c] += g.at(r, c) * xhat->at(r, c);
              dbeta[c] += g.at(r, c);
            }
          }
          if (Needs(t, gamma)) M(t.grad(gamma)) += M(dgamma);
          if (Needs(t, beta)) M(t.grad(beta)) += M(dbeta);
        }
        if (!Needs(t, x)) return;
        Tensor<T> &gx = t.grad(x);
        std::vector<T> dxhat(n);
        for (int64_t r = 0; r < g.rows(); ++r) {
          T sum_d = 0, sum_dx = 0;
          for (int64_t c = 0; c < n; ++c) {
            dxhat[c] = g.at(r, c) * G[c];
            sum_d += dxhat[c];
            sum_dx += dxhat[c] * xhat->at(r, c);
          }
          const T k = (*inv_std)[r] / T(n);
          for (int64_t c = 0; c < n; ++c) {
            gx.at(r, c) +=
                k * (T(n) * dxhat[c] - sum_d - xhat->at(r, c) * sum_dx);
          }
        }
      });
}

template <typename T>
Var<T> L2NormRows(Var<T> x) {
  const auto &X = x.value();
  CheckMatrix(X, "l2norm");
  auto norms = std::make_shared<std::vector<T>>(X.rows());
  Tensor<T> out(X.shape());
  for (int64_t r = 0; r < X.rows(); ++r) {
    T sq = 0;
    for (T v : X.row(r)) sq += v * v;
    const T norm = std::sqrt(sq);
    (*norms)[r] = norm;
    const T denom = norm + T(kL2NormEps);
    for (int64_t c = 0; c < X.cols(); ++c) out.at(r, c) = X.at(r, c) / denom;
  }
  Tape<T> &tape = *x.tape;
  return tape.Record(std::move(out), Needs(tape, x),
                     [x, norms](Tape<T> &t, Var<T> y) {
                       const auto &g = t.grad(y);
                       const auto &X = x.value();
                       Tensor<T> &gx = t.grad(x);
                       for (int64_t r = 0; r < X.rows(); ++r) {
                         const T norm = (*norms)[r];
                         const T denom = norm + T(kL2NormEps);
                         T dot = 0;
                         for (int64_t c = 0; c < X.cols(); ++c) {
                           dot += g.at(r, c) * X.at(r, c);
                         }
                         const T k = norm > T(0) ? dot / (denom * denom * norm) : T(0);
                         for (int64_t c = 0; c < X.cols(); ++c) {
                           gx.at(r, c) += g.at(r, c) / denom - k * X.at(r, c);
                         }
                       }
                     });
}

template <typename T>
Var<T> ConcatRows(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_rows of nothing");
  const int64_t cols = parts[0].value().cols();
  int64_t rows = 0;
  bool req = false;
  for (const auto &p : parts) {
    CheckMatrix(p.value(), "concat_rows");
    if (p.value().cols() != cols) {
      throw ShapeMismatch("concat_rows column count " +
                          std::to_string(p.value().cols()) + " vs " +
                          std::to_string(cols));
    }
    rows += p.value().rows();
    req = req || Needs(*p.tape, p);
  }
  Tensor<T> out = Tensor<T>::Matrix(rows, cols);
  int64_t offset = 0;
  for (const auto &p : parts) {
    std::copy(p.value().data(), p.value().data() + p.value().size(),
              out.data() + offset);
    offset += p.value().size();
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return parts[0].tape->Record(
      std::move(out), req, [inputs](Tape<T> &t, Var<T> y) {
        const auto &g = t.grad(y);
        int64_t offset = 0;
        for (const auto &p : inputs) {
          const int64_t n = p.value().size();
          if (Needs(t, p)) {
            Tensor<T> &gp = t.grad(p);
            for (int64_t i = 0; i < n; ++i) gp[i] += g[offset + i];
          }
          offset += n;
        }
      });
}

template <typename T>
Var<T> ConcatCols(std::span<const Var<T>> parts) {
  if (parts.empty()) throw ShapeMismatch("concat_cols of nothing");
  const int64_t rows = parts[0].value().rows();
  int64_t cols = 0;
  bool req = false;
  for (const auto &p : parts) {
    CheckMatrix(p.value(), "concat_cols");
    if (p.value().rows() != rows) {
      throw ShapeMismatch("concat_cols row count " +
                          std::to_string(p.value().rows()) + " vs " +
                          std::to_string(rows));
    }
    cols += p.value().cols();
    req = req || Needs(*p.tape, p);
  }
  Tensor<T> out = Tensor<T>::Matrix(rows, cols);
  int64_t offset = 0;
  for (const auto &p : parts) {
    M(out).middleCols(offset, p.value().cols()) = M(p.value());
    offset += p.value().cols();
  }
  std::vector<Var<T>> inputs(parts.begin(), parts.end());
  return parts[0].tape->Record(
      std::move(out), req, [inputs](Tape<T> &t, Var<T> y) {
        const auto &g = t.grad(y);
        int64_t offset = 0;
        for (const auto &p : inputs) {
          const int64_t c = p.value().cols();
          if (Needs(t, p)) M(t.grad(p)) += M(g).middleCols(offset, c);
          offset += c;
        }
      });
}

template <typename T>
Var<T> SliceRows(Var<T> a, int64_t begin, int64_t end) {
  const auto &A = a.value();
  CheckMatrix(A, "slice_rows");
  if (begin < 0 || end > A.rows() || begin > end) {
    throw ShapeMismatch("slice_rows [" + std::to_string(begin) + "," +
                        std::to_string(end) + ") of " + ShapeString(A.shape()));
  }
  const int64_t cols = A.cols();
  Tensor<T> out({end - begin, cols},
                std::vector<T>(A.data() + begin * cols, A.data() + end * cols));
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a),
                     [a, begin](Tape<T> &t, Var<T> y) {
                       const auto &g = t.grad(y);
                       Tensor<T> &ga = t.grad(a);
                       const int64_t off = begin * ga.cols();
                       for (int64_t i = 0; i < g.size(); ++i) ga[off + i] += g[i];
                     });
}

template <typename T>
Var<T> SliceCols(Var<T> a, int64_t begin, int64_t end) {
  const auto &A = a.value();
  CheckMatrix(A, "slice_cols");
  if (begin < 0 || end > A.cols() || begin > end) {
    throw ShapeMismatch("slice_cols [" + std::to_string(begin) + "," +
                        std::to_string(end) + ") of " + ShapeString(A.shape()));
  }
  Tensor<T> out = Tensor<T>::Matrix(A.rows(), end - begin);
  M(out) = M(A).middleCols(begin, end - begin);
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a),
                     [a, begin](Tape<T> &t, Var<T> y) {
                       const auto &g = t.grad(y);
                       M(t.grad(a)).middleCols(begin, g.cols()) += M(g);
                     });
}

template <typename T>
Var<T> Reshape(Var<T> a, int64_t rows, int64_t cols) {
  Tensor<T> out = a.value().Reshaped({rows, cols});
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a), [a](Tape<T> &t, Var<T> y) {
    const auto &g = t.grad(y);
    Tensor<T> &ga = t.grad(a);
    for (int64_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

template <typename T>
Var<T> MeanRows(Var<T> a) {
  const auto &A = a.value();
  CheckMatrix(A, "mean_rows");
  if (A.rows() == 0) throw ShapeMismatch("mean_rows of zero rows");
  Tensor<T> out = Tensor<T>::Matrix(1, A.cols());
  for (int64_t r = 0; r < A.rows(); ++r) {
    for (int64_t c = 0; c < A.cols(); ++c) out[c] += A.at(r, c);
  }
  for (auto &v : out.storage()) v /= T(A.rows());
  Tape<T> &tape = *a.tape;
  return tape.Record(std::move(out), Needs(tape, a), [a](Tape<T> &t, Var<T> y) {
    const auto &g = t.grad(y);
    Tensor<T> &ga = t.grad(a);
    const T inv = T(1) / T(ga.rows());
    for (int64_t r = 0; r < ga.rows(); ++r) {
      for (int64_t c = 0; c < ga.cols(); ++c) ga.at(r, c) += g[c] * inv;
    }
  });
}

template <typename T>
Var<T> Sum(Var<T> a) {
  T total = 0;
  for (T v : a.value().values()) total += v;
  Tape<T> &tape = *a.tape;
  return tape.Record(Tensor<T>({1, 1}, std::vector<T>{total}), Needs(tape, a),
                     [a](Tape<T> &t, Var<T> y) {
                       const T g = t.grad(y)[0];
                       for (auto &v : t.grad(a).storage()) v += g;
                     });
}

template <typename T>
Var<T> GatherRows(Var<T> table, std::span<const int> ids) {
  const auto &W = table.value();
  CheckMatrix(W, "gather_rows");
  const int64_t cols = W.cols();
  Tensor<T> out = Tensor<T>::Matrix(static_cast<int64_t>(ids.size()), cols);
  for (size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || ids[r] >= W.rows()) {
      throw std::out_of_range("gather_rows id " + std::to_string(ids[r]) +
                              " outside table of " + std::to_string(W.rows()));
    }
    std::copy_n(W.data() + ids[r] * cols, cols, out.data() + r * cols);
  }
  std::vector<int> idv(ids.begin(), ids.end());
  Tape<T> &tape = *table.tape;
  return tape.Record(std::move(out), Needs(tape, table),
                     [table, idv](Tape<T> &t, Var<T> y) {
                       const auto &g = t.grad(y);
                       Tensor<T> &gw = t.grad(table);
                       const int64_t cols = gw.cols();
                       for (size_t r = 0; r < idv.size(); ++r) {
                         for (int64_t c = 0; c < cols; ++c) {
                           gw.at(idv[r], c) += g.at(r, c);
                         }
                       }
                     });
}

template <typename T>
Var<T> SoftmaxCrossEntropy(Var<T> logits, std::span<const int> targets) {
  const auto &L = logits.value();
  CheckMatrix(L, "cross_entropy");
  if (static_cast<int64_t>(targets.size()) != L.rows()) {
    throw ShapeMismatch("cross_entropy targets " +
                        std::to_string(targets.size()) + " vs rows " +
                        std::to_string(L.rows()));
  }
  auto probs = std::make_shared<Tensor<T>>(L.shape());
  T loss = 0;
  for (int64_t r = 0; r < L.rows(); ++r) {
    if (targets[r] < 0 || targets[r] >= L.cols()) {
      throw std::out_of_range("cross_entropy target out of range");
    }
    auto row = L.row(r);
    const T mx = *std::max_element(row.begin(), row.end());
    T total = 0;
    for (int64_t c = 0; c < L.cols(); ++c) {
      const T e = std::exp(row[c] - mx);
      probs->at(r, c) = e;
      total += e;
    }
    for (int64_t c = 0; c < L.cols(); ++c) probs->at(r, c) /= total;
    loss += -(row[targets[r]] - mx - std::log(total));
  }
  loss /= T(L.rows());
  std::vector<int> tv(targets.begin(), targets.end());
  Tape<T> &tape = *logits.tape;
  return tape.Record(Tensor<T>({1, 1}, std::vector<T>{loss}),
                     Needs(tape, logits),
                     [logits, probs, tv](Tape<T> &t, Var<T> y) {
                       const T g = t.grad(y)[0] / T(tv.size());
                       Tensor<T> &gl = t.grad(logits);
                       for (int64_t r = 0; r < gl.rows(); ++r) {
                         for (int64_t c = 0; c < gl.cols(); ++c) {
                           const T onehot = c == tv[r] ? T(1) : T(0);
                           gl.at(r, c) += g * (probs->at(r, c) - onehot);
                         }
                       }
                     });
}

template <typename T>
Var<T> Attention(Var<T> q, Var<T> k, Var<T> v, int heads) {
  const auto &Q = q.value();
  const auto &K = k.value();
  const auto &V = v.value();
  CheckMatrix(Q, "attention");
  CheckMatrix(K, "attention");
  CheckMatrix(V, "attention");
  if (Q.cols() != K.cols() || K.rows() != V.rows() || V.cols() != Q.cols()) {
    throw ShapeMismatch("attention Q" + ShapeString(Q.shape()) + " K" +
                        ShapeString(K.shape()) + " V" + ShapeString(V.shape()));
  }
  if (heads < 1 || Q.cols() % heads != 0) {
    throw ShapeMismatch("attention width " + std::to_string(Q.cols()) +
                        " not divisible by " + std::to_string(heads) + " heads");
  }
  if (K.rows() == 0) throw ShapeMismatch("attention over empty key set");
  const int64_t dh = Q.cols() / heads;
  const T scale = T(1) / std::sqrt(T(dh));
  // Softmax weights per head, kept for backward.
  auto weights = std::make_shared<std::vector<Mat<T>>>(heads);
  Tensor<T> out = Tensor<T>::Matrix(Q.rows(), V.cols());
  for (int h = 0; h < heads; ++h) {
    Mat<T> &A = (*weights)[h];
    A.noalias() = (M(Q).middleCols(h * dh, dh) *
                   M(K).middleCols(h * dh, dh).transpose()) *
                  scale;
    for (int64_t r = 0; r < A.rows(); ++r) {
      const T mx = A.row(r).maxCoeff();
      T total = 0;
      for (int64_t c = 0; c < A.cols(); ++c) {
        A(r, c) = std::exp(A(r, c) - mx);
        total += A(r, c);
      }
      A.row(r) /= total;
    }
    M(out).middleCols(h * dh, dh).noalias() = A * M(V).middleCols(h * dh, dh);
  }
  Tape<T> &tape = *q.tape;
  const bool req = Needs(tape, q) || Needs(tape, k) || Needs(tape, v);
  return tape.Record(
      std::move(out), req,
      [q, k, v, heads, dh, scale, weights](Tape<T> &t, Var<T> y) {
        const auto &g = t.grad(y);
        const bool nq = Needs(t, q), nk = Needs(t, k), nv = Needs(t, v);
        for (int h = 0; h < heads; ++h) {
          const Mat<T> &A = (*weights)[h];
          auto go = M(g).middleCols(h * dh, dh);
          if (nv) M(t.grad(v)).middleCols(h * dh, dh).noalias() += A.transpose() * go;
          if (!nq && !nk) continue;
          Mat<T> dA = go * M(v.value()).middleCols(h * dh, dh).transpose();
          for (int64_t r = 0; r < A.rows(); ++r) {
            const T dot = dA.row(r).dot(A.row(r));
            dA.row(r) = (A.row(r).array() * (dA.row(r).array() - dot)).matrix();
          }
          dA *= scale;
          if (nq) {
            M(t.grad(q)).middleCols(h * dh, dh).noalias() +=
                dA * M(k.value()).middleCols(h * dh, dh);
          }
          if (nk) {
            M(t.grad(k)).middleCols(h * dh, dh).noalias() +=
                dA.transpose() * M(q.value()).middleCols(h * dh, dh);
          }
        }
      });
}

#define TREEPROMPT_INSTANTIATE_OPS(T)                                         \
  template Var<T> MatMul(Var<T>, Var<T>);                                     \
  template Var<T> MatMulNT(Var<T>, Var<T>);                                   \
  template Var<T> Add(Var<T>, Var<T>);                                        \
  template Var<T> Sub(Var<T>, Var<T>);                                        \
  template Var<T> Mul(Var<T>, Var<T>);                                        \
  template Var<T> Scale(Var<T>, T);                                           \
  template Var<T> AddRowBroadcast(Var<T>, Var<T>);                            \
  template Var<T> Relu(Var<T>);                                               \
  template Var<T> SoftmaxRows(Var<T>);                                        \
  template Var<T> LayerNormRows(Var<T>, Var<T>, Var<T>);                      \
  template Var<T> L2NormRows(Var<T>);                                         \
  template Var<T> ConcatRows(std::span<const Var<T>>);                        \
  template Var<T> ConcatCols(std::span<const Var<T>>);                        \
  template Var<T> SliceRows(Var<T>, int64_t, int64_t);                        \
  template Var<T> SliceCols(Var<T>, int64_t, int64_t);                        \
  template Var<T> Reshape(Var<T>, int64_t, int64_t);                          \
  template Var<T> MeanRows(Var<T>);                                           \
  template Var<T> Sum(Var<T>);                                                \
  template Var<T> GatherRows(Var<T>, std::span<const int>);                   \
  template Var<T> SoftmaxCrossEntropy(Var<T>, std::span<const int>);          \
  template Var<T> Attention(Var<T>, Var<T>, Var<T>, int);

TREEPROMPT_INSTANTIATE_OPS(float)
TREEPROMPT_INSTANTIATE_OPS(double)

#undef TREEPROMPT_INSTANTIATE_OPS

}  // namespace treeprompt
