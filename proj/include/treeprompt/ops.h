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

// Differentiable kernels. All operands are rank-2 (vectors are 1 x n rows)
// and every reduction runs in a fixed sequential order.

#ifndef TREEPROMPT_OPS_H_
#define TREEPROMPT_OPS_H_

#include <span>
#include <vector>

#include "treeprompt/autodiff.h"

namespace treeprompt {

inline constexpr double kL2NormEps = 1e-12;
inline constexpr double kLayerNormEps = 1e-5;

template <typename T>
Var<T> MatMul(Var<T> a, Var<T> b);  // [m x k] * [k x n]
template <typename T>
Var<T> MatMulNT(Var<T> a, Var<T> b);  // [m x k] * [n x k]^T

template <typename T>
Var<T> Add(Var<T> a, Var<T> b);
template <typename T>
Var<T> Sub(Var<T> a, Var<T> b);
template <typename T>
Var<T> Mul(Var<T> a, Var<T> b);
template <typename T>
Var<T> Scale(Var<T> a, T factor);
// a [m x n] + b [1 x n] added to every row.
template <typename T>
Var<T> AddRowBroadcast(Var<T> a, Var<T> b);

template <typename T>
Var<T> Relu(Var<T> a);
template <typename T>
Var<T> SoftmaxRows(Var<T> a);
template <typename T>
Var<T> LayerNormRows(Var<T> x, Var<T> gamma, Var<T> beta);
// Each row divided by (||row||_2 + 1e-12); the zero row maps to zero.
template <typename T>
Var<T> L2NormRows(Var<T> x);

template <typename T>
Var<T> ConcatRows(std::span<const Var<T>> parts);
template <typename T>
Var<T> ConcatCols(std::span<const Var<T>> parts);
template <typename T>
Var<T> SliceRows(Var<T> a, int64_t begin, int64_t end);
template <typename T>
Var<T> SliceCols(Var<T> a, int64_t begin, int64_t end);
template <typename T>
Var<T> Reshape(Var<T> a, int64_t rows, int64_t cols);

template <typename T>
Var<T> MeanRows(Var<T> a);  // -> 1 x n
template <typename T>
Var<T> Sum(Var<T> a);  // -> 1 x 1
template <typename T>
Var<T> GatherRows(Var<T> table, std::span<const int> ids);

// Mean negative log-likelihood of `targets[r]` under softmax of logits row r.
template <typename T>
Var<T> SoftmaxCrossEntropy(Var<T> logits, std::span<const int> targets);

// softmax(Q K^T / sqrt(d_head)) V per head; heads split the columns evenly.
template <typename T>
Var<T> Attention(Var<T> q, Var<T> k, Var<T> v, int heads = 1);

// x W^T + b with W stored [d_out x d_in].
template <typename T>
Var<T> Linear(Var<T> x, Var<T> w, Var<T> b) {
  return AddRowBroadcast(MatMulNT(x, w), b);
}

// linear2(relu(linear1(x))).
template <typename T>
Var<T> Mlp2(Var<T> x, Var<T> w1, Var<T> b1, Var<T> w2, Var<T> b2) {
  return Linear(Relu(Linear(x, w1, b1)), w2, b2);
}

template <typename T>
Var<T> ConcatRows(std::initializer_list<Var<T>> parts) {
  std::vector<Var<T>> v(parts);
  return ConcatRows<T>(std::span<const Var<T>>(v));
}
template <typename T>
Var<T> ConcatCols(std::initializer_list<Var<T>> parts) {
  std::vector<Var<T>> v(parts);
  return ConcatCols<T>(std::span<const Var<T>>(v));
}

}  // namespace treeprompt

#endif  // TREEPROMPT_OPS_H_
