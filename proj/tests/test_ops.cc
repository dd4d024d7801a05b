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

#include <cmath>
#include <random>

#include "doctest.h"
#include "test_util.h"
#include "treeprompt/ops.h"

namespace treeprompt {
namespace {

using testing::MaxRelativeError;
using testing::NumericGradient;
using testing::RandomMatrix;

using OpFn = std::function<Var<double>(std::vector<Var<double>> &)>;

// Largest relative error between tape and finite-difference gradients of
// sum(op(inputs) * R) for a fixed random R.
double OpGradientError(const OpFn &op, std::vector<Tensor<double>> inputs, uint64_t seed) {
  std::mt19937_64 rng(seed);
  Tensor<double> weights;
  auto loss = [&](Tape<double> &tape, std::vector<Var<double>> &vars) {
    Var<double> y = op(vars);
    if (weights.empty()) weights = RandomMatrix(y.rows(), y.cols(), rng);
    return Sum(Mul(y, tape.Constant(weights)));
  };
  Tape<double> tape;
  std::vector<Var<double>> vars;
  for (auto &t : inputs) vars.push_back(tape.Leaf(t));
  Var<double> l = loss(tape, vars);
  tape.Backward(l);
  double worst = 0;
  for (size_t i = 0; i < inputs.size(); ++i) {
    auto f = [&] {
      Tape<double> t2;
      std::vector<Var<double>> v2;
      for (auto &t : inputs) v2.push_back(t2.Leaf(t));
      return loss(t2, v2).value()[0];
    };
    const auto numeric = NumericGradient(f, inputs[i]);
    worst = std::max(worst, MaxRelativeError(numeric, tape.grad(vars[i])));
  }
  return worst;
}

}  // namespace

TEST_SUITE("ops") {

TEST_CASE("matmul forward matches the triple loop") {
  std::mt19937_64 rng(1);
  const auto a = RandomMatrix(3, 4, rng), b = RandomMatrix(4, 5, rng);
  Tape<double> tape;
  const auto y = MatMul(tape.Constant(a), tape.Constant(b)).value();
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 5; ++j) {
      double s = 0;
      for (int k = 0; k < 4; ++k) s += a.at(i, k) * b.at(k, j);
      CHECK(y.at(i, j) == doctest::Approx(s).epsilon(1e-12));
    }
  }
  const auto yt = MatMulNT(tape.Constant(a), tape.Constant(a)).value();
  CHECK(yt.rows() == 3);
  CHECK(yt.at(1, 2) == doctest::Approx(yt.at(2, 1)).epsilon(1e-12));
}

TEST_CASE("shape mismatches are rejected") {
  Tape<double> tape;
  auto a = tape.Constant(Tensor<double>::Matrix(2, 3));
  auto b = tape.Constant(Tensor<double>::Matrix(2, 3));
  CHECK_THROWS_AS(MatMul(a, b), ShapeMismatch);
  CHECK_THROWS_AS(Add(a, tape.Constant(Tensor<double>::Matrix(3, 2))), ShapeMismatch);
  CHECK_THROWS_AS(ConcatRows<double>({a, tape.Constant(Tensor<double>::Matrix(1, 2))}),
                  ShapeMismatch);
  CHECK_THROWS_AS(Attention(a, b, b, 2), ShapeMismatch);
}

TEST_CASE("softmax rows sum to one and survive large logits") {
  Tape<double> tape;
  auto y = SoftmaxRows(tape.Constant(Tensor<double>({2, 3}, {1000, 1001, 1002, -5, 0, 5})))
               .value();
  for (int r = 0; r < 2; ++r) {
    double s = 0;
    for (int c = 0; c < 3; ++c) {
      CHECK(std::isfinite(y.at(r, c)));
      s += y.at(r, c);
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  const double z = std::exp(-2.0) + std::exp(-1.0) + 1.0;
  CHECK(y.at(0, 2) == doctest::Approx(1.0 / z).epsilon(1e-12));
}

TEST_CASE("layer norm matches the closed form") {
  Tape<double> tape;
  const Tensor<double> x({1, 4}, {1, 2, 3, 6});
  auto y = LayerNormRows(tape.Constant(x), tape.Constant(Tensor<double>({1, 4}, 2.0)),
                         tape.Constant(Tensor<double>({1, 4}, 0.5)))
               .value();
  const double mean = 3.0, var = (4 + 1 + 0 + 9) / 4.0;
  for (int c = 0; c < 4; ++c) {
    CHECK(y[c] == doctest::Approx(2.0 * (x[c] - mean) / std::sqrt(var + kLayerNormEps) + 0.5)
                      .epsilon(1e-12));
  }
}

TEST_CASE("l2 normalization keeps the zero row at zero") {
  Tape<double> tape;
  auto y = L2NormRows(tape.Constant(Tensor<double>({2, 2}, {3, 4, 0, 0}))).value();
  CHECK(y[0] == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(0.8).epsilon(1e-12));
  CHECK(y[2] == 0.0);
  CHECK(y[3] == 0.0);
}

TEST_CASE("softmax cross entropy equals the log-sum-exp form") {
  Tape<double> tape;
  const Tensor<double> logits({2, 3}, {0.5, -1, 2, 3, 3, 3});
  const int targets[] = {2, 0};
  auto l = SoftmaxCrossEntropy(tape.Constant(logits), std::span<const int>(targets)).value();
  const double l0 = std::log(std::exp(0.5) + std::exp(-1.0) + std::exp(2.0)) - 2.0;
  const double l1 = std::log(3.0);
  CHECK(l[0] == doctest::Approx((l0 + l1) / 2).epsilon(1e-12));
  const int bad[] = {3, 0};
  CHECK_THROWS(SoftmaxCrossEntropy(tape.Constant(logits), std::span<const int>(bad)));
}

TEST_CASE("attention forward matches a per-head loop") {
  std::mt19937_64 rng(5);
  const auto q = RandomMatrix(2, 4, rng), k = RandomMatrix(3, 4, rng), v = RandomMatrix(3, 4, rng);
  Tape<double> tape;
  const auto y =
      Attention(tape.Constant(q), tape.Constant(k), tape.Constant(v), 2).value();
  for (int h = 0; h < 2; ++h) {
    for (int i = 0; i < 2; ++i) {
      std::vector<double> w(3);
      double z = 0;
      for (int j = 0; j < 3; ++j) {
        double s = 0;
        for (int c = 0; c < 2; ++c) s += q.at(i, 2 * h + c) * k.at(j, 2 * h + c);
        w[j] = std::exp(s / std::sqrt(2.0));
        z += w[j];
      }
      for (int c = 0; c < 2; ++c) {
        double o = 0;
        for (int j = 0; j < 3; ++j) o += w[j] / z * v.at(j, 2 * h + c);
        CHECK(y.at(i, 2 * h + c) == doctest::Approx(o).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("every op gradient matches finite differences") {
  std::mt19937_64 rng(11);
  auto m = [&](int r, int c) { return RandomMatrix(r, c, rng); };
  const double tol = 1e-6;
  CHECK(OpGradientError([](auto &v) { return MatMul(v[0], v[1]); }, {m(3, 4), m(4, 2)}, 1) < tol);
  CHECK(OpGradientError([](auto &v) { return MatMulNT(v[0], v[1]); }, {m(3, 4), m(2, 4)}, 2) < tol);
  CHECK(OpGradientError([](auto &v) { return Add(v[0], v[1]); }, {m(2, 3), m(2, 3)}, 3) < tol);
  CHECK(OpGradientError([](auto &v) { return Sub(v[0], v[1]); }, {m(2, 3), m(2, 3)}, 4) < tol);
  CHECK(OpGradientError([](auto &v) { return Mul(v[0], v[1]); }, {m(2, 3), m(2, 3)}, 5) < tol);
  CHECK(OpGradientError([](auto &v) { return Scale(v[0], 2.5); }, {m(2, 3)}, 6) < tol);
  CHECK(OpGradientError([](auto &v) { return AddRowBroadcast(v[0], v[1]); }, {m(4, 3), m(1, 3)}, 7) < tol);
  CHECK(OpGradientError([](auto &v) { return SoftmaxRows(v[0]); }, {m(3, 5)}, 8) < tol);
  CHECK(OpGradientError([](auto &v) { return LayerNormRows(v[0], v[1], v[2]); },
                        {m(3, 6), m(1, 6), m(1, 6)}, 9) < tol);
  CHECK(OpGradientError([](auto &v) { return L2NormRows(v[0]); }, {m(3, 4)}, 10) < tol);
  CHECK(OpGradientError([](auto &v) { return ConcatRows<double>({v[0], v[1]}); }, {m(2, 3), m(1, 3)}, 11) < tol);
  CHECK(OpGradientError([](auto &v) { return ConcatCols<double>({v[0], v[1]}); }, {m(2, 3), m(2, 1)}, 12) < tol);
  CHECK(OpGradientError([](auto &v) { return SliceRows(v[0], 1, 3); }, {m(4, 3)}, 13) < tol);
  CHECK(OpGradientError([](auto &v) { return SliceCols(v[0], 1, 3); }, {m(2, 4)}, 14) < tol);
  CHECK(OpGradientError([](auto &v) { return Reshape(v[0], 3, 4); }, {m(2, 6)}, 15) < tol);
  CHECK(OpGradientError([](auto &v) { return MeanRows(v[0]); }, {m(4, 3)}, 16) < tol);
  const int ids[] = {2, 0, 2};
  CHECK(OpGradientError([&](auto &v) { return GatherRows(v[0], std::span<const int>(ids)); },
                        {m(3, 4)}, 17) < tol);
  const int targets[] = {1, 3};
  CHECK(OpGradientError([&](auto &v) { return SoftmaxCrossEntropy(v[0], std::span<const int>(targets)); },
                        {m(2, 4)}, 18) < tol);
  CHECK(OpGradientError([](auto &v) { return Attention(v[0], v[1], v[2], 2); },
                        {m(3, 4), m(5, 4), m(5, 4)}, 19) < tol);
  CHECK(OpGradientError([](auto &v) { return Attention(v[0], v[0], v[0], 1); }, {m(3, 4)}, 20) < tol);
}

TEST_CASE("relu gradient away from the kink") {
  Tensor<double> x({1, 4}, {-2.0, -0.5, 0.7, 3.0});
  CHECK(OpGradientError([](auto &v) { return Relu(v[0]); }, {x}, 21) < 1e-6);
}

TEST_CASE("gradients accumulate when a value is reused") {
  Tape<double> tape;
  auto x = tape.Leaf(Tensor<double>({1, 1}, {3.0}));
  auto y = Add(Mul(x, x), x);  // x^2 + x
  tape.Backward(Sum(y));
  CHECK(tape.grad(x)[0] == doctest::Approx(7.0));
}

TEST_CASE("backward requires a scalar") {
  Tape<double> tape;
  auto x = tape.Leaf(Tensor<double>::Matrix(2, 2));
  CHECK_THROWS_AS(tape.Backward(x), ShapeMismatch);
}

}  // TEST_SUITE
}  // namespace treeprompt
