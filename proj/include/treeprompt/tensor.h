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

#ifndef TREEPROMPT_TENSOR_H_
#define TREEPROMPT_TENSOR_H_

#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace treeprompt {

using Shape = std::vector<int64_t>;

// Raised whenever operand shapes disagree.
class ShapeMismatch : public std::invalid_argument {
 public:
  explicit ShapeMismatch(const std::string &what)
      : std::invalid_argument("shape mismatch: " + what) {}
};

std::string ShapeString(const Shape &shape);

inline int64_t NumElements(const Shape &shape) {
  return std::accumulate(shape.begin(), shape.end(), int64_t{1},
                         std::multiplies<int64_t>());
}

// Dense row-major tensor. Vectors used by the model are 1 x n matrices.
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0))
      : shape_(std::move(shape)), data_(NumElements(shape_), fill) {}
  Tensor(Shape shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<int64_t>(data_.size()) != NumElements(shape_)) {
      throw ShapeMismatch("data length " + std::to_string(data_.size()) +
                          " vs shape " + ShapeString(shape_));
    }
  }

  static Tensor Matrix(int64_t rows, int64_t cols, T fill = T(0)) {
    return Tensor({rows, cols}, fill);
  }
  static Tensor Row(std::vector<T> values) {
    const auto n = static_cast<int64_t>(values.size());
    return Tensor({1, n}, std::move(values));
  }

  const Shape &shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t size() const { return static_cast<int64_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  // Matrix view helpers; a rank-1 tensor is treated as a single row.
  int64_t rows() const {
    return shape_.size() >= 2 ? shape_[shape_.size() - 2] : 1;
  }
  int64_t cols() const { return shape_.empty() ? 1 : shape_.back(); }

  T *data() { return data_.data(); }
  const T *data() const { return data_.data(); }
  std::span<T> values() { return data_; }
  std::span<const T> values() const { return data_; }
  std::vector<T> &storage() { return data_; }
  const std::vector<T> &storage() const { return data_; }

  T &operator[](int64_t i) { return data_[i]; }
  const T &operator[](int64_t i) const { return data_[i]; }
  T &at(int64_t r, int64_t c) { return data_[r * cols() + c]; }
  const T &at(int64_t r, int64_t c) const { return data_[r * cols() + c]; }

  std::span<T> row(int64_t r) {
    return std::span<T>(data_).subspan(r * cols(), cols());
  }
  std::span<const T> row(int64_t r) const {
    return std::span<const T>(data_).subspan(r * cols(), cols());
  }

  void Fill(T v) { std::fill(data_.begin(), data_.end(), v); }
  Tensor Reshaped(Shape shape) const {
    if (NumElements(shape) != size()) {
      throw ShapeMismatch("cannot reshape " + ShapeString(shape_) + " to " +
                          ShapeString(shape));
    }
    return Tensor(std::move(shape), data_);
  }

  template <typename U>
  Tensor<U> Cast() const {
    return Tensor<U>(shape_, std::vector<U>(data_.begin(), data_.end()));
  }

  bool operator==(const Tensor &other) const = default;

 private:
  Shape shape_;
  std::vector<T> data_;
};

}  // namespace treeprompt

#endif  // TREEPROMPT_TENSOR_H_
