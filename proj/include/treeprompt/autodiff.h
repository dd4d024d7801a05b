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

// Tape-based reverse-mode automatic differentiation.
//
// A Tape records every operation of one forward pass in creation order, which
// is already a topological order. Backward walks the records once in reverse.
// Parameters live outside the tape; their gradients are collected into a
// GradMap so several tapes (one per example or per worker) can be summed.

#ifndef TREEPROMPT_AUTODIFF_H_
#define TREEPROMPT_AUTODIFF_H_

#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "treeprompt/tensor.h"

namespace treeprompt {

template <typename T>
struct Parameter {
  std::string name;
  Tensor<T> value;
  bool trainable = true;
};

// Named, ordered parameter collection. Order is insertion order and is what
// checkpoints, optimizers and gradient summation iterate over.
template <typename T>
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ParameterSet &) = delete;
  ParameterSet &operator=(const ParameterSet &) = delete;
  ParameterSet(ParameterSet &&) = default;
  ParameterSet &operator=(ParameterSet &&) = default;

  Parameter<T> &Add(const std::string &name, Tensor<T> value,
                    bool trainable = true);
  Parameter<T> *Find(const std::string &name);
  const Parameter<T> *Find(const std::string &name) const;
  Parameter<T> &Get(const std::string &name);

  size_t size() const { return params_.size(); }
  Parameter<T> &operator[](size_t i) { return *params_[i]; }
  const Parameter<T> &operator[](size_t i) const { return *params_[i]; }

  void SetTrainable(bool trainable);
  int64_t NumElements() const;

  template <typename F>
  void ForEach(F &&f) {
    for (auto &p : params_) f(*p);
  }
  template <typename F>
  void ForEach(F &&f) const {
    for (const auto &p : params_) f(*p);
  }

 private:
  std::vector<std::unique_ptr<Parameter<T>>> params_;
};

// Accumulated gradients keyed by parameter identity.
template <typename T>
class GradMap {
 public:
  Tensor<T> &Slot(const Parameter<T> &p);
  const Tensor<T> *Find(const Parameter<T> &p) const;
  bool Contains(const Parameter<T> &p) const { return Find(p) != nullptr; }
  void Add(const GradMap &other);
  void Scale(T factor);
  void Clear() { grads_.clear(); }
  size_t size() const { return grads_.size(); }

 private:
  std::map<const Parameter<T> *, Tensor<T>> grads_;
};

template <typename T>
class Tape;

// Handle to a value recorded on a tape.
template <typename T>
struct Var {
  Tape<T> *tape = nullptr;
  int id = -1;

  bool valid() const { return tape != nullptr && id >= 0; }
  const Tensor<T> &value() const;
  int64_t rows() const { return value().rows(); }
  int64_t cols() const { return value().cols(); }
};

template <typename T>
class Tape {
 public:
  // Receives the tape and the op's own output handle.
  using BackwardFn = std::function<void(Tape &, Var<T>)>;

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Var<T> Constant(Tensor<T> value) { return Record(std::move(value), false); }
  Var<T> Leaf(Tensor<T> value, bool requires_grad = true) {
    return Record(std::move(value), requires_grad);
  }
  // Frozen or non-trainable parameters enter the tape as constants. Repeated
  // calls for the same parameter return the same handle.
  Var<T> Param(const Parameter<T> &p);

  // Records an op result. `backward` runs only when the output received a
  // gradient and some input requires one.
  Var<T> Record(Tensor<T> value, bool requires_grad, BackwardFn backward = {});

  const Tensor<T> &value(Var<T> v) const { return nodes_[v.id].value; }
  bool requires_grad(Var<T> v) const { return nodes_[v.id].requires_grad; }
  bool has_grad(Var<T> v) const { return nodes_[v.id].has_grad; }

  // Gradient buffer of `v`, zero-initialized on first access.
  Tensor<T> &grad(Var<T> v);
  const Tensor<T> &grad_or_empty(Var<T> v) const { return nodes_[v.id].grad; }

  // Seeds d(loss)/d(loss) = 1 and runs every recorded backward rule once.
  void Backward(Var<T> loss);

  // Adds parameter gradients into `out`. Returns the names of trainable
  // parameters that appeared on the tape but received no gradient.
  std::vector<std::string> CollectGrads(GradMap<T> &out) const;

  size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool requires_grad = false;
    bool has_grad = false;
    BackwardFn backward;
    const Parameter<T> *param = nullptr;
  };
  std::vector<Node> nodes_;
  std::map<const Parameter<T> *, int> bound_;
};

template <typename T>
const Tensor<T> &Var<T>::value() const {
  return tape->value(*this);
}

extern template class ParameterSet<float>;
extern template class ParameterSet<double>;
extern template class GradMap<float>;
extern template class GradMap<double>;
extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace treeprompt

#endif  // TREEPROMPT_AUTODIFF_H_
