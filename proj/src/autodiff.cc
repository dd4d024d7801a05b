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

#include "treeprompt/autodiff.h"

#include <set>
#include <sstream>

namespace treeprompt {

std::string ShapeString(const Shape &shape) {
  std::ostringstream out;
  out << "[";
  for (size_t i = 0; i < shape.size(); ++i) {
    if (i) out << "x";
    out << shape[i];
  }
  out << "]";
  return out.str();
}

template <typename T>
Parameter<T> &ParameterSet<T>::Add(const std::string &name, Tensor<T> value,
                                   bool trainable) {
  if (Find(name) != nullptr) {
    throw std::invalid_argument("duplicate parameter name: " + name);
  }
  params_.push_back(std::make_unique<Parameter<T>>(
      Parameter<T>{name, std::move(value), trainable}));
  return *params_.back();
}

template <typename T>
Parameter<T> *ParameterSet<T>::Find(const std::string &name) {
  for (auto &p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

template <typename T>
const Parameter<T> *ParameterSet<T>::Find(const std::string &name) const {
  for (const auto &p : params_) {
    if (p->name == name) return p.get();
  }
  return nullptr;
}

template <typename T>
Parameter<T> &ParameterSet<T>::Get(const std::string &name) {
  Parameter<T> *p = Find(name);
  if (p == nullptr) throw std::out_of_range("unknown parameter: " + name);
  return *p;
}

template <typename T>
void ParameterSet<T>::SetTrainable(bool trainable) {
  for (auto &p : params_) p->trainable = trainable;
}

template <typename T>
int64_t ParameterSet<T>::NumElements() const {
  int64_t n = 0;
  for (const auto &p : params_) n += p->value.size();
  return n;
}

template <typename T>
Tensor<T> &GradMap<T>::Slot(const Parameter<T> &p) {
  auto it = grads_.find(&p);
  if (it == grads_.end()) {
    it = grads_.emplace(&p, Tensor<T>(p.value.shape())).first;
  }
  return it->second;
}

template <typename T>
const Tensor<T> *GradMap<T>::Find(const Parameter<T> &p) const {
  auto it = grads_.find(&p);
  return it == grads_.end() ? nullptr : &it->second;
}

template <typename T>
void GradMap<T>::Add(const GradMap &other) {
  for (const auto &[param, grad] : other.grads_) {
    Tensor<T> &slot = Slot(*param);
    for (int64_t i = 0; i < slot.size(); ++i) slot[i] += grad[i];
  }
}

template <typename T>
void GradMap<T>::Scale(T factor) {
  for (auto &[param, grad] : grads_) {
    for (auto &g : grad.storage()) g *= factor;
  }
}

template <typename T>
Var<T> Tape<T>::Param(const Parameter<T> &p) {
  auto it = bound_.find(&p);
  if (it != bound_.end()) return Var<T>{this, it->second};
  Var<T> v = Record(p.value, p.trainable);
  nodes_[v.id].param = &p;
  bound_.emplace(&p, v.id);
  return v;
}

template <typename T>
Var<T> Tape<T>::Record(Tensor<T> value, bool requires_grad,
                       BackwardFn backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var<T>{this, static_cast<int>(nodes_.size()) - 1};
}

template <typename T>
Tensor<T> &Tape<T>::grad(Var<T> v) {
  Node &node = nodes_[v.id];
  if (!node.has_grad) {
    node.grad = Tensor<T>(node.value.shape());
    node.has_grad = true;
  }
  return node.grad;
}

template <typename T>
void Tape<T>::Backward(Var<T> loss) {
  if (value(loss).size() != 1) {
    throw ShapeMismatch("backward needs a scalar loss, got " +
                        ShapeString(value(loss).shape()));
  }
  grad(loss).Fill(T(1));
  for (int i = loss.id; i >= 0; --i) {
    Node &node = nodes_[i];
    if (node.has_grad && node.backward) node.backward(*this, Var<T>{this, i});
  }
}

template <typename T>
std::vector<std::string> Tape<T>::CollectGrads(GradMap<T> &out) const {
  std::set<const Parameter<T> *> reached;
  std::vector<const Parameter<T> *> seen;
  for (const Node &node : nodes_) {
    if (node.param == nullptr || !node.requires_grad) continue;
    seen.push_back(node.param);
    if (!node.has_grad) continue;
    reached.insert(node.param);
    Tensor<T> &slot = out.Slot(*node.param);
    for (int64_t i = 0; i < slot.size(); ++i) slot[i] += node.grad[i];
  }
  std::vector<std::string> disconnected;
  std::set<const Parameter<T> *> reported;
  for (const Parameter<T> *p : seen) {
    if (!reached.count(p) && reported.insert(p).second) {
      out.Slot(*p);  // grad = 0
      disconnected.push_back(p->name);
    }
  }
  return disconnected;
}

template class ParameterSet<float>;
template class ParameterSet<double>;
template class GradMap<float>;
template class GradMap<double>;
template class Tape<float>;
template class Tape<double>;

}  // namespace treeprompt
