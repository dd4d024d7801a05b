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
#include "treeprompt/prompt_injection.h"

#include <algorithm>

#include "treeprompt/ops.h"

namespace treeprompt {

std::string PromptModeName(PromptMode mode) {
  return mode == PromptMode::kInputLayer ? "input" : "multi";
}

PromptMode PromptModeFromName(const std::string &name) {
  if (name == "input") return PromptMode::kInputLayer;
  if (name == "multi") return PromptMode::kMultiLayer;
  throw std::invalid_argument("prompt mode must be 'input' or 'multi', got '" +
                              name + "'");
}

template <typename T>
void PromptBundle<T>::Validate(int layer_count) const {
  if (mode == PromptMode::kInputLayer) {
    if (!input.valid() || !layers.empty()) {
      throw std::logic_error("input-layer bundle must carry exactly P");
    }
    return;
  }
  if (input.valid()) throw std::logic_error("multi-layer bundle carries P");
  if (static_cast<int>(layers.size()) != layer_count) {
    throw DimMismatch("bundle has " + std::to_string(layers.size()) +
                      " layer prompts, backbone has " + std::to_string(layer_count));
  }
  for (const auto &l : layers) {
    if (l.rows() != layers[0].rows() || l.cols() != layers[0].cols()) {
      throw DimMismatch("layer prompts differ in shape");
    }
  }
}

template <typename T>
int64_t PromptBundle<T>::length() const {
  if (mode == PromptMode::kInputLayer) return input.valid() ? input.rows() : 0;
  return layers.empty() ? 0 : layers[0].rows();
}

template <typename T>
Var<T> InjectInputLayer(Var<T> prompt, Var<T> text) {
  if (prompt.cols() != text.cols()) {
    throw DimMismatch("prompt width " + std::to_string(prompt.cols()) +
                      " vs text width " + std::to_string(text.cols()));
  }
  if (prompt.rows() == 0) return text;
  return ConcatRows<T>({prompt, text});
}

template <typename T>
std::vector<Var<T>> ExpandMultiLayer(Var<T> prompt, int layers, Var<T> w1,
                                     Var<T> b1, Var<T> w2, Var<T> b2) {
  if (layers < 1) throw std::invalid_argument("layer count must be >= 1");
  const int64_t dp = prompt.cols();
  if (w2.rows() != layers * dp) {
    throw ShapeMismatch("expansion output " + std::to_string(w2.rows()) +
                        " vs L*d_p " + std::to_string(layers * dp));
  }
  Var<T> wide = Mlp2(prompt, w1, b1, w2, b2);
  std::vector<Var<T>> out;
  for (int l = 0; l < layers; ++l) out.push_back(SliceCols(wide, l * dp, (l + 1) * dp));
  return out;
}

template <typename T>
std::vector<Var<T>> AddToGlobal(std::span<const Var<T>> tree_layers,
                                std::span<const Var<T>> global_layers) {
  if (tree_layers.size() != global_layers.size()) {
    throw ShapeMismatch("layer counts " + std::to_string(tree_layers.size()) +
                        " vs " + std::to_string(global_layers.size()));
  }
  std::vector<Var<T>> out;
  for (size_t l = 0; l < tree_layers.size(); ++l) {
    const Var<T> g = global_layers[l];
    if (g.tape->requires_grad(g)) {
      throw std::logic_error("global multi-layer prompt must be frozen");
    }
    out.push_back(Add(tree_layers[l], g));
  }
  return out;
}

template <typename T>
Tensor<T> StackLayers(std::span<const Var<T>> layers) {
  if (layers.empty()) return Tensor<T>({0, 0, 0});
  const int64_t n = layers[0].rows(), d = layers[0].cols();
  Tensor<T> out({static_cast<int64_t>(layers.size()), n, d});
  for (size_t l = 0; l < layers.size(); ++l) {
    const auto &v = layers[l].value();
    if (v.rows() != n || v.cols() != d) throw ShapeMismatch("uneven layer prompts");
    std::copy(v.data(), v.data() + v.size(), out.data() + l * n * d);
  }
  return out;
}

#define TREEPROMPT_INSTANTIATE(T)                                               \
  template struct PromptBundle<T>;                                              \
  template Var<T> InjectInputLayer(Var<T>, Var<T>);                             \
  template std::vector<Var<T>> ExpandMultiLayer(Var<T>, int, Var<T>, Var<T>,    \
                                                Var<T>, Var<T>);                \
  template std::vector<Var<T>> AddToGlobal(std::span<const Var<T>>,             \
                                           std::span<const Var<T>>);            \
  template Tensor<T> StackLayers(std::span<const Var<T>>);

TREEPROMPT_INSTANTIATE(float)
TREEPROMPT_INSTANTIATE(double)

#undef TREEPROMPT_INSTANTIATE

}  // namespace treeprompt
