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
// Delivery of a fused prompt to the backbone, either prepended once to the
// text embeddings or supplied to every encoder layer.

#ifndef TREEPROMPT_PROMPT_INJECTION_H_
#define TREEPROMPT_PROMPT_INJECTION_H_

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "treeprompt/autodiff.h"

namespace treeprompt {

enum class PromptMode { kInputLayer, kMultiLayer };

std::string PromptModeName(PromptMode mode);
PromptMode PromptModeFromName(const std::string &name);

class DimMismatch : public std::invalid_argument {
 public:
  explicit DimMismatch(const std::string &what)
      : std::invalid_argument("dim mismatch: " + what) {}
};

template <typename T>
struct PromptBundle {
  PromptMode mode = PromptMode::kInputLayer;
  Var<T> input;                // N x d_p, input-layer mode
  std::vector<Var<T>> layers;  // L matrices of N x d_p, multi-layer mode

  static PromptBundle InputLayer(Var<T> p) {
    PromptBundle b;
    b.mode = PromptMode::kInputLayer;
    b.input = p;
    return b;
  }
  static PromptBundle MultiLayer(std::vector<Var<T>> layers) {
    PromptBundle b;
    b.mode = PromptMode::kMultiLayer;
    b.layers = std::move(layers);
    return b;
  }

  // Exactly one payload is populated, matching `mode`; `layer_count` is
  // checked in multi-layer mode.
  void Validate(int layer_count) const;
  int64_t length() const;
};

// Rows of P followed by the rows of the text embeddings.
template <typename T>
Var<T> InjectInputLayer(Var<T> prompt, Var<T> text);

// Shared per-row MLP (d_p -> d_p -> L*d_p, ReLU) reshaped into L prompts.
template <typename T>
std::vector<Var<T>> ExpandMultiLayer(Var<T> prompt, int layers, Var<T> w1,
                                     Var<T> b1, Var<T> w2, Var<T> b2);

// Elementwise sum with a frozen global multi-layer prompt. Gradients reach
// only the producers of `tree_layers`.
template <typename T>
std::vector<Var<T>> AddToGlobal(std::span<const Var<T>> tree_layers,
                                std::span<const Var<T>> global_layers);

// Packs L matrices of N x d into an L x N x d tensor.
template <typename T>
Tensor<T> StackLayers(std::span<const Var<T>> layers);

}  // namespace treeprompt

#endif  // TREEPROMPT_PROMPT_INJECTION_H_
