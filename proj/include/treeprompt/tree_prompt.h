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
// Structured prompt construction over a dependency tree.
//
// Every node is embedded as [word; pos; dep], normalized and projected by the
// fully connected layer of its routed module (Leaf, Rel or Enti). Prompts are
// composed bottom-up: a node's prompt is a two-layer MLP over the mean of its
// children's prompts concatenated with its own representation. The node
// prompts are stacked root-first in pre-order, offset by a learned position
// embedding, and fused with a learned global prompt by attention.

#ifndef TREEPROMPT_TREE_PROMPT_H_
#define TREEPROMPT_TREE_PROMPT_H_

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treeprompt/autodiff.h"
#include "treeprompt/dep_tree.h"
#include "treeprompt/vocab.h"

namespace treeprompt {

enum class FusionMode {
  kSelfAttention,   // attend over [H; G], keep the rows at G positions
  kCrossAttention,  // queries G, keys and values H
};

struct TreePromptConfig {
  int word_dim = 32;
  int label_dim = 8;
  int prompt_dim = 64;
  int prompt_len = 64;
  int max_nodes = 32;
  bool use_tree = true;
  bool use_modules = true;
  FusionMode fusion = FusionMode::kSelfAttention;
  int fusion_heads = 1;
  bool fusion_projections = false;
  // When positive, adds the MLP that expands P into one prompt per layer.
  int expand_layers = 0;
  double embed_init_std = 0.02;
  double global_init_std = 0.02;
  bool global_trainable = true;

  int node_dim() const { return word_dim + 2 * label_dim; }
  // Neither tree composition nor modules: the prompt is G itself.
  bool continuous() const { return !use_tree && !use_modules; }

  nlohmann::json ToJson() const;
  static TreePromptConfig FromJson(const nlohmann::json &j);
};

class CompositionError : public std::logic_error {
 public:
  enum class Kind { kLeafWithChildren, kNonLeafWithoutChildren };
  CompositionError(Kind kind, const std::string &what)
      : std::logic_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

class SentenceTooLong : public std::length_error {
 public:
  SentenceTooLong(int nodes, int limit)
      : std::length_error("sentence has " + std::to_string(nodes) +
                          " nodes, limit is " + std::to_string(limit)) {}
};

template <typename T>
struct NodePromptVar {
  int index = 0;
  ModuleKind kind = ModuleKind::kLeaf;
  Var<T> r;
  Var<T> h;
  std::vector<int> children;
};

template <typename T>
struct TreePromptOutput {
  std::vector<NodePromptVar<T>> nodes;  // token-index order
  std::vector<int> order;               // row order of H
  Var<T> H;                             // M x d_p, invalid for continuous
  Var<T> P;                             // N x d_p
};

// Plain-value snapshot of one node's prompt, for inspection and export.
struct NodePrompt {
  int index = 0;
  ModuleKind kind = ModuleKind::kLeaf;
  std::vector<float> r;
  std::vector<float> h;
  std::vector<int> children;
};

template <typename T>
class TreePromptModel {
 public:
  TreePromptModel(const TreePromptConfig &config, const Vocab &vocab,
                  uint64_t seed);

  const TreePromptConfig &config() const { return config_; }
  ParameterSet<T> &params() { return params_; }
  const ParameterSet<T> &params() const { return params_; }

  // [word; pos; dep] as a 1 x d_n row.
  Var<T> EmbedNode(Tape<T> &tape, const NodeIds &ids) const;
  // FC of the routed module applied to the normalized embedding.
  Var<T> NodeRepresentation(Tape<T> &tape, Var<T> embedding,
                            ModuleKind kind) const;
  // MLP of the routed module over [mean(children); r]. Leaves must have no
  // children and every other kind at least one.
  Var<T> ComposeNodePrompt(Tape<T> &tape, Var<T> r,
                           std::span<const Var<T>> child_prompts,
                           ModuleKind kind) const;
  // Post-order evaluation of every node.
  std::vector<NodePromptVar<T>> ComposeTree(Tape<T> &tape, const DepTree &tree,
                                            const std::vector<NodeIds> &ids) const;
  // Stacks node prompts root-first in pre-order (sentence order without the
  // tree) and adds the position embedding.
  Var<T> OrderPrompts(Tape<T> &tape, const std::vector<NodePromptVar<T>> &nodes,
                      const DepTree &tree, std::vector<int> *order = nullptr) const;
  Var<T> FuseWithGlobal(Tape<T> &tape, Var<T> H) const;
  Var<T> Global(Tape<T> &tape) const;

  TreePromptOutput<T> Forward(Tape<T> &tape, const DepTree &tree,
                              const std::vector<NodeIds> &ids) const;

  // Per-row MLP d_p -> d_p -> L*d_p split into L matrices of N x d_p.
  std::vector<Var<T>> ExpandMultiLayer(Tape<T> &tape, Var<T> P) const;

  // Replaces word-table rows with vectors from a TPCK file holding a tensor
  // "word_vectors" of shape [|words| x d_w] in vocab id order.
  void LoadWordVectors(const std::string &path);

  std::vector<NodePrompt> Snapshot(const TreePromptOutput<T> &out) const;

  // Index of the parameter group used for `kind`; 0 when modules are shared.
  int ModuleSlot(ModuleKind kind) const {
    return config_.use_modules ? static_cast<int>(kind) : 0;
  }

 private:
  struct ModuleParams {
    Parameter<T> *fc_w = nullptr;
    Parameter<T> *fc_b = nullptr;
    Parameter<T> *mlp_w1 = nullptr;
    Parameter<T> *mlp_b1 = nullptr;
    Parameter<T> *mlp_w2 = nullptr;
    Parameter<T> *mlp_b2 = nullptr;
  };

  Var<T> ComposeUnchecked(Tape<T> &tape, Var<T> r,
                          std::span<const Var<T>> child_prompts,
                          ModuleKind kind) const;

  TreePromptConfig config_;
  ParameterSet<T> params_;
  Parameter<T> *word_table_ = nullptr;
  Parameter<T> *pos_table_ = nullptr;
  Parameter<T> *dep_table_ = nullptr;
  Parameter<T> *tree_pos_ = nullptr;
  Parameter<T> *global_ = nullptr;
  std::vector<ModuleParams> modules_;
  Parameter<T> *fuse_wq_ = nullptr;
  Parameter<T> *fuse_wk_ = nullptr;
  Parameter<T> *fuse_wv_ = nullptr;
  Parameter<T> *fuse_wo_ = nullptr;
  Parameter<T> *expand_w1_ = nullptr;
  Parameter<T> *expand_b1_ = nullptr;
  Parameter<T> *expand_w2_ = nullptr;
  Parameter<T> *expand_b2_ = nullptr;
};

extern template class TreePromptModel<float>;
extern template class TreePromptModel<double>;

}  // namespace treeprompt

#endif  // TREEPROMPT_TREE_PROMPT_H_
