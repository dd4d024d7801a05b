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
#include "treeprompt/tree_prompt.h"

#include <cmath>

#include "treeprompt/checkpoint.h"
#include "treeprompt/ops.h"
#include "treeprompt/prompt_injection.h"
#include "treeprompt/random.h"

namespace treeprompt {
namespace {

constexpr const char *kModuleSlots[] = {"leaf", "rel", "enti"};

std::string_view FusionName(FusionMode mode) {
  return mode == FusionMode::kSelfAttention ? "self" : "cross";
}

}  // namespace

nlohmann::json TreePromptConfig::ToJson() const {
  return {{"word_dim", word_dim},
          {"label_dim", label_dim},
          {"prompt_dim", prompt_dim},
          {"prompt_len", prompt_len},
          {"max_nodes", max_nodes},
          {"use_tree", use_tree},
          {"use_modules", use_modules},
          {"fusion", FusionName(fusion)},
          {"fusion_heads", fusion_heads},
          {"fusion_projections", fusion_projections},
          {"expand_layers", expand_layers},
          {"embed_init_std", embed_init_std},
          {"global_init_std", global_init_std},
          {"global_trainable", global_trainable}};
}

TreePromptConfig TreePromptConfig::FromJson(const nlohmann::json &j) {
  TreePromptConfig c;
  c.word_dim = j.value("word_dim", c.word_dim);
  c.label_dim = j.value("label_dim", c.label_dim);
  c.prompt_dim = j.value("prompt_dim", c.prompt_dim);
  c.prompt_len = j.value("prompt_len", c.prompt_len);
  c.max_nodes = j.value("max_nodes", c.max_nodes);
  c.use_tree = j.value("use_tree", c.use_tree);
  c.use_modules = j.value("use_modules", c.use_modules);
  const std::string fusion = j.value("fusion", std::string("self"));
  if (fusion == "self") {
    c.fusion = FusionMode::kSelfAttention;
  } else if (fusion == "cross") {
    c.fusion = FusionMode::kCrossAttention;
  } else {
    throw std::invalid_argument("unknown fusion mode: " + fusion);
  }
  c.fusion_heads = j.value("fusion_heads", c.fusion_heads);
  c.fusion_projections = j.value("fusion_projections", c.fusion_projections);
  c.expand_layers = j.value("expand_layers", c.expand_layers);
  c.embed_init_std = j.value("embed_init_std", c.embed_init_std);
  c.global_init_std = j.value("global_init_std", c.global_init_std);
  c.global_trainable = j.value("global_trainable", c.global_trainable);
  return c;
}

template <typename T>
TreePromptModel<T>::TreePromptModel(const TreePromptConfig &config,
                                    const Vocab &vocab, uint64_t seed)
    : config_(config) {
  const int dp = config.prompt_dim;
  const int dn = config.node_dim();
  if (dp <= 0 || config.prompt_len < 0 || config.word_dim <= 0 ||
      config.label_dim <= 0 || config.max_nodes <= 0) {
    throw std::invalid_argument("tree prompt dimensions must be positive");
  }
  auto rng_for = [seed](const std::string &name) {
    return Rng(StreamSeed(seed, HashString(name)));
  };
  auto normal = [&](const std::string &name, Shape shape, double stddev,
                    bool trainable = true) {
    Rng rng = rng_for(name);
    return &params_.Add(name, RandomNormal<T>(std::move(shape), stddev, rng),
                        trainable);
  };
  auto uniform = [&](const std::string &name, Shape shape, int fan_in) {
    Rng rng = rng_for(name);
    return &params_.Add(
        name, RandomUniform<T>(std::move(shape), 1.0 / std::sqrt(fan_in), rng));
  };
  auto zeros = [&](const std::string &name, Shape shape) {
    return &params_.Add(name, Tensor<T>(std::move(shape)));
  };

  global_ = normal("prompt.global", {config.prompt_len, dp},
                   config.global_init_std, config.global_trainable);
  if (!config.continuous()) {
    const double sd = config.embed_init_std;
    word_table_ = normal("tree.word_emb", {vocab.words.size(), config.word_dim}, sd);
    pos_table_ = normal("tree.pos_emb", {vocab.pos.size(), config.label_dim}, sd);
    dep_table_ = normal("tree.dep_emb", {vocab.deps.size(), config.label_dim}, sd);
    tree_pos_ = normal("tree.position", {config.max_nodes, dp}, sd);
    const int slots = config.use_modules ? kNumModuleKinds : 1;
    for (int s = 0; s < slots; ++s) {
      const std::string base =
          std::string("tree.") + (config.use_modules ? kModuleSlots[s] : "shared");
      ModuleParams m;
      m.fc_w = uniform(base + ".fc.w", {dp, dn}, dn);
      m.fc_b = zeros(base + ".fc.b", {1, dp});
      m.mlp_w1 = uniform(base + ".mlp.w1", {dp, 2 * dp}, 2 * dp);
      m.mlp_b1 = zeros(base + ".mlp.b1", {1, dp});
      m.mlp_w2 = uniform(base + ".mlp.w2", {dp, dp}, dp);
      m.mlp_b2 = zeros(base + ".mlp.b2", {1, dp});
      modules_.push_back(m);
    }
    if (config.fusion_projections) {
      fuse_wq_ = uniform("fusion.wq", {dp, dp}, dp);
      fuse_wk_ = uniform("fusion.wk", {dp, dp}, dp);
      fuse_wv_ = uniform("fusion.wv", {dp, dp}, dp);
      fuse_wo_ = uniform("fusion.wo", {dp, dp}, dp);
    }
  }
  if (config.expand_layers > 0) {
    expand_w1_ = uniform("inject.expand.w1", {dp, dp}, dp);
    expand_b1_ = zeros("inject.expand.b1", {1, dp});
    expand_w2_ = uniform("inject.expand.w2", {config.expand_layers * dp, dp}, dp);
    expand_b2_ = zeros("inject.expand.b2", {1, config.expand_layers * dp});
  }
}

template <typename T>
Var<T> TreePromptModel<T>::EmbedNode(Tape<T> &tape, const NodeIds &ids) const {
  const int w[] = {ids.word};
  const int p[] = {ids.pos};
  const int d[] = {ids.dep};
  return ConcatCols<T>({GatherRows<T>(tape.Param(*word_table_), w),
                        GatherRows<T>(tape.Param(*pos_table_), p),
                        GatherRows<T>(tape.Param(*dep_table_), d)});
}

template <typename T>
Var<T> TreePromptModel<T>::NodeRepresentation(Tape<T> &tape, Var<T> embedding,
                                              ModuleKind kind) const {
  const ModuleParams &m = modules_.at(ModuleSlot(kind));
  if (embedding.cols() != config_.node_dim()) {
    throw ShapeMismatch("node embedding width " + std::to_string(embedding.cols()) +
                        " vs d_n " + std::to_string(config_.node_dim()));
  }
  return Linear(L2NormRows(embedding), tape.Param(*m.fc_w), tape.Param(*m.fc_b));
}

template <typename T>
Var<T> TreePromptModel<T>::ComposeNodePrompt(Tape<T> &tape, Var<T> r,
                                             std::span<const Var<T>> child_prompts,
                                             ModuleKind kind) const {
  if (kind == ModuleKind::kLeaf && !child_prompts.empty()) {
    throw CompositionError(CompositionError::Kind::kLeafWithChildren,
                           "Leaf module given " +
                               std::to_string(child_prompts.size()) + " children");
  }
  if (kind != ModuleKind::kLeaf && child_prompts.empty()) {
    throw CompositionError(CompositionError::Kind::kNonLeafWithoutChildren,
                           std::string(ModuleName(kind)) +
                               " module given no children");
  }
  return ComposeUnchecked(tape, r, child_prompts, kind);
}

template <typename T>
Var<T> TreePromptModel<T>::ComposeUnchecked(Tape<T> &tape, Var<T> r,
                                            std::span<const Var<T>> child_prompts,
                                            ModuleKind kind) const {
  const ModuleParams &m = modules_.at(ModuleSlot(kind));
  const int dp = config_.prompt_dim;
  if (r.cols() != dp) {
    throw ShapeMismatch("node representation width " + std::to_string(r.cols()));
  }
  Var<T> mean = child_prompts.empty()
                    ? tape.Constant(Tensor<T>::Matrix(1, dp))
                    : MeanRows(ConcatRows<T>(child_prompts));
  Var<T> f = ConcatCols<T>({mean, r});
  return Mlp2(f, tape.Param(*m.mlp_w1), tape.Param(*m.mlp_b1),
              tape.Param(*m.mlp_w2), tape.Param(*m.mlp_b2));
}

template <typename T>
std::vector<NodePromptVar<T>> TreePromptModel<T>::ComposeTree(
    Tape<T> &tape, const DepTree &tree, const std::vector<NodeIds> &ids) const {
  if (ids.size() != tree.size()) {
    throw ShapeMismatch("ids for " + std::to_string(ids.size()) + " of " +
                        std::to_string(tree.size()) + " nodes");
  }
  std::vector<NodePromptVar<T>> out(tree.size());
  auto build = [&](int index, std::span<const Var<T>> children) {
    const DepNode &node = tree.node(index);
    NodePromptVar<T> &np = out[index - 1];
    np.index = index;
    np.kind = RouteModule(node);
    np.children = node.children;
    np.r = NodeRepresentation(tape, EmbedNode(tape, ids[index - 1]), np.kind);
    np.h = config_.use_tree ? ComposeNodePrompt(tape, np.r, children, np.kind)
                            : ComposeUnchecked(tape, np.r, {}, np.kind);
  };
  if (config_.use_tree) {
    for (int index : tree.PostOrder()) {
      std::vector<Var<T>> children;
      for (int c : tree.node(index).children) children.push_back(out[c - 1].h);
      build(index, children);
    }
  } else {
    for (const auto &node : tree.nodes) build(node.index, {});
  }
  return out;
}

template <typename T>
Var<T> TreePromptModel<T>::OrderPrompts(Tape<T> &tape,
                                        const std::vector<NodePromptVar<T>> &nodes,
                                        const DepTree &tree,
                                        std::vector<int> *order) const {
  const int m = static_cast<int>(nodes.size());
  if (m > config_.max_nodes) throw SentenceTooLong(m, config_.max_nodes);
  std::vector<int> rows;
  if (config_.use_tree) {
    rows = tree.PreOrder();
  } else {
    for (int i = 1; i <= m; ++i) rows.push_back(i);
  }
  std::vector<Var<T>> hs;
  for (int index : rows) hs.push_back(nodes.at(index - 1).h);
  if (order != nullptr) *order = rows;
  Var<T> stacked = ConcatRows<T>(hs);
  return Add(stacked, SliceRows(tape.Param(*tree_pos_), 0, m));
}

template <typename T>
Var<T> TreePromptModel<T>::Global(Tape<T> &tape) const {
  return tape.Param(*global_);
}

template <typename T>
Var<T> TreePromptModel<T>::FuseWithGlobal(Tape<T> &tape, Var<T> H) const {
  Var<T> G = Global(tape);
  if (H.cols() != G.cols()) {
    throw ShapeMismatch("tree prompt width " + std::to_string(H.cols()) +
                        " vs global prompt width " + std::to_string(G.cols()));
  }
  if (G.rows() == 0) return G;
  // Rows of self-attention are independent, so only the G-position queries
  // are evaluated; the H-position outputs would be discarded anyway.
  Var<T> memory = config_.fusion == FusionMode::kSelfAttention
                      ? ConcatRows<T>({H, G})
                      : H;
  const int heads = config_.fusion_heads;
  if (!config_.fusion_projections) return Attention(G, memory, memory, heads);
  Var<T> q = MatMulNT(G, tape.Param(*fuse_wq_));
  Var<T> k = MatMulNT(memory, tape.Param(*fuse_wk_));
  Var<T> v = MatMulNT(memory, tape.Param(*fuse_wv_));
  return MatMulNT(Attention(q, k, v, heads), tape.Param(*fuse_wo_));
}

template <typename T>
TreePromptOutput<T> TreePromptModel<T>::Forward(Tape<T> &tape, const DepTree &tree,
                                                const std::vector<NodeIds> &ids) const {
  TreePromptOutput<T> out;
  if (config_.continuous()) {
    out.P = Global(tape);
    return out;
  }
  if (static_cast<int>(tree.size()) > config_.max_nodes) {
    throw SentenceTooLong(static_cast<int>(tree.size()), config_.max_nodes);
  }
  out.nodes = ComposeTree(tape, tree, ids);
  out.H = OrderPrompts(tape, out.nodes, tree, &out.order);
  out.P = FuseWithGlobal(tape, out.H);
  return out;
}

template <typename T>
std::vector<Var<T>> TreePromptModel<T>::ExpandMultiLayer(Tape<T> &tape,
                                                         Var<T> P) const {
  if (expand_w1_ == nullptr) {
    throw std::logic_error("model was built without the multi-layer expansion");
  }
  return treeprompt::ExpandMultiLayer(
      P, config_.expand_layers, tape.Param(*expand_w1_), tape.Param(*expand_b1_),
      tape.Param(*expand_w2_), tape.Param(*expand_b2_));
}

template <typename T>
void TreePromptModel<T>::LoadWordVectors(const std::string &path) {
  if (word_table_ == nullptr) {
    throw std::logic_error("continuous prompt has no word table");
  }
  for (auto &t : ReadCheckpoint(path)) {
    if (t.name != "word_vectors") continue;
    if (t.value.rank() != 2 || t.value.cols() != config_.word_dim) {
      throw std::invalid_argument("DimMismatch: word vectors " +
                                  ShapeString(t.value.shape()) + " vs d_w " +
                                  std::to_string(config_.word_dim));
    }
    if (t.value.rows() != word_table_->value.rows()) {
      throw std::invalid_argument("word vectors cover " +
                                  std::to_string(t.value.rows()) +
                                  " rows, vocab has " +
                                  std::to_string(word_table_->value.rows()));
    }
    word_table_->value = t.value.template Cast<T>();
    return;
  }
  throw CheckpointError(path + " has no tensor named word_vectors");
}

template <typename T>
std::vector<NodePrompt> TreePromptModel<T>::Snapshot(
    const TreePromptOutput<T> &out) const {
  std::vector<NodePrompt> snap;
  for (const auto &n : out.nodes) {
    NodePrompt np;
    np.index = n.index;
    np.kind = n.kind;
    np.children = n.children;
    for (T v : n.r.value().values()) np.r.push_back(static_cast<float>(v));
    for (T v : n.h.value().values()) np.h.push_back(static_cast<float>(v));
    snap.push_back(std::move(np));
  }
  return snap;
}

template class TreePromptModel<float>;
template class TreePromptModel<double>;

}  // namespace treeprompt
