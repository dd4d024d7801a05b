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

#include "doctest.h"
#include "test_util.h"
#include "treeprompt/ops.h"
#include "treeprompt/tree_prompt.h"

namespace treeprompt {
namespace {

using Vec = std::vector<double>;

// the(1) red(2) square(3) above(4) the(5) circle(6); root "square".
DepTree SampleTree() {
  return MakeTree("t", {"the", "red", "square", "above", "the", "circle"},
                  {"DET", "ADJ", "NOUN", "ADP", "DET", "NOUN"},
                  {"det", "amod", "ROOT", "prep", "det", "pobj"}, {3, 3, 0, 3, 6, 4});
}

Vocab SampleVocab() { return Vocab::Build({SampleTree()}, 1); }

TreePromptConfig SmallConfig() {
  TreePromptConfig c;
  c.word_dim = 6;
  c.label_dim = 3;
  c.prompt_dim = 8;
  c.prompt_len = 5;
  c.max_nodes = 10;
  c.embed_init_std = 0.5;
  c.global_init_std = 0.5;
  return c;
}

Vec RowOf(const Tensor<double> &t, int64_t r) {
  auto s = t.row(r);
  return Vec(s.begin(), s.end());
}

// y = W x + b with W [out x in].
Vec Affine(const Tensor<double> &w, const Tensor<double> &b, const Vec &x) {
  Vec y(w.rows());
  for (int64_t i = 0; i < w.rows(); ++i) {
    double s = b[i];
    for (int64_t j = 0; j < w.cols(); ++j) s += w.at(i, j) * x[j];
    y[i] = s;
  }
  return y;
}

struct Oracle {
  const ParameterSet<double> &p;
  const TreePromptConfig &c;

  std::string Slot(ModuleKind k) const {
    if (!c.use_modules) return "tree.shared";
    return std::string("tree.") + std::string(ModuleName(k) == "Leaf" ? "leaf"
                                              : ModuleName(k) == "Rel" ? "rel" : "enti");
  }
  Vec R(const NodeIds &ids, ModuleKind k) const {
    Vec n = RowOf(p.Find("tree.word_emb")->value, ids.word);
    for (double v : RowOf(p.Find("tree.pos_emb")->value, ids.pos)) n.push_back(v);
    for (double v : RowOf(p.Find("tree.dep_emb")->value, ids.dep)) n.push_back(v);
    double norm = 0;
    for (double v : n) norm += v * v;
    norm = std::sqrt(norm) + kL2NormEps;
    for (double &v : n) v /= norm;
    return Affine(p.Find(Slot(k) + ".fc.w")->value, p.Find(Slot(k) + ".fc.b")->value, n);
  }
  Vec H(const Vec &r, const std::vector<Vec> &children, ModuleKind k) const {
    Vec f(c.prompt_dim, 0.0);
    for (const auto &ch : children) {
      for (int i = 0; i < c.prompt_dim; ++i) f[i] += ch[i] / children.size();
    }
    f.insert(f.end(), r.begin(), r.end());
    Vec h = Affine(p.Find(Slot(k) + ".mlp.w1")->value, p.Find(Slot(k) + ".mlp.b1")->value, f);
    for (double &v : h) v = std::max(v, 0.0);
    return Affine(p.Find(Slot(k) + ".mlp.w2")->value, p.Find(Slot(k) + ".mlp.b2")->value, h);
  }
};

void CheckRow(const Tensor<double> &t, int64_t r, const Vec &expected) {
  for (size_t i = 0; i < expected.size(); ++i) {
    CHECK(t.at(r, i) == doctest::Approx(expected[i]).epsilon(1e-10));
  }
}

}  // namespace

TEST_SUITE("tree_prompt") {

TEST_CASE("node prompts follow the bottom-up recursion") {
  const DepTree tree = SampleTree();
  const Vocab vocab = SampleVocab();
  const auto config = SmallConfig();
  TreePromptModel<double> model(config, vocab, 3);
  const auto ids = LookupIds(tree, vocab);
  Tape<double> tape;
  const auto out = model.Forward(tape, tree, ids);
  Oracle o{model.params(), config};

  REQUIRE(out.nodes.size() == 6);
  CHECK(model.EmbedNode(tape, ids[0]).cols() == config.word_dim + 2 * config.label_dim);
  std::vector<Vec> h(7);
  for (int index : {1, 2, 5}) {
    CHECK(out.nodes[index - 1].kind == ModuleKind::kLeaf);
    const Vec r = o.R(ids[index - 1], ModuleKind::kLeaf);
    CheckRow(out.nodes[index - 1].r.value(), 0, r);
    h[index] = o.H(r, {}, ModuleKind::kLeaf);
    CheckRow(out.nodes[index - 1].h.value(), 0, h[index]);
  }
  CHECK(out.nodes[5].kind == ModuleKind::kEnti);  // circle has "the"
  h[6] = o.H(o.R(ids[5], ModuleKind::kEnti), {h[5]}, ModuleKind::kEnti);
  CHECK(out.nodes[3].kind == ModuleKind::kRel);
  h[4] = o.H(o.R(ids[3], ModuleKind::kRel), {h[6]}, ModuleKind::kRel);
  h[3] = o.H(o.R(ids[2], ModuleKind::kEnti), {h[1], h[2], h[4]}, ModuleKind::kEnti);
  for (int index : {3, 4, 6}) CheckRow(out.nodes[index - 1].h.value(), 0, h[index]);

  // H: pre-order rows plus the position table.
  CHECK(out.order == std::vector<int>{3, 1, 2, 4, 6, 5});
  REQUIRE(out.H.rows() == 6);
  const auto &pos = model.params().Get("tree.position").value;
  for (int row = 0; row < 6; ++row) {
    Vec expected = h[out.order[row]];
    for (int i = 0; i < config.prompt_dim; ++i) expected[i] += pos.at(row, i);
    CheckRow(out.H.value(), row, expected);
  }
  CHECK(out.P.rows() == config.prompt_len);
  CHECK(out.P.cols() == config.prompt_dim);
}

TEST_CASE("self-attention fusion keeps the rows at global positions") {
  const DepTree tree = SampleTree();
  const Vocab vocab = SampleVocab();
  for (FusionMode mode : {FusionMode::kSelfAttention, FusionMode::kCrossAttention}) {
    auto config = SmallConfig();
    config.fusion = mode;
    TreePromptModel<double> model(config, vocab, 4);
    Tape<double> tape;
    const auto out = model.Forward(tape, tree, LookupIds(tree, vocab));
    const auto &H = out.H.value();
    const auto &G = model.params().Get("prompt.global").value;
    std::vector<Vec> memory;
    for (int64_t r = 0; r < H.rows(); ++r) memory.push_back(RowOf(H, r));
    if (mode == FusionMode::kSelfAttention) {
      for (int64_t r = 0; r < G.rows(); ++r) memory.push_back(RowOf(G, r));
    }
    for (int64_t q = 0; q < G.rows(); ++q) {
      Vec w;
      double z = 0, mx = -1e300;
      for (const auto &m : memory) {
        double s = 0;
        for (int i = 0; i < 8; ++i) s += G.at(q, i) * m[i];
        w.push_back(s / std::sqrt(8.0));
        mx = std::max(mx, w.back());
      }
      for (double &v : w) z += (v = std::exp(v - mx));
      Vec expected(8, 0.0);
      for (size_t j = 0; j < memory.size(); ++j) {
        for (int i = 0; i < 8; ++i) expected[i] += w[j] / z * memory[j][i];
      }
      CheckRow(out.P.value(), q, expected);
    }
  }
}

TEST_CASE("composition contracts are enforced") {
  const Vocab vocab = SampleVocab();
  TreePromptModel<double> model(SmallConfig(), vocab, 0);
  Tape<double> tape;
  auto r = tape.Constant(Tensor<double>::Matrix(1, 8));
  std::vector<Var<double>> one{r};
  try {
    model.ComposeNodePrompt(tape, r, one, ModuleKind::kLeaf);
    FAIL("expected a composition error");
  } catch (const CompositionError &e) {
    CHECK(e.kind() == CompositionError::Kind::kLeafWithChildren);
  }
  try {
    model.ComposeNodePrompt(tape, r, {}, ModuleKind::kRel);
    FAIL("expected a composition error");
  } catch (const CompositionError &e) {
    CHECK(e.kind() == CompositionError::Kind::kNonLeafWithoutChildren);
  }
  CHECK_NOTHROW(model.ComposeNodePrompt(tape, r, one, ModuleKind::kEnti));
}

TEST_CASE("ablation switches change exactly one mechanism") {
  const DepTree tree = SampleTree();
  const Vocab vocab = SampleVocab();
  const auto ids = LookupIds(tree, vocab);

  auto shared = SmallConfig();
  shared.use_modules = false;
  TreePromptModel<double> no_module(shared, vocab, 5);
  CHECK(no_module.params().Find("tree.shared.fc.w") != nullptr);
  CHECK(no_module.params().Find("tree.leaf.fc.w") == nullptr);
  Tape<double> t1;
  const auto o1 = no_module.Forward(t1, tree, ids);
  Oracle oracle{no_module.params(), shared};
  const Vec leaf = oracle.H(oracle.R(ids[0], ModuleKind::kLeaf), {}, ModuleKind::kLeaf);
  CheckRow(o1.nodes[0].h.value(), 0, leaf);
  CHECK(o1.order == std::vector<int>{3, 1, 2, 4, 6, 5});

  auto flat = SmallConfig();
  flat.use_tree = false;
  TreePromptModel<double> no_tree(flat, vocab, 5);
  Tape<double> t2;
  const auto o2 = no_tree.Forward(t2, tree, ids);
  CHECK(o2.order == std::vector<int>{1, 2, 3, 4, 5, 6});
  Oracle o2acle{no_tree.params(), flat};
  const Vec root = o2acle.H(o2acle.R(ids[2], ModuleKind::kEnti), {}, ModuleKind::kEnti);
  CheckRow(o2.nodes[2].h.value(), 0, root);

  auto cont = SmallConfig();
  cont.use_tree = cont.use_modules = false;
  TreePromptModel<double> continuous(cont, vocab, 5);
  CHECK(continuous.params().size() == 1);
  Tape<double> t3;
  const auto o3 = continuous.Forward(t3, tree, ids);
  CHECK(o3.P.value() == continuous.params().Get("prompt.global").value);
  CHECK_FALSE(o3.H.valid());
}

TEST_CASE("long sentences are refused") {
  auto config = SmallConfig();
  config.max_nodes = 5;
  const Vocab vocab = SampleVocab();
  TreePromptModel<double> model(config, vocab, 0);
  Tape<double> tape;
  const DepTree tree = SampleTree();
  CHECK_THROWS_AS(model.Forward(tape, tree, LookupIds(tree, vocab)), SentenceTooLong);
}

TEST_CASE("the woman-remote fixture prompts have the documented shapes") {
  const auto trees = ReadConlluFile(testing::SourcePath("fixtures/woman_remote.conllu"));
  const Vocab vocab = Vocab::Build(trees, 1);
  auto config = SmallConfig();
  config.prompt_len = 7;
  TreePromptModel<float> model(config, vocab, 1);
  Tape<float> tape;
  const auto out = model.Forward(tape, trees[0], LookupIds(trees[0], vocab));
  CHECK(out.H.rows() == 10);
  CHECK(out.order.front() == trees[0].root);
  CHECK(out.P.rows() == 7);
  const auto snap = model.Snapshot(out);
  REQUIRE(snap.size() == 10);
  CHECK(snap[9].kind == ModuleKind::kEnti);
  CHECK(snap[8].kind == ModuleKind::kLeaf);
  CHECK(snap[7].kind == ModuleKind::kRel);
  CHECK(snap[1].kind == ModuleKind::kEnti);
  CHECK(snap[7].children == std::vector<int>{10});
  CHECK(snap[1].h.size() == 8u);
}

}  // TEST_SUITE
}  // namespace treeprompt
