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


#include "treeprompt/self_check.h"

#include <algorithm>
#include <numeric>

#include "treeprompt/ops.h"
#include "treeprompt/tree_prompt.h"

namespace treeprompt {
namespace {

constexpr const char *kTags[] = {"NOUN", "ADP", "VERB", "ADJ", "DET"};
constexpr const char *kLabels[] = {"nsubj", "prep", "acl", "amod", "det", "pobj", "dobj",
                                   "acl:relcl"};

}  // namespace

DepTree RandomTree(Rng &rng, int nodes, const std::string &sentence_id) {
  if (nodes < 1) throw std::invalid_argument("a tree needs at least one node");
  std::vector<int> order(nodes);
  std::iota(order.begin(), order.end(), 1);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::string> words(nodes), pos(nodes), deps(nodes);
  std::vector<int> heads(nodes);
  std::uniform_int_distribution<int> tag(0, std::size(kTags) - 1);
  std::uniform_int_distribution<int> label(0, std::size(kLabels) - 1);
  for (int k = 0; k < nodes; ++k) {
    const int i = order[k] - 1;
    words[i] = "w" + std::to_string(i + 1);
    pos[i] = kTags[tag(rng)];
    if (k == 0) {
      heads[i] = 0;
      deps[i] = "ROOT";
    } else {
      heads[i] = order[std::uniform_int_distribution<int>(0, k - 1)(rng)];
      deps[i] = kLabels[label(rng)];
    }
  }
  return MakeTree(sentence_id, words, pos, deps, heads);
}

Vocab RandomTreeVocab(int max_nodes) {
  std::vector<std::string> words, pos, deps;
  std::vector<int> heads;
  for (int i = 1; i <= max_nodes; ++i) {
    words.push_back("w" + std::to_string(i));
    pos.push_back(kTags[(i - 1) % std::size(kTags)]);
    deps.push_back(i == 1 ? "ROOT" : kLabels[(i - 2) % std::size(kLabels)]);
    heads.push_back(i == 1 ? 0 : 1);
  }
  std::vector<DepTree> trees = {MakeTree("vocab", words, pos, deps, heads)};
  for (size_t t = 0; t < std::size(kTags); ++t) {
    for (size_t l = 0; l < std::size(kLabels); ++l) {
      trees.push_back(MakeTree("cover", {"w1", "w2"}, {kTags[t], kTags[t]},
                               {"ROOT", kLabels[l]}, {0, 1}));
    }
  }
  return Vocab::Build(trees, 1);
}

GradCheckResult TreePromptGradCheck(uint64_t seed, const TreeGradCheckOptions &options) {
  Rng rng(StreamSeed(seed, 0x67726164));
  const DepTree tree = RandomTree(rng, options.nodes);
  const Vocab vocab = RandomTreeVocab(std::max(options.nodes, 1));
  TreePromptConfig config;
  config.word_dim = options.word_dim;
  config.label_dim = options.label_dim;
  config.prompt_dim = options.prompt_dim;
  config.prompt_len = options.prompt_len;
  config.max_nodes = options.nodes;
  config.embed_init_std = 0.5;
  config.global_init_std = 0.5;
  TreePromptModel<double> model(config, vocab, seed);
  const auto ids = LookupIds(tree, vocab);
  const Tensor<double> weights =
      RandomNormal<double>({options.prompt_len, options.prompt_dim}, 1.0, rng);
  auto build = [&](Tape<double> &tape) {
    Var<double> P = model.Forward(tape, tree, ids).P;
    Var<double> linear = Sum(Mul(P, tape.Constant(weights)));
    return Add(linear, Scale(Sum(Mul(P, P)), 0.5));
  };
  return CheckGradients(model.params(), build, options.check);
}

}  // namespace treeprompt
