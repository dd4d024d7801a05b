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


// Randomized self-checks shared by the grad-check subcommand and the test
// suites.

#ifndef TREEPROMPT_SELF_CHECK_H_
#define TREEPROMPT_SELF_CHECK_H_

#include <cstdint>
#include <string>

#include "treeprompt/dep_tree.h"
#include "treeprompt/grad_check.h"
#include "treeprompt/random.h"
#include "treeprompt/vocab.h"

namespace treeprompt {

// A random tree of `nodes` tokens. Token i is the word "w<i>", so words are
// distinct within a tree; tags and labels are drawn from a small set that
// reaches all three modules.
DepTree RandomTree(Rng &rng, int nodes, const std::string &sentence_id = "random");

// Vocabulary covering every word, tag and label RandomTree can emit, for
// trees of up to `max_nodes` tokens.
Vocab RandomTreeVocab(int max_nodes = 12);

struct TreeGradCheckOptions {
  int nodes = 5;
  int prompt_dim = 8;
  int prompt_len = 8;
  int word_dim = 4;
  int label_dim = 2;
  GradCheckOptions check;
};

// Finite-difference check of every TreePrompt parameter on a random tree in
// double precision. The loss is a fixed random linear plus quadratic form of
// the fused prompt P.
GradCheckResult TreePromptGradCheck(uint64_t seed, const TreeGradCheckOptions &options = {});

}  // namespace treeprompt

#endif  // TREEPROMPT_SELF_CHECK_H_
