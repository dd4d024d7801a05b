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


#include "doctest.h"
#include "property_oracles.h"
#include "treeprompt/self_check.h"

namespace treeprompt {

TEST_SUITE("properties") {

TEST_CASE("random trees validate and cover every module kind") {
  Rng rng(1);
  int kinds[kNumModuleKinds] = {};
  for (int t = 0; t < 100; ++t) {
    DepTree tree = RandomTree(rng, 1 + t % 12);
    CHECK_NOTHROW(ValidateTree(tree));
    CHECK(tree.size() == static_cast<size_t>(1 + t % 12));
    for (const auto &n : tree.nodes) ++kinds[static_cast<int>(RouteModule(n))];
  }
  for (int k : kinds) CHECK(k > 0);
  const Vocab vocab = RandomTreeVocab();
  for (const auto &id : LookupIds(RandomTree(rng, 12), vocab)) {
    CHECK(id.word != TokenTable::kUnk);
    CHECK(id.pos != TokenTable::kUnk);
    CHECK(id.dep != TokenTable::kUnk);
  }
}

TEST_CASE("tree prompt gradients match finite differences on random trees") {
  for (uint64_t seed = 0; seed < 3; ++seed) {
    const GradCheckResult r = TreePromptGradCheck(seed);
    CAPTURE(seed);
    CAPTURE(r.worst_param);
    CHECK(r.checked > 500);
    CHECK(r.max_rel_error <= 1e-4);
  }
}

TEST_CASE("a node prompt only sees its own subtree") {
  const auto stats = testing::SubtreeLocality(4, 30);
  CHECK(stats.pairs > 100);
  CHECK(stats.violations == 0);
  // Inside the subtree the perturbation does propagate.
  CHECK(stats.ancestors_changed > stats.ancestors * 9 / 10);
}

}  // TEST_SUITE
}  // namespace treeprompt
