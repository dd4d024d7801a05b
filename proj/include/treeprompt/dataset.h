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
// Template-generated grounding examples. Every query ships with the
// dependency tree of its template, so no statistical parser is involved.

#ifndef TREEPROMPT_DATASET_H_
#define TREEPROMPT_DATASET_H_

#include <array>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "treeprompt/dep_tree.h"
#include "treeprompt/scene.h"

namespace treeprompt {

enum class Split {
  kPretrain = 0,
  kTuneTrain,
  kTuneVal,
  kTestSimple,
  kTestCompositional,
};
inline constexpr int kNumSplits = 5;

std::string SplitName(Split split);
Split SplitFromName(const std::string &name);

class UnsatisfiableTemplate : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// "the <target> <rel_1> the <d_1> that is <rel_2> the <d_2>": each hop relates
// the previous object to the next one.
struct QuerySpec {
  Description target;
  std::vector<std::pair<Relation, Description>> chain;

  int hops() const { return static_cast<int>(chain.size()); }
};

// Query tokens and their gold dependency tree.
std::pair<std::vector<std::string>, DepTree> RenderQuery(const QuerySpec &spec,
                                                         const std::string &id);

// Objects satisfying the whole query.
std::vector<int> Resolve(const SyntheticScene &scene, const QuerySpec &spec);

struct GroundingExample {
  std::string id;
  Split split = Split::kPretrain;
  SyntheticScene scene;
  QuerySpec spec;
  std::vector<std::string> query;
  DepTree tree;
  int gold_region = 0;
  Box gold_box;
};

// Builds an example whose query has exactly one referent in `scene`.
GroundingExample MakeExample(std::string id, Split split, SyntheticScene scene,
                             const QuerySpec &spec);

struct DatasetSizes {
  int pretrain = 20000;
  int tune_train = 8000;
  int tune_val = 1000;
  int test_simple = 1000;
  int test_compositional = 1000;

  int of(Split split) const;
  int &of(Split split);
};

struct DatasetConfig {
  uint64_t seed = 0;
  DatasetSizes sizes;
  int min_objects = 6;
  int max_objects = 12;
  // Probability that the target's description also fits a distractor that
  // satisfies the first relation.
  double hard_negative = 0.5;
  int max_retries = 200;
  // Hops used by the pretrain and simple splits (0 = attribute-only).
  int simple_hops = 0;
  // Hops used by the tune and compositional splits.
  int compositional_hops = 2;

  nlohmann::json ToJson() const;
  static DatasetConfig FromJson(const nlohmann::json &j);
};

// Deterministic in (config.seed, split, index).
GroundingExample GenerateExample(const DatasetConfig &config, Split split,
                                 int index);

struct Dataset {
  DatasetConfig config;
  std::array<std::vector<GroundingExample>, kNumSplits> splits;

  std::vector<GroundingExample> &split(Split s) {
    return splits[static_cast<int>(s)];
  }
  const std::vector<GroundingExample> &split(Split s) const {
    return splits[static_cast<int>(s)];
  }
  std::vector<DepTree> Trees(std::initializer_list<Split> which) const;
};

// Generation runs on up to `threads` workers; output is independent of it.
Dataset GenerateDataset(const DatasetConfig &config, int threads = 1);

nlohmann::json ExampleToJson(const GroundingExample &example);
GroundingExample ExampleFromJson(const nlohmann::json &j);
std::string ToJsonLines(const std::vector<GroundingExample> &examples);
std::vector<GroundingExample> FromJsonLines(const std::string &text);

// One file per split ("<split>.jsonl") plus "dataset.json" with the config.
void SaveDataset(const Dataset &dataset, const std::string &dir);
Dataset LoadDataset(const std::string &dir);

}  // namespace treeprompt

#endif  // TREEPROMPT_DATASET_H_
