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
#ifndef TREEPROMPT_VOCAB_H_
#define TREEPROMPT_VOCAB_H_

#include <string>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "treeprompt/dep_tree.h"

namespace treeprompt {

// Dense token table; id 0 is always <unk>.
class TokenTable {
 public:
  static constexpr int kUnk = 0;
  static constexpr const char *kUnkToken = "<unk>";

  TokenTable() { Add(kUnkToken); }

  int Add(const std::string &token);
  int Id(const std::string &token) const;
  bool Contains(const std::string &token) const { return ids_.count(token) > 0; }
  const std::string &Token(int id) const { return tokens_.at(id); }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string> &tokens() const { return tokens_; }

  bool operator==(const TokenTable &other) const { return tokens_ == other.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
};

struct Vocab {
  TokenTable words;
  TokenTable pos;
  TokenTable deps;

  // Keeps tokens seen at least `min_count` times; ids follow sorted order so
  // the result depends only on the counts.
  static Vocab Build(const std::vector<DepTree> &trees, int min_count = 2);

  nlohmann::json ToJson() const;
  static Vocab FromJson(const nlohmann::json &j);
  void Save(const std::string &path) const;
  static Vocab Load(const std::string &path);

  bool operator==(const Vocab &) const = default;
};

struct NodeIds {
  int word = 0;
  int pos = 0;
  int dep = 0;
};

// Per-node ids in token-index order.
std::vector<NodeIds> LookupIds(const DepTree &tree, const Vocab &vocab);

}  // namespace treeprompt

#endif  // TREEPROMPT_VOCAB_H_
