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
#include "treeprompt/vocab.h"

#include <fstream>
#include <map>

namespace treeprompt {

int TokenTable::Add(const std::string &token) {
  auto [it, fresh] = ids_.try_emplace(token, static_cast<int>(tokens_.size()));
  if (fresh) tokens_.push_back(token);
  return it->second;
}

int TokenTable::Id(const std::string &token) const {
  auto it = ids_.find(token);
  return it == ids_.end() ? kUnk : it->second;
}

Vocab Vocab::Build(const std::vector<DepTree> &trees, int min_count) {
  std::map<std::string, int> words, pos, deps;
  for (const auto &t : trees) {
    for (const auto &n : t.nodes) {
      ++words[n.word];
      ++pos[n.pos];
      ++deps[n.dep];
    }
  }
  Vocab v;
  auto fill = [min_count](TokenTable &table, const std::map<std::string, int> &counts) {
    for (const auto &[token, count] : counts) {
      if (count >= min_count) table.Add(token);
    }
  };
  fill(v.words, words);
  fill(v.pos, pos);
  fill(v.deps, deps);
  return v;
}

nlohmann::json Vocab::ToJson() const {
  return {{"words", words.tokens()}, {"pos", pos.tokens()}, {"deps", deps.tokens()}};
}

Vocab Vocab::FromJson(const nlohmann::json &j) {
  Vocab v;
  auto fill = [](TokenTable &table, const nlohmann::json &list) {
    const auto tokens = list.get<std::vector<std::string>>();
    if (tokens.empty() || tokens[0] != TokenTable::kUnkToken) {
      throw std::invalid_argument("vocab table must start with <unk>");
    }
    for (const auto &t : tokens) table.Add(t);
  };
  fill(v.words, j.at("words"));
  fill(v.pos, j.at("pos"));
  fill(v.deps, j.at("deps"));
  return v;
}

void Vocab::Save(const std::string &path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << ToJson().dump(2) << "\n";
}

Vocab Vocab::Load(const std::string &path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  return FromJson(nlohmann::json::parse(in));
}

std::vector<NodeIds> LookupIds(const DepTree &tree, const Vocab &vocab) {
  std::vector<NodeIds> ids;
  ids.reserve(tree.size());
  for (const auto &n : tree.nodes) {
    ids.push_back({vocab.words.Id(n.word), vocab.pos.Id(n.pos), vocab.deps.Id(n.dep)});
  }
  return ids;
}

}  // namespace treeprompt
