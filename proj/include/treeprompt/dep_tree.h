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
// Dependency parse trees: CoNLL-U ingest, validation, serialization, and the
// structural routing that picks a prompt module for every node.

#ifndef TREEPROMPT_DEP_TREE_H_
#define TREEPROMPT_DEP_TREE_H_

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace treeprompt {

struct DepNode {
  int index = 0;         // 1-based token position
  std::string form;      // surface token as read
  std::string word;      // lowercased form
  std::string lemma = "_";
  std::string pos;       // UPOS column
  std::string xpos = "_";
  std::string feats = "_";
  int head = 0;          // 0 = root
  std::string dep;
  std::string deps = "_";
  std::string misc = "_";
  std::vector<int> children;  // sentence order

  bool is_leaf() const { return children.empty(); }
  bool operator==(const DepNode &) const = default;
};

struct DepTree {
  std::string sentence_id;
  std::vector<std::string> comments;  // raw lines without the trailing newline
  std::vector<DepNode> nodes;         // nodes[i].index == i + 1
  int root = 0;

  size_t size() const { return nodes.size(); }
  const DepNode &node(int index) const { return nodes.at(index - 1); }
  DepNode &node(int index) { return nodes.at(index - 1); }
  std::vector<std::string> words() const;

  // Node indices, root first, children in sentence order.
  std::vector<int> PreOrder() const;
  // Node indices, children before parents.
  std::vector<int> PostOrder() const;
  // Indices of the subtree rooted at `index`, in sentence order.
  std::vector<int> Subtree(int index) const;

  bool operator==(const DepTree &) const = default;
};

enum class ModuleKind { kLeaf = 0, kRel = 1, kEnti = 2 };
inline constexpr int kNumModuleKinds = 3;

std::string_view ModuleName(ModuleKind kind);
ModuleKind ModuleFromName(std::string_view name);

// Leaf when the node has no children; otherwise Rel for acl/prep (matched on
// the label prefix before ':'), otherwise Enti.
ModuleKind RouteModule(const DepNode &node);

class ParseError : public std::runtime_error {
 public:
  enum class Kind {
    kMalformedRow,
    kCycleDetected,
    kMultipleRoots,
    kDanglingHead,
    kNoRoot,
    kEmptySentence,
  };
  ParseError(Kind kind, std::string sentence_id, int line,
             const std::string &detail);

  Kind kind() const { return kind_; }
  const std::string &sentence_id() const { return sentence_id_; }
  int line() const { return line_; }

 private:
  Kind kind_;
  std::string sentence_id_;
  int line_;
};

std::string_view ParseErrorKindName(ParseError::Kind kind);

struct ConlluOptions {
  bool drop_punct = true;
};

// One tree per blank-line separated block. Multiword token ranges ("3-4") and
// empty nodes ("3.1") are skipped; tokens labelled "punct" are removed and the
// remaining tokens renumbered.
std::vector<DepTree> ParseConllu(std::string_view text,
                                 const ConlluOptions &options = {});
std::vector<DepTree> ReadConlluFile(const std::string &path,
                                    const ConlluOptions &options = {});

// Rows are emitted in token-index order, comments first, followed by one blank
// line.
std::string SerializeConllu(const DepTree &tree);
std::string SerializeConllu(const std::vector<DepTree> &trees);

// Checks the tree invariants (single root, valid heads, acyclic, sorted
// children) and rebuilds the children lists from heads.
void ValidateTree(DepTree &tree, int first_line = 0);

// Builds a tree from parallel (word, pos, dep, head) columns.
DepTree MakeTree(std::string sentence_id, const std::vector<std::string> &words,
                 const std::vector<std::string> &pos,
                 const std::vector<std::string> &deps,
                 const std::vector<int> &heads);

}  // namespace treeprompt

#endif  // TREEPROMPT_DEP_TREE_H_
