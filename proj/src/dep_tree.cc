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
#include "treeprompt/dep_tree.h"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <fstream>
#include <functional>
#include <sstream>

namespace treeprompt {
namespace {

std::string Lower(std::string_view s) {
  std::string out(s);
  for (auto &c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string_view LabelPrefix(std::string_view dep) {
  return dep.substr(0, dep.find(':'));
}

std::vector<std::string_view> SplitTabs(std::string_view line) {
  std::vector<std::string_view> cols;
  size_t start = 0;
  while (true) {
    const size_t tab = line.find('\t', start);
    if (tab == std::string_view::npos) {
      cols.push_back(line.substr(start));
      return cols;
    }
    cols.push_back(line.substr(start, tab - start));
    start = tab + 1;
  }
}

bool ParseInt(std::string_view s, int &out) {
  if (s.empty()) return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
  return ec == std::errc() && ptr == s.data() + s.size();
}

struct RawRow {
  DepNode node;
  int line = 0;
};

// Shared structural checks over (index, head) pairs. `lines` maps node
// position to a source line for error reporting.
void CheckHeads(const std::vector<DepNode> &nodes, const std::string &sid,
                const std::vector<int> &lines) {
  const int n = static_cast<int>(nodes.size());
  auto line_of = [&](int i) { return lines.empty() ? 0 : lines[i]; };
  for (int i = 0; i < n; ++i) {
    const int head = nodes[i].head;
    if (head < 0 || head > n) {
      throw ParseError(ParseError::Kind::kDanglingHead, sid, line_of(i),
                       "token " + std::to_string(i + 1) + " points at head " +
                           std::to_string(head));
    }
    if (head == i + 1) {
      throw ParseError(ParseError::Kind::kCycleDetected, sid, line_of(i),
                       "token " + std::to_string(i + 1) + " is its own head");
    }
  }
  for (int i = 0; i < n; ++i) {
    int cur = i + 1;
    for (int steps = 0; cur != 0; ++steps) {
      if (steps > n) {
        throw ParseError(ParseError::Kind::kCycleDetected, sid, line_of(i),
                         "token " + std::to_string(i + 1) +
                             " does not reach the root");
      }
      cur = nodes[cur - 1].head;
    }
  }
  int roots = 0;
  int second_root = -1;
  for (int i = 0; i < n; ++i) {
    if (nodes[i].head == 0 && ++roots == 2) second_root = i;
  }
  if (roots == 0) {
    throw ParseError(ParseError::Kind::kNoRoot, sid, line_of(0), "no root token");
  }
  if (roots > 1) {
    throw ParseError(ParseError::Kind::kMultipleRoots, sid,
                     line_of(second_root),
                     "token " + std::to_string(second_root + 1) +
                         " is a second root");
  }
}

void RebuildChildren(DepTree &tree) {
  for (auto &n : tree.nodes) n.children.clear();
  for (const auto &n : tree.nodes) {
    if (n.head == 0) {
      tree.root = n.index;
    } else {
      tree.node(n.head).children.push_back(n.index);
    }
  }
}

DepTree BuildTree(std::string sid, std::vector<std::string> comments,
                  std::vector<RawRow> rows, const ConlluOptions &options,
                  int block_line) {
  if (rows.empty()) {
    throw ParseError(ParseError::Kind::kEmptySentence, sid, block_line,
                     "sentence block has no tokens");
  }
  std::vector<DepNode> nodes;
  std::vector<int> lines;
  for (auto &r : rows) {
    nodes.push_back(std::move(r.node));
    lines.push_back(r.line);
  }
  CheckHeads(nodes, sid, lines);

  if (options.drop_punct) {
    const int n = static_cast<int>(nodes.size());
    auto is_punct = [&](int index) {
      return LabelPrefix(nodes[index - 1].dep) == "punct";
    };
    // Nearest non-punct ancestor; 0 when every ancestor is punctuation.
    auto resolve = [&](int head) {
      while (head != 0 && is_punct(head)) head = nodes[head - 1].head;
      return head;
    };
    std::vector<int> new_index(n + 1, 0);
    int next = 0;
    for (int i = 1; i <= n; ++i) {
      if (!is_punct(i)) new_index[i] = ++next;
    }
    std::vector<DepNode> kept;
    std::vector<int> kept_lines;
    for (int i = 1; i <= n; ++i) {
      if (is_punct(i)) continue;
      DepNode node = nodes[i - 1];
      node.index = new_index[i];
      node.head = new_index[resolve(node.head)];
      kept.push_back(std::move(node));
      kept_lines.push_back(lines[i - 1]);
    }
    if (kept.empty()) {
      throw ParseError(ParseError::Kind::kEmptySentence, sid, block_line,
                       "sentence contains only punctuation");
    }
    nodes = std::move(kept);
    lines = std::move(kept_lines);
    CheckHeads(nodes, sid, lines);
  }

  DepTree tree;
  tree.sentence_id = std::move(sid);
  tree.comments = std::move(comments);
  tree.nodes = std::move(nodes);
  RebuildChildren(tree);
  return tree;
}

}  // namespace

std::vector<std::string> DepTree::words() const {
  std::vector<std::string> out;
  for (const auto &n : nodes) out.push_back(n.word);
  return out;
}

std::vector<int> DepTree::PreOrder() const {
  std::vector<int> order;
  std::vector<int> stack{root};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    order.push_back(cur);
    const auto &ch = node(cur).children;
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  return order;
}

std::vector<int> DepTree::PostOrder() const {
  std::vector<int> order;
  std::function<void(int)> visit = [&](int cur) {
    for (int c : node(cur).children) visit(c);
    order.push_back(cur);
  };
  visit(root);
  return order;
}

std::vector<int> DepTree::Subtree(int index) const {
  std::vector<int> out;
  std::vector<int> stack{index};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    out.push_back(cur);
    for (int c : node(cur).children) stack.push_back(c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::string_view ModuleName(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::kLeaf:
      return "Leaf";
    case ModuleKind::kRel:
      return "Rel";
    case ModuleKind::kEnti:
      return "Enti";
  }
  return "?";
}

ModuleKind ModuleFromName(std::string_view name) {
  if (name == "Leaf") return ModuleKind::kLeaf;
  if (name == "Rel") return ModuleKind::kRel;
  if (name == "Enti") return ModuleKind::kEnti;
  throw std::invalid_argument("unknown module kind: " + std::string(name));
}

ModuleKind RouteModule(const DepNode &node) {
  if (node.children.empty()) return ModuleKind::kLeaf;
  const std::string_view prefix = LabelPrefix(node.dep);
  if (prefix == "acl" || prefix == "prep") return ModuleKind::kRel;
  return ModuleKind::kEnti;
}

std::string_view ParseErrorKindName(ParseError::Kind kind) {
  switch (kind) {
    case ParseError::Kind::kMalformedRow:
      return "MalformedRow";
    case ParseError::Kind::kCycleDetected:
      return "CycleDetected";
    case ParseError::Kind::kMultipleRoots:
      return "MultipleRoots";
    case ParseError::Kind::kDanglingHead:
      return "DanglingHead";
    case ParseError::Kind::kNoRoot:
      return "NoRoot";
    case ParseError::Kind::kEmptySentence:
      return "EmptySentence";
  }
  return "?";
}

ParseError::ParseError(Kind kind, std::string sentence_id, int line,
                       const std::string &detail)
    : std::runtime_error(std::string(ParseErrorKindName(kind)) + " in sentence '" +
                         sentence_id + "' at line " + std::to_string(line) +
                         ": " + detail),
      kind_(kind),
      sentence_id_(std::move(sentence_id)),
      line_(line) {}

std::vector<DepTree> ParseConllu(std::string_view text,
                                 const ConlluOptions &options) {
  std::vector<DepTree> trees;
  std::vector<std::string> comments;
  std::vector<RawRow> rows;
  std::string sid;
  int block_line = 0;
  int line_no = 0;

  auto flush = [&]() {
    if (rows.empty() && comments.empty()) return;
    if (sid.empty()) sid = "s" + std::to_string(trees.size() + 1);
    trees.push_back(BuildTree(sid, std::move(comments), std::move(rows), options,
                              block_line));
    comments.clear();
    rows.clear();
    sid.clear();
    block_line = 0;
  };

  size_t pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    const bool at_eof = end == text.size();
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);

    if (line.empty()) {
      flush();
      if (at_eof) break;
      continue;
    }
    if (block_line == 0) block_line = line_no;
    if (line.front() == '#') {
      comments.emplace_back(line);
      static constexpr std::string_view kSentId = "# sent_id = ";
      if (line.substr(0, kSentId.size()) == kSentId) {
        sid = std::string(line.substr(kSentId.size()));
      }
      if (at_eof) break;
      continue;
    }
    const std::string label =
        sid.empty() ? "s" + std::to_string(trees.size() + 1) : sid;
    const auto cols = SplitTabs(line);
    if (cols.size() != 10) {
      throw ParseError(ParseError::Kind::kMalformedRow, label, line_no,
                       "expected 10 tab-separated columns, found " +
                           std::to_string(cols.size()));
    }
    const std::string_view id = cols[0];
    if (id.find('-') != std::string_view::npos ||
        id.find('.') != std::string_view::npos) {
      if (at_eof) break;
      continue;
    }
    RawRow row;
    row.line = line_no;
    DepNode &n = row.node;
    if (!ParseInt(id, n.index) || !ParseInt(cols[6], n.head)) {
      throw ParseError(ParseError::Kind::kMalformedRow, label, line_no,
                       "non-integer ID or HEAD");
    }
    if (n.index != static_cast<int>(rows.size()) + 1) {
      throw ParseError(ParseError::Kind::kMalformedRow, label, line_no,
                       "token ID " + std::to_string(n.index) + " out of sequence");
    }
    n.form = std::string(cols[1]);
    n.word = Lower(cols[1]);
    n.lemma = std::string(cols[2]);
    n.pos = std::string(cols[3]);
    n.xpos = std::string(cols[4]);
    n.feats = std::string(cols[5]);
    n.dep = std::string(cols[7]);
    n.deps = std::string(cols[8]);
    n.misc = std::string(cols[9]);
    rows.push_back(std::move(row));
    if (at_eof) break;
  }
  flush();
  return trees;
}

std::vector<DepTree> ReadConlluFile(const std::string &path,
                                    const ConlluOptions &options) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseConllu(buf.str(), options);
}

std::string SerializeConllu(const DepTree &tree) {
  std::vector<const DepNode *> sorted;
  for (const auto &n : tree.nodes) sorted.push_back(&n);
  std::sort(sorted.begin(), sorted.end(),
            [](const DepNode *a, const DepNode *b) { return a->index < b->index; });
  std::ostringstream out;
  for (const auto &c : tree.comments) out << c << "\n";
  for (const DepNode *n : sorted) {
    const std::string &form = n->form.empty() ? n->word : n->form;
    out << n->index << '\t' << form << '\t' << n->lemma << '\t' << n->pos << '\t'
        << n->xpos << '\t' << n->feats << '\t' << n->head << '\t' << n->dep
        << '\t' << n->deps << '\t' << n->misc << '\n';
  }
  out << '\n';
  return out.str();
}

std::string SerializeConllu(const std::vector<DepTree> &trees) {
  std::string out;
  for (const auto &t : trees) out += SerializeConllu(t);
  return out;
}

void ValidateTree(DepTree &tree, int first_line) {
  if (tree.nodes.empty()) {
    throw ParseError(ParseError::Kind::kEmptySentence, tree.sentence_id,
                     first_line, "tree has no nodes");
  }
  std::sort(tree.nodes.begin(), tree.nodes.end(),
            [](const DepNode &a, const DepNode &b) { return a.index < b.index; });
  for (size_t i = 0; i < tree.nodes.size(); ++i) {
    if (tree.nodes[i].index != static_cast<int>(i) + 1) {
      throw ParseError(ParseError::Kind::kMalformedRow, tree.sentence_id,
                       first_line, "token indices are not 1..n");
    }
  }
  CheckHeads(tree.nodes, tree.sentence_id, {});
  RebuildChildren(tree);
}

DepTree MakeTree(std::string sentence_id, const std::vector<std::string> &words,
                 const std::vector<std::string> &pos,
                 const std::vector<std::string> &deps,
                 const std::vector<int> &heads) {
  if (pos.size() != words.size() || deps.size() != words.size() ||
      heads.size() != words.size()) {
    throw std::invalid_argument("MakeTree column lengths differ");
  }
  DepTree tree;
  tree.sentence_id = std::move(sentence_id);
  if (!tree.sentence_id.empty()) tree.comments.push_back("# sent_id = " + tree.sentence_id);
  for (size_t i = 0; i < words.size(); ++i) {
    DepNode n;
    n.index = static_cast<int>(i) + 1;
    n.form = words[i];
    n.word = Lower(words[i]);
    n.pos = pos[i];
    n.dep = deps[i];
    n.head = heads[i];
    tree.nodes.push_back(std::move(n));
  }
  ValidateTree(tree);
  return tree;
}

}  // namespace treeprompt
