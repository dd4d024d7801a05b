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
#include "test_util.h"
#include "treeprompt/dep_tree.h"
#include "treeprompt/vocab.h"

namespace treeprompt {
namespace {

std::string Row(int id, const std::string &form, const std::string &pos, int head,
                const std::string &dep) {
  return std::to_string(id) + "\t" + form + "\t_\t" + pos + "\t_\t_\t" +
         std::to_string(head) + "\t" + dep + "\t_\t_\n";
}

ParseError::Kind KindOf(const std::string &text) {
  try {
    ParseConllu(text);
  } catch (const ParseError &e) {
    return e.kind();
  }
  FAIL("expected a parse error");
  return ParseError::Kind::kMalformedRow;
}

}  // namespace

TEST_SUITE("dep_tree") {

TEST_CASE("the woman-remote fixture routes leaf, rel and enti") {
  const auto trees = ReadConlluFile(testing::SourcePath("fixtures/woman_remote.conllu"));
  REQUIRE(trees.size() == 1);
  const DepTree &t = trees[0];
  CHECK(t.sentence_id == "woman-remote");
  CHECK(t.size() == 10);
  CHECK(t.root == 2);
  CHECK(t.node(10).word == "remote");
  // "remote" keeps its determiner, so it is internal and not a Leaf.
  CHECK(RouteModule(t.node(10)) == ModuleKind::kEnti);
  CHECK(RouteModule(t.node(9)) == ModuleKind::kLeaf);
  CHECK(RouteModule(t.node(8)) == ModuleKind::kRel);
  CHECK(RouteModule(t.node(2)) == ModuleKind::kEnti);
  CHECK(RouteModule(t.node(5)) == ModuleKind::kRel);  // prep "on"
  CHECK(RouteModule(t.node(4)) == ModuleKind::kEnti);  // pobj with a child
  CHECK(t.PreOrder() == std::vector<int>{2, 1, 3, 4, 5, 7, 6, 8, 10, 9});
  const auto post = t.PostOrder();
  CHECK(post.back() == 2);
  CHECK(t.Subtree(8) == std::vector<int>{8, 9, 10});
}

TEST_CASE("routing matches label prefixes only") {
  DepNode n;
  n.children = {1};
  n.dep = "acl:relcl";
  CHECK(RouteModule(n) == ModuleKind::kRel);
  n.dep = "prep";
  CHECK(RouteModule(n) == ModuleKind::kRel);
  n.dep = "aclx";
  CHECK(RouteModule(n) == ModuleKind::kEnti);
  n.dep = "nsubj";
  CHECK(RouteModule(n) == ModuleKind::kEnti);
  n.children.clear();
  n.dep = "acl";
  CHECK(RouteModule(n) == ModuleKind::kLeaf);
  CHECK(ModuleFromName(ModuleName(ModuleKind::kRel)) == ModuleKind::kRel);
}

TEST_CASE("every shipped fixture round-trips byte for byte") {
  for (const char *name : {"fixtures/refg_sample.conllu", "fixtures/woman_remote.conllu"}) {
    CAPTURE(name);
    const std::string text = testing::ReadFile(testing::SourcePath(name));
    const auto trees = ParseConllu(text);
    CHECK(SerializeConllu(trees) == text);
    CHECK(ParseConllu(SerializeConllu(trees)) == trees);
  }
  CHECK(ReadConlluFile(testing::SourcePath("fixtures/refg_sample.conllu")).size() == 20);
}

TEST_CASE("punctuation is removed and dependents are re-attached") {
  const std::string text = "# sent_id = p1\n" + Row(1, "Dogs", "NOUN", 3, "nsubj") +
                           Row(2, ",", "PUNCT", 1, "punct") + Row(3, "bark", "VERB", 0, "ROOT") +
                           Row(4, "loudly", "ADV", 5, "advmod") + Row(5, ".", "PUNCT", 3, "punct") +
                           "\n";
  const auto trees = ParseConllu(text);
  REQUIRE(trees.size() == 1);
  const DepTree &t = trees[0];
  CHECK(t.words() == std::vector<std::string>{"dogs", "bark", "loudly"});
  CHECK(t.node(1).form == "Dogs");
  CHECK(t.node(3).head == 2);  // was attached to the final period
  CHECK(t.root == 2);
  const auto kept = ParseConllu(text, {.drop_punct = false});
  CHECK(kept[0].size() == 5);
}

TEST_CASE("multiword ranges, empty nodes and CRLF are tolerated") {
  const std::string text = "1-2\tdon't\t_\t_\t_\t_\t_\t_\t_\t_\r\n" + Row(1, "do", "AUX", 3, "aux") +
                           Row(2, "n't", "PART", 3, "neg") + "2.1\tx\t_\t_\t_\t_\t_\t_\t_\t_\n" +
                           Row(3, "go", "VERB", 0, "ROOT");
  const auto trees = ParseConllu(text);
  REQUIRE(trees.size() == 1);
  CHECK(trees[0].size() == 3);
  CHECK(trees[0].sentence_id == "s1");
}

TEST_CASE("structural errors carry their kind, sentence and line") {
  CHECK(KindOf(Row(1, "a", "X", 0, "ROOT") + Row(2, "b", "X", 0, "ROOT")) ==
        ParseError::Kind::kMultipleRoots);
  CHECK(KindOf(Row(1, "a", "X", 2, "dep") + Row(2, "b", "X", 1, "dep")) ==
        ParseError::Kind::kCycleDetected);
  CHECK(KindOf(Row(1, "a", "X", 0, "ROOT") + Row(2, "b", "X", 2, "dep")) ==
        ParseError::Kind::kCycleDetected);
  CHECK(KindOf(Row(1, "a", "X", 0, "ROOT") + Row(2, "b", "X", 7, "dep")) ==
        ParseError::Kind::kDanglingHead);
  CHECK(KindOf("1\ta\t_\tX\n") == ParseError::Kind::kMalformedRow);
  CHECK(KindOf(Row(1, "a", "X", 0, "ROOT") + Row(3, "b", "X", 1, "dep")) ==
        ParseError::Kind::kMalformedRow);
  CHECK(KindOf(Row(1, ".", "PUNCT", 0, "punct")) == ParseError::Kind::kEmptySentence);
  try {
    ParseConllu("# sent_id = bad\n" + Row(1, "a", "X", 0, "ROOT") + Row(2, "b", "X", 9, "dep"));
    FAIL("expected a parse error");
  } catch (const ParseError &e) {
    CHECK(e.sentence_id() == "bad");
    CHECK(e.line() == 3);
  }
}

TEST_CASE("built trees validate and keep children in sentence order") {
  DepTree t = MakeTree("m", {"the", "red", "square"}, {"DET", "ADJ", "NOUN"},
                       {"det", "amod", "ROOT"}, {3, 3, 0});
  CHECK(t.root == 3);
  CHECK(t.node(3).children == std::vector<int>{1, 2});
  CHECK_THROWS_AS(MakeTree("m", {"a", "b"}, {"X", "X"}, {"dep", "dep"}, {2, 1}), ParseError);
}

}  // TEST_SUITE

TEST_SUITE("vocab") {

TEST_CASE("rare words map to unk and tables round-trip through json") {
  const auto trees = ParseConllu(Row(1, "red", "ADJ", 2, "amod") + Row(2, "ball", "NOUN", 0, "ROOT") +
                                 "\n" + Row(1, "red", "ADJ", 2, "amod") +
                                 Row(2, "cube", "NOUN", 0, "ROOT") + "\n");
  const Vocab v = Vocab::Build(trees, 2);
  CHECK(v.words.Id("red") != TokenTable::kUnk);
  CHECK(v.words.Id("ball") == TokenTable::kUnk);
  CHECK(v.words.Token(0) == "<unk>");
  CHECK(v.pos.Contains("NOUN"));
  CHECK(v.deps.Contains("amod"));
  CHECK(Vocab::FromJson(v.ToJson()) == v);
  const auto ids = LookupIds(trees[1], v);
  CHECK(ids[0].word == v.words.Id("red"));
  CHECK(ids[1].word == TokenTable::kUnk);
  CHECK(ids[1].dep == v.deps.Id("ROOT"));
  nlohmann::json bad = v.ToJson();
  bad["words"][0] = "red";
  CHECK_THROWS(Vocab::FromJson(bad));
}

}  // TEST_SUITE
}  // namespace treeprompt
