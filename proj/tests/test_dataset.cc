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
#include <random>
#include <map>
#include <set>

#include "doctest.h"
#include "test_util.h"
#include "treeprompt/dataset.h"

namespace treeprompt {
namespace {

DatasetConfig SmallConfig(uint64_t seed) {
  DatasetConfig c;
  c.seed = seed;
  c.sizes = {40, 30, 10, 20, 30};
  return c;
}

SceneObject Obj(ShapeKind shape, Color color, SizeKind size, int row, int col) {
  SceneObject o;
  o.shape = shape;
  o.color = color;
  o.size = size;
  o.row = row;
  o.col = col;
  return o;
}

// Softmax-bilinear scorer over (query bag of words) x (object attribute
// one-hots). It sees every attribute word but not which noun it modifies.
class BagOfAttributes {
 public:
  explicit BagOfAttributes(int vocab) : vocab_(vocab), w_(vocab * 9, 0.0) {}

  static std::vector<int> Attributes(const SceneObject &o) {
    return {static_cast<int>(o.shape), 3 + static_cast<int>(o.color),
            7 + static_cast<int>(o.size)};
  }
  std::vector<double> Scores(const std::vector<int> &bag, const SyntheticScene &s) const {
    std::vector<double> out;
    for (const auto &o : s.objects) {
      double v = 0;
      for (int w : bag) {
        for (int a : Attributes(o)) v += w_[w * 9 + a];
      }
      out.push_back(v);
    }
    return out;
  }
  void Step(const std::vector<int> &bag, const SyntheticScene &s, int gold, double lr) {
    auto sc = Scores(bag, s);
    const double mx = *std::max_element(sc.begin(), sc.end());
    double z = 0;
    for (double &v : sc) z += (v = std::exp(v - mx));
    for (size_t k = 0; k < s.objects.size(); ++k) {
      const double g = sc[k] / z - (static_cast<int>(k) == gold ? 1.0 : 0.0);
      for (int w : bag) {
        for (int a : Attributes(s.objects[k])) w_[w * 9 + a] -= lr * g;
      }
    }
  }
  int Predict(const std::vector<int> &bag, const SyntheticScene &s) const {
    const auto sc = Scores(bag, s);
    return static_cast<int>(std::max_element(sc.begin(), sc.end()) - sc.begin());
  }

 private:
  int vocab_;
  std::vector<double> w_;
};

}  // namespace

TEST_SUITE("scene") {

TEST_CASE("iou reference cases") {
  const Box a{0, 0, 2, 2}, b{1, 1, 3, 3};
  CHECK(Iou(a, a) == 1.0);
  CHECK(Iou(a, Box{5, 5, 6, 6}) == 0.0);
  CHECK(Iou(a, b) == 1.0 / 7.0);
  CHECK(Iou(a, Box{2, 0, 4, 2}) == 0.0);  // shared edge
  CHECK_THROWS_AS(Iou(Box{1, 1, 1, 2}, a), DegenerateBox);
  CHECK_THROWS_AS(Iou(a, Box{0, 3, 1, 2}), DegenerateBox);
}

TEST_CASE("relations are grid adjacency plus holding") {
  SyntheticScene s;
  s.objects = {Obj(ShapeKind::kSquare, Color::kRed, SizeKind::kBig, 2, 2),
               Obj(ShapeKind::kCircle, Color::kBlue, SizeKind::kSmall, 3, 2),
               Obj(ShapeKind::kTriangle, Color::kGreen, SizeKind::kSmall, 2, 3)};
  for (int i = 0; i < 3; ++i) s.objects[i].id = i;
  s.objects[0].held_item = 2;
  s.LayoutBoxes();
  CHECK_NOTHROW(s.Validate());
  CHECK(Holds(s, s.objects[0], Relation::kAbove, s.objects[1]));
  CHECK(Holds(s, s.objects[1], Relation::kBelow, s.objects[0]));
  CHECK(Holds(s, s.objects[0], Relation::kLeftOf, s.objects[2]));
  CHECK(Holds(s, s.objects[2], Relation::kRightOf, s.objects[0]));
  CHECK(Holds(s, s.objects[0], Relation::kHolding, s.objects[2]));
  CHECK_FALSE(Holds(s, s.objects[2], Relation::kHolding, s.objects[0]));
  CHECK_FALSE(Holds(s, s.objects[1], Relation::kLeftOf, s.objects[2]));
  CHECK(s.objects[0].box == Box{33, 33, 47, 47});
  CHECK(s.objects[1].box == Box{36, 52, 44, 60});
  CHECK(ObjectFeatures(s, s.objects[0]).size() == static_cast<size_t>(kObjectFeatureDim));

  SyntheticScene clash = s;
  clash.objects[2].row = 2;
  clash.objects[2].col = 2;
  CHECK_THROWS(clash.Validate());
  CHECK(SceneFromJson(SceneToJson(s)) == s);
}

}  // TEST_SUITE

TEST_SUITE("dataset") {

TEST_CASE("generation is a pure function of the seed") {
  const auto a = GenerateDataset(SmallConfig(0));
  const auto b = GenerateDataset(SmallConfig(0), 3);
  for (int s = 0; s < kNumSplits; ++s) {
    CHECK(ToJsonLines(a.splits[s]) == ToJsonLines(b.splits[s]));
  }
  const auto c = GenerateDataset(SmallConfig(1));
  CHECK(ToJsonLines(a.split(Split::kTuneTrain)) != ToJsonLines(c.split(Split::kTuneTrain)));
  CHECK(ToJsonLines(a.split(Split::kPretrain)).size() > 0);
  CHECK(GenerateExample(SmallConfig(0), Split::kTuneVal, 3).id == "tune_val-3");
}

TEST_CASE("a unique attribute query grounds to that object") {
  SyntheticScene s;
  s.objects = {Obj(ShapeKind::kCircle, Color::kRed, SizeKind::kBig, 0, 0),
               Obj(ShapeKind::kSquare, Color::kRed, SizeKind::kSmall, 4, 5),
               Obj(ShapeKind::kSquare, Color::kBlue, SizeKind::kBig, 1, 1)};
  for (int i = 0; i < 3; ++i) s.objects[i].id = i;
  s.LayoutBoxes();
  QuerySpec q;
  q.target.color = Color::kRed;
  q.target.shape = ShapeKind::kSquare;
  const auto ex = MakeExample("x", Split::kTestSimple, s, q);
  CHECK(ex.query == std::vector<std::string>{"the", "red", "square"});
  CHECK(ex.gold_region == 1);
  CHECK(ex.gold_box == s.objects[1].box);
  QuerySpec ambiguous;
  ambiguous.target.color = Color::kRed;
  CHECK_THROWS_AS(MakeExample("y", Split::kTestSimple, s, ambiguous), UnsatisfiableTemplate);
}

TEST_CASE("examples satisfy the world invariants") {
  const auto ds = GenerateDataset(SmallConfig(7));
  for (int s = 0; s < kNumSplits; ++s) {
    const bool simple = s == 0 || s == static_cast<int>(Split::kTestSimple);
    for (const auto &ex : ds.splits[s]) {
      CAPTURE(ex.id);
      CHECK_NOTHROW(ex.scene.Validate());
      CHECK(ex.scene.objects.size() <= 12u);
      CHECK(ex.spec.hops() == (simple ? 0 : 2));
      CHECK(Resolve(ex.scene, ex.spec) == std::vector<int>{ex.gold_region});
      CHECK(ex.tree.words() == ex.query);
      DepTree copy = ex.tree;
      CHECK_NOTHROW(ValidateTree(copy));
      CHECK(ParseConllu(SerializeConllu(ex.tree))[0] == ex.tree);
      // IoU@0.5 against the gold box singles out the gold region.
      for (const auto &o : ex.scene.objects) {
        CHECK((Iou(o.box, ex.gold_box) > 0.5) == (o.id == ex.gold_region));
      }
    }
  }
}

TEST_CASE("compositional queries render a relative clause") {
  QuerySpec q;
  q.target.shape = ShapeKind::kCircle;
  Description y, z;
  y.color = Color::kRed;
  z.shape = ShapeKind::kSquare;
  q.chain = {{Relation::kLeftOf, y}, {Relation::kHolding, z}};
  const auto [words, tree] = RenderQuery(q, "q");
  CHECK(words == std::vector<std::string>{"the", "circle", "left", "of", "the", "red", "thing",
                                          "that", "is", "holding", "the", "square"});
  CHECK(tree.root == 2);
  CHECK(tree.node(10).dep == "acl:relcl");
  CHECK(tree.node(10).head == 7);
  CHECK(RouteModule(tree.node(10)) == ModuleKind::kRel);
  CHECK(RouteModule(tree.node(4)) == ModuleKind::kRel);
  CHECK(RouteModule(tree.node(2)) == ModuleKind::kEnti);
}

TEST_CASE("impossible object budgets exhaust the retries") {
  DatasetConfig c = SmallConfig(0);
  c.min_objects = c.max_objects = 1;
  c.max_retries = 5;
  CHECK_THROWS_AS(GenerateExample(c, Split::kTuneTrain, 0), UnsatisfiableTemplate);
  c.max_objects = 13;
  CHECK_THROWS_AS(GenerateExample(c, Split::kTuneTrain, 0), std::invalid_argument);
}

TEST_CASE("splits round-trip through json lines and the dataset directory") {
  const auto ds = GenerateDataset(SmallConfig(3));
  const auto back = FromJsonLines(ToJsonLines(ds.split(Split::kTestCompositional)));
  REQUIRE(back.size() == ds.split(Split::kTestCompositional).size());
  CHECK(ToJsonLines(back) == ToJsonLines(ds.split(Split::kTestCompositional)));
  CHECK(back[0].tree == ds.split(Split::kTestCompositional)[0].tree);
  testing::TempDir dir("dataset");
  SaveDataset(ds, dir.path().string());
  const auto loaded = LoadDataset(dir.path().string());
  CHECK(loaded.config.ToJson() == ds.config.ToJson());
  for (int s = 0; s < kNumSplits; ++s) {
    CHECK(ToJsonLines(loaded.splits[s]) == ToJsonLines(ds.splits[s]));
  }
}

TEST_CASE("compositional queries need relation resolution") {
  DatasetConfig c;
  c.seed = 11;
  c.sizes = {0, 2000, 0, 0, 1000};
  const auto ds = GenerateDataset(c);
  int ambiguous = 0;
  for (const auto &ex : ds.split(Split::kTestCompositional)) {
    QuerySpec attrs_only;
    attrs_only.target = ex.spec.target;
    ambiguous += Resolve(ex.scene, attrs_only).size() >= 2;
  }
  CHECK(ambiguous >= 950);

  std::map<std::string, int> ids;
  auto bag = [&](const GroundingExample &ex) {
    std::vector<int> out;
    for (const auto &w : ex.query) out.push_back(ids.emplace(w, ids.size()).first->second);
    return out;
  };
  for (const auto &ex : ds.split(Split::kTuneTrain)) bag(ex);
  for (const auto &ex : ds.split(Split::kTestCompositional)) bag(ex);
  BagOfAttributes oracle(static_cast<int>(ids.size()));
  for (int epoch = 0; epoch < 5; ++epoch) {
    for (const auto &ex : ds.split(Split::kTuneTrain)) {
      oracle.Step(bag(ex), ex.scene, ex.gold_region, 0.05);
    }
  }
  int train_correct = 0, correct = 0;
  for (const auto &ex : ds.split(Split::kTuneTrain)) {
    train_correct += oracle.Predict(bag(ex), ex.scene) == ex.gold_region;
  }
  for (const auto &ex : ds.split(Split::kTestCompositional)) {
    correct += oracle.Predict(bag(ex), ex.scene) == ex.gold_region;
  }
  MESSAGE("bag-of-attributes accuracy: train ", train_correct / 2000.0, ", test ",
          correct / 1000.0);
  CHECK(train_correct / 2000.0 > 1.0 / 12);  // it does learn something
  CHECK(correct / 1000.0 < 0.60);
}

}  // TEST_SUITE
}  // namespace treeprompt
