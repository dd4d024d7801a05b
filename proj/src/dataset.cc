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
#include "treeprompt/dataset.h"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <sstream>
#include <thread>

#include "treeprompt/random.h"

namespace treeprompt {
namespace {

constexpr const char *kSplitNames[] = {"pretrain", "tune_train", "tune_val",
                                       "tune_test_simple",
                                       "tune_test_compositional"};

// Accumulates tokens whose heads may be patched after later tokens exist.
class TreeBuilder {
 public:
  int Add(std::string word, std::string pos, std::string dep, int head = 0) {
    words_.push_back(std::move(word));
    pos_.push_back(std::move(pos));
    deps_.push_back(std::move(dep));
    heads_.push_back(head);
    return static_cast<int>(words_.size());
  }
  void SetHead(int token, int head) { heads_[token - 1] = head; }

  int NounPhrase(const Description &d, const std::string &dep, int head) {
    std::vector<int> mods;
    mods.push_back(Add("the", "DET", "det"));
    if (d.size) mods.push_back(Add(SizeWord(*d.size), "ADJ", "amod"));
    if (d.color) mods.push_back(Add(ColorWord(*d.color), "ADJ", "amod"));
    const int noun = Add(d.shape ? ShapeWord(*d.shape) : "thing", "NOUN", dep, head);
    for (int m : mods) SetHead(m, noun);
    return noun;
  }

  // Attaches "<rel> the <d>" under `governor`.
  void Relation(treeprompt::Relation r, const Description &d, int governor) {
    switch (r) {
      case Relation::kAbove:
      case Relation::kBelow: {
        const int p = Add(r == Relation::kAbove ? "above" : "below", "ADP", "prep",
                          governor);
        NounPhrase(d, "pobj", p);
        break;
      }
      case Relation::kLeftOf:
      case Relation::kRightOf: {
        const int side = Add(r == Relation::kLeftOf ? "left" : "right", "ADV",
                             "advmod", governor);
        const int of = Add("of", "ADP", "prep", side);
        NounPhrase(d, "pobj", of);
        break;
      }
      case Relation::kHolding: {
        const int v = Add("holding", "VERB", "acl", governor);
        NounPhrase(d, "dobj", v);
        break;
      }
    }
  }

  // Attaches "that is <rel> the <d>" as a relative clause of `noun`.
  void RelativeClause(treeprompt::Relation r, const Description &d, int noun) {
    const int that = Add("that", "PRON", "nsubj");
    if (r == Relation::kHolding) {
      const int is = Add("is", "AUX", "aux");
      const int v = Add("holding", "VERB", "acl:relcl", noun);
      SetHead(that, v);
      SetHead(is, v);
      NounPhrase(d, "dobj", v);
      return;
    }
    const int is = Add("is", "AUX", "acl:relcl", noun);
    SetHead(that, is);
    Relation(r, d, is);
  }

  DepTree Build(const std::string &id) const {
    return MakeTree(id, words_, pos_, deps_, heads_);
  }
  const std::vector<std::string> &words() const { return words_; }

 private:
  std::vector<std::string> words_, pos_, deps_;
  std::vector<int> heads_;
};

Description RandomDescription(const SceneObject &o, Rng &rng) {
  std::bernoulli_distribution shape(0.8), color(0.8), size(0.35);
  Description d;
  while (!d.size && !d.color && !d.shape) {
    if (shape(rng)) d.shape = o.shape;
    if (color(rng)) d.color = o.color;
    if (size(rng)) d.size = o.size;
  }
  return d;
}

SceneObject RandomObject(Rng &rng) {
  SceneObject o;
  o.shape = static_cast<ShapeKind>(std::uniform_int_distribution<int>(0, kNumShapes - 1)(rng));
  o.color = static_cast<Color>(std::uniform_int_distribution<int>(0, kNumColors - 1)(rng));
  o.size = static_cast<SizeKind>(std::uniform_int_distribution<int>(0, kNumSizes - 1)(rng));
  return o;
}

// Overwrites the attributes named by `d` so that `o` matches it.
void Imprint(SceneObject &o, const Description &d) {
  if (d.shape) o.shape = *d.shape;
  if (d.color) o.color = *d.color;
  if (d.size) o.size = *d.size;
}

// Mutable scene under construction with an occupancy grid.
class SceneDraft {
 public:
  explicit SceneDraft(int grid) : grid_(grid), occupied_(grid * grid, -1) {}

  bool Free(int row, int col) const {
    return row >= 0 && col >= 0 && row < grid_ && col < grid_ &&
           occupied_[row * grid_ + col] < 0;
  }
  int Place(SceneObject o, int row, int col) {
    o.id = static_cast<int>(objects_.size());
    o.row = row;
    o.col = col;
    occupied_[row * grid_ + col] = o.id;
    objects_.push_back(o);
    return o.id;
  }
  bool PlaceRandom(SceneObject o, Rng &rng, int *id = nullptr) {
    std::vector<int> free;
    for (int c = 0; c < grid_ * grid_; ++c) {
      if (occupied_[c] < 0) free.push_back(c);
    }
    if (free.empty()) return false;
    const int cell = free[std::uniform_int_distribution<size_t>(0, free.size() - 1)(rng)];
    const int placed = Place(o, cell / grid_, cell % grid_);
    if (id) *id = placed;
    return true;
  }
  // Places `o` so that objects_[from] stands in relation `r` to it.
  bool PlaceRelated(int from, Relation r, SceneObject o, Rng &rng, int *id) {
    const SceneObject &a = objects_[from];
    int row = a.row, col = a.col;
    switch (r) {
      case Relation::kAbove:
        ++row;
        break;
      case Relation::kBelow:
        --row;
        break;
      case Relation::kLeftOf:
        ++col;
        break;
      case Relation::kRightOf:
        --col;
        break;
      case Relation::kHolding: {
        if (a.held_item >= 0) return false;
        static constexpr int kDr[] = {-1, 1, 0, 0}, kDc[] = {0, 0, -1, 1};
        std::vector<int> dirs;
        for (int d = 0; d < 4; ++d) {
          if (Free(a.row + kDr[d], a.col + kDc[d])) dirs.push_back(d);
        }
        if (dirs.empty()) return false;
        const int d = dirs[std::uniform_int_distribution<size_t>(0, dirs.size() - 1)(rng)];
        *id = Place(o, a.row + kDr[d], a.col + kDc[d]);
        objects_[from].held_item = *id;
        return true;
      }
    }
    if (!Free(row, col)) return false;
    *id = Place(o, row, col);
    return true;
  }
  // Random extra holdings between adjacent objects.
  void SprinkleHoldings(double p, const std::vector<int> &skip, Rng &rng) {
    std::bernoulli_distribution coin(p);
    for (auto &o : objects_) {
      if (o.held_item >= 0 || !coin(rng)) continue;
      if (std::find(skip.begin(), skip.end(), o.id) != skip.end()) continue;
      std::vector<int> near;
      for (const auto &b : objects_) {
        if (std::abs(b.row - o.row) + std::abs(b.col - o.col) == 1) near.push_back(b.id);
      }
      if (near.empty()) continue;
      o.held_item = near[std::uniform_int_distribution<size_t>(0, near.size() - 1)(rng)];
    }
  }
  int size() const { return static_cast<int>(objects_.size()); }
  const SceneObject &object(int id) const { return objects_[id]; }

  // Shuffles object order so that ids carry no information, and returns the
  // final scene plus the old-to-new id map.
  SyntheticScene Finish(int cell_size, Rng &rng, std::vector<int> *remap) {
    std::vector<int> order(objects_.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    remap->assign(objects_.size(), -1);
    for (size_t n = 0; n < order.size(); ++n) (*remap)[order[n]] = static_cast<int>(n);
    SyntheticScene scene;
    scene.grid = grid_;
    scene.cell_size = cell_size;
    for (size_t n = 0; n < order.size(); ++n) {
      SceneObject o = objects_[order[n]];
      o.id = static_cast<int>(n);
      if (o.held_item >= 0) o.held_item = (*remap)[o.held_item];
      scene.objects.push_back(o);
    }
    scene.LayoutBoxes();
    return scene;
  }

 private:
  int grid_;
  std::vector<int> occupied_;
  std::vector<SceneObject> objects_;
};

bool TryRelational(const DatasetConfig &config, int hops, Rng &rng,
                   SyntheticScene *scene, QuerySpec *spec) {
  std::uniform_int_distribution<int> count(config.min_objects, config.max_objects);
  std::uniform_int_distribution<int> rel(0, kNumRelations - 1);
  const int target_count = count(rng);
  SceneDraft draft(6);
  std::vector<int> chain;
  int first = 0;
  if (!draft.PlaceRandom(RandomObject(rng), rng, &first)) return false;
  chain.push_back(first);
  std::vector<Relation> rels;
  for (int h = 0; h < hops; ++h) {
    const auto r = static_cast<Relation>(rel(rng));
    int next = 0;
    if (!draft.PlaceRelated(chain.back(), r, RandomObject(rng), rng, &next)) return false;
    chain.push_back(next);
    rels.push_back(r);
  }
  QuerySpec q;
  q.target = RandomDescription(draft.object(chain[0]), rng);
  for (int h = 0; h < hops; ++h) {
    q.chain.emplace_back(rels[h], RandomDescription(draft.object(chain[h + 1]), rng));
  }
  // A distractor that shares the target description; with probability
  // hard_negative it also satisfies the first relation.
  SceneObject twin = RandomObject(rng);
  Imprint(twin, q.target);
  int twin_id = 0;
  if (!draft.PlaceRandom(twin, rng, &twin_id)) return false;
  if (hops > 0 && std::bernoulli_distribution(config.hard_negative)(rng)) {
    SceneObject partner = RandomObject(rng);
    Imprint(partner, q.chain[0].second);
    int partner_id = 0;
    if (!draft.PlaceRelated(twin_id, rels[0], partner, rng, &partner_id)) return false;
  }
  if (draft.size() > config.max_objects) return false;
  while (draft.size() < target_count) {
    if (!draft.PlaceRandom(RandomObject(rng), rng)) break;
  }
  draft.SprinkleHoldings(0.15, chain, rng);
  std::vector<int> remap;
  *scene = draft.Finish(16, rng, &remap);
  const auto referents = Resolve(*scene, q);
  if (referents.size() != 1 || referents[0] != remap[chain[0]]) return false;
  if (hops > 0) {
    int matches = 0;
    for (const auto &o : scene->objects) matches += q.target.Matches(o);
    if (matches < 2) return false;
  }
  *spec = q;
  return true;
}

bool TrySimple(const DatasetConfig &config, Rng &rng, SyntheticScene *scene,
               QuerySpec *spec) {
  std::uniform_int_distribution<int> count(config.min_objects, config.max_objects);
  const int n = count(rng);
  SceneDraft draft(6);
  for (int i = 0; i < n; ++i) draft.PlaceRandom(RandomObject(rng), rng);
  draft.SprinkleHoldings(0.15, {}, rng);
  std::vector<int> remap;
  *scene = draft.Finish(16, rng, &remap);
  const int target =
      std::uniform_int_distribution<int>(0, scene->objects.size() - 1)(rng);
  const SceneObject &o = scene->object(target);
  // Candidate attribute subsets, shape-bearing ones first in random order.
  std::vector<Description> options;
  for (int mask = 1; mask < 8; ++mask) {
    Description d;
    if (mask & 1) d.shape = o.shape;
    if (mask & 2) d.color = o.color;
    if (mask & 4) d.size = o.size;
    options.push_back(d);
  }
  std::shuffle(options.begin(), options.end(), rng);
  for (const auto &d : options) {
    QuerySpec q;
    q.target = d;
    const auto hits = Resolve(*scene, q);
    if (hits.size() == 1) {
      *spec = q;
      return true;
    }
  }
  return false;
}

}  // namespace

std::string SplitName(Split split) { return kSplitNames[static_cast<int>(split)]; }

Split SplitFromName(const std::string &name) {
  for (int i = 0; i < kNumSplits; ++i) {
    if (name == kSplitNames[i]) return static_cast<Split>(i);
  }
  throw std::invalid_argument("unknown split: " + name);
}

std::pair<std::vector<std::string>, DepTree> RenderQuery(const QuerySpec &spec,
                                                         const std::string &id) {
  TreeBuilder b;
  int governor = b.NounPhrase(spec.target, "ROOT", 0);
  for (int h = 0; h < spec.hops(); ++h) {
    const auto &[rel, desc] = spec.chain[h];
    if (h == 0) {
      b.Relation(rel, desc, governor);
    } else {
      b.RelativeClause(rel, desc, governor);
    }
    // The next hop hangs off the noun just added, which is the last token.
    governor = static_cast<int>(b.words().size());
  }
  return {b.words(), b.Build(id)};
}

std::vector<int> Resolve(const SyntheticScene &scene, const QuerySpec &spec) {
  // Work backwards: candidates for the last noun, then each earlier one.
  std::vector<std::vector<bool>> cand(spec.hops() + 1,
                                      std::vector<bool>(scene.objects.size()));
  for (int level = spec.hops(); level >= 0; --level) {
    const Description &d = level == 0 ? spec.target : spec.chain[level - 1].second;
    for (const auto &o : scene.objects) {
      bool good = d.Matches(o);
      if (good && level < spec.hops()) {
        const Relation r = spec.chain[level].first;
        good = false;
        for (const auto &b : scene.objects) {
          if (cand[level + 1][b.id] && Holds(scene, o, r, b)) {
            good = true;
            break;
          }
        }
      }
      cand[level][o.id] = good;
    }
  }
  std::vector<int> out;
  for (const auto &o : scene.objects) {
    if (cand[0][o.id]) out.push_back(o.id);
  }
  return out;
}

GroundingExample MakeExample(std::string id, Split split, SyntheticScene scene,
                             const QuerySpec &spec) {
  scene.Validate();
  const auto referents = Resolve(scene, spec);
  if (referents.size() != 1) {
    throw UnsatisfiableTemplate("query for " + id + " has " +
                                std::to_string(referents.size()) + " referents");
  }
  GroundingExample ex;
  ex.id = std::move(id);
  ex.split = split;
  ex.scene = std::move(scene);
  ex.spec = spec;
  auto [words, tree] = RenderQuery(spec, ex.id);
  ex.query = std::move(words);
  ex.tree = std::move(tree);
  ex.gold_region = referents[0];
  ex.gold_box = ex.scene.object(ex.gold_region).box;
  return ex;
}

int DatasetSizes::of(Split split) const {
  return const_cast<DatasetSizes *>(this)->of(split);
}

int &DatasetSizes::of(Split split) {
  switch (split) {
    case Split::kPretrain:
      return pretrain;
    case Split::kTuneTrain:
      return tune_train;
    case Split::kTuneVal:
      return tune_val;
    case Split::kTestSimple:
      return test_simple;
    case Split::kTestCompositional:
      break;
  }
  return test_compositional;
}

nlohmann::json DatasetConfig::ToJson() const {
  nlohmann::json sizes_json;
  for (int s = 0; s < kNumSplits; ++s) {
    sizes_json[kSplitNames[s]] = sizes.of(static_cast<Split>(s));
  }
  return {{"seed", seed},
          {"sizes", sizes_json},
          {"min_objects", min_objects},
          {"max_objects", max_objects},
          {"hard_negative", hard_negative},
          {"max_retries", max_retries},
          {"simple_hops", simple_hops},
          {"compositional_hops", compositional_hops}};
}

DatasetConfig DatasetConfig::FromJson(const nlohmann::json &j) {
  DatasetConfig c;
  c.seed = j.value("seed", c.seed);
  if (j.contains("sizes")) {
    for (int s = 0; s < kNumSplits; ++s) {
      c.sizes.of(static_cast<Split>(s)) =
          j["sizes"].value(kSplitNames[s], c.sizes.of(static_cast<Split>(s)));
    }
  }
  c.min_objects = j.value("min_objects", c.min_objects);
  c.max_objects = j.value("max_objects", c.max_objects);
  c.hard_negative = j.value("hard_negative", c.hard_negative);
  c.max_retries = j.value("max_retries", c.max_retries);
  c.simple_hops = j.value("simple_hops", c.simple_hops);
  c.compositional_hops = j.value("compositional_hops", c.compositional_hops);
  return c;
}

GroundingExample GenerateExample(const DatasetConfig &config, Split split,
                                 int index) {
  if (config.min_objects < 1 || config.max_objects > SyntheticScene::kMaxObjects ||
      config.min_objects > config.max_objects) {
    throw std::invalid_argument("object count range must lie in [1, 12]");
  }
  const bool simple = split == Split::kPretrain || split == Split::kTestSimple;
  const int hops = simple ? config.simple_hops : config.compositional_hops;
  Rng rng(StreamSeed(config.seed, static_cast<uint64_t>(split) + 1,
                     static_cast<uint64_t>(index)));
  const std::string id = SplitName(split) + "-" + std::to_string(index);
  SyntheticScene scene;
  QuerySpec spec;
  for (int attempt = 0; attempt < config.max_retries; ++attempt) {
    const bool ok = hops == 0 ? TrySimple(config, rng, &scene, &spec)
                              : TryRelational(config, hops, rng, &scene, &spec);
    if (ok) return MakeExample(id, split, std::move(scene), spec);
  }
  throw UnsatisfiableTemplate("no satisfiable scene for " + id + " after " +
                              std::to_string(config.max_retries) + " attempts");
}

std::vector<DepTree> Dataset::Trees(std::initializer_list<Split> which) const {
  std::vector<DepTree> trees;
  for (Split s : which) {
    for (const auto &ex : split(s)) trees.push_back(ex.tree);
  }
  return trees;
}

Dataset GenerateDataset(const DatasetConfig &config, int threads) {
  Dataset ds;
  ds.config = config;
  threads = std::max(1, threads);
  for (int s = 0; s < kNumSplits; ++s) {
    const Split split = static_cast<Split>(s);
    const int n = config.sizes.of(split);
    auto &out = ds.split(split);
    out.resize(n);
    auto work = [&](int begin, int end) {
      for (int i = begin; i < end; ++i) out[i] = GenerateExample(config, split, i);
    };
    if (threads == 1 || n < 64) {
      work(0, n);
      continue;
    }
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(threads);
    const int chunk = (n + threads - 1) / threads;
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&, t] {
        try {
          work(t * chunk, std::min(n, (t + 1) * chunk));
        } catch (...) {
          errors[t] = std::current_exception();
        }
      });
    }
    for (auto &th : pool) th.join();
    for (auto &e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  return ds;
}

namespace {

nlohmann::json DescriptionToJson(const Description &d) {
  nlohmann::json j = nlohmann::json::object();
  if (d.size) j["size"] = SizeWord(*d.size);
  if (d.color) j["color"] = ColorWord(*d.color);
  if (d.shape) j["shape"] = ShapeWord(*d.shape);
  return j;
}

Description DescriptionFromJson(const nlohmann::json &j) {
  Description d;
  if (j.contains("size")) d.size = SizeFromWord(j["size"].get<std::string>());
  if (j.contains("color")) d.color = ColorFromWord(j["color"].get<std::string>());
  if (j.contains("shape")) d.shape = ShapeFromWord(j["shape"].get<std::string>());
  return d;
}

Relation RelationFromName(const std::string &name) {
  for (int r = 0; r < kNumRelations; ++r) {
    if (name == RelationName(static_cast<Relation>(r))) return static_cast<Relation>(r);
  }
  throw std::invalid_argument("unknown relation: " + name);
}

}  // namespace

nlohmann::json ExampleToJson(const GroundingExample &ex) {
  nlohmann::json chain = nlohmann::json::array();
  for (const auto &[rel, desc] : ex.spec.chain) {
    chain.push_back({{"relation", RelationName(rel)}, {"object", DescriptionToJson(desc)}});
  }
  return {{"id", ex.id},
          {"split", SplitName(ex.split)},
          {"scene", SceneToJson(ex.scene)},
          {"spec", {{"target", DescriptionToJson(ex.spec.target)}, {"chain", chain}}},
          {"query", ex.query},
          {"tree", SerializeConllu(ex.tree)},
          {"gold_region", ex.gold_region},
          {"gold_box", {ex.gold_box.x1, ex.gold_box.y1, ex.gold_box.x2, ex.gold_box.y2}}};
}

GroundingExample ExampleFromJson(const nlohmann::json &j) {
  GroundingExample ex;
  ex.id = j.at("id").get<std::string>();
  ex.split = SplitFromName(j.at("split").get<std::string>());
  ex.scene = SceneFromJson(j.at("scene"));
  ex.spec.target = DescriptionFromJson(j.at("spec").at("target"));
  for (const auto &c : j.at("spec").at("chain")) {
    ex.spec.chain.emplace_back(RelationFromName(c.at("relation").get<std::string>()),
                               DescriptionFromJson(c.at("object")));
  }
  ex.query = j.at("query").get<std::vector<std::string>>();
  auto trees = ParseConllu(j.at("tree").get<std::string>());
  if (trees.size() != 1) throw std::invalid_argument("example tree must hold one sentence");
  ex.tree = std::move(trees[0]);
  ex.gold_region = j.at("gold_region").get<int>();
  const auto b = j.at("gold_box").get<std::vector<double>>();
  ex.gold_box = Box{b.at(0), b.at(1), b.at(2), b.at(3)};
  return ex;
}

std::string ToJsonLines(const std::vector<GroundingExample> &examples) {
  std::string out;
  for (const auto &ex : examples) {
    out += ExampleToJson(ex).dump();
    out += '\n';
  }
  return out;
}

std::vector<GroundingExample> FromJsonLines(const std::string &text) {
  std::vector<GroundingExample> out;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    out.push_back(ExampleFromJson(nlohmann::json::parse(line)));
  }
  return out;
}

void SaveDataset(const Dataset &dataset, const std::string &dir) {
  std::filesystem::create_directories(dir);
  for (int s = 0; s < kNumSplits; ++s) {
    std::ofstream out(std::filesystem::path(dir) / (std::string(kSplitNames[s]) + ".jsonl"));
    if (!out) throw std::runtime_error("cannot write dataset split in " + dir);
    out << ToJsonLines(dataset.splits[s]);
  }
  std::ofstream cfg(std::filesystem::path(dir) / "dataset.json");
  cfg << dataset.config.ToJson().dump(2) << "\n";
}

Dataset LoadDataset(const std::string &dir) {
  Dataset ds;
  std::ifstream cfg(std::filesystem::path(dir) / "dataset.json");
  if (!cfg) throw std::runtime_error("no dataset.json in " + dir);
  ds.config = DatasetConfig::FromJson(nlohmann::json::parse(cfg));
  for (int s = 0; s < kNumSplits; ++s) {
    std::ifstream in(std::filesystem::path(dir) / (std::string(kSplitNames[s]) + ".jsonl"));
    if (!in) continue;
    std::ostringstream buf;
    buf << in.rdbuf();
    ds.splits[s] = FromJsonLines(buf.str());
  }
  return ds;
}

}  // namespace treeprompt
