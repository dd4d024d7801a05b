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
#include "treeprompt/scene.h"

#include <algorithm>
#include <cmath>

namespace treeprompt {
namespace {

constexpr const char *kShapeWords[] = {"square", "circle", "triangle"};
constexpr const char *kColorWords[] = {"red", "blue", "green", "yellow"};
constexpr const char *kSizeWords[] = {"small", "big"};
constexpr const char *kRelationNames[] = {"above", "below", "left_of", "right_of",
                                          "holding"};

template <size_t N>
int IndexOf(const char *const (&words)[N], const std::string &w, const char *what) {
  for (size_t i = 0; i < N; ++i) {
    if (w == words[i]) return static_cast<int>(i);
  }
  throw std::invalid_argument(std::string("unknown ") + what + ": " + w);
}

void CheckBox(const Box &b) {
  if (!(b.x1 < b.x2) || !(b.y1 < b.y2) || !std::isfinite(b.x1) ||
      !std::isfinite(b.y1) || !std::isfinite(b.x2) || !std::isfinite(b.y2)) {
    throw DegenerateBox("(" + std::to_string(b.x1) + "," + std::to_string(b.y1) +
                        "," + std::to_string(b.x2) + "," + std::to_string(b.y2) + ")");
  }
}

}  // namespace

double Iou(const Box &a, const Box &b) {
  CheckBox(a);
  CheckBox(b);
  const double iw = std::max(0.0, std::min(a.x2, b.x2) - std::max(a.x1, b.x1));
  const double ih = std::max(0.0, std::min(a.y2, b.y2) - std::max(a.y1, b.y1));
  const double inter = iw * ih;
  return inter / (a.area() + b.area() - inter);
}

const char *ShapeWord(ShapeKind s) { return kShapeWords[static_cast<int>(s)]; }
const char *ColorWord(Color c) { return kColorWords[static_cast<int>(c)]; }
const char *SizeWord(SizeKind s) { return kSizeWords[static_cast<int>(s)]; }
const char *RelationName(Relation r) { return kRelationNames[static_cast<int>(r)]; }
ShapeKind ShapeFromWord(const std::string &w) {
  return static_cast<ShapeKind>(IndexOf(kShapeWords, w, "shape"));
}
Color ColorFromWord(const std::string &w) {
  return static_cast<Color>(IndexOf(kColorWords, w, "color"));
}
SizeKind SizeFromWord(const std::string &w) {
  return static_cast<SizeKind>(IndexOf(kSizeWords, w, "size"));
}

Box CellBox(int row, int col, SizeKind size, int cell_size) {
  const double inset = size == SizeKind::kBig ? cell_size / 16.0 : cell_size / 4.0;
  const double x = col * cell_size, y = row * cell_size;
  return Box{x + inset, y + inset, x + cell_size - inset, y + cell_size - inset};
}

const SceneObject *SyntheticScene::At(int row, int col) const {
  for (const auto &o : objects) {
    if (o.row == row && o.col == col) return &o;
  }
  return nullptr;
}

void SyntheticScene::LayoutBoxes() {
  for (auto &o : objects) o.box = CellBox(o.row, o.col, o.size, cell_size);
}

void SyntheticScene::Validate() const {
  if (objects.empty() || static_cast<int>(objects.size()) > kMaxObjects) {
    throw std::logic_error("scene must hold 1.." + std::to_string(kMaxObjects) +
                           " objects");
  }
  const double size = image_size();
  for (size_t i = 0; i < objects.size(); ++i) {
    const auto &o = objects[i];
    if (o.id != static_cast<int>(i)) throw std::logic_error("object ids not dense");
    if (o.row < 0 || o.row >= grid || o.col < 0 || o.col >= grid) {
      throw std::logic_error("object outside grid");
    }
    if (o.box.x1 < 0 || o.box.y1 < 0 || o.box.x2 > size || o.box.y2 > size) {
      throw std::logic_error("box outside image");
    }
    if (o.held_item >= static_cast<int>(objects.size()) || o.held_item == o.id) {
      throw std::logic_error("invalid held item");
    }
    for (size_t j = 0; j < i; ++j) {
      if (objects[j].row == o.row && objects[j].col == o.col) {
        throw std::logic_error("two objects share a cell");
      }
      if (Iou(objects[j].box, o.box) >= 0.5) {
        throw std::logic_error("regions overlap with IoU >= 0.5");
      }
    }
  }
}

bool Holds(const SyntheticScene &, const SceneObject &a, Relation r,
           const SceneObject &b) {
  if (a.id == b.id) return false;
  switch (r) {
    case Relation::kAbove:
      return a.col == b.col && a.row == b.row - 1;
    case Relation::kBelow:
      return a.col == b.col && a.row == b.row + 1;
    case Relation::kLeftOf:
      return a.row == b.row && a.col == b.col - 1;
    case Relation::kRightOf:
      return a.row == b.row && a.col == b.col + 1;
    case Relation::kHolding:
      return a.held_item == b.id;
  }
  return false;
}

bool Description::Matches(const SceneObject &o) const {
  return (!size || *size == o.size) && (!color || *color == o.color) &&
         (!shape || *shape == o.shape);
}

std::vector<float> ObjectFeatures(const SyntheticScene &scene,
                                  const SceneObject &o) {
  std::vector<float> f(kObjectFeatureDim, 0.0f);
  int off = 0;
  f[off + static_cast<int>(o.shape)] = 1;
  off += kNumShapes;
  f[off + static_cast<int>(o.color)] = 1;
  off += kNumColors;
  f[off + static_cast<int>(o.size)] = 1;
  off += kNumSizes;
  f[off + std::min(o.row, 5)] = 1;
  off += 6;
  f[off + std::min(o.col, 5)] = 1;
  off += 6;
  int dir = 0;  // none, up, down, left, right
  if (o.held_item >= 0) {
    const auto &h = scene.object(o.held_item);
    if (h.row < o.row) dir = 1;
    else if (h.row > o.row) dir = 2;
    else if (h.col < o.col) dir = 3;
    else dir = 4;
  }
  f[off + dir] = 1;
  return f;
}

nlohmann::json SceneToJson(const SyntheticScene &scene) {
  nlohmann::json objects = nlohmann::json::array();
  for (const auto &o : scene.objects) {
    nlohmann::json j = {{"id", o.id},
                        {"shape", ShapeWord(o.shape)},
                        {"color", ColorWord(o.color)},
                        {"size", SizeWord(o.size)},
                        {"row", o.row},
                        {"col", o.col},
                        {"box", {o.box.x1, o.box.y1, o.box.x2, o.box.y2}}};
    if (o.held_item >= 0) j["held_item"] = o.held_item;
    objects.push_back(std::move(j));
  }
  return {{"grid", scene.grid}, {"cell_size", scene.cell_size}, {"objects", objects}};
}

SyntheticScene SceneFromJson(const nlohmann::json &j) {
  SyntheticScene s;
  s.grid = j.at("grid").get<int>();
  s.cell_size = j.at("cell_size").get<int>();
  for (const auto &jo : j.at("objects")) {
    SceneObject o;
    o.id = jo.at("id").get<int>();
    o.shape = ShapeFromWord(jo.at("shape").get<std::string>());
    o.color = ColorFromWord(jo.at("color").get<std::string>());
    o.size = SizeFromWord(jo.at("size").get<std::string>());
    o.row = jo.at("row").get<int>();
    o.col = jo.at("col").get<int>();
    o.held_item = jo.value("held_item", -1);
    const auto b = jo.at("box").get<std::vector<double>>();
    if (b.size() != 4) throw std::invalid_argument("box needs 4 coordinates");
    o.box = Box{b[0], b[1], b[2], b[3]};
    s.objects.push_back(o);
  }
  return s;
}

}  // namespace treeprompt
