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
// Synthetic grid-world scenes for referring-expression grounding.

#ifndef TREEPROMPT_SCENE_H_
#define TREEPROMPT_SCENE_H_

#include <array>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

namespace treeprompt {

struct Box {
  double x1 = 0, y1 = 0, x2 = 0, y2 = 0;
  double area() const { return (x2 - x1) * (y2 - y1); }
  bool operator==(const Box &) const = default;
};

class DegenerateBox : public std::invalid_argument {
 public:
  explicit DegenerateBox(const std::string &what)
      : std::invalid_argument("degenerate box: " + what) {}
};

// Intersection over union of two boxes with x1 < x2 and y1 < y2.
double Iou(const Box &a, const Box &b);

enum class ShapeKind { kSquare, kCircle, kTriangle };
enum class Color { kRed, kBlue, kGreen, kYellow };
enum class SizeKind { kSmall, kBig };
enum class Relation { kAbove, kBelow, kLeftOf, kRightOf, kHolding };

inline constexpr int kNumShapes = 3;
inline constexpr int kNumColors = 4;
inline constexpr int kNumSizes = 2;
inline constexpr int kNumRelations = 5;

const char *ShapeWord(ShapeKind s);
const char *ColorWord(Color c);
const char *SizeWord(SizeKind s);
ShapeKind ShapeFromWord(const std::string &w);
Color ColorFromWord(const std::string &w);
SizeKind SizeFromWord(const std::string &w);
const char *RelationName(Relation r);

struct SceneObject {
  int id = 0;
  ShapeKind shape = ShapeKind::kSquare;
  Color color = Color::kRed;
  SizeKind size = SizeKind::kSmall;
  int row = 0;
  int col = 0;
  int held_item = -1;  // id of the object this one holds, or -1
  Box box;

  bool operator==(const SceneObject &) const = default;
};

struct SyntheticScene {
  static constexpr int kMaxObjects = 12;

  int grid = 6;
  int cell_size = 16;
  std::vector<SceneObject> objects;

  int image_size() const { return grid * cell_size; }
  const SceneObject *At(int row, int col) const;
  const SceneObject &object(int id) const { return objects.at(id); }

  // Recomputes every box from cell and size.
  void LayoutBoxes();
  // Throws std::logic_error when an invariant fails.
  void Validate() const;

  bool operator==(const SyntheticScene &) const = default;
};

Box CellBox(int row, int col, SizeKind size, int cell_size);

// True when `a` stands in relation `r` to `b`. Spatial relations mean
// directly adjacent cells.
bool Holds(const SyntheticScene &scene, const SceneObject &a, Relation r,
           const SceneObject &b);

// Attribute description of an object; missing fields match anything.
struct Description {
  std::optional<SizeKind> size;
  std::optional<Color> color;
  std::optional<ShapeKind> shape;

  bool Matches(const SceneObject &o) const;
  bool operator==(const Description &) const = default;
};

// Per-object feature layout: shape | color | size | row | col | hold direction.
inline constexpr int kObjectFeatureDim =
    kNumShapes + kNumColors + kNumSizes + 6 + 6 + 5;
std::vector<float> ObjectFeatures(const SyntheticScene &scene,
                                  const SceneObject &o);

nlohmann::json SceneToJson(const SyntheticScene &scene);
SyntheticScene SceneFromJson(const nlohmann::json &j);

}  // namespace treeprompt

#endif  // TREEPROMPT_SCENE_H_
