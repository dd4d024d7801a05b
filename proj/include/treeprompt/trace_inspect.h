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

// Per-node reasoning traces: every intermediate prompt is fed to the frozen
// backbone on its own and the region it selects is recorded next to the tree.

#ifndef TREEPROMPT_TRACE_INSPECT_H_
#define TREEPROMPT_TRACE_INSPECT_H_

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treeprompt/train_eval.h"

namespace treeprompt {

class IoFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NodeTrace {
  int index = 0;
  std::string word;
  ModuleKind kind = ModuleKind::kLeaf;
  std::vector<float> h;  // leading dimensions only
  int probe_region = 0;
  Box probe_box;
  double probe_iou = 0;
  std::vector<int> children;
};

inline constexpr int kTraceDims = 8;

// Runs the backbone with the prompt obtained by fusing the single row
// `node.h` (at tree position 0) with the global prompt. Returns the region.
int ProbeNode(const PromptedModel &model, const NodePrompt &node, const TuneSample &sample);

// Full prediction plus one probe per tree node.
struct ExampleTrace {
  int prediction = 0;
  std::vector<NodeTrace> nodes;  // token order
};

ExampleTrace TraceExample(const PromptedModel &model, const TuneSample &sample);

// JSON document of a trace; empty optional fields are omitted.
nlohmann::json TraceToJson(const GroundingExample &example, const ExampleTrace &trace);

// Static page with the module-coloured tree and the scene boxes, rendered
// from the JSON document alone.
std::string RenderTraceHtml(const nlohmann::json &document);

// Writes trace.json and trace.html into `dir`.
void ExportTrace(const GroundingExample &example, const ExampleTrace &trace,
                 const std::string &dir);

// CSS class used for a module kind: "enti", "rel" or "leaf".
std::string ModuleClass(ModuleKind kind);
// Legend colour for a module kind.
std::string ModuleColor(ModuleKind kind);

}  // namespace treeprompt

#endif  // TREEPROMPT_TRACE_INSPECT_H_
