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

#include "treeprompt/trace_inspect.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "treeprompt/ops.h"

namespace treeprompt {
namespace {

nlohmann::json BoxJson(const Box &b) { return {b.x1, b.y1, b.x2, b.y2}; }

Box BoxFrom(const nlohmann::json &j) {
  return Box{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(),
             j.at(3).get<double>()};
}

std::string Num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string Escape(const std::string &s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&':
        out += "&amp;";
        break;
      case '<':
        out += "&lt;";
        break;
      case '>':
        out += "&gt;";
        break;
      case '"':
        out += "&quot;";
        break;
      default:
        out += c;
    }
  }
  return out;
}

std::string ObjectLabel(const SceneObject &o) {
  return std::string(SizeWord(o.size)) + " " + ColorWord(o.color) + " " + ShapeWord(o.shape);
}

constexpr const char *kStyle = R"(body{font-family:sans-serif;margin:24px;color:#222}
h1{font-size:20px}
.enti{fill:#d62728;stroke:#d62728}
.rel{fill:#2ca02c;stroke:#2ca02c}
.leaf{fill:#1f77b4;stroke:#1f77b4}
.edge{stroke:#888;stroke-width:1.5}
.word{fill:#fff;font-size:12px;text-anchor:middle}
.label{fill:#555;font-size:10px;text-anchor:middle}
.region{fill:none;stroke:#bbb;stroke-width:1}
.gold{fill:none;stroke:#000;stroke-width:2;stroke-dasharray:4 2}
.pred{fill:none;stroke:#ff7f0e;stroke-width:2}
table{border-collapse:collapse;margin-top:16px}
td,th{border:1px solid #ccc;padding:4px 8px;font-size:12px}
.swatch{display:inline-block;width:10px;height:10px;margin-right:4px}
)";

}  // namespace

std::string ModuleClass(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::kEnti:
      return "enti";
    case ModuleKind::kRel:
      return "rel";
    case ModuleKind::kLeaf:
      break;
  }
  return "leaf";
}

std::string ModuleColor(ModuleKind kind) {
  switch (kind) {
    case ModuleKind::kEnti:
      return "red";
    case ModuleKind::kRel:
      return "green";
    case ModuleKind::kLeaf:
      break;
  }
  return "blue";
}

int ProbeNode(const PromptedModel &model, const NodePrompt &node, const TuneSample &sample) {
  const TreePromptModel<float> &prompt = *model.prompt;
  const Parameter<float> *positions = prompt.params().Find("tree.position");
  if (positions == nullptr) throw std::logic_error("continuous prompts have no node prompts");
  const int64_t d = prompt.config().prompt_dim;
  if (static_cast<int64_t>(node.h.size()) != d) {
    throw DimMismatch("node prompt width " + std::to_string(node.h.size()));
  }
  Tape<float> tape;
  Var<float> h = tape.Constant(Tensor<float>({1, d}, node.h));
  Var<float> H = Add(h, SliceRows(tape.Param(*positions), 0, 1));
  Var<float> P = prompt.FuseWithGlobal(tape, H);
  PromptBundle<float> bundle =
      BundleFromPrompt(tape, prompt, P, model.mode, model.global_layers);
  return ArgMax(model.backbone->Scores(tape, sample.encoded, &bundle).value());
}

ExampleTrace TraceExample(const PromptedModel &model, const TuneSample &sample) {
  const GroundingExample &ex = *sample.example;
  ExampleTrace trace;
  Tape<float> tape;
  TreePromptOutput<float> forward;
  PromptBundle<float> bundle =
      BuildPrompt(tape, *model.prompt, sample, model.mode, model.global_layers, &forward);
  trace.prediction = ArgMax(model.backbone->Scores(tape, sample.encoded, &bundle).value());
  for (const NodePrompt &np : model.prompt->Snapshot(forward)) {
    NodeTrace t;
    t.index = np.index;
    t.word = ex.tree.node(np.index).word;
    t.kind = np.kind;
    t.children = np.children;
    t.h.assign(np.h.begin(), np.h.begin() + std::min<size_t>(kTraceDims, np.h.size()));
    t.probe_region = ProbeNode(model, np, sample);
    t.probe_box = ex.scene.object(t.probe_region).box;
    t.probe_iou = Iou(t.probe_box, ex.gold_box);
    trace.nodes.push_back(std::move(t));
  }
  return trace;
}

nlohmann::json TraceToJson(const GroundingExample &example, const ExampleTrace &trace) {
  nlohmann::json doc;
  doc["id"] = example.id;
  std::string sentence;
  for (const auto &w : example.query) sentence += (sentence.empty() ? "" : " ") + w;
  doc["sentence"] = sentence;
  doc["root"] = example.tree.root;
  doc["edges"] = nlohmann::json::array();
  for (const auto &n : example.tree.nodes) {
    if (n.head == 0) continue;
    doc["edges"].push_back({{"head", n.head}, {"dependent", n.index}, {"label", n.dep}});
  }
  doc["nodes"] = nlohmann::json::array();
  for (const auto &t : trace.nodes) {
    nlohmann::json node = {{"index", t.index},
                           {"word", t.word},
                           {"module", std::string(ModuleName(t.kind))},
                           {"probe_region", t.probe_region},
                           {"probe_box", BoxJson(t.probe_box)},
                           {"iou", t.probe_iou}};
    if (!t.children.empty()) node["children"] = t.children;
    if (!t.h.empty()) node["h"] = t.h;
    doc["nodes"].push_back(node);
  }
  nlohmann::json regions = nlohmann::json::array();
  for (const auto &o : example.scene.objects) {
    regions.push_back({{"id", o.id}, {"label", ObjectLabel(o)}, {"box", BoxJson(o.box)}});
  }
  doc["scene"] = {{"image_size", example.scene.image_size()}, {"regions", regions}};
  doc["gold"] = {{"region", example.gold_region}, {"box", BoxJson(example.gold_box)}};
  const Box &pred = example.scene.object(trace.prediction).box;
  doc["prediction"] = {
      {"region", trace.prediction}, {"box", BoxJson(pred)}, {"iou", Iou(pred, example.gold_box)}};
  return doc;
}

std::string RenderTraceHtml(const nlohmann::json &doc) {
  std::map<int, nlohmann::json> nodes;
  std::map<int, int> parent;
  for (const auto &n : doc.at("nodes")) nodes[n.at("index").get<int>()] = n;
  for (const auto &e : doc.at("edges")) {
    parent[e.at("dependent").get<int>()] = e.at("head").get<int>();
  }
  auto depth = [&](int i) {
    int d = 0;
    while (parent.count(i)) {
      i = parent[i];
      ++d;
    }
    return d;
  };
  int max_depth = 0;
  for (const auto &[i, n] : nodes) max_depth = std::max(max_depth, depth(i));
  const int step_x = 84, step_y = 70, pad = 40;
  auto x_of = [&](int i) { return pad + (i - 1) * step_x; };
  auto y_of = [&](int i) { return pad + depth(i) * step_y; };
  const int width = pad * 2 + std::max<int>(0, nodes.size() - 1) * step_x;
  const int height = pad * 2 + max_depth * step_y;

  std::ostringstream out;
  out << "<!DOCTYPE html>\n<html>\n<head>\n<meta charset=\"utf-8\">\n<title>Trace "
      << Escape(doc.at("id").get<std::string>()) << "</title>\n<style>\n" << kStyle
      << "</style>\n</head>\n<body>\n";
  out << "<h1>" << Escape(doc.at("sentence").get<std::string>()) << "</h1>\n";
  out << "<p><span class=\"swatch\" style=\"background:#d62728\"></span>Enti "
         "<span class=\"swatch\" style=\"background:#2ca02c\"></span>Rel "
         "<span class=\"swatch\" style=\"background:#1f77b4\"></span>Leaf</p>\n";

  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n";
  for (const auto &e : doc.at("edges")) {
    const int h = e.at("head").get<int>(), d = e.at("dependent").get<int>();
    out << "<line class=\"edge\" x1=\"" << x_of(h) << "\" y1=\"" << y_of(h) << "\" x2=\""
        << x_of(d) << "\" y2=\"" << y_of(d) << "\"/>\n";
    out << "<text class=\"label\" x=\"" << (x_of(h) + x_of(d)) / 2 << "\" y=\""
        << (y_of(h) + y_of(d)) / 2 - 4 << "\">" << Escape(e.at("label").get<std::string>())
        << "</text>\n";
  }
  for (const auto &[i, n] : nodes) {
    const std::string cls =
        ModuleClass(ModuleFromName(n.at("module").get<std::string>()));
    out << "<g><circle class=\"" << cls << "\" cx=\"" << x_of(i) << "\" cy=\"" << y_of(i)
        << "\" r=\"22\"/><text class=\"word\" x=\"" << x_of(i) << "\" y=\"" << y_of(i) + 4
        << "\">" << Escape(n.at("word").get<std::string>()) << "</text></g>\n";
  }
  out << "</svg>\n";

  const double scale = 4.0;
  const double size = doc.at("scene").at("image_size").get<double>() * scale;
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << Num(size) << "\" height=\""
      << Num(size) << "\">\n<rect x=\"0\" y=\"0\" width=\"" << Num(size) << "\" height=\""
      << Num(size) << "\" fill=\"#fafafa\" stroke=\"#ddd\"/>\n";
  auto rect = [&](const char *cls, const Box &b) {
    out << "<rect class=\"" << cls << "\" x=\"" << Num(b.x1 * scale) << "\" y=\""
        << Num(b.y1 * scale) << "\" width=\"" << Num((b.x2 - b.x1) * scale) << "\" height=\""
        << Num((b.y2 - b.y1) * scale) << "\"/>\n";
  };
  for (const auto &r : doc.at("scene").at("regions")) {
    const Box b = BoxFrom(r.at("box"));
    rect("region", b);
    out << "<text class=\"label\" x=\"" << Num((b.x1 + b.x2) / 2 * scale) << "\" y=\""
        << Num((b.y1 + b.y2) / 2 * scale) << "\">" << Escape(r.at("label").get<std::string>())
        << "</text>\n";
  }
  rect("gold", BoxFrom(doc.at("gold").at("box")));
  rect("pred", BoxFrom(doc.at("prediction").at("box")));
  out << "</svg>\n";

  out << "<table>\n<tr><th>#</th><th>word</th><th>module</th><th>probe box</th>"
         "<th>IoU</th></tr>\n";
  for (const auto &[i, n] : nodes) {
    const Box b = BoxFrom(n.at("probe_box"));
    const std::string module = n.at("module").get<std::string>();
    out << "<tr><td>" << i << "</td><td>" << Escape(n.at("word").get<std::string>())
        << "</td><td><span class=\"swatch\" style=\"background:"
        << ModuleColor(ModuleFromName(module)) << "\"></span>" << Escape(module)
        << "</td><td>" << Num(b.x1) << ", " << Num(b.y1) << ", " << Num(b.x2) << ", "
        << Num(b.y2) << "</td><td>" << Num(n.at("iou").get<double>()) << "</td></tr>\n";
  }
  out << "</table>\n<p>prediction IoU " << Num(doc.at("prediction").at("iou").get<double>())
      << "</p>\n</body>\n</html>\n";
  return out.str();
}

void ExportTrace(const GroundingExample &example, const ExampleTrace &trace,
                 const std::string &dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create " + dir + ": " + ec.message());
  const nlohmann::json doc = TraceToJson(example, trace);
  std::ofstream json(std::filesystem::path(dir) / "trace.json");
  std::ofstream html(std::filesystem::path(dir) / "trace.html");
  if (!json || !html) throw IoFailure("cannot write trace files in " + dir);
  json << doc.dump(2) << "\n";
  html << RenderTraceHtml(doc);
  if (!json || !html) throw IoFailure("write failed in " + dir);
}

}  // namespace treeprompt
