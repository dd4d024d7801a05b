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


// treeprompt: command-line entry point.
//
// Exit codes: 0 success, 1 invalid input or configuration, 2 runtime failure.

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "treeprompt/checkpoint.h"
#include "treeprompt/dataset.h"
#include "treeprompt/self_check.h"
#include "treeprompt/toy_grounder.h"
#include "treeprompt/trace_inspect.h"
#include "treeprompt/train_eval.h"

namespace fs = std::filesystem;
using namespace treeprompt;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInvalid = 1;
constexpr int kExitRuntime = 2;

class ConfigError : public std::invalid_argument {
 public:
  ConfigError(const std::string &field, const std::string &what)
      : std::invalid_argument("config error at " + field + ": " + what) {}
};

struct Common {
  uint64_t seed = 0;
  std::string out;
  int threads = 1;
};

struct RunFlags {
  std::string mode = "input";
  std::string fusion = "self";
  bool no_tree = false;
  bool no_modules = false;
  RunConfig run;
};

struct DataFlags {
  std::string data;
  std::string backbone;
};

void Log(const std::string &line) { std::cerr << line << std::endl; }

void WriteText(const fs::path &path, const std::string &text) {
  std::ofstream out(path);
  if (!out) throw IoFailure("cannot write " + path.string());
  out << text;
  if (!out) throw IoFailure("write failed for " + path.string());
}

std::string ReadText(const fs::path &path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string Timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream s;
  s << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return s.str();
}

// --out wins; otherwise $TREEPROMPT_OUT or runs/, plus a timestamped folder.
fs::path OutputDir(const CLI::App &sub, const Common &common) {
  fs::path dir;
  if (!common.out.empty()) {
    dir = common.out;
  } else {
    const char *env = std::getenv("TREEPROMPT_OUT");
    dir = fs::path(env != nullptr && *env != '\0' ? env : "runs") /
          (Timestamp() + "-" + sub.get_name());
  }
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw IoFailure("cannot create " + dir.string() + ": " + ec.message());
  WriteText(dir / "config.toml", "[" + sub.get_name() + "]\n" + sub.config_to_str(true, false));
  return dir;
}

void AddCommon(CLI::App *sub, Common &common) {
  sub->add_option("--seed", common.seed, "Random seed")->required();
  sub->add_option("--out", common.out, "Output directory");
  sub->add_option("--threads", common.threads, "Worker threads")
      ->check(CLI::Range(1, 256))
      ->capture_default_str();
}

void AddRunFlags(CLI::App *sub, RunFlags &f) {
  RunConfig &r = f.run;
  sub->add_option("--prompt-mode", f.mode, "input or multi")
      ->check(CLI::IsMember({"input", "multi"}))
      ->capture_default_str();
  sub->add_option("--fusion", f.fusion, "self or cross")
      ->check(CLI::IsMember({"self", "cross"}))
      ->capture_default_str();
  sub->add_flag("--no-tree", f.no_tree, "Drop child aggregation");
  sub->add_flag("--no-modules", f.no_modules, "Share one module for all nodes");
  sub->add_option("--prompt-len", r.prompt_len, "Prompt length N")
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--word-dim", r.word_dim)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--label-dim", r.label_dim)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--lr-tree", r.lr_tree)->check(CLI::NonNegativeNumber)->capture_default_str();
  sub->add_option("--lr-global", r.lr_global)
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--batch-tree", r.batch_tree)->check(CLI::PositiveNumber)->capture_default_str();
  sub->add_option("--batch-global", r.batch_global)
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  sub->add_option("--epochs-tree", r.epochs_tree)
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--epochs-global", r.epochs_global)
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  sub->add_option("--weight-decay", r.weight_decay)
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
}

RunConfig Resolve(const RunFlags &f, const Common &common) {
  RunConfig r = f.run;
  r.mode = PromptModeFromName(f.mode);
  r.fusion = f.fusion == "cross" ? FusionMode::kCrossAttention : FusionMode::kSelfAttention;
  r.tree = !f.no_tree;
  r.modules = !f.no_modules;
  r.seed = common.seed;
  r.threads = common.threads;
  return r;
}

void AddDataFlags(CLI::App *sub, DataFlags &d, bool backbone) {
  sub->add_option("--data", d.data, "Dataset directory from gen-data")->required();
  if (backbone) {
    sub->add_option("--backbone", d.backbone, "Frozen backbone checkpoint")->required();
  }
}

struct World {
  Dataset data;
  Vocab vocab;
};

World LoadWorld(const std::string &dir) {
  World w;
  if (!fs::is_directory(dir)) throw ConfigError("data", dir + " is not a directory");
  w.data = LoadDataset(dir);
  w.vocab = Vocab::Load((fs::path(dir) / "vocab.json").string());
  return w;
}

std::unique_ptr<ToyBackbone<float>> LoadBackbone(const std::string &path, const Vocab &vocab) {
  const nlohmann::json manifest = ReadManifest(path);
  const BackboneConfig config = BackboneConfig::FromJson(manifest.at("metadata").at("backbone"));
  auto backbone = std::make_unique<ToyBackbone<float>>(config, vocab.words.size(), 0);
  ImportParameters(ReadCheckpoint(path), backbone->params());
  backbone->Freeze();
  return backbone;
}

// A tuned prompt checkpoint with its run configuration in the manifest.
struct LoadedPrompt {
  RunConfig config;
  std::unique_ptr<TreePromptModel<float>> model;
  Tensor<float> global_layers;
  bool has_global = false;
};

LoadedPrompt LoadPrompt(const std::string &path, const Vocab &vocab,
                        const ToyBackbone<float> &backbone) {
  LoadedPrompt p;
  const nlohmann::json manifest = ReadManifest(path);
  p.config = RunConfig::FromJson(manifest.at("metadata").at("run"));
  p.model = std::make_unique<TreePromptModel<float>>(p.config.PromptConfig(backbone.config()),
                                                     vocab, p.config.seed);
  std::vector<NamedTensor> tensors = ReadCheckpoint(path);
  for (auto it = tensors.begin(); it != tensors.end(); ++it) {
    if (it->name == "global_layers") {
      p.global_layers = std::move(it->value);
      p.has_global = true;
      tensors.erase(it);
      break;
    }
  }
  ImportParameters(tensors, p.model->params());
  if (p.config.mode == PromptMode::kMultiLayer && !p.has_global) {
    throw CheckpointError(path + " lacks the global multi-layer prompt");
  }
  return p;
}

std::string Percent(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(2) << 100 * v << "%";
  return s.str();
}

// ---------------------------------------------------------------- parse

struct ParseArgs {
  Common common;
  std::string input;
  bool keep_punct = false;
};

int RunParse(const CLI::App &sub, const ParseArgs &a) {
  ConlluOptions options;
  options.drop_punct = !a.keep_punct;
  const auto trees = ReadConlluFile(a.input, options);
  const fs::path dir = OutputDir(sub, a.common);
  int counts[kNumModuleKinds] = {};
  size_t nodes = 0;
  nlohmann::json summary = nlohmann::json::array();
  for (const auto &t : trees) {
    nodes += t.size();
    nlohmann::json modules = nlohmann::json::array();
    for (const auto &n : t.nodes) {
      const ModuleKind k = RouteModule(n);
      ++counts[static_cast<int>(k)];
      modules.push_back({{"index", n.index}, {"word", n.word}, {"module", ModuleName(k)}});
    }
    summary.push_back({{"sent_id", t.sentence_id}, {"root", t.root}, {"nodes", modules}});
  }
  WriteText(dir / "trees.json", summary.dump(2) + "\n");
  WriteText(dir / "trees.conllu", SerializeConllu(trees));
  Vocab::Build(trees, 1).Save((dir / "vocab.json").string());
  std::cout << trees.size() << " sentences, " << nodes << " nodes (Leaf "
            << counts[static_cast<int>(ModuleKind::kLeaf)] << ", Rel "
            << counts[static_cast<int>(ModuleKind::kRel)] << ", Enti "
            << counts[static_cast<int>(ModuleKind::kEnti)] << ")\n";
  return kExitOk;
}

// ---------------------------------------------------------------- gen-data

struct GenArgs {
  Common common;
  DatasetConfig config;
  int min_count = 1;
};

int RunGenData(const CLI::App &sub, GenArgs a) {
  a.config.seed = a.common.seed;
  const fs::path dir = OutputDir(sub, a.common);
  const Dataset ds = GenerateDataset(a.config, a.common.threads);
  SaveDataset(ds, dir.string());
  const Vocab vocab =
      Vocab::Build(ds.Trees({Split::kPretrain, Split::kTuneTrain}), a.min_count);
  vocab.Save((dir / "vocab.json").string());
  for (int s = 0; s < kNumSplits; ++s) {
    std::cout << SplitName(static_cast<Split>(s)) << ": " << ds.splits[s].size() << "\n";
  }
  std::cout << "vocab: " << vocab.words.size() << " words\n" << "wrote " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- pretrain-backbone

struct PretrainArgs {
  Common common;
  DataFlags data;
  BackboneConfig backbone;
  PretrainOptions options;
};

int RunPretrain(const CLI::App &sub, PretrainArgs a) {
  const World w = LoadWorld(a.data.data);
  const fs::path dir = OutputDir(sub, a.common);
  a.options.seed = a.common.seed;
  ToyBackbone<float> backbone(a.backbone, w.vocab.words.size(), a.common.seed);
  const auto train = EncodeAll(w.data.split(Split::kPretrain), w.vocab);
  const auto held = EncodeAll(w.data.split(Split::kTestSimple), w.vocab);
  const auto comp = EncodeAll(w.data.split(Split::kTestCompositional), w.vocab);
  if (train.empty() || held.empty()) throw EmptySplit("pretraining needs pretrain and test_simple");
  nlohmann::json report;
  try {
    const PretrainReport r = PretrainBackbone(backbone, train, held, a.options);
    report = {{"epoch_loss", r.epoch_loss}, {"epoch_accuracy", r.epoch_accuracy},
              {"accuracy", r.accuracy}, {"epochs_run", r.epochs_run}};
  } catch (const ConvergenceFailure &e) {
    Log(std::string("pretraining did not converge: ") + e.what());
    throw;
  }
  report["floor_simple"] = EvaluateBackbone(backbone, held);
  if (!comp.empty()) report["floor_compositional"] = EvaluateBackbone(backbone, comp);
  const std::string hash =
      WriteCheckpoint(dir / "backbone.tpck", ExportParameters(backbone.params()),
                      {{"backbone", a.backbone.ToJson()}, {"seed", a.common.seed}});
  report["sha256"] = hash;
  WriteText(dir / "pretrain_report.json", report.dump(2) + "\n");
  std::cout << "held-out accuracy " << Percent(report["accuracy"].get<double>())
            << ", no-prompt floor on compositional "
            << Percent(report.value("floor_compositional", 0.0)) << "\n"
            << "wrote " << (dir / "backbone.tpck").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- tune

struct TuneArgs {
  Common common;
  DataFlags data;
  RunFlags flags;
  std::string word_vectors;
};

struct Splits {
  std::vector<TuneSample> train, val, simple, compositional;

  TuneInputs Inputs(const ToyBackbone<float> *backbone) const {
    TuneInputs in{backbone, &train, &val, {}};
    if (!compositional.empty()) in.tests.emplace_back("compositional", &compositional);
    if (!simple.empty()) in.tests.emplace_back("simple", &simple);
    return in;
  }
};

Splits PrepareSplits(const World &w) {
  Splits s;
  s.train = PrepareSamples(w.data.split(Split::kTuneTrain), w.vocab);
  s.val = PrepareSamples(w.data.split(Split::kTuneVal), w.vocab);
  s.simple = PrepareSamples(w.data.split(Split::kTestSimple), w.vocab);
  s.compositional = PrepareSamples(w.data.split(Split::kTestCompositional), w.vocab);
  if (s.val.empty()) throw EmptySplit("tune_val is empty");
  return s;
}

std::string LossCsv(const std::vector<double> &loss) {
  std::ostringstream out;
  out << std::setprecision(9) << "step,loss\n";
  for (size_t i = 0; i < loss.size(); ++i) out << i + 1 << "," << loss[i] << "\n";
  return out.str();
}

int RunTune(const CLI::App &sub, const TuneArgs &a) {
  const RunConfig config = Resolve(a.flags, a.common);
  const World w = LoadWorld(a.data.data);
  const auto backbone = LoadBackbone(a.data.backbone, w.vocab);
  const Splits splits = PrepareSplits(w);
  const fs::path dir = OutputDir(sub, a.common);
  WriteText(dir / "run_config.json", config.ToJson().dump(2) + "\n");
  TuneInputs inputs = splits.Inputs(backbone.get());

  GlobalPretuneResult global;
  if (config.mode == PromptMode::kMultiLayer) {
    Log("pretuning the multi-layer global prompt");
    global = PretuneGlobal(config, inputs);
    inputs.global_layers = &global.layers;
    WriteText(dir / "global_report.json", global.report.ToJson().dump(2) + "\n");
  }
  TreePromptModel<float> model(config.PromptConfig(backbone->config()), w.vocab, config.seed);
  if (!a.word_vectors.empty()) model.LoadWordVectors(a.word_vectors);
  const RunReport report = Tune(config, model, inputs);

  std::vector<NamedTensor> tensors = ExportParameters(model.params());
  if (config.mode == PromptMode::kMultiLayer) tensors.push_back({"global_layers", global.layers});
  WriteCheckpoint(dir / "prompt.tpck", tensors,
                  {{"run", config.ToJson()}, {"backbone_sha256", report.backbone_hash}});
  WriteText(dir / "report.json", report.ToJson().dump(2) + "\n");
  WriteText(dir / "loss.csv", LossCsv(report.step_loss));
  std::cout << config.AblationName() << " (" << PromptModeName(config.mode)
            << ", N=" << config.prompt_len << ") best epoch " << report.best_epoch;
  for (const auto &[name, acc] : report.test_accuracy) std::cout << ", " << name << " " << Percent(acc);
  std::cout << "\nwrote " << dir.string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- eval

struct EvalArgs {
  Common common;
  DataFlags data;
  std::string prompt;
  std::string split = "tune_test_compositional";
};

int RunEval(const CLI::App &sub, const EvalArgs &a) {
  const World w = LoadWorld(a.data.data);
  const auto backbone = LoadBackbone(a.data.backbone, w.vocab);
  const Split split = SplitFromName(a.split);
  const auto samples = PrepareSamples(w.data.split(split), w.vocab);
  if (samples.empty()) throw EmptySplit(a.split + " is empty");
  double accuracy = 0;
  nlohmann::json result = {{"split", a.split}, {"examples", samples.size()}};
  if (a.prompt.empty()) {
    accuracy = EvaluateBackbone(*backbone, EncodeAll(w.data.split(split), w.vocab));
    result["prompt"] = nullptr;
  } else {
    const LoadedPrompt p = LoadPrompt(a.prompt, w.vocab, *backbone);
    const PromptedModel model{p.model.get(), backbone.get(), p.config.mode,
                              p.has_global ? &p.global_layers : nullptr};
    accuracy = EvaluateSamples(model, samples, a.common.threads);
    result["prompt"] = a.prompt;
    result["run"] = p.config.ToJson();
  }
  result["accuracy"] = accuracy;
  const fs::path dir = OutputDir(sub, a.common);
  WriteText(dir / "eval.json", result.dump(2) + "\n");
  std::cout << a.split << ": " << Percent(accuracy) << " top-1 (IoU > 0.5)\n";
  return kExitOk;
}

// ---------------------------------------------------------------- ablate

struct AblateArgs {
  Common common;
  DataFlags data;
  RunFlags flags;
  std::vector<uint64_t> seeds = {0, 1, 2};
  std::vector<int> lengths = {10, 32, 64, 100, 128};
  bool no_sweep = false;
};

int RunAblate(const CLI::App &sub, const AblateArgs &a) {
  const RunConfig config = Resolve(a.flags, a.common);
  if (config.mode == PromptMode::kMultiLayer) {
    throw ConfigError("prompt-mode", "ablate runs in input mode");
  }
  const World w = LoadWorld(a.data.data);
  const auto backbone = LoadBackbone(a.data.backbone, w.vocab);
  const Splits splits = PrepareSplits(w);
  if (splits.compositional.empty()) throw EmptySplit("tune_test_compositional is empty");
  const fs::path dir = OutputDir(sub, a.common);
  AblationOptions options;
  options.seeds = a.seeds;
  options.lengths = a.lengths;
  options.length_sweep = !a.no_sweep;
  const AblationResult result = Ablate(config, w.vocab, splits.Inputs(backbone.get()), options,
                                       "compositional", [](const std::string &s) { Log(s); });
  WriteText(dir / "ablation.md", result.ToMarkdown());
  WriteText(dir / "ablation.csv", result.ToCsv());
  WriteText(dir / "ablation.json", result.ToJson().dump(2) + "\n");
  std::cout << result.ToMarkdown();
  return kExitOk;
}

// ---------------------------------------------------------------- inspect

struct InspectArgs {
  Common common;
  DataFlags data;
  std::string prompt;
  std::string example;
};

int RunInspect(const CLI::App &sub, const InspectArgs &a) {
  const World w = LoadWorld(a.data.data);
  const auto backbone = LoadBackbone(a.data.backbone, w.vocab);
  const LoadedPrompt p = LoadPrompt(a.prompt, w.vocab, *backbone);
  const GroundingExample *found = nullptr;
  for (const auto &split : w.data.splits) {
    for (const auto &ex : split) {
      if (ex.id == a.example) found = &ex;
    }
  }
  if (found == nullptr) throw ConfigError("example", "no example with id " + a.example);
  TuneSample sample = PrepareSamples({*found}, w.vocab).front();
  sample.example = found;
  const PromptedModel model{p.model.get(), backbone.get(), p.config.mode,
                            p.has_global ? &p.global_layers : nullptr};
  const ExampleTrace trace = TraceExample(model, sample);
  const fs::path dir = OutputDir(sub, a.common);
  ExportTrace(*found, trace, dir.string());
  std::cout << found->id << ": prediction region " << trace.prediction << " (gold "
            << found->gold_region << ")\n";
  for (const auto &n : trace.nodes) {
    std::cout << "  " << std::setw(2) << n.index << " " << std::left << std::setw(10) << n.word
              << std::right << " " << std::setw(4) << ModuleName(n.kind) << " -> region "
              << n.probe_region << " iou " << std::fixed << std::setprecision(2) << n.probe_iou
              << "\n";
  }
  std::cout << "wrote " << (dir / "trace.html").string() << "\n";
  return kExitOk;
}

// ---------------------------------------------------------------- grad-check

struct GradArgs {
  Common common;
  int nodes = 5;
  int prompt_dim = 8;
  int prompt_len = 8;
  double tolerance = 1e-4;
};

int RunGradCheck(const CLI::App &sub, const GradArgs &a) {
  TreeGradCheckOptions options;
  options.nodes = a.nodes;
  options.prompt_dim = a.prompt_dim;
  options.prompt_len = a.prompt_len;
  const GradCheckResult r = TreePromptGradCheck(a.common.seed, options);
  const fs::path dir = OutputDir(sub, a.common);
  const nlohmann::json result = {{"max_rel_error", r.max_rel_error},
                                 {"checked", r.checked},
                                 {"worst_param", r.worst_param},
                                 {"worst_index", r.worst_index},
                                 {"autodiff", r.worst_autodiff},
                                 {"numeric", r.worst_numeric},
                                 {"tolerance", a.tolerance},
                                 {"pass", r.max_rel_error <= a.tolerance}};
  WriteText(dir / "grad_check.json", result.dump(2) + "\n");
  std::cout << "max relative error " << std::scientific << std::setprecision(3)
            << r.max_rel_error << " over " << r.checked << " entries (worst " << r.worst_param
            << "[" << r.worst_index << "])\n";
  return r.max_rel_error <= a.tolerance ? kExitOk : kExitRuntime;
}

// ---------------------------------------------------------------- plot

struct PlotArgs {
  Common common;
  std::string csv;
  std::string report_a;
  std::string report_b;
  int window = 20;
};

std::vector<double> LossFromReport(const std::string &path) {
  return nlohmann::json::parse(ReadText(path)).at("step_loss").get<std::vector<double>>();
}

std::string CurveSvg(const std::vector<double> &a, const std::vector<double> &b,
                     const ConvergenceStats &stats) {
  const double width = 640, height = 360, pad = 40;
  double lo = stats.baseline_final, hi = stats.baseline_final;
  for (double v : a) lo = std::min(lo, v), hi = std::max(hi, v);
  for (double v : b) lo = std::min(lo, v), hi = std::max(hi, v);
  if (hi <= lo) hi = lo + 1;
  const size_t n = std::max<size_t>(2, a.size());
  auto x = [&](size_t i) { return pad + (width - 2 * pad) * i / (n - 1); };
  auto y = [&](double v) { return height - pad - (height - 2 * pad) * (v - lo) / (hi - lo); };
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\""
      << height << "\">\n<rect width=\"100%\" height=\"100%\" fill=\"#fff\"/>\n";
  auto line = [&](const std::vector<double> &v, const char *colour) {
    out << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
    for (size_t i = 0; i < v.size(); ++i) out << x(i) << "," << y(v[i]) << " ";
    out << "\"/>\n";
  };
  line(b, "#1f77b4");
  line(a, "#d62728");
  out << "<line x1=\"" << pad << "\" x2=\"" << width - pad << "\" y1=\""
      << y(stats.baseline_final) << "\" y2=\"" << y(stats.baseline_final)
      << "\" stroke=\"#888\" stroke-dasharray=\"4 3\"/>\n";
  out << "<text x=\"" << pad << "\" y=\"20\" font-size=\"12\" font-family=\"sans-serif\">"
      << "A (red) vs B (blue), smoothed over " << stats.window << " steps; ratio "
      << stats.ratio << "</text>\n</svg>\n";
  return out.str();
}

int RunPlot(const CLI::App &sub, const PlotArgs &a) {
  std::vector<double> loss_a, loss_b;
  if (!a.csv.empty()) {
    ParseConvergenceCsv(ReadText(a.csv), &loss_a, &loss_b);
  } else if (!a.report_a.empty() && !a.report_b.empty()) {
    loss_a = LossFromReport(a.report_a);
    loss_b = LossFromReport(a.report_b);
  } else {
    throw ConfigError("csv", "give --csv or both --a and --b");
  }
  const ConvergenceStats stats = CompareConvergence(loss_a, loss_b, a.window);
  const fs::path dir = OutputDir(sub, a.common);
  const std::vector<double> sa = Smooth(std::vector<double>(loss_a.begin(), loss_a.begin() + stats.steps), stats.window);
  const std::vector<double> sb = Smooth(std::vector<double>(loss_b.begin(), loss_b.begin() + stats.steps), stats.window);
  WriteText(dir / "convergence.csv", ConvergenceCsv(loss_a, loss_b));
  WriteText(dir / "convergence.json", stats.ToJson().dump(2) + "\n");
  WriteText(dir / "convergence.svg", CurveSvg(sa, sb, stats));
  std::cout << "A reaches B's final loss " << stats.baseline_final << " at step " << stats.steps_a
            << ", B at step " << stats.steps_b << " (ratio " << stats.ratio << ")\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"TreePrompt: tree-structured prompts for a frozen grounding model"};
  app.require_subcommand(1);
  app.set_config("--config", "", "TOML configuration file");
  app.set_version_flag("--version", "treeprompt 0.1.0");

  ParseArgs parse;
  auto *parse_cmd = app.add_subcommand("parse", "Validate a CoNLL-U file and route its nodes");
  AddCommon(parse_cmd, parse.common);
  parse_cmd->add_option("input", parse.input, "CoNLL-U file")->required()->check(CLI::ExistingFile);
  parse_cmd->add_flag("--keep-punct", parse.keep_punct, "Keep punctuation tokens");

  GenArgs gen;
  auto *gen_cmd = app.add_subcommand("gen-data", "Generate the synthetic grounding dataset");
  AddCommon(gen_cmd, gen.common);
  DatasetSizes &sizes = gen.config.sizes;
  gen_cmd->add_option("--pretrain", sizes.pretrain)->check(CLI::NonNegativeNumber)->capture_default_str();
  gen_cmd->add_option("--train", sizes.tune_train)->check(CLI::NonNegativeNumber)->capture_default_str();
  gen_cmd->add_option("--val", sizes.tune_val)->check(CLI::NonNegativeNumber)->capture_default_str();
  gen_cmd->add_option("--test-simple", sizes.test_simple)->check(CLI::NonNegativeNumber)->capture_default_str();
  gen_cmd->add_option("--test-compositional", sizes.test_compositional)
      ->check(CLI::NonNegativeNumber)
      ->capture_default_str();
  gen_cmd->add_option("--min-objects", gen.config.min_objects)->capture_default_str();
  gen_cmd->add_option("--max-objects", gen.config.max_objects)->capture_default_str();
  gen_cmd->add_option("--hard-negative", gen.config.hard_negative)
      ->check(CLI::Range(0.0, 1.0))
      ->capture_default_str();
  gen_cmd->add_option("--simple-hops", gen.config.simple_hops)->check(CLI::Range(0, 4))->capture_default_str();
  gen_cmd->add_option("--compositional-hops", gen.config.compositional_hops)
      ->check(CLI::Range(0, 4))
      ->capture_default_str();
  gen_cmd->add_option("--min-count", gen.min_count, "Vocabulary count threshold")->capture_default_str();

  PretrainArgs pre;
  auto *pre_cmd = app.add_subcommand("pretrain-backbone", "Train and freeze the toy grounder");
  AddCommon(pre_cmd, pre.common);
  AddDataFlags(pre_cmd, pre.data, false);
  pre_cmd->add_option("--layers", pre.backbone.layers)->check(CLI::PositiveNumber)->capture_default_str();
  pre_cmd->add_option("--model-dim", pre.backbone.model_dim)->check(CLI::PositiveNumber)->capture_default_str();
  pre_cmd->add_option("--heads", pre.backbone.heads)->check(CLI::PositiveNumber)->capture_default_str();
  pre_cmd->add_option("--ffn-dim", pre.backbone.ffn_dim)->check(CLI::PositiveNumber)->capture_default_str();
  pre_cmd->add_option("--epochs", pre.options.epochs)->check(CLI::PositiveNumber)->capture_default_str();
  pre_cmd->add_option("--batch", pre.options.batch)->check(CLI::PositiveNumber)->capture_default_str();
  pre_cmd->add_option("--lr", pre.options.lr)->check(CLI::PositiveNumber)->capture_default_str();
  pre_cmd->add_option("--target", pre.options.target_accuracy)->capture_default_str();
  pre_cmd->add_option("--min-accuracy", pre.options.failure_accuracy)->capture_default_str();

  TuneArgs tune;
  auto *tune_cmd = app.add_subcommand("tune", "Tune a prompt against the frozen backbone");
  AddCommon(tune_cmd, tune.common);
  AddDataFlags(tune_cmd, tune.data, true);
  AddRunFlags(tune_cmd, tune.flags);
  tune_cmd->add_option("--word-vectors", tune.word_vectors, "TPCK file with word_vectors")
      ->check(CLI::ExistingFile);

  EvalArgs eval;
  auto *eval_cmd = app.add_subcommand("eval", "Top-1 accuracy of a prompt on one split");
  AddCommon(eval_cmd, eval.common);
  AddDataFlags(eval_cmd, eval.data, true);
  eval_cmd->add_option("--prompt", eval.prompt, "Prompt checkpoint; omit for the bare backbone")
      ->check(CLI::ExistingFile);
  eval_cmd->add_option("--split", eval.split)->capture_default_str();

  AblateArgs ablate;
  auto *ablate_cmd = app.add_subcommand("ablate", "Tree x module grid and prompt-length sweep");
  AddCommon(ablate_cmd, ablate.common);
  AddDataFlags(ablate_cmd, ablate.data, true);
  AddRunFlags(ablate_cmd, ablate.flags);
  ablate_cmd->add_option("--seeds", ablate.seeds)->delimiter(',')->capture_default_str();
  ablate_cmd->add_option("--lengths", ablate.lengths)
      ->delimiter(',')
      ->check(CLI::PositiveNumber)
      ->capture_default_str();
  ablate_cmd->add_flag("--no-length-sweep", ablate.no_sweep);

  InspectArgs inspect;
  auto *inspect_cmd = app.add_subcommand("inspect", "Export the per-node reasoning trace");
  AddCommon(inspect_cmd, inspect.common);
  AddDataFlags(inspect_cmd, inspect.data, true);
  inspect_cmd->add_option("--prompt", inspect.prompt)->required()->check(CLI::ExistingFile);
  inspect_cmd->add_option("--example", inspect.example, "Example id, e.g. tune_test_compositional-3")
      ->required();

  GradArgs grad;
  auto *grad_cmd = app.add_subcommand("grad-check", "Finite-difference check of TreePrompt");
  AddCommon(grad_cmd, grad.common);
  grad_cmd->add_option("--nodes", grad.nodes)->check(CLI::Range(1, 64))->capture_default_str();
  grad_cmd->add_option("--prompt-dim", grad.prompt_dim)->check(CLI::PositiveNumber)->capture_default_str();
  grad_cmd->add_option("--prompt-len", grad.prompt_len)->check(CLI::PositiveNumber)->capture_default_str();
  grad_cmd->add_option("--tolerance", grad.tolerance)->capture_default_str();

  PlotArgs plot;
  auto *plot_cmd = app.add_subcommand("plot", "Convergence curves of two runs");
  AddCommon(plot_cmd, plot.common);
  plot_cmd->add_option("--csv", plot.csv, "step,loss_A,loss_B file")->check(CLI::ExistingFile);
  plot_cmd->add_option("--a", plot.report_a, "report.json of run A")->check(CLI::ExistingFile);
  plot_cmd->add_option("--b", plot.report_b, "report.json of the baseline run")->check(CLI::ExistingFile);
  plot_cmd->add_option("--window", plot.window)->check(CLI::PositiveNumber)->capture_default_str();

  if (argc > 1 && argv[1][0] != '-') {
    bool known = false;
    for (const CLI::App *sub : app.get_subcommands({})) known = known || sub->check_name(argv[1]);
    if (!known) {
      std::cerr << "unknown subcommand '" << argv[1] << "'\n" << app.help();
      return kExitInvalid;
    }
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp &e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion &e) {
    return app.exit(e);
  } catch (const CLI::ParseError &e) {
    app.exit(e);
    return kExitInvalid;
  }

  try {
    if (*parse_cmd) return RunParse(*parse_cmd, parse);
    if (*gen_cmd) return RunGenData(*gen_cmd, gen);
    if (*pre_cmd) return RunPretrain(*pre_cmd, pre);
    if (*tune_cmd) return RunTune(*tune_cmd, tune);
    if (*eval_cmd) return RunEval(*eval_cmd, eval);
    if (*ablate_cmd) return RunAblate(*ablate_cmd, ablate);
    if (*inspect_cmd) return RunInspect(*inspect_cmd, inspect);
    if (*grad_cmd) return RunGradCheck(*grad_cmd, grad);
    if (*plot_cmd) return RunPlot(*plot_cmd, plot);
  } catch (const ParseError &e) {
    std::cerr << "error: " << ParseErrorKindName(e.kind()) << " in sentence '"
              << e.sentence_id() << "' at line " << e.line() << ": " << e.what() << "\n";
    return kExitInvalid;
  } catch (const CheckpointError &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::invalid_argument &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitInvalid;
  } catch (const std::exception &e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitInvalid;
}
