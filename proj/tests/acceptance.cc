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


// Acceptance run: one PASS/FAIL line per primary criterion. Tolerances and
// budgets are fixed below; the exit status is nonzero if any line fails.

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "property_oracles.h"
#include "test_util.h"
#include "treeprompt/checkpoint.h"
#include "treeprompt/ops.h"
#include "treeprompt/prompt_injection.h"
#include "treeprompt/self_check.h"
#include "treeprompt/train_eval.h"

namespace fs = std::filesystem;
using namespace treeprompt;

namespace {

// Tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr int kGradSeeds = 20;
constexpr double kGradBudgetSeconds = 60;
constexpr int kLocalityTrees = 200;
constexpr double kLocalityBudgetSeconds = 30;
constexpr int kFrozenEpochs = 20;
constexpr double kContinuousMargin = 0.02;
constexpr double kGridBudgetSeconds = 45 * 60;
constexpr double kConvergenceRatio = 0.8;
constexpr double kShapeTolerance = 1e-12;

struct Budget {
  int pretrain = 4000;
  int train = 3000;
  int val = 300;
  int test_simple = 300;
  int test_compositional = 600;
  int epochs = 6;
  int frozen_train = 200;
  double lr = 1e-3;
  int window = 50;
};

class Report {
 public:
  void Line(const std::string &name, bool pass, const std::string &detail) {
    std::cout << (pass ? "PASS" : "FAIL") << "  " << name << "  " << detail << std::endl;
    failures_ += !pass;
    json_.push_back({{"criterion", name}, {"pass", pass}, {"detail", detail}});
  }
  int failures() const { return failures_; }
  const nlohmann::json &json() const { return json_; }

 private:
  int failures_ = 0;
  nlohmann::json json_ = nlohmann::json::array();
};

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

std::string Fmt(double v, int precision = 3) {
  std::ostringstream s;
  s << std::setprecision(precision) << v;
  return s.str();
}

std::vector<fs::path> Fixtures() {
  std::vector<fs::path> out;
  for (const auto &e : fs::directory_iterator(testing::SourcePath("fixtures"))) {
    if (e.path().extension() == ".conllu") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

void GradientFidelity(Report &report) {
  const auto start = std::chrono::steady_clock::now();
  double worst = 0;
  std::string where;
  int64_t checked = 0;
  for (int seed = 0; seed < kGradSeeds; ++seed) {
    const GradCheckResult r = TreePromptGradCheck(seed);
    checked += r.checked;
    if (r.max_rel_error >= worst) {
      worst = r.max_rel_error;
      where = r.worst_param + " (seed " + std::to_string(seed) + ")";
    }
  }
  const double t = Seconds(start);
  report.Line("gradient-fidelity", worst <= kGradTolerance && t < kGradBudgetSeconds,
              "max rel err " + Fmt(worst) + " at " + where + " over " + std::to_string(checked) +
                  " entries, " + Fmt(t) + " s");
}

void SubtreeLocality(Report &report) {
  const auto start = std::chrono::steady_clock::now();
  const auto stats = testing::SubtreeLocality(2026, kLocalityTrees);
  const double t = Seconds(start);
  report.Line("subtree-locality", stats.violations == 0 && t < kLocalityBudgetSeconds,
              std::to_string(stats.violations) + " changed of " + std::to_string(stats.pairs) +
                  " out-of-subtree pairs, " + Fmt(t) + " s");
}

void ShapeChain(Report &report) {
  int violations = 0, trees_seen = 0;
  auto expect = [&](bool ok) { violations += !ok; };
  for (const auto &path : Fixtures()) {
    const auto trees = ReadConlluFile(path.string());
    const Vocab vocab = Vocab::Build(trees, 1);
    TreePromptConfig c;
    c.word_dim = 12;
    c.label_dim = 5;
    c.prompt_dim = 16;
    c.prompt_len = 6;
    c.expand_layers = 3;
    c.max_nodes = 64;
    TreePromptModel<double> model(c, vocab, 1);
    for (const auto &tree : trees) {
      ++trees_seen;
      const auto ids = LookupIds(tree, vocab);
      Tape<double> tape;
      expect(model.EmbedNode(tape, ids[0]).cols() == c.word_dim + 2 * c.label_dim);
      const auto out = model.Forward(tape, tree, ids);
      expect(out.H.rows() == static_cast<int64_t>(tree.size()));
      expect(out.H.cols() == c.prompt_dim);
      expect(out.order.front() == tree.root);
      const auto &root_h = out.nodes[tree.root - 1].h.value();
      const auto &pos = model.params().Get("tree.position").value;
      for (int j = 0; j < c.prompt_dim; ++j) {
        expect(std::abs(out.H.value().at(0, j) - (root_h[j] + pos.at(0, j))) <= kShapeTolerance);
      }
      expect(out.P.rows() == c.prompt_len);
      expect(out.P.cols() == c.prompt_dim);
      const auto layers = model.ExpandMultiLayer(tape, out.P);
      expect(StackLayers<double>(layers).shape() ==
             Shape{c.expand_layers, c.prompt_len, c.prompt_dim});
    }
  }
  report.Line("shape-chain", violations == 0 && trees_seen > 0,
              std::to_string(violations) + " violations over " + std::to_string(trees_seen) +
                  " fixture trees");
}

void Routing(Report &report) {
  const auto trees = ReadConlluFile(testing::SourcePath("fixtures/woman_remote.conllu"));
  std::map<std::string, std::string> got;
  for (const auto &n : trees.at(0).nodes) {
    if (n.word == "remote" || n.word == "holding" || n.word == "woman") {
      got[n.word] = std::string(ModuleName(RouteModule(n)));
    }
  }
  const bool pass = got["remote"] == "Leaf" && got["holding"] == "Rel" && got["woman"] == "Enti";
  report.Line("routing-woman-remote", pass,
              "remote->" + got["remote"] + " holding->" + got["holding"] + " woman->" +
                  got["woman"]);
}

void RoundTrip(Report &report) {
  int files = 0, same = 0;
  for (const auto &path : Fixtures()) {
    ++files;
    const std::string text = testing::ReadFile(path);
    const auto trees = ParseConllu(text);
    same += SerializeConllu(trees) == text && ParseConllu(SerializeConllu(trees)) == trees;
  }
  report.Line("conllu-round-trip", files > 0 && same == files,
              std::to_string(same) + "/" + std::to_string(files) + " fixtures identical");
}

void IouCases(Report &report) {
  const double identical = Iou({0, 0, 2, 2}, {0, 0, 2, 2});
  const double disjoint = Iou({0, 0, 1, 1}, {2, 2, 3, 3});
  const double overlap = Iou({0, 0, 2, 2}, {1, 1, 3, 3});
  report.Line("iou-cases", identical == 1.0 && disjoint == 0.0 && overlap == 1.0 / 7.0,
              "identical " + Fmt(identical) + ", disjoint " + Fmt(disjoint) + ", overlap " +
                  Fmt(overlap, 17));
}

struct Experiment {
  Dataset data;
  Vocab vocab;
  std::unique_ptr<ToyBackbone<float>> backbone;
  std::vector<TuneSample> train, val, simple, compositional;
  double floor = 0;

  TuneInputs Inputs() const {
    return {backbone.get(), &train, &val, {{"compositional", &compositional}, {"simple", &simple}}};
  }
};

std::unique_ptr<Experiment> Prepare(const Budget &s) {
  auto e = std::make_unique<Experiment>();
  DatasetConfig c;
  c.seed = 1;
  c.sizes = {s.pretrain, s.train, s.val, s.test_simple, s.test_compositional};
  e->data = GenerateDataset(c);
  e->vocab = Vocab::Build(e->data.Trees({Split::kPretrain, Split::kTuneTrain}), 1);
  e->backbone = std::make_unique<ToyBackbone<float>>(BackboneConfig{}, e->vocab.words.size(), 7);
  PretrainOptions options;
  options.epochs = 4;
  const auto start = std::chrono::steady_clock::now();
  const auto r = PretrainBackbone(*e->backbone, EncodeAll(e->data.split(Split::kPretrain), e->vocab),
                                  EncodeAll(e->data.split(Split::kTestSimple), e->vocab), options);
  e->floor = EvaluateBackbone(*e->backbone,
                              EncodeAll(e->data.split(Split::kTestCompositional), e->vocab));
  std::cout << "# backbone: simple " << Fmt(r.accuracy) << ", compositional floor "
            << Fmt(e->floor) << ", " << Fmt(Seconds(start)) << " s" << std::endl;
  e->train = PrepareSamples(e->data.split(Split::kTuneTrain), e->vocab);
  e->val = PrepareSamples(e->data.split(Split::kTuneVal), e->vocab);
  e->simple = PrepareSamples(e->data.split(Split::kTestSimple), e->vocab);
  e->compositional = PrepareSamples(e->data.split(Split::kTestCompositional), e->vocab);
  return e;
}

void FrozenBackbone(Report &report, const Experiment &e, const Budget &s) {
  RunConfig r;
  r.epochs_tree = kFrozenEpochs;
  r.lr_tree = s.lr;
  const std::vector<TuneSample> train(e.train.begin(),
                                      e.train.begin() + std::min<size_t>(s.frozen_train, e.train.size()));
  TuneInputs in = e.Inputs();
  in.train = &train;
  in.tests.clear();
  const std::string before = ParameterHash(e.backbone->params());
  TreePromptModel<float> model(r.PromptConfig(e.backbone->config()), e.vocab, r.seed);
  const RunReport run = Tune(r, model, in);
  const std::string after = ParameterHash(e.backbone->params());
  const int epochs = static_cast<int>(run.val_accuracy.size()) - 1;
  report.Line("frozen-backbone", before == after && epochs == kFrozenEpochs,
              "sha256 " + before.substr(0, 16) + (before == after ? " == " : " != ") +
                  after.substr(0, 16) + " after " + std::to_string(epochs) + " epochs");
}

void Experiments(Report &report, const Experiment &e, const Budget &s, const fs::path &out) {
  RunConfig base;
  base.lr_tree = s.lr;
  base.epochs_tree = s.epochs;
  AblationOptions options;
  options.seeds = {0, 1, 2};
  options.length_sweep = true;
  const auto start = std::chrono::steady_clock::now();
  double grid_seconds = 0;
  const AblationResult result =
      Ablate(base, e.vocab, e.Inputs(), options, "compositional", [&](const std::string &line) {
        std::cout << "# " << line << " (" << Fmt(Seconds(start), 4) << " s)" << std::endl;
      });
  for (size_t i = 0; i < 12 && i < result.runs.size(); ++i) grid_seconds += result.runs[i].wall_seconds;

  std::ofstream(out / "ablation.md") << result.ToMarkdown();
  std::ofstream(out / "ablation.json") << result.ToJson().dump(2) << "\n";

  const double full = result.row("full").mean, no_tree = result.row("no_tree").mean,
               no_module = result.row("no_module").mean,
               continuous = result.row("continuous").mean;
  std::ostringstream detail;
  detail << "full " << Fmt(full) << ", no_tree " << Fmt(no_tree) << ", no_module "
         << Fmt(no_module) << ", continuous " << Fmt(continuous) << " (floor " << Fmt(e.floor)
         << "), grid " << Fmt(grid_seconds / 60) << " min";
  report.Line("ablation-full>=no_tree", full >= no_tree, detail.str());
  report.Line("ablation-full>=no_module", full >= no_module, detail.str());
  report.Line("ablation-full>=continuous+2pp", full >= continuous + kContinuousMargin,
              detail.str());
  report.Line("ablation-runtime", grid_seconds < kGridBudgetSeconds,
              Fmt(grid_seconds / 60) + " min for 12 runs");

  // Seed 0 of the full and continuous cells share seed, lr and N.
  const RunReport &tree_run = result.runs[0];
  const RunReport &cont_run = result.runs[9];
  const ConvergenceStats stats =
      CompareConvergence(tree_run.step_loss, cont_run.step_loss, s.window, true);
  std::ofstream(out / "convergence.csv") << ConvergenceCsv(tree_run.step_loss, cont_run.step_loss);
  std::ofstream(out / "convergence.json") << stats.ToJson().dump(2) << "\n";
  report.Line("convergence-ratio", stats.ratio <= kConvergenceRatio,
              "TreePrompt reaches " + Fmt(stats.baseline_final) + " at step " +
                  std::to_string(stats.steps_a) + ", continuous at " +
                  std::to_string(stats.steps_b) + " (ratio " + Fmt(stats.ratio) + ")");

  std::string lengths;
  for (const auto &[n, acc] : result.lengths) lengths += std::to_string(n) + ":" + Fmt(acc) + " ";
  const bool all_five = result.lengths.size() == 5 && result.lengths[0].first == 10 &&
                        result.lengths[4].first == 128;
  report.Line("length-sweep", all_five, lengths + "(" + std::to_string(result.lengths.size()) +
                                            " rows)");
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"TreePrompt acceptance run"};
  Budget scale;
  bool skip_experiments = false;
  std::string out = "acceptance";
  app.add_option("--out", out, "Directory for tables and curves")->capture_default_str();
  app.add_flag("--skip-experiments", skip_experiments, "Only the fast criteria");
  app.add_option("--train", scale.train)->capture_default_str();
  app.add_option("--epochs", scale.epochs)->capture_default_str();
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(out);

  Report report;
  GradientFidelity(report);
  SubtreeLocality(report);
  ShapeChain(report);
  Routing(report);
  RoundTrip(report);
  IouCases(report);
  if (!skip_experiments) {
    const auto experiment = Prepare(scale);
    FrozenBackbone(report, *experiment, scale);
    Experiments(report, *experiment, scale, out);
  }
  std::ofstream(fs::path(out) / "acceptance.json") << report.json().dump(2) << "\n";
  std::cout << (report.failures() == 0 ? "ALL PASS" : std::to_string(report.failures()) + " FAILED")
            << std::endl;
  return report.failures() == 0 ? 0 : 1;
}
