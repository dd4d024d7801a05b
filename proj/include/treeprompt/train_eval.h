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

// Prompt tuning against a frozen backbone, evaluation, the ablation grid and
// convergence comparison.

#ifndef TREEPROMPT_TRAIN_EVAL_H_
#define TREEPROMPT_TRAIN_EVAL_H_

#include <functional>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treeprompt/dataset.h"
#include "treeprompt/prompt_injection.h"
#include "treeprompt/toy_grounder.h"
#include "treeprompt/tree_prompt.h"
#include "treeprompt/vocab.h"

namespace treeprompt {

class FrozenViolation : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class EmptySplit : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class LengthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct RunConfig {
  PromptMode mode = PromptMode::kInputLayer;
  int prompt_len = 64;
  bool tree = true;
  bool modules = true;
  FusionMode fusion = FusionMode::kSelfAttention;
  int word_dim = 32;
  int label_dim = 8;
  double lr_tree = 5e-5;
  double lr_global = 0.03;
  int batch_tree = 8;
  int batch_global = 16;
  int epochs_global = 100;
  int epochs_tree = 20;
  double weight_decay = 0.01;
  uint64_t seed = 0;
  int threads = 1;

  // Prompt-side model configuration for a backbone of the given shape.
  TreePromptConfig PromptConfig(const BackboneConfig &backbone) const;
  // "full", "no_tree", "no_module" or "continuous".
  std::string AblationName() const;

  nlohmann::json ToJson() const;
  static RunConfig FromJson(const nlohmann::json &j);
};

// An example with everything the tuned path needs precomputed.
struct TuneSample {
  const GroundingExample *example = nullptr;
  EncodedExample encoded;
  std::vector<NodeIds> ids;
};

std::vector<TuneSample> PrepareSamples(const std::vector<GroundingExample> &examples,
                                       const Vocab &vocab);

// Builds the prompt for one example. `global_layers` is the frozen
// multi-layer global prompt (L x N x d_p) and is required in multi-layer mode.
template <typename T>
PromptBundle<T> BuildPrompt(Tape<T> &tape, const TreePromptModel<T> &model,
                            const TuneSample &sample, PromptMode mode,
                            const Tensor<T> *global_layers,
                            TreePromptOutput<T> *forward = nullptr);

// Delivers an already fused prompt P in the given mode.
template <typename T>
PromptBundle<T> BundleFromPrompt(Tape<T> &tape, const TreePromptModel<T> &model, Var<T> P,
                                 PromptMode mode, const Tensor<T> *global_layers);

// Region index chosen for one example.
using Predictor = std::function<int(const GroundingExample &)>;

// Fraction of examples whose predicted region box has IoU > 0.5 with the
// gold box.
double Evaluate(const Predictor &predict, const std::vector<GroundingExample> &examples);

struct PromptedModel {
  const TreePromptModel<float> *prompt = nullptr;
  const ToyBackbone<float> *backbone = nullptr;
  PromptMode mode = PromptMode::kInputLayer;
  const Tensor<float> *global_layers = nullptr;

  Tensor<float> Scores(const TuneSample &sample) const;
  int Predict(const TuneSample &sample) const;
};

double EvaluateSamples(const PromptedModel &model, const std::vector<TuneSample> &samples,
                       int threads = 1);

struct RunReport {
  nlohmann::json config;
  uint64_t seed = 0;
  std::vector<double> step_loss;
  std::vector<double> val_accuracy;  // index 0 is before any update
  int best_epoch = 0;
  std::map<std::string, double> test_accuracy;
  // Steps in which each prompt-side parameter received a nonzero gradient.
  std::map<std::string, int> grad_steps;
  std::string backbone_hash;
  double wall_seconds = 0;

  nlohmann::json ToJson() const;
};

struct TuneInputs {
  const ToyBackbone<float> *backbone = nullptr;
  const std::vector<TuneSample> *train = nullptr;
  const std::vector<TuneSample> *val = nullptr;
  std::vector<std::pair<std::string, const std::vector<TuneSample> *>> tests;
  // Frozen multi-layer global prompt; multi-layer mode only.
  const Tensor<float> *global_layers = nullptr;
};

// Trains the prompt-side parameters of `model` and restores the parameters
// of the epoch with the best validation accuracy. Throws FrozenViolation if
// any backbone parameter receives a gradient or changes.
RunReport Tune(const RunConfig &config, TreePromptModel<float> &model,
               const TuneInputs &inputs);

struct GlobalPretuneResult {
  Tensor<float> layers;  // L x N x d_p
  RunReport report;
};

// Learns the sentence-independent multi-layer prompt with the global
// learning rate, batch size and epoch count.
GlobalPretuneResult PretuneGlobal(const RunConfig &config, const TuneInputs &inputs);

struct AblationOptions {
  std::vector<uint64_t> seeds = {0, 1, 2};
  std::vector<int> lengths = {10, 32, 64, 100, 128};
  bool length_sweep = true;
};

struct AblationRow {
  std::string name;
  bool tree = false;
  bool modules = false;
  std::vector<double> accuracy;  // per seed
  double mean = 0;
};

struct AblationResult {
  std::vector<AblationRow> rows;
  std::vector<std::pair<int, double>> lengths;  // prompt length, accuracy
  std::vector<RunReport> runs;
  std::string metric_split;

  const AblationRow &row(const std::string &name) const;
  std::string ToMarkdown() const;
  std::string ToCsv() const;
  nlohmann::json ToJson() const;
};

// The four {tree x module} configurations over every seed, then the full
// configuration at each prompt length with the first seed. Accuracy is read
// from `metric_split`, one of the named tests in `inputs`.
AblationResult Ablate(const RunConfig &base, const Vocab &vocab, const TuneInputs &inputs,
                      const AblationOptions &options, const std::string &metric_split,
                      const std::function<void(const std::string &)> &progress = {});

struct ConvergenceStats {
  int steps = 0;           // aligned curve length
  bool truncated = false;  // the runs had different lengths
  int window = 1;
  double baseline_final = 0;  // smoothed final loss of run B
  int steps_a = -1;           // first step where A reaches it, -1 if never
  int steps_b = -1;           // first step where B reaches it
  double ratio = 0;           // steps_a / steps_b

  nlohmann::json ToJson() const;
};

// Moving average over the trailing `window` values.
std::vector<double> Smooth(const std::vector<double> &values, int window);

// Compares run A against baseline B. The baseline's final loss is the mean of
// its last `window` steps; crossings use the trailing moving average. When
// `strict` is set, curves of different length raise LengthMismatch instead of
// being truncated to the shorter one.
ConvergenceStats CompareConvergence(const std::vector<double> &loss_a,
                                    const std::vector<double> &loss_b, int window,
                                    bool strict = false);

// "step,loss_A,loss_B" rows over the aligned length.
std::string ConvergenceCsv(const std::vector<double> &loss_a,
                           const std::vector<double> &loss_b);
void ParseConvergenceCsv(const std::string &csv, std::vector<double> *loss_a,
                         std::vector<double> *loss_b);

}  // namespace treeprompt

#endif  // TREEPROMPT_TRAIN_EVAL_H_
