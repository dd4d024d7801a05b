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
// Small transformer encoder that ranks scene regions against a query.
//
// The encoder input is [prompt rows; text rows; region rows]. Text rows are
// word plus position embeddings, region rows are projected symbolic object
// features. Each region is scored by the dot product of its output with the
// pooled text output, and the prediction is the best-scoring region.

#ifndef TREEPROMPT_TOY_GROUNDER_H_
#define TREEPROMPT_TOY_GROUNDER_H_

#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treeprompt/autodiff.h"
#include "treeprompt/dataset.h"
#include "treeprompt/prompt_injection.h"
#include "treeprompt/vocab.h"

namespace treeprompt {

struct BackboneConfig {
  int layers = 4;
  int model_dim = 64;
  int heads = 4;
  int ffn_dim = 256;
  int max_text = 32;

  nlohmann::json ToJson() const;
  static BackboneConfig FromJson(const nlohmann::json &j);
};

class ConvergenceFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class LayerIndexOutOfRange : public std::out_of_range {
 public:
  LayerIndexOutOfRange(int layer, int count)
      : std::out_of_range("layer " + std::to_string(layer) + " outside [0, " +
                          std::to_string(count) + ")") {}
};

// Backbone-ready form of one example.
struct EncodedExample {
  std::vector<int> text;        // word ids
  std::vector<float> features;  // regions x kObjectFeatureDim, row-major
  int regions = 0;
  int gold = 0;
};

EncodedExample Encode(const GroundingExample &example, const Vocab &vocab);
std::vector<EncodedExample> EncodeAll(const std::vector<GroundingExample> &examples,
                                      const Vocab &vocab);

// Filled during a forward pass.
struct BackboneStats {
  std::vector<int> sequence_length;  // rows entering each layer
  std::vector<int> carried_rows;     // rows each layer hands to the next
};

template <typename T>
class ToyBackbone {
 public:
  ToyBackbone(const BackboneConfig &config, int vocab_size, uint64_t seed);

  const BackboneConfig &config() const { return config_; }
  ParameterSet<T> &params() { return params_; }
  const ParameterSet<T> &params() const { return params_; }
  bool frozen() const;
  void Freeze() { params_.SetTrainable(false); }

  // Word plus position embeddings of the query, M x d.
  Var<T> EmbedText(Tape<T> &tape, const std::vector<int> &ids) const;
  // Projected object features, K x d.
  Var<T> EmbedRegions(Tape<T> &tape, const EncodedExample &example) const;

  // One pre-LN encoder layer over [P_i; state]. Only the rows of `state` are
  // updated and returned; prompt rows act as extra keys and values.
  Var<T> LayerInject(Tape<T> &tape, int layer, const Var<T> *prompt,
                     Var<T> state, BackboneStats *stats = nullptr) const;

  // Region scores as a 1 x K row. `prompt` may be null for the unprompted
  // backbone.
  Var<T> Scores(Tape<T> &tape, const EncodedExample &example,
                const PromptBundle<T> *prompt = nullptr,
                BackboneStats *stats = nullptr) const;

 private:
  struct Layer {
    Parameter<T> *ln1_g, *ln1_b, *wq, *bq, *wk, *bk, *wv, *bv, *wo, *bo;
    Parameter<T> *ln2_g, *ln2_b, *w1, *b1, *w2, *b2;
  };
  Var<T> Block(Tape<T> &tape, const Layer &layer, Var<T> keys_in, Var<T> x) const;

  BackboneConfig config_;
  ParameterSet<T> params_;
  Parameter<T> *word_emb_, *text_pos_, *text_type_, *region_type_;
  Parameter<T> *obj_w_, *obj_b_;
  std::vector<Layer> layers_;
  Parameter<T> *final_g_, *final_b_, *query_w_, *region_w_;
};

// Argmax of a score row; ties go to the lowest index.
int ArgMax(std::span<const float> scores);
template <typename T>
int ArgMax(const Tensor<T> &scores);

struct PretrainOptions {
  int epochs = 6;
  int batch = 32;
  double lr = 1e-3;
  double weight_decay = 0.01;
  double target_accuracy = 0.95;
  double failure_accuracy = 0.80;
  uint64_t seed = 0;
};

struct PretrainReport {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;  // on the held-out split
  double accuracy = 0;
  int epochs_run = 0;
};

// Trains every backbone parameter on unprompted queries, stops early once
// held-out accuracy reaches the target, then freezes the backbone. Throws
// ConvergenceFailure when accuracy stays below the failure floor.
PretrainReport PretrainBackbone(ToyBackbone<float> &backbone,
                                const std::vector<EncodedExample> &train,
                                const std::vector<EncodedExample> &held_out,
                                const PretrainOptions &options);

// Top-1 accuracy of the unprompted backbone.
double EvaluateBackbone(const ToyBackbone<float> &backbone,
                        const std::vector<EncodedExample> &examples);

extern template class ToyBackbone<float>;
extern template class ToyBackbone<double>;

}  // namespace treeprompt

#endif  // TREEPROMPT_TOY_GROUNDER_H_
