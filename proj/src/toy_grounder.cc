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

#include "treeprompt/toy_grounder.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "treeprompt/adamw.h"
#include "treeprompt/ops.h"
#include "treeprompt/random.h"

namespace treeprompt {

nlohmann::json BackboneConfig::ToJson() const {
  return {{"layers", layers},
          {"model_dim", model_dim},
          {"heads", heads},
          {"ffn_dim", ffn_dim},
          {"max_text", max_text}};
}

BackboneConfig BackboneConfig::FromJson(const nlohmann::json &j) {
  BackboneConfig c;
  c.layers = j.value("layers", c.layers);
  c.model_dim = j.value("model_dim", c.model_dim);
  c.heads = j.value("heads", c.heads);
  c.ffn_dim = j.value("ffn_dim", c.ffn_dim);
  c.max_text = j.value("max_text", c.max_text);
  return c;
}

EncodedExample Encode(const GroundingExample &example, const Vocab &vocab) {
  EncodedExample e;
  for (const auto &w : example.query) e.text.push_back(vocab.words.Id(w));
  e.regions = static_cast<int>(example.scene.objects.size());
  for (const auto &o : example.scene.objects) {
    const auto f = ObjectFeatures(example.scene, o);
    e.features.insert(e.features.end(), f.begin(), f.end());
  }
  e.gold = example.gold_region;
  return e;
}

std::vector<EncodedExample> EncodeAll(const std::vector<GroundingExample> &examples,
                                      const Vocab &vocab) {
  std::vector<EncodedExample> out;
  out.reserve(examples.size());
  for (const auto &ex : examples) out.push_back(Encode(ex, vocab));
  return out;
}

template <typename T>
ToyBackbone<T>::ToyBackbone(const BackboneConfig &config, int vocab_size,
                            uint64_t seed)
    : config_(config) {
  const int64_t d = config.model_dim;
  if (d % config.heads != 0) {
    throw std::invalid_argument("model_dim must be divisible by heads");
  }
  auto rng_for = [seed](const std::string &name) {
    return Rng(StreamSeed(seed, HashString(name)));
  };
  auto normal = [&](const std::string &name, Shape shape, double std) {
    Rng rng = rng_for(name);
    return &params_.Add(name, RandomNormal<T>(std::move(shape), std, rng));
  };
  auto linear = [&](const std::string &name, int64_t out, int64_t in) {
    Rng rng = rng_for(name);
    return &params_.Add(name, RandomUniform<T>({out, in}, 1.0 / std::sqrt(double(in)), rng));
  };
  auto fill = [&](const std::string &name, int64_t n, T v) {
    return &params_.Add(name, Tensor<T>({1, n}, v));
  };
  word_emb_ = normal("backbone.word_emb", {vocab_size, d}, 0.02);
  text_pos_ = normal("backbone.text_pos", {config.max_text, d}, 0.02);
  text_type_ = normal("backbone.text_type", {1, d}, 0.02);
  region_type_ = normal("backbone.region_type", {1, d}, 0.02);
  obj_w_ = linear("backbone.region.w", d, kObjectFeatureDim);
  obj_b_ = fill("backbone.region.b", d, T(0));
  for (int l = 0; l < config.layers; ++l) {
    const std::string p = "backbone.layer" + std::to_string(l) + ".";
    Layer layer;
    layer.ln1_g = fill(p + "ln1.g", d, T(1));
    layer.ln1_b = fill(p + "ln1.b", d, T(0));
    layer.wq = linear(p + "attn.wq", d, d);
    layer.bq = fill(p + "attn.bq", d, T(0));
    layer.wk = linear(p + "attn.wk", d, d);
    layer.bk = fill(p + "attn.bk", d, T(0));
    layer.wv = linear(p + "attn.wv", d, d);
    layer.bv = fill(p + "attn.bv", d, T(0));
    layer.wo = linear(p + "attn.wo", d, d);
    layer.bo = fill(p + "attn.bo", d, T(0));
    layer.ln2_g = fill(p + "ln2.g", d, T(1));
    layer.ln2_b = fill(p + "ln2.b", d, T(0));
    layer.w1 = linear(p + "ffn.w1", config.ffn_dim, d);
    layer.b1 = fill(p + "ffn.b1", config.ffn_dim, T(0));
    layer.w2 = linear(p + "ffn.w2", d, config.ffn_dim);
    layer.b2 = fill(p + "ffn.b2", d, T(0));
    layers_.push_back(layer);
  }
  final_g_ = fill("backbone.final_ln.g", d, T(1));
  final_b_ = fill("backbone.final_ln.b", d, T(0));
  query_w_ = linear("backbone.head.query", d, d);
  region_w_ = linear("backbone.head.region", d, d);
}

template <typename T>
bool ToyBackbone<T>::frozen() const {
  bool any = false;
  params_.ForEach([&](const Parameter<T> &p) { any = any || p.trainable; });
  return !any;
}

template <typename T>
Var<T> ToyBackbone<T>::EmbedText(Tape<T> &tape, const std::vector<int> &ids) const {
  const int m = static_cast<int>(ids.size());
  if (m == 0) throw std::invalid_argument("empty query");
  if (m > config_.max_text) {
    throw std::length_error("query has " + std::to_string(m) + " tokens, limit is " +
                            std::to_string(config_.max_text));
  }
  Var<T> words = GatherRows(tape.Param(*word_emb_), std::span<const int>(ids));
  Var<T> pos = SliceRows(tape.Param(*text_pos_), 0, m);
  return AddRowBroadcast(Add(words, pos), tape.Param(*text_type_));
}

template <typename T>
Var<T> ToyBackbone<T>::EmbedRegions(Tape<T> &tape, const EncodedExample &example) const {
  Tensor<T> f({example.regions, kObjectFeatureDim},
              std::vector<T>(example.features.begin(), example.features.end()));
  Var<T> x = Linear(tape.Constant(std::move(f)), tape.Param(*obj_w_), tape.Param(*obj_b_));
  return AddRowBroadcast(x, tape.Param(*region_type_));
}

template <typename T>
Var<T> ToyBackbone<T>::Block(Tape<T> &tape, const Layer &L, Var<T> keys_in,
                             Var<T> x) const {
  const int64_t extra = keys_in.rows() - x.rows();
  Var<T> kn = LayerNormRows(keys_in, tape.Param(*L.ln1_g), tape.Param(*L.ln1_b));
  Var<T> qn = extra == 0 ? kn : SliceRows(kn, extra, keys_in.rows());
  Var<T> q = Linear(qn, tape.Param(*L.wq), tape.Param(*L.bq));
  Var<T> k = Linear(kn, tape.Param(*L.wk), tape.Param(*L.bk));
  Var<T> v = Linear(kn, tape.Param(*L.wv), tape.Param(*L.bv));
  Var<T> a = Linear(Attention(q, k, v, config_.heads), tape.Param(*L.wo), tape.Param(*L.bo));
  Var<T> h = Add(x, a);
  Var<T> hn = LayerNormRows(h, tape.Param(*L.ln2_g), tape.Param(*L.ln2_b));
  Var<T> f = Mlp2(hn, tape.Param(*L.w1), tape.Param(*L.b1), tape.Param(*L.w2),
                  tape.Param(*L.b2));
  return Add(h, f);
}

template <typename T>
Var<T> ToyBackbone<T>::LayerInject(Tape<T> &tape, int layer, const Var<T> *prompt,
                                   Var<T> state, BackboneStats *stats) const {
  if (layer < 0 || layer >= config_.layers) {
    throw LayerIndexOutOfRange(layer, config_.layers);
  }
  Var<T> keys = state;
  if (prompt != nullptr && prompt->rows() > 0) {
    if (prompt->cols() != state.cols()) {
      throw DimMismatch("prompt width " + std::to_string(prompt->cols()) +
                        " vs model width " + std::to_string(state.cols()));
    }
    keys = ConcatRows({*prompt, state});
  }
  Var<T> out = Block(tape, layers_[layer], keys, state);
  if (stats) {
    stats->sequence_length.push_back(static_cast<int>(keys.rows()));
    stats->carried_rows.push_back(static_cast<int>(out.rows()));
  }
  return out;
}

template <typename T>
Var<T> ToyBackbone<T>::Scores(Tape<T> &tape, const EncodedExample &example,
                              const PromptBundle<T> *prompt,
                              BackboneStats *stats) const {
  if (example.regions < 1) throw std::invalid_argument("scene has no regions");
  const int64_t m = static_cast<int64_t>(example.text.size());
  Var<T> text = EmbedText(tape, example.text);
  Var<T> state = ConcatRows({text, EmbedRegions(tape, example)});
  int64_t offset = 0;
  if (prompt != nullptr) prompt->Validate(config_.layers);
  if (prompt != nullptr && prompt->mode == PromptMode::kInputLayer) {
    state = InjectInputLayer(prompt->input, state);
    offset = prompt->input.rows();
  }
  for (int l = 0; l < config_.layers; ++l) {
    const bool multi = prompt != nullptr && prompt->mode == PromptMode::kMultiLayer;
    state = LayerInject(tape, l, multi ? &prompt->layers[l] : nullptr, state, stats);
  }
  Var<T> out = LayerNormRows(state, tape.Param(*final_g_), tape.Param(*final_b_));
  Var<T> pooled = MeanRows(SliceRows(out, offset, offset + m));
  Var<T> regions = SliceRows(out, offset + m, out.rows());
  Var<T> q = MatMulNT(pooled, tape.Param(*query_w_));
  Var<T> r = MatMulNT(regions, tape.Param(*region_w_));
  return Scale(MatMulNT(q, r), T(1) / std::sqrt(T(config_.model_dim)));
}

int ArgMax(std::span<const float> scores) {
  if (scores.empty()) throw std::invalid_argument("argmax of empty scores");
  int best = 0;
  for (size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = static_cast<int>(i);
  }
  return best;
}

template <typename T>
int ArgMax(const Tensor<T> &scores) {
  if (scores.size() == 0) throw std::invalid_argument("argmax of empty scores");
  int best = 0;
  for (int64_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[best]) best = static_cast<int>(i);
  }
  return best;
}

double EvaluateBackbone(const ToyBackbone<float> &backbone,
                        const std::vector<EncodedExample> &examples) {
  if (examples.empty()) return 0;
  int correct = 0;
  for (const auto &ex : examples) {
    Tape<float> tape;
    correct += ArgMax(backbone.Scores(tape, ex).value()) == ex.gold;
  }
  return static_cast<double>(correct) / examples.size();
}

PretrainReport PretrainBackbone(ToyBackbone<float> &backbone,
                                const std::vector<EncodedExample> &train,
                                const std::vector<EncodedExample> &held_out,
                                const PretrainOptions &options) {
  if (train.empty()) throw std::invalid_argument("empty pretraining split");
  backbone.params().SetTrainable(true);
  AdamW<float> opt({.lr = options.lr, .weight_decay = options.weight_decay});
  PretrainReport report;
  std::vector<int> order(train.size());
  std::iota(order.begin(), order.end(), 0);
  const int64_t steps_per_epoch = (train.size() + options.batch - 1) / options.batch;
  const int64_t total = steps_per_epoch * options.epochs;
  for (int epoch = 0; epoch < options.epochs; ++epoch) {
    Rng rng(StreamSeed(options.seed, 0x70726574ULL, epoch));
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0;
    for (size_t start = 0; start < order.size(); start += options.batch) {
      const size_t end = std::min(order.size(), start + options.batch);
      // Linear decay to zero over the whole budget.
      opt.set_lr(options.lr * (1.0 - static_cast<double>(opt.step()) / total));
      GradMap<float> grads;
      for (size_t i = start; i < end; ++i) {
        const auto &ex = train[order[i]];
        Tape<float> tape;
        const int gold[] = {ex.gold};
        Var<float> loss = SoftmaxCrossEntropy(backbone.Scores(tape, ex),
                                              std::span<const int>(gold));
        loss_sum += loss.value()[0];
        tape.Backward(loss);
        tape.CollectGrads(grads);
      }
      grads.Scale(1.0f / static_cast<float>(end - start));
      opt.Step(backbone.params(), grads);
    }
    report.epoch_loss.push_back(loss_sum / train.size());
    report.accuracy = EvaluateBackbone(backbone, held_out);
    report.epoch_accuracy.push_back(report.accuracy);
    report.epochs_run = epoch + 1;
    if (report.accuracy >= options.target_accuracy) break;
  }
  backbone.Freeze();
  if (report.accuracy < options.failure_accuracy) {
    throw ConvergenceFailure("held-out accuracy " + std::to_string(report.accuracy) +
                             " after " + std::to_string(report.epochs_run) + " epochs");
  }
  return report;
}

template class ToyBackbone<float>;
template class ToyBackbone<double>;
template int ArgMax(const Tensor<float> &);
template int ArgMax(const Tensor<double> &);

}  // namespace treeprompt
