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

#include "treeprompt/train_eval.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <iomanip>
#include <limits>
#include <numeric>
#include <sstream>
#include <thread>

#include "treeprompt/adamw.h"
#include "treeprompt/checkpoint.h"
#include "treeprompt/ops.h"
#include "treeprompt/random.h"

namespace treeprompt {
namespace {

const char *FusionName(FusionMode f) {
  return f == FusionMode::kSelfAttention ? "self" : "cross";
}

// Runs `work(i)` for i in [0, n) on up to `threads` workers. Each worker owns a
// contiguous range, so per-range results can be combined in a fixed order.
void ParallelRanges(int n, int threads, const std::function<void(int, int, int)> &work) {
  threads = std::max(1, std::min(threads, n));
  if (threads == 1) {
    work(0, 0, n);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  const int chunk = (n + threads - 1) / threads;
  for (int t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      try {
        work(t, t * chunk, std::min(n, (t + 1) * chunk));
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

bool AllZero(const Tensor<float> &t) {
  return std::all_of(t.storage().begin(), t.storage().end(),
                     [](float v) { return v == 0.0f; });
}

void CheckFrozen(const ToyBackbone<float> &backbone, const GradMap<float> &grads) {
  backbone.params().ForEach([&](const Parameter<float> &p) {
    if (p.trainable) throw FrozenViolation(p.name + " is trainable during tuning");
    const Tensor<float> *g = grads.Find(p);
    if (g != nullptr && !AllZero(*g)) {
      throw FrozenViolation(p.name + " received a nonzero gradient");
    }
  });
}

struct Snapshot {
  std::vector<NamedTensor> tensors;
};

// One optimization pass over minibatches of `order`. `loss_fn` builds the
// scalar loss of one sample on a fresh tape.
template <typename LossFn>
void RunEpoch(const std::vector<int> &order, int batch, int threads, LossFn loss_fn,
              const std::function<void(GradMap<float> &, double)> &apply) {
  for (size_t start = 0; start < order.size(); start += batch) {
    const int n = static_cast<int>(std::min(order.size(), start + batch) - start);
    const int workers = std::max(1, std::min(threads, n));
    std::vector<GradMap<float>> partial(workers);
    std::vector<double> losses(workers, 0.0);
    ParallelRanges(n, workers, [&](int t, int begin, int end) {
      for (int i = begin; i < end; ++i) {
        Tape<float> tape;
        Var<float> loss = loss_fn(tape, order[start + i]);
        losses[t] += loss.value()[0];
        tape.Backward(loss);
        tape.CollectGrads(partial[t]);
      }
    });
    GradMap<float> grads;
    double total = 0;
    for (int t = 0; t < workers; ++t) {
      grads.Add(partial[t]);
      total += losses[t];
    }
    grads.Scale(1.0f / n);
    apply(grads, total / n);
  }
}

std::vector<int> ShuffledOrder(size_t n, uint64_t seed, uint64_t stream, int epoch) {
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  Rng rng(StreamSeed(seed, stream, static_cast<uint64_t>(epoch)));
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

}  // namespace

TreePromptConfig RunConfig::PromptConfig(const BackboneConfig &backbone) const {
  TreePromptConfig c;
  c.word_dim = word_dim;
  c.label_dim = label_dim;
  c.prompt_dim = backbone.model_dim;
  c.prompt_len = prompt_len;
  c.use_tree = tree;
  c.use_modules = modules;
  c.fusion = fusion;
  if (mode == PromptMode::kMultiLayer) {
    c.expand_layers = backbone.layers;
    c.global_trainable = false;
  }
  return c;
}

std::string RunConfig::AblationName() const {
  if (tree && modules) return "full";
  if (modules) return "no_tree";
  if (tree) return "no_module";
  return "continuous";
}

nlohmann::json RunConfig::ToJson() const {
  return {{"prompt_mode", PromptModeName(mode)},
          {"prompt_len", prompt_len},
          {"tree", tree},
          {"modules", modules},
          {"fusion", FusionName(fusion)},
          {"word_dim", word_dim},
          {"label_dim", label_dim},
          {"lr_tree", lr_tree},
          {"lr_global", lr_global},
          {"batch_tree", batch_tree},
          {"batch_global", batch_global},
          {"epochs_global", epochs_global},
          {"epochs_tree", epochs_tree},
          {"weight_decay", weight_decay},
          {"seed", seed},
          {"threads", threads}};
}

RunConfig RunConfig::FromJson(const nlohmann::json &j) {
  RunConfig c;
  if (j.contains("prompt_mode")) {
    c.mode = PromptModeFromName(j["prompt_mode"].get<std::string>());
  }
  c.prompt_len = j.value("prompt_len", c.prompt_len);
  c.tree = j.value("tree", c.tree);
  c.modules = j.value("modules", c.modules);
  if (j.contains("fusion")) {
    const auto f = j["fusion"].get<std::string>();
    if (f != "self" && f != "cross") throw std::invalid_argument("unknown fusion mode: " + f);
    c.fusion = f == "self" ? FusionMode::kSelfAttention : FusionMode::kCrossAttention;
  }
  c.word_dim = j.value("word_dim", c.word_dim);
  c.label_dim = j.value("label_dim", c.label_dim);
  c.lr_tree = j.value("lr_tree", c.lr_tree);
  c.lr_global = j.value("lr_global", c.lr_global);
  c.batch_tree = j.value("batch_tree", c.batch_tree);
  c.batch_global = j.value("batch_global", c.batch_global);
  c.epochs_global = j.value("epochs_global", c.epochs_global);
  c.epochs_tree = j.value("epochs_tree", c.epochs_tree);
  c.weight_decay = j.value("weight_decay", c.weight_decay);
  c.seed = j.value("seed", c.seed);
  c.threads = j.value("threads", c.threads);
  return c;
}

std::vector<TuneSample> PrepareSamples(const std::vector<GroundingExample> &examples,
                                       const Vocab &vocab) {
  std::vector<TuneSample> out;
  out.reserve(examples.size());
  for (const auto &ex : examples) {
    TuneSample s;
    s.example = &ex;
    s.encoded = Encode(ex, vocab);
    s.ids = LookupIds(ex.tree, vocab);
    out.push_back(std::move(s));
  }
  return out;
}

template <typename T>
PromptBundle<T> BundleFromPrompt(Tape<T> &tape, const TreePromptModel<T> &model, Var<T> P,
                                 PromptMode mode, const Tensor<T> *global_layers) {
  if (mode == PromptMode::kInputLayer) return PromptBundle<T>::InputLayer(P);
  if (global_layers == nullptr) {
    throw std::invalid_argument("multi-layer prompting needs the global prompt");
  }
  const int L = model.config().expand_layers;
  if (global_layers->rank() != 3 || global_layers->shape()[0] != L) {
    throw ShapeMismatch("global prompt " + ShapeString(global_layers->shape()) +
                        " for " + std::to_string(L) + " layers");
  }
  const int64_t n = global_layers->shape()[1], d = global_layers->shape()[2];
  std::vector<Var<T>> globals;
  for (int l = 0; l < L; ++l) {
    std::vector<T> slab(global_layers->data() + l * n * d,
                        global_layers->data() + (l + 1) * n * d);
    globals.push_back(tape.Constant(Tensor<T>({n, d}, std::move(slab))));
  }
  std::vector<Var<T>> tree_layers = model.ExpandMultiLayer(tape, P);
  return PromptBundle<T>::MultiLayer(AddToGlobal<T>(tree_layers, globals));
}

template <typename T>
PromptBundle<T> BuildPrompt(Tape<T> &tape, const TreePromptModel<T> &model,
                            const TuneSample &sample, PromptMode mode,
                            const Tensor<T> *global_layers,
                            TreePromptOutput<T> *forward) {
  TreePromptOutput<T> out = model.Forward(tape, sample.example->tree, sample.ids);
  if (forward) *forward = out;
  return BundleFromPrompt(tape, model, out.P, mode, global_layers);
}

double Evaluate(const Predictor &predict, const std::vector<GroundingExample> &examples) {
  if (examples.empty()) throw EmptySplit("cannot evaluate an empty split");
  int correct = 0;
  for (const auto &ex : examples) {
    const int region = predict(ex);
    const Box &box = ex.scene.object(region).box;
    correct += Iou(box, ex.gold_box) > 0.5;
  }
  return static_cast<double>(correct) / examples.size();
}

Tensor<float> PromptedModel::Scores(const TuneSample &sample) const {
  Tape<float> tape;
  PromptBundle<float> bundle = BuildPrompt(tape, *prompt, sample, mode, global_layers);
  return backbone->Scores(tape, sample.encoded, &bundle).value();
}

int PromptedModel::Predict(const TuneSample &sample) const {
  return ArgMax(Scores(sample));
}

double EvaluateSamples(const PromptedModel &model, const std::vector<TuneSample> &samples,
                       int threads) {
  if (samples.empty()) throw EmptySplit("cannot evaluate an empty split");
  std::vector<int> predictions(samples.size());
  ParallelRanges(static_cast<int>(samples.size()), threads, [&](int, int begin, int end) {
    for (int i = begin; i < end; ++i) predictions[i] = model.Predict(samples[i]);
  });
  int correct = 0;
  for (size_t i = 0; i < samples.size(); ++i) {
    const GroundingExample &ex = *samples[i].example;
    correct += Iou(ex.scene.object(predictions[i]).box, ex.gold_box) > 0.5;
  }
  return static_cast<double>(correct) / samples.size();
}

nlohmann::json RunReport::ToJson() const {
  return {{"config", config},
          {"seed", seed},
          {"step_loss", step_loss},
          {"val_accuracy", val_accuracy},
          {"best_epoch", best_epoch},
          {"test_accuracy", test_accuracy},
          {"grad_steps", grad_steps},
          {"backbone_hash", backbone_hash},
          {"wall_seconds", wall_seconds}};
}

RunReport Tune(const RunConfig &config, TreePromptModel<float> &model,
               const TuneInputs &inputs) {
  if (inputs.backbone == nullptr || inputs.train == nullptr || inputs.val == nullptr) {
    throw std::invalid_argument("tuning needs a backbone, a train split and a val split");
  }
  if (inputs.train->empty()) throw EmptySplit("empty training split");
  const ToyBackbone<float> &backbone = *inputs.backbone;
  if (!backbone.frozen()) throw FrozenViolation("backbone is not frozen");
  if (model.config().prompt_dim != backbone.config().model_dim) {
    throw DimMismatch("prompt width " + std::to_string(model.config().prompt_dim) +
                      " vs backbone width " + std::to_string(backbone.config().model_dim));
  }
  const auto start = std::chrono::steady_clock::now();
  RunReport report;
  report.config = config.ToJson();
  report.seed = config.seed;
  report.backbone_hash = ParameterHash(backbone.params());

  PromptedModel prompted{&model, &backbone, config.mode, inputs.global_layers};
  AdamW<float> opt({.lr = config.lr_tree, .weight_decay = config.weight_decay});
  model.params().ForEach([&](const Parameter<float> &p) {
    if (p.trainable) report.grad_steps[p.name] = 0;
  });

  double best = EvaluateSamples(prompted, *inputs.val, config.threads);
  report.val_accuracy.push_back(best);
  Snapshot best_params{ExportParameters(model.params())};

  const auto &train = *inputs.train;
  for (int epoch = 0; epoch < config.epochs_tree; ++epoch) {
    const auto order = ShuffledOrder(train.size(), config.seed, 0x74756e65ULL, epoch);
    RunEpoch(
        order, config.batch_tree, config.threads,
        [&](Tape<float> &tape, int i) {
          const TuneSample &s = train[i];
          PromptBundle<float> bundle =
              BuildPrompt(tape, model, s, config.mode, inputs.global_layers);
          const int gold[] = {s.encoded.gold};
          return SoftmaxCrossEntropy(backbone.Scores(tape, s.encoded, &bundle),
                                     std::span<const int>(gold));
        },
        [&](GradMap<float> &grads, double loss) {
          CheckFrozen(backbone, grads);
          model.params().ForEach([&](const Parameter<float> &p) {
            const Tensor<float> *g = grads.Find(p);
            if (p.trainable && g != nullptr && !AllZero(*g)) ++report.grad_steps[p.name];
          });
          opt.Step(model.params(), grads);
          report.step_loss.push_back(loss);
        });
    const double acc = EvaluateSamples(prompted, *inputs.val, config.threads);
    report.val_accuracy.push_back(acc);
    if (acc > best) {
      best = acc;
      report.best_epoch = epoch + 1;
      best_params.tensors = ExportParameters(model.params());
    }
  }
  ImportParameters(best_params.tensors, model.params());
  if (ParameterHash(backbone.params()) != report.backbone_hash) {
    throw FrozenViolation("backbone parameters changed during tuning");
  }
  for (const auto &[name, split] : inputs.tests) {
    report.test_accuracy[name] = EvaluateSamples(prompted, *split, config.threads);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

GlobalPretuneResult PretuneGlobal(const RunConfig &config, const TuneInputs &inputs) {
  if (inputs.backbone == nullptr || inputs.train == nullptr || inputs.val == nullptr) {
    throw std::invalid_argument("pretuning needs a backbone, a train split and a val split");
  }
  if (inputs.train->empty()) throw EmptySplit("empty training split");
  const ToyBackbone<float> &backbone = *inputs.backbone;
  if (!backbone.frozen()) throw FrozenViolation("backbone is not frozen");
  const auto start = std::chrono::steady_clock::now();
  const int L = backbone.config().layers;
  const int64_t n = config.prompt_len, d = backbone.config().model_dim;

  ParameterSet<float> params;
  for (int l = 0; l < L; ++l) {
    const std::string name = "prompt.global_layers." + std::to_string(l);
    Rng rng(StreamSeed(config.seed, HashString(name)));
    params.Add(name, RandomNormal<float>({n, d}, 0.02, rng));
  }
  auto scores = [&](Tape<float> &tape, const TuneSample &s) {
    std::vector<Var<float>> layers;
    for (size_t l = 0; l < params.size(); ++l) layers.push_back(tape.Param(params[l]));
    PromptBundle<float> bundle = PromptBundle<float>::MultiLayer(std::move(layers));
    return backbone.Scores(tape, s.encoded, &bundle);
  };
  auto accuracy = [&](const std::vector<TuneSample> &split) {
    if (split.empty()) throw EmptySplit("cannot evaluate an empty split");
    int correct = 0;
    for (const auto &s : split) {
      Tape<float> tape;
      const int pred = ArgMax(scores(tape, s).value());
      correct += Iou(s.example->scene.object(pred).box, s.example->gold_box) > 0.5;
    }
    return static_cast<double>(correct) / split.size();
  };

  GlobalPretuneResult result;
  RunReport &report = result.report;
  report.config = config.ToJson();
  report.seed = config.seed;
  report.backbone_hash = ParameterHash(backbone.params());
  AdamW<float> opt({.lr = config.lr_global, .weight_decay = config.weight_decay});
  double best = accuracy(*inputs.val);
  report.val_accuracy.push_back(best);
  auto best_params = ExportParameters(params);
  const auto &train = *inputs.train;
  for (int epoch = 0; epoch < config.epochs_global; ++epoch) {
    const auto order = ShuffledOrder(train.size(), config.seed, 0x676c6f62ULL, epoch);
    RunEpoch(
        order, config.batch_global, config.threads,
        [&](Tape<float> &tape, int i) {
          const int gold[] = {train[i].encoded.gold};
          return SoftmaxCrossEntropy(scores(tape, train[i]), std::span<const int>(gold));
        },
        [&](GradMap<float> &grads, double loss) {
          CheckFrozen(backbone, grads);
          for (size_t l = 0; l < params.size(); ++l) {
            const Tensor<float> *g = grads.Find(params[l]);
            if (g != nullptr && !AllZero(*g)) ++report.grad_steps[params[l].name];
          }
          opt.Step(params, grads);
          report.step_loss.push_back(loss);
        });
    const double acc = accuracy(*inputs.val);
    report.val_accuracy.push_back(acc);
    if (acc > best) {
      best = acc;
      report.best_epoch = epoch + 1;
      best_params = ExportParameters(params);
    }
  }
  ImportParameters(best_params, params);
  for (const auto &[name, split] : inputs.tests) report.test_accuracy[name] = accuracy(*split);
  result.layers = Tensor<float>({L, n, d});
  for (int l = 0; l < L; ++l) {
    std::copy(params[l].value.storage().begin(), params[l].value.storage().end(),
              result.layers.data() + l * n * d);
  }
  report.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return result;
}

const AblationRow &AblationResult::row(const std::string &name) const {
  for (const auto &r : rows) {
    if (r.name == name) return r;
  }
  throw std::out_of_range("no ablation row " + name);
}

std::string AblationResult::ToMarkdown() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << "| Tree | Module | Top-1 (%) | Seeds |\n|---|---|---|---|\n";
  for (const auto &r : rows) {
    out << "| " << (r.tree ? "yes" : "no") << " | " << (r.modules ? "yes" : "no")
        << " | " << 100 * r.mean << " | ";
    for (size_t i = 0; i < r.accuracy.size(); ++i) {
      out << (i ? ", " : "") << 100 * r.accuracy[i];
    }
    out << " |\n";
  }
  if (!lengths.empty()) {
    out << "\n| Prompt length | Top-1 (%) |\n|---|---|\n";
    for (const auto &[n, acc] : lengths) out << "| " << n << " | " << 100 * acc << " |\n";
  }
  return out.str();
}

std::string AblationResult::ToCsv() const {
  std::ostringstream out;
  out << std::setprecision(6);
  out << "table,name,tree,modules,prompt_len,accuracy\n";
  for (const auto &r : rows) {
    out << "ablation," << r.name << "," << r.tree << "," << r.modules << ",," << r.mean
        << "\n";
  }
  for (const auto &[n, acc] : lengths) out << "length,full,1,1," << n << "," << acc << "\n";
  return out.str();
}

nlohmann::json AblationResult::ToJson() const {
  nlohmann::json j;
  j["metric_split"] = metric_split;
  for (const auto &r : rows) {
    j["rows"].push_back({{"name", r.name},
                         {"tree", r.tree},
                         {"modules", r.modules},
                         {"accuracy", r.accuracy},
                         {"mean", r.mean}});
  }
  j["lengths"] = nlohmann::json::array();
  for (const auto &[n, acc] : lengths) {
    j["lengths"].push_back({{"prompt_len", n}, {"accuracy", acc}});
  }
  for (const auto &run : runs) j["runs"].push_back(run.ToJson());
  return j;
}

AblationResult Ablate(const RunConfig &base, const Vocab &vocab, const TuneInputs &inputs,
                      const AblationOptions &options, const std::string &metric_split,
                      const std::function<void(const std::string &)> &progress) {
  if (options.seeds.empty()) throw std::invalid_argument("ablation needs at least one seed");
  const bool known = std::any_of(inputs.tests.begin(), inputs.tests.end(),
                                 [&](const auto &t) { return t.first == metric_split; });
  if (!known) throw std::invalid_argument("no test split named " + metric_split);
  AblationResult result;
  result.metric_split = metric_split;
  auto run = [&](RunConfig config) {
    TreePromptModel<float> model(config.PromptConfig(inputs.backbone->config()), vocab,
                                 config.seed);
    RunReport report = Tune(config, model, inputs);
    const double acc = report.test_accuracy.at(metric_split);
    if (progress) {
      progress(config.AblationName() + " N=" + std::to_string(config.prompt_len) +
               " seed=" + std::to_string(config.seed) + " acc=" + std::to_string(acc));
    }
    result.runs.push_back(std::move(report));
    return acc;
  };
  const std::pair<bool, bool> grid[] = {{true, true}, {false, true}, {true, false},
                                        {false, false}};
  for (const auto &[tree, modules] : grid) {
    AblationRow row;
    row.tree = tree;
    row.modules = modules;
    for (uint64_t seed : options.seeds) {
      RunConfig config = base;
      config.tree = tree;
      config.modules = modules;
      config.seed = seed;
      row.name = config.AblationName();
      row.accuracy.push_back(run(config));
    }
    row.mean = std::accumulate(row.accuracy.begin(), row.accuracy.end(), 0.0) /
               row.accuracy.size();
    result.rows.push_back(row);
  }
  if (options.length_sweep) {
    for (int n : options.lengths) {
      RunConfig config = base;
      config.tree = config.modules = true;
      config.prompt_len = n;
      config.seed = options.seeds.front();
      result.lengths.emplace_back(n, run(config));
    }
  }
  return result;
}

nlohmann::json ConvergenceStats::ToJson() const {
  return {{"steps", steps},
          {"truncated", truncated},
          {"window", window},
          {"baseline_final", baseline_final},
          {"steps_a", steps_a},
          {"steps_b", steps_b},
          {"ratio", ratio}};
}

std::vector<double> Smooth(const std::vector<double> &values, int window) {
  if (window < 1) throw std::invalid_argument("smoothing window must be positive");
  std::vector<double> out(values.size());
  double sum = 0;
  for (size_t i = 0; i < values.size(); ++i) {
    sum += values[i];
    if (i >= static_cast<size_t>(window)) sum -= values[i - window];
    out[i] = sum / std::min<size_t>(i + 1, window);
  }
  return out;
}

ConvergenceStats CompareConvergence(const std::vector<double> &loss_a,
                                    const std::vector<double> &loss_b, int window,
                                    bool strict) {
  if (loss_a.size() != loss_b.size() && strict) {
    throw LengthMismatch("curves have " + std::to_string(loss_a.size()) + " and " +
                         std::to_string(loss_b.size()) + " steps");
  }
  ConvergenceStats s;
  s.steps = static_cast<int>(std::min(loss_a.size(), loss_b.size()));
  if (s.steps == 0) throw LengthMismatch("empty loss curve");
  s.truncated = loss_a.size() != loss_b.size();
  s.window = std::min(window, s.steps);
  const std::vector<double> a(loss_a.begin(), loss_a.begin() + s.steps);
  const std::vector<double> b(loss_b.begin(), loss_b.begin() + s.steps);
  const auto sa = Smooth(a, s.window), sb = Smooth(b, s.window);
  s.baseline_final = sb.back();
  auto first = [&](const std::vector<double> &curve) {
    for (int i = s.window - 1; i < s.steps; ++i) {
      if (curve[i] <= s.baseline_final) return i + 1;
    }
    return -1;
  };
  s.steps_a = first(sa);
  s.steps_b = first(sb);
  s.ratio = s.steps_a < 0 ? std::numeric_limits<double>::infinity()
                          : static_cast<double>(s.steps_a) / s.steps_b;
  return s;
}

std::string ConvergenceCsv(const std::vector<double> &loss_a,
                           const std::vector<double> &loss_b) {
  std::ostringstream out;
  out << std::setprecision(std::numeric_limits<double>::max_digits10);
  out << "step,loss_A,loss_B\n";
  const size_t n = std::min(loss_a.size(), loss_b.size());
  for (size_t i = 0; i < n; ++i) out << i + 1 << "," << loss_a[i] << "," << loss_b[i] << "\n";
  return out.str();
}

void ParseConvergenceCsv(const std::string &csv, std::vector<double> *loss_a,
                         std::vector<double> *loss_b) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line.rfind("step,loss_A,loss_B", 0) != 0) {
    throw std::invalid_argument("convergence CSV must start with step,loss_A,loss_B");
  }
  loss_a->clear();
  loss_b->clear();
  int expected = 1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    std::string step, a, b;
    if (!std::getline(row, step, ',') || !std::getline(row, a, ',') ||
        !std::getline(row, b)) {
      throw std::invalid_argument("malformed convergence row: " + line);
    }
    if (std::stoi(step) != expected++) {
      throw std::invalid_argument("convergence steps must count up from 1");
    }
    loss_a->push_back(std::stod(a));
    loss_b->push_back(std::stod(b));
  }
}

template PromptBundle<float> BundleFromPrompt(Tape<float> &, const TreePromptModel<float> &,
                                              Var<float>, PromptMode, const Tensor<float> *);
template PromptBundle<double> BundleFromPrompt(Tape<double> &, const TreePromptModel<double> &,
                                               Var<double>, PromptMode, const Tensor<double> *);
template PromptBundle<float> BuildPrompt(Tape<float> &, const TreePromptModel<float> &,
                                         const TuneSample &, PromptMode,
                                         const Tensor<float> *,
                                         TreePromptOutput<float> *);
template PromptBundle<double> BuildPrompt(Tape<double> &, const TreePromptModel<double> &,
                                          const TuneSample &, PromptMode,
                                          const Tensor<double> *,
                                          TreePromptOutput<double> *);

}  // namespace treeprompt
