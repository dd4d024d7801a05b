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
#ifndef TREEPROMPT_ADAMW_H_
#define TREEPROMPT_ADAMW_H_

#include <map>
#include <string>

#include "treeprompt/autodiff.h"

namespace treeprompt {

struct AdamWOptions {
  double lr = 5e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

// AdamW with decoupled weight decay and bias-corrected moments. Moments are
// keyed by parameter name so state survives parameter-set reconstruction.
template <typename T>
class AdamW {
 public:
  explicit AdamW(AdamWOptions options) : options_(options) {}

  // Updates every trainable parameter that has an entry in `grads`.
  void Step(ParameterSet<T> &params, const GradMap<T> &grads);

  int64_t step() const { return step_; }
  const AdamWOptions &options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }
  const Tensor<T> *first_moment(const std::string &name) const;
  const Tensor<T> *second_moment(const std::string &name) const;

 private:
  struct Moments {
    Tensor<T> m;
    Tensor<T> v;
  };
  AdamWOptions options_;
  int64_t step_ = 0;
  std::map<std::string, Moments> moments_;
};

extern template class AdamW<float>;
extern template class AdamW<double>;

}  // namespace treeprompt

#endif  // TREEPROMPT_ADAMW_H_
