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
#ifndef TREEPROMPT_GRAD_CHECK_H_
#define TREEPROMPT_GRAD_CHECK_H_

#include <functional>
#include <string>
#include <vector>

#include "treeprompt/autodiff.h"

namespace treeprompt {

struct GradCheckOptions {
  double step = 1e-5;
  // Relative error is |a - n| / max(|a|, |n|, floor).
  double floor = 1e-5;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  int64_t worst_index = -1;
  double worst_autodiff = 0.0;
  double worst_numeric = 0.0;
  int64_t checked = 0;
  std::vector<std::string> disconnected;
};

using LossBuilder = std::function<Var<double>(Tape<double> &)>;

double RelativeError(double a, double b, double floor);

// Compares tape gradients of every trainable parameter in `params` with
// central finite differences of the loss produced by `build`.
GradCheckResult CheckGradients(ParameterSet<double> &params,
                               const LossBuilder &build,
                               const GradCheckOptions &options = {});

}  // namespace treeprompt

#endif  // TREEPROMPT_GRAD_CHECK_H_
