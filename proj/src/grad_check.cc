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
#include "treeprompt/grad_check.h"

#include <algorithm>
#include <cmath>

namespace treeprompt {

double RelativeError(double a, double b, double floor) {
  const double denom = std::max({std::abs(a), std::abs(b), floor});
  return std::abs(a - b) / denom;
}

GradCheckResult CheckGradients(ParameterSet<double> &params,
                               const LossBuilder &build,
                               const GradCheckOptions &options) {
  GradCheckResult result;
  GradMap<double> grads;
  {
    Tape<double> tape;
    Var<double> loss = build(tape);
    tape.Backward(loss);
    result.disconnected = tape.CollectGrads(grads);
  }
  auto evaluate = [&]() {
    Tape<double> tape;
    return build(tape).value()[0];
  };
  params.ForEach([&](Parameter<double> &p) {
    if (!p.trainable) return;
    const Tensor<double> *g = grads.Find(p);
    for (int64_t i = 0; i < p.value.size(); ++i) {
      const double saved = p.value[i];
      p.value[i] = saved + options.step;
      const double up = evaluate();
      p.value[i] = saved - options.step;
      const double down = evaluate();
      p.value[i] = saved;
      const double numeric = (up - down) / (2.0 * options.step);
      const double analytic = g ? (*g)[i] : 0.0;
      const double err = RelativeError(analytic, numeric, options.floor);
      ++result.checked;
      if (err > result.max_rel_error || result.worst_index < 0) {
        result.max_rel_error = std::max(result.max_rel_error, err);
        result.worst_param = p.name;
        result.worst_index = i;
        result.worst_autodiff = analytic;
        result.worst_numeric = numeric;
      }
    }
  });
  return result;
}

}  // namespace treeprompt
