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
#include "treeprompt/adamw.h"

#include <cmath>

namespace treeprompt {

template <typename T>
void AdamW<T>::Step(ParameterSet<T> &params, const GradMap<T> &grads) {
  ++step_;
  const double b1 = options_.beta1, b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double lr = options_.lr;
  const double decay = 1.0 - lr * options_.weight_decay;
  params.ForEach([&](Parameter<T> &p) {
    if (!p.trainable) return;
    const Tensor<T> *g = grads.Find(p);
    if (g == nullptr) return;
    if (g->shape() != p.value.shape()) {
      throw ShapeMismatch("adamw grad for " + p.name);
    }
    auto [it, fresh] = moments_.try_emplace(p.name);
    Moments &st = it->second;
    if (fresh || st.m.shape() != p.value.shape()) {
      st.m = Tensor<T>(p.value.shape());
      st.v = Tensor<T>(p.value.shape());
    }
    for (int64_t i = 0; i < p.value.size(); ++i) {
      const double gi = (*g)[i];
      const double m = b1 * st.m[i] + (1.0 - b1) * gi;
      const double v = b2 * st.v[i] + (1.0 - b2) * gi * gi;
      st.m[i] = static_cast<T>(m);
      st.v[i] = static_cast<T>(v);
      const double mhat = m / c1;
      const double vhat = v / c2;
      double theta = static_cast<double>(p.value[i]) * decay;
      theta -= lr * mhat / (std::sqrt(vhat) + options_.eps);
      p.value[i] = static_cast<T>(theta);
    }
  });
}

template <typename T>
const Tensor<T> *AdamW<T>::first_moment(const std::string &name) const {
  auto it = moments_.find(name);
  return it == moments_.end() ? nullptr : &it->second.m;
}

template <typename T>
const Tensor<T> *AdamW<T>::second_moment(const std::string &name) const {
  auto it = moments_.find(name);
  return it == moments_.end() ? nullptr : &it->second.v;
}

template class AdamW<float>;
template class AdamW<double>;

}  // namespace treeprompt
