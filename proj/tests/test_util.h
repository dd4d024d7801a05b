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

#ifndef TREEPROMPT_TESTS_TEST_UTIL_H_
#define TREEPROMPT_TESTS_TEST_UTIL_H_

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "treeprompt/autodiff.h"

namespace treeprompt::testing {

inline std::string SourcePath(const std::string &relative) {
  return std::string(TREEPROMPT_SOURCE_DIR) + "/" + relative;
}

inline std::string ReadFile(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string &tag) {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("treeprompt-" + tag + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  const std::filesystem::path &path() const { return path_; }
  std::string file(const std::string &name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

inline Tensor<double> RandomMatrix(int64_t rows, int64_t cols, std::mt19937_64 &rng,
                                   double scale = 1.0) {
  std::normal_distribution<double> dist(0.0, scale);
  Tensor<double> t = Tensor<double>::Matrix(rows, cols);
  for (auto &v : t.storage()) v = dist(rng);
  return t;
}

// Central-difference derivative of `f` with respect to every entry of `x`.
inline std::vector<double> NumericGradient(const std::function<double()> &f,
                                           Tensor<double> &x, double h = 1e-6) {
  std::vector<double> g(x.size());
  for (int64_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

inline double MaxRelativeError(const std::vector<double> &a, const Tensor<double> &b) {
  double worst = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    const double scale = std::max({std::abs(a[i]), std::abs(b[i]), 1e-6});
    worst = std::max(worst, std::abs(a[i] - b[i]) / scale);
  }
  return worst;
}

}  // namespace treeprompt::testing

#endif  // TREEPROMPT_TESTS_TEST_UTIL_H_
