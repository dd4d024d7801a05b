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
// Flat binary parameter container.
//
//   "TPCK" | u32 version | { u32 name_len | name | u32 rank | u64 dims[rank] |
//                            f32 values[prod(dims)] }*
//
// All integers and floats are little-endian. A JSON manifest with the same
// path plus ".json" lists tensor names and shapes, the payload SHA-256 and any
// caller metadata.

#ifndef TREEPROMPT_CHECKPOINT_H_
#define TREEPROMPT_CHECKPOINT_H_

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "treeprompt/autodiff.h"

namespace treeprompt {

inline constexpr char kCheckpointMagic[4] = {'T', 'P', 'C', 'K'};
inline constexpr uint32_t kCheckpointVersion = 1;

class CheckpointError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct NamedTensor {
  std::string name;
  Tensor<float> value;
};

std::string EncodeCheckpoint(const std::vector<NamedTensor> &tensors);
std::vector<NamedTensor> DecodeCheckpoint(const std::string &bytes);

// Writes `path` and `path`.json. Returns the payload hash.
std::string WriteCheckpoint(const std::filesystem::path &path,
                            const std::vector<NamedTensor> &tensors,
                            const nlohmann::json &metadata = nlohmann::json::object());
std::vector<NamedTensor> ReadCheckpoint(const std::filesystem::path &path);
nlohmann::json ReadManifest(const std::filesystem::path &path);

std::string Sha256Hex(const std::string &bytes);

template <typename T>
std::vector<NamedTensor> ExportParameters(const ParameterSet<T> &params);

// Copies values by name; every parameter in `params` must be present with a
// matching shape.
template <typename T>
void ImportParameters(const std::vector<NamedTensor> &tensors,
                      ParameterSet<T> &params);

// SHA-256 over the encoded checkpoint of `params`.
template <typename T>
std::string ParameterHash(const ParameterSet<T> &params);

}  // namespace treeprompt

#endif  // TREEPROMPT_CHECKPOINT_H_
