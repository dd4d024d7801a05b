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
#include "treeprompt/checkpoint.h"

#include <openssl/evp.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

namespace treeprompt {
namespace {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

template <typename U>
void Put(std::string &out, U v) {
  char buf[sizeof(U)];
  std::memcpy(buf, &v, sizeof(U));
  out.append(buf, sizeof(U));
}

class Reader {
 public:
  explicit Reader(const std::string &bytes) : bytes_(bytes) {}
  bool done() const { return pos_ == bytes_.size(); }
  template <typename U>
  U Get() {
    Need(sizeof(U));
    U v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(U));
    pos_ += sizeof(U);
    return v;
  }
  std::string GetBytes(size_t n) {
    Need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }

 private:
  void Need(size_t n) const {
    if (bytes_.size() - pos_ < n) throw CheckpointError("truncated checkpoint");
  }
  const std::string &bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::string EncodeCheckpoint(const std::vector<NamedTensor> &tensors) {
  std::string out(kCheckpointMagic, 4);
  Put<uint32_t>(out, kCheckpointVersion);
  for (const auto &t : tensors) {
    Put<uint32_t>(out, static_cast<uint32_t>(t.name.size()));
    out += t.name;
    Put<uint32_t>(out, static_cast<uint32_t>(t.value.rank()));
    for (int64_t d : t.value.shape()) Put<uint64_t>(out, static_cast<uint64_t>(d));
    out.append(reinterpret_cast<const char *>(t.value.data()),
               t.value.size() * sizeof(float));
  }
  return out;
}

std::vector<NamedTensor> DecodeCheckpoint(const std::string &bytes) {
  Reader in(bytes);
  if (in.GetBytes(4) != std::string(kCheckpointMagic, 4)) {
    throw CheckpointError("bad checkpoint magic");
  }
  const auto version = in.Get<uint32_t>();
  if (version != kCheckpointVersion) {
    throw CheckpointError("unsupported checkpoint version " +
                          std::to_string(version));
  }
  std::vector<NamedTensor> tensors;
  while (!in.done()) {
    NamedTensor t;
    t.name = in.GetBytes(in.Get<uint32_t>());
    const auto rank = in.Get<uint32_t>();
    Shape shape(rank);
    for (auto &d : shape) d = static_cast<int64_t>(in.Get<uint64_t>());
    std::vector<float> values(NumElements(shape));
    const std::string raw = in.GetBytes(values.size() * sizeof(float));
    std::memcpy(values.data(), raw.data(), raw.size());
    t.value = Tensor<float>(std::move(shape), std::move(values));
    tensors.push_back(std::move(t));
  }
  return tensors;
}

std::string Sha256Hex(const std::string &bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    throw std::runtime_error("sha256 failed");
  }
  std::ostringstream hex;
  for (unsigned int i = 0; i < len; ++i) {
    hex << std::hex << std::setw(2) << std::setfill('0')
        << static_cast<int>(digest[i]);
  }
  return hex.str();
}

std::string WriteCheckpoint(const std::filesystem::path &path,
                            const std::vector<NamedTensor> &tensors,
                            const nlohmann::json &metadata) {
  const std::string bytes = EncodeCheckpoint(tensors);
  const std::string hash = Sha256Hex(bytes);
  {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw CheckpointError("cannot write " + path.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  }
  nlohmann::json manifest;
  manifest["format"] = "TPCK";
  manifest["version"] = kCheckpointVersion;
  manifest["dtype"] = "float32";
  manifest["sha256"] = hash;
  manifest["tensors"] = nlohmann::json::array();
  for (const auto &t : tensors) {
    manifest["tensors"].push_back({{"name", t.name}, {"shape", t.value.shape()}});
  }
  manifest["metadata"] = metadata;
  std::ofstream json_out(path.string() + ".json");
  if (!json_out) throw CheckpointError("cannot write manifest for " + path.string());
  json_out << manifest.dump(2) << "\n";
  return hash;
}

std::vector<NamedTensor> ReadCheckpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError("cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return DecodeCheckpoint(buf.str());
}

nlohmann::json ReadManifest(const std::filesystem::path &path) {
  std::ifstream in(path.string() + ".json");
  if (!in) throw CheckpointError("missing manifest for " + path.string());
  return nlohmann::json::parse(in);
}

template <typename T>
std::vector<NamedTensor> ExportParameters(const ParameterSet<T> &params) {
  std::vector<NamedTensor> out;
  params.ForEach([&](const Parameter<T> &p) {
    out.push_back({p.name, p.value.template Cast<float>()});
  });
  return out;
}

template <typename T>
void ImportParameters(const std::vector<NamedTensor> &tensors,
                      ParameterSet<T> &params) {
  params.ForEach([&](Parameter<T> &p) {
    auto it = std::find_if(tensors.begin(), tensors.end(),
                           [&](const NamedTensor &t) { return t.name == p.name; });
    if (it == tensors.end()) {
      throw CheckpointError("checkpoint lacks tensor " + p.name);
    }
    if (it->value.shape() != p.value.shape()) {
      throw CheckpointError("shape of " + p.name + ": checkpoint " +
                            ShapeString(it->value.shape()) + " vs model " +
                            ShapeString(p.value.shape()));
    }
    p.value = it->value.template Cast<T>();
  });
}

template <typename T>
std::string ParameterHash(const ParameterSet<T> &params) {
  return Sha256Hex(EncodeCheckpoint(ExportParameters(params)));
}

template std::vector<NamedTensor> ExportParameters(const ParameterSet<float> &);
template std::vector<NamedTensor> ExportParameters(const ParameterSet<double> &);
template void ImportParameters(const std::vector<NamedTensor> &,
                               ParameterSet<float> &);
template void ImportParameters(const std::vector<NamedTensor> &,
                               ParameterSet<double> &);
template std::string ParameterHash(const ParameterSet<float> &);
template std::string ParameterHash(const ParameterSet<double> &);

}  // namespace treeprompt
