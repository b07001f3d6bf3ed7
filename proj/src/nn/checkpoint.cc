// Copyright 2026 The cassnat Authors. All Rights Reserved.
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

#include "cassnat/nn/checkpoint.h"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "cassnat/common/error.h"

namespace cassnat::nn {

static_assert(std::endian::native == std::endian::little,
              "checkpoint I/O assumes a little-endian host");

namespace {

template <typename T>
void Put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

class Reader {
 public:
  Reader(std::istream& is, const std::string& path) : is_(is), path_(path) {}

  template <typename T>
  T Get() {
    T v{};
    Bytes(&v, sizeof(T));
    return v;
  }
  void Bytes(void* dst, std::size_t n) {
    const auto offset = static_cast<long long>(is_.tellg());
    is_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
    CASSNAT_CHECK(is_.gcount() == static_cast<std::streamsize>(n), ErrorKind::kIo,
                  path_ + ": truncated checkpoint at byte offset " +
                      std::to_string(offset));
  }

 private:
  std::istream& is_;
  const std::string& path_;
};

}  // namespace

void SaveCheckpoint(const std::string& path,
                    const std::vector<NamedTensor>& records) {
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  CASSNAT_CHECK(os.good(), ErrorKind::kIo, "cannot write checkpoint " + path);
  os.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  Put<std::uint64_t>(os, records.size());
  for (const auto& r : records) {
    Put<std::uint32_t>(os, static_cast<std::uint32_t>(r.name.size()));
    os.write(r.name.data(), static_cast<std::streamsize>(r.name.size()));
    Put<std::uint32_t>(os, static_cast<std::uint32_t>(r.value.ndim()));
    for (std::size_t d : r.value.shape()) Put<std::uint64_t>(os, d);
    os.write(reinterpret_cast<const char*>(r.value.data()),
             static_cast<std::streamsize>(r.value.size() * sizeof(double)));
  }
  CASSNAT_CHECK(os.good(), ErrorKind::kIo, "error writing checkpoint " + path);
}

std::vector<NamedTensor> Snapshot(const ParameterSet& params) {
  std::vector<NamedTensor> out;
  out.reserve(params.size());
  for (const auto& p : params.all()) out.push_back({p.name, p.value});
  return out;
}

void SaveCheckpoint(const std::string& path, const ParameterSet& params) {
  SaveCheckpoint(path, Snapshot(params));
}

std::vector<NamedTensor> LoadCheckpoint(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  CASSNAT_CHECK(is.good(), ErrorKind::kIo, "cannot open checkpoint " + path);
  Reader rd(is, path);
  char magic[8];
  rd.Bytes(magic, sizeof(magic));
  CASSNAT_CHECK(std::memcmp(magic, kCheckpointMagic, 8) == 0, ErrorKind::kIo,
                path + ": bad checkpoint magic");
  const auto count = rd.Get<std::uint64_t>();
  std::vector<NamedTensor> out;
  for (std::uint64_t i = 0; i < count; ++i) {
    NamedTensor r;
    const auto name_len = rd.Get<std::uint32_t>();
    CASSNAT_CHECK(name_len < (1u << 16), ErrorKind::kIo,
                  path + ": implausible record name length");
    r.name.resize(name_len);
    rd.Bytes(r.name.data(), name_len);
    const auto ndim = rd.Get<std::uint32_t>();
    CASSNAT_CHECK(ndim <= 8, ErrorKind::kIo, path + ": implausible rank");
    std::vector<std::size_t> shape(ndim);
    for (auto& d : shape) d = rd.Get<std::uint64_t>();
    std::vector<double> data(ShapeProduct(shape));
    rd.Bytes(data.data(), data.size() * sizeof(double));
    r.value = Tensor(std::move(shape), std::move(data));
    out.push_back(std::move(r));
  }
  return out;
}

std::size_t LoadInto(const std::vector<NamedTensor>& records,
                     ParameterSet& params, bool require_all,
                     const std::string& prefix) {
  std::size_t loaded = 0;
  for (auto& p : params.all()) {
    if (!prefix.empty() && p.name.rfind(prefix, 0) != 0) continue;
    const NamedTensor* src = nullptr;
    for (const auto& r : records)
      if (r.name == p.name) src = &r;
    if (src == nullptr) {
      CASSNAT_CHECK(!require_all, ErrorKind::kIo,
                    "checkpoint lacks parameter " + p.name);
      continue;
    }
    CASSNAT_CHECK(src->value.shape() == p.value.shape(), ErrorKind::kShape,
                  "shape mismatch on load for " + p.name + ": checkpoint " +
                      ShapeString(src->value.shape()) + ", model " +
                      ShapeString(p.value.shape()));
    p.value = src->value;
    ++loaded;
  }
  return loaded;
}

std::vector<NamedTensor> AverageCheckpoints(
    const std::vector<std::vector<NamedTensor>>& checkpoints) {
  CASSNAT_CHECK(!checkpoints.empty(), ErrorKind::kUsage,
                "no checkpoints to average");
  std::vector<NamedTensor> avg = checkpoints.front();
  for (std::size_t c = 1; c < checkpoints.size(); ++c) {
    const auto& ck = checkpoints[c];
    CASSNAT_CHECK(ck.size() == avg.size(), ErrorKind::kShape,
                  "checkpoints have different record counts");
    for (std::size_t i = 0; i < avg.size(); ++i) {
      CASSNAT_CHECK(ck[i].name == avg[i].name &&
                        ck[i].value.shape() == avg[i].value.shape(),
                    ErrorKind::kShape,
                    "checkpoint record mismatch at " + avg[i].name);
      for (std::size_t j = 0; j < avg[i].value.size(); ++j)
        avg[i].value[j] += ck[i].value[j];
    }
  }
  // Identical inputs must average to themselves bit-exactly; summing k
  // copies and dividing by k can round, so short-circuit that case.
  const double k = static_cast<double>(checkpoints.size());
  for (std::size_t i = 0; i < avg.size(); ++i) {
    for (std::size_t j = 0; j < avg[i].value.size(); ++j) {
      const double first = checkpoints.front()[i].value[j];
      bool all_same = true;
      for (const auto& ck : checkpoints)
        if (ck[i].value[j] != first) {
          all_same = false;
          break;
        }
      avg[i].value[j] = all_same ? first : avg[i].value[j] / k;
    }
  }
  return avg;
}

}  // namespace cassnat::nn
