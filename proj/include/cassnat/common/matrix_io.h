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

#ifndef CASSNAT_COMMON_MATRIX_IO_H_
#define CASSNAT_COMMON_MATRIX_IO_H_

#include <cstdint>
#include <fstream>
#include <string>
#include <vector>

namespace cassnat {

// Feature-matrix files:
//   "CASSFEAT"      8-byte magic
//   u32 width       columns per row
//   f32 rows...     little-endian, row-major, appended back to back
// Rows of many matrices share one file and are addressed by byte offset.
inline constexpr char kFeatureMagic[8] = {'C', 'A', 'S', 'S',
                                          'F', 'E', 'A', 'T'};
inline constexpr std::uint64_t kFeatureHeaderBytes = 12;

class FeatureWriter {
 public:
  FeatureWriter(const std::string& path, std::uint32_t width);
  // Appends rows.size() / width rows, returns the byte offset of the first.
  std::uint64_t Append(const std::vector<float>& rows);
  std::uint32_t width() const { return width_; }
  void Close();

 private:
  std::string path_;
  std::ofstream os_;
  std::uint32_t width_;
  std::uint64_t offset_ = kFeatureHeaderBytes;
};

class FeatureReader {
 public:
  explicit FeatureReader(const std::string& path);
  std::uint32_t width() const { return width_; }
  std::uint64_t file_size() const { return size_; }
  // Reads `rows` rows starting at `offset`. Errors carry the byte offset.
  std::vector<float> Read(std::uint64_t offset, std::uint64_t rows);

 private:
  std::string path_;
  std::ifstream is_;
  std::uint32_t width_ = 0;
  std::uint64_t size_ = 0;
};

}  // namespace cassnat

#endif  // CASSNAT_COMMON_MATRIX_IO_H_
