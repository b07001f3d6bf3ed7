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

#include "cassnat/common/matrix_io.h"

#include <bit>
#include <cstring>

#include "cassnat/common/error.h"

namespace cassnat {

static_assert(std::endian::native == std::endian::little,
              "feature I/O assumes a little-endian host");

FeatureWriter::FeatureWriter(const std::string& path, std::uint32_t width)
    : path_(path), os_(path, std::ios::binary | std::ios::trunc), width_(width) {
  CASSNAT_CHECK(os_.good(), ErrorKind::kIo, "cannot write " + path);
  CASSNAT_CHECK(width > 0, ErrorKind::kUsage, "feature width must be > 0");
  os_.write(kFeatureMagic, sizeof(kFeatureMagic));
  os_.write(reinterpret_cast<const char*>(&width_), sizeof(width_));
}

std::uint64_t FeatureWriter::Append(const std::vector<float>& rows) {
  CASSNAT_CHECK(rows.size() % width_ == 0, ErrorKind::kShape,
                "feature block is not a whole number of rows");
  const std::uint64_t at = offset_;
  os_.write(reinterpret_cast<const char*>(rows.data()),
            static_cast<std::streamsize>(rows.size() * sizeof(float)));
  CASSNAT_CHECK(os_.good(), ErrorKind::kIo, "error writing " + path_);
  offset_ += rows.size() * sizeof(float);
  return at;
}

void FeatureWriter::Close() {
  os_.flush();
  CASSNAT_CHECK(os_.good(), ErrorKind::kIo, "error closing " + path_);
  os_.close();
}

FeatureReader::FeatureReader(const std::string& path)
    : path_(path), is_(path, std::ios::binary) {
  CASSNAT_CHECK(is_.good(), ErrorKind::kIo, "cannot open " + path);
  is_.seekg(0, std::ios::end);
  size_ = static_cast<std::uint64_t>(is_.tellg());
  is_.seekg(0);
  CASSNAT_CHECK(size_ >= kFeatureHeaderBytes, ErrorKind::kIo,
                path + ": truncated header at byte offset 0");
  char magic[8];
  is_.read(magic, 8);
  CASSNAT_CHECK(std::memcmp(magic, kFeatureMagic, 8) == 0, ErrorKind::kIo,
                path + ": bad magic at byte offset 0");
  is_.read(reinterpret_cast<char*>(&width_), sizeof(width_));
  CASSNAT_CHECK(width_ > 0, ErrorKind::kIo, path + ": zero width at byte offset 8");
}

std::vector<float> FeatureReader::Read(std::uint64_t offset, std::uint64_t rows) {
  const std::uint64_t bytes = rows * width_ * sizeof(float);
  CASSNAT_CHECK(offset >= kFeatureHeaderBytes && offset + bytes <= size_,
                ErrorKind::kIo,
                path_ + ": record of " + std::to_string(bytes) +
                    " bytes at byte offset " + std::to_string(offset) +
                    " runs past end of file (" + std::to_string(size_) + " bytes)");
  std::vector<float> out(rows * width_);
  is_.clear();
  is_.seekg(static_cast<std::streamoff>(offset));
  is_.read(reinterpret_cast<char*>(out.data()), static_cast<std::streamsize>(bytes));
  CASSNAT_CHECK(is_.gcount() == static_cast<std::streamsize>(bytes), ErrorKind::kIo,
                path_ + ": short read at byte offset " + std::to_string(offset));
  return out;
}

}  // namespace cassnat
