// Copyright 2026 The Prefrank Authors.
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

#ifndef PREFRANK_BINARY_IO_H_
#define PREFRANK_BINARY_IO_H_

#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "Eigen/Core"

namespace prefrank {

// Little-endian, length-prefixed primitives shared by the feature twin format
// and the model containers. Every container starts with an 8-byte magic and a
// u32 format version.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream& out) : out_(out) {}

  void WriteHeader(std::string_view magic, std::uint32_t version);
  void WriteU32(std::uint32_t v);
  void WriteU64(std::uint64_t v);
  void WriteI64(std::int64_t v);
  void WriteF64(double v);
  void WriteBool(bool v) { WriteU32(v ? 1 : 0); }
  void WriteString(std::string_view s);
  void WriteVector(const Eigen::VectorXd& v);
  void WriteMatrix(const Eigen::MatrixXd& m);
  void WriteSizes(const std::vector<std::size_t>& v);

 private:
  std::ostream& out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream& in, std::string source)
      : in_(in), source_(std::move(source)) {}

  // Checks the magic and returns the stored version; throws on mismatch or
  // when the version exceeds `max_version`.
  std::uint32_t ReadHeader(std::string_view magic, std::uint32_t max_version);
  std::uint32_t ReadU32();
  std::uint64_t ReadU64();
  std::int64_t ReadI64();
  double ReadF64();
  bool ReadBool() { return ReadU32() != 0; }
  std::string ReadString();
  Eigen::VectorXd ReadVector();
  Eigen::MatrixXd ReadMatrix();
  std::vector<std::size_t> ReadSizes();

 private:
  void ReadRaw(void* dst, std::size_t n);

  std::istream& in_;
  std::string source_;
};

// Peeks the first 8 bytes of a file.
std::string PeekMagic(const std::string& path);

}  // namespace prefrank

#endif  // PREFRANK_BINARY_IO_H_
