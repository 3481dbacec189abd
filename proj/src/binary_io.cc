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

#include "prefrank/binary_io.h"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

#include "prefrank/types.h"

namespace prefrank {

static_assert(std::endian::native == std::endian::little,
              "binary containers assume a little-endian host");

namespace {
// Guards allocations driven by corrupted length prefixes.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 34;
}  // namespace

void BinaryWriter::WriteHeader(std::string_view magic, std::uint32_t version) {
  char buf[8] = {};
  std::memcpy(buf, magic.data(), std::min<std::size_t>(magic.size(), 8));
  out_.write(buf, 8);
  WriteU32(version);
}

void BinaryWriter::WriteU32(std::uint32_t v) {
  out_.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void BinaryWriter::WriteU64(std::uint64_t v) {
  out_.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void BinaryWriter::WriteI64(std::int64_t v) {
  out_.write(reinterpret_cast<const char*>(&v), sizeof(v));
}
void BinaryWriter::WriteF64(double v) {
  out_.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

void BinaryWriter::WriteString(std::string_view s) {
  WriteU64(s.size());
  out_.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void BinaryWriter::WriteVector(const Eigen::VectorXd& v) {
  WriteU64(static_cast<std::uint64_t>(v.size()));
  out_.write(reinterpret_cast<const char*>(v.data()),
             static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void BinaryWriter::WriteMatrix(const Eigen::MatrixXd& m) {
  WriteU64(static_cast<std::uint64_t>(m.rows()));
  WriteU64(static_cast<std::uint64_t>(m.cols()));
  // Eigen default storage is column-major.
  out_.write(reinterpret_cast<const char*>(m.data()),
             static_cast<std::streamsize>(m.size() * sizeof(double)));
}

void BinaryWriter::WriteSizes(const std::vector<std::size_t>& v) {
  WriteU64(v.size());
  for (std::size_t x : v) WriteU64(x);
}

void BinaryReader::ReadRaw(void* dst, std::size_t n) {
  in_.read(static_cast<char*>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n) {
    throw Error("io", source_ + ": unexpected end of binary data");
  }
}

std::uint32_t BinaryReader::ReadHeader(std::string_view magic,
                                       std::uint32_t max_version) {
  char buf[8];
  ReadRaw(buf, 8);
  char want[8] = {};
  std::memcpy(want, magic.data(), std::min<std::size_t>(magic.size(), 8));
  if (std::memcmp(buf, want, 8) != 0) {
    throw Error("io", source_ + ": bad magic, expected '" +
                          std::string(magic) + "'");
  }
  const std::uint32_t version = ReadU32();
  if (version == 0 || version > max_version) {
    throw Error("io", source_ + ": unsupported format version " +
                          std::to_string(version));
  }
  return version;
}

std::uint32_t BinaryReader::ReadU32() {
  std::uint32_t v;
  ReadRaw(&v, sizeof(v));
  return v;
}
std::uint64_t BinaryReader::ReadU64() {
  std::uint64_t v;
  ReadRaw(&v, sizeof(v));
  return v;
}
std::int64_t BinaryReader::ReadI64() {
  std::int64_t v;
  ReadRaw(&v, sizeof(v));
  return v;
}
double BinaryReader::ReadF64() {
  double v;
  ReadRaw(&v, sizeof(v));
  return v;
}

std::string BinaryReader::ReadString() {
  const std::uint64_t n = ReadU64();
  if (n > kMaxElements) throw Error("io", source_ + ": corrupt string length");
  std::string s(n, '\0');
  if (n > 0) ReadRaw(s.data(), n);
  return s;
}

Eigen::VectorXd BinaryReader::ReadVector() {
  const std::uint64_t n = ReadU64();
  if (n > kMaxElements) throw Error("io", source_ + ": corrupt vector length");
  Eigen::VectorXd v(static_cast<Eigen::Index>(n));
  if (n > 0) ReadRaw(v.data(), n * sizeof(double));
  return v;
}

Eigen::MatrixXd BinaryReader::ReadMatrix() {
  const std::uint64_t r = ReadU64();
  const std::uint64_t c = ReadU64();
  if (r > kMaxElements || c > kMaxElements || (c != 0 && r > kMaxElements / c))
    throw Error("io", source_ + ": corrupt matrix shape");
  Eigen::MatrixXd m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c));
  if (r * c > 0) ReadRaw(m.data(), r * c * sizeof(double));
  return m;
}

std::vector<std::size_t> BinaryReader::ReadSizes() {
  const std::uint64_t n = ReadU64();
  if (n > kMaxElements) throw Error("io", source_ + ": corrupt list length");
  std::vector<std::size_t> v(n);
  for (auto& x : v) x = ReadU64();
  return v;
}

std::string PeekMagic(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  char buf[8] = {};
  in.read(buf, 8);
  return std::string(buf, static_cast<std::size_t>(in.gcount()));
}

}  // namespace prefrank
