// ldstext/binary_io.hpp

// Copyright 2026 The ldstext Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef LDSTEXT_BINARY_IO_HPP_
#define LDSTEXT_BINARY_IO_HPP_

#include <cstdint>
#include <iosfwd>
#include <string>
#include <string_view>

#include "ldstext/common.hpp"

namespace ldstext {

// Little-endian primitive encoding, independent of host byte order.
class BinaryWriter {
 public:
  explicit BinaryWriter(std::ostream &out) : out_(out) {}

  void magic(std::string_view tag);
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void str(std::string_view s);
  // Row-major dump of a dense matrix (no shape prefix).
  void matrix(const Matrix &m);
  void vector(const Vector &v);

 private:
  std::ostream &out_;
};

class BinaryReader {
 public:
  BinaryReader(std::istream &in, std::string source) : in_(in), source_(std::move(source)) {}

  void expect_magic(std::string_view tag);
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  std::string str();
  Matrix matrix(Index rows, Index cols);
  Vector vector(Index n);

 private:
  void read_bytes(unsigned char *dst, std::size_t n);

  std::istream &in_;
  std::string source_;
};

// FNV-1a over a byte string; used for corpus provenance hashes.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::uint64_t hash_file(const std::string &path);

}  // namespace ldstext

#endif  // LDSTEXT_BINARY_IO_HPP_
