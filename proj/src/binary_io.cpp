// binary_io.cpp

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

#include "ldstext/binary_io.hpp"

#include <bit>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

namespace ldstext {

void BinaryWriter::magic(std::string_view tag) { out_.write(tag.data(), tag.size()); }

void BinaryWriter::u32(std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out_.write(reinterpret_cast<const char *>(b), 4);
}

void BinaryWriter::u64(std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out_.write(reinterpret_cast<const char *>(b), 8);
}

void BinaryWriter::f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }

void BinaryWriter::str(std::string_view s) {
  u32(static_cast<std::uint32_t>(s.size()));
  out_.write(s.data(), s.size());
}

void BinaryWriter::matrix(const Matrix &m) {
  for (Index i = 0; i < m.rows(); ++i)
    for (Index j = 0; j < m.cols(); ++j) f64(m(i, j));
}

void BinaryWriter::vector(const Vector &v) {
  for (Index i = 0; i < v.size(); ++i) f64(v(i));
}

void BinaryReader::read_bytes(unsigned char *dst, std::size_t n) {
  in_.read(reinterpret_cast<char *>(dst), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in_.gcount()) != n)
    throw Error("truncated file: " + source_);
}

void BinaryReader::expect_magic(std::string_view tag) {
  std::vector<unsigned char> got(tag.size());
  read_bytes(got.data(), got.size());
  if (std::string_view(reinterpret_cast<const char *>(got.data()), got.size()) != tag)
    throw Error("bad magic in " + source_ + " (expected " + std::string(tag) + ")");
}

std::uint32_t BinaryReader::u32() {
  unsigned char b[4];
  read_bytes(b, 4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t BinaryReader::u64() {
  unsigned char b[8];
  read_bytes(b, 8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double BinaryReader::f64() { return std::bit_cast<double>(u64()); }

std::string BinaryReader::str() {
  const std::uint32_t n = u32();
  std::string s(n, '\0');
  if (n > 0) read_bytes(reinterpret_cast<unsigned char *>(s.data()), n);
  return s;
}

Matrix BinaryReader::matrix(Index rows, Index cols) {
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i)
    for (Index j = 0; j < cols; ++j) m(i, j) = f64();
  return m;
}

Vector BinaryReader::vector(Index n) {
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = f64();
  return v;
}

std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t seed) {
  std::uint64_t h = seed;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::uint64_t hash_file(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    h = fnv1a64(std::string_view(buf.data(), static_cast<std::size_t>(in.gcount())), h);
  }
  return h;
}

}  // namespace ldstext
