// ngsgd/binary-io.h

// Copyright 2026 The ngsgd Authors
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

#ifndef NGSGD_BINARY_IO_H_
#define NGSGD_BINARY_IO_H_

// Little-endian scalar I/O, independent of host byte order.

#include <bit>
#include <cstdint>
#include <cstring>
#include <istream>
#include <ostream>
#include <string>

#include "ngsgd/common.h"

namespace ngsgd::binary {

inline void WriteU32(std::ostream &os, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; i++) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char *>(b), 4);
}

inline void WriteU64(std::ostream &os, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; i++) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char *>(b), 8);
}

inline void WriteF32(std::ostream &os, float v) {
  WriteU32(os, std::bit_cast<std::uint32_t>(v));
}

inline void ReadExact(std::istream &is, void *buf, std::size_t n,
                      const char *what) {
  is.read(static_cast<char *>(buf), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(is.gcount()) != n)
    throw Error(std::string("unexpected end of file reading ") + what);
}

inline std::uint32_t ReadU32(std::istream &is, const char *what = "u32") {
  unsigned char b[4];
  ReadExact(is, b, 4, what);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; i++) v |= std::uint32_t(b[i]) << (8 * i);
  return v;
}

inline std::uint64_t ReadU64(std::istream &is, const char *what = "u64") {
  unsigned char b[8];
  ReadExact(is, b, 8, what);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; i++) v |= std::uint64_t(b[i]) << (8 * i);
  return v;
}

inline float ReadF32(std::istream &is, const char *what = "f32") {
  return std::bit_cast<float>(ReadU32(is, what));
}

inline void WriteMagic(std::ostream &os, const char (&magic)[5]) {
  os.write(magic, 4);
}

inline void ExpectMagic(std::istream &is, const char (&magic)[5],
                        const char *what) {
  char got[4];
  ReadExact(is, got, 4, what);
  if (std::memcmp(got, magic, 4) != 0)
    throw Error(std::string("bad magic in ") + what + " (expected " + magic +
                ")");
}

}  // namespace ngsgd::binary

#endif  // NGSGD_BINARY_IO_H_
