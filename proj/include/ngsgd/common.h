// ngsgd/common.h

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

#ifndef NGSGD_COMMON_H_
#define NGSGD_COMMON_H_

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace ngsgd {

using Index = std::ptrdiff_t;

// Training precision is a build-wide choice; the preconditioners and the
// network are templates and are also instantiated for double (tests, oracles).
#ifdef NGSGD_DOUBLE_PRECISION
using BaseFloat = double;
#else
using BaseFloat = float;
#endif

/// Thrown for contract violations (bad dimensions, non-finite input, corrupt
/// files).  The CLI maps it to exit code 1.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string &what) : std::runtime_error(what) {}
};

}  // namespace ngsgd

#endif  // NGSGD_COMMON_H_
